const requestListener = function (req, res) {
    var userId = req.id;
    userId = escape(userId);
    serveRequest(userId);
    var message = "Served user " + userId;
    res.send({ "msg": message });
};
