const requestListener = function (req, res) {
    var userId = req.id;
    serveRequest(userId);
    var message = "Served user " + userId;
    res.send({ "msg": message });
};
