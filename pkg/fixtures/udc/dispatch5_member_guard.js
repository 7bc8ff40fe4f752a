var handlers = {};
var dispatch = function (req) {
    var key = req.id;
    let bar = handlers[key];
    if (handlers.hasOwnProperty(key)) {
        bar(req);
    }
};
