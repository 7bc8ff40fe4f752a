var handlers = {};
var dispatch = function (req) {
    let foo = handlers[req];
    if (handlers.hasOwnProperty(req)) {
        foo(req.body);
    }
};
