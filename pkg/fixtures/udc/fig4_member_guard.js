var handlers = {};
handlers["run"] = function (data) {
    var pre0 = 0;
    var pre1 = 0;
    var pre2 = 0;
    var pre3 = 0;
    var pre4 = 0;
    var pre5 = 0;
    var pre6 = 0;
    let foo = handlers[data.id];
    var mid0 = 0;
    var mid1 = 0;
    var mid2 = 0;
    var mid3 = 0;
    var mid4 = 0;
    if (handlers.hasOwnProperty(data.id)) {
        foo(data);
    }
    var post0 = 0;
    var post1 = 0;
    var post2 = 0;
    var post3 = 0;
    var post4 = 0;
    var post5 = 0;
    var post6 = 0;
};
var commHandler = function (event) {
    var data = JSON.parse(event.data);
    handlers["run"](data);
};
