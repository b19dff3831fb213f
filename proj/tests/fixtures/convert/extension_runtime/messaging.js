chrome.extension.sendMessage({kind: "ping"});
chrome.extension.onMessage.addListener(function (m) {});
chrome.extension.onRequest.addListener(function (r) {});
var page = chrome.extension.getURL("page.html");
var bg = chrome.extension.getBackgroundPage();
