chrome.runtime.sendMessage({kind: "ping"});
chrome.runtime.onMessage.addListener(function (m) {});
chrome.runtime.onRequest.addListener(function (r) {});
var page = chrome.runtime.getURL("page.html");
var bg = chrome.extension.getBackgroundPage();
