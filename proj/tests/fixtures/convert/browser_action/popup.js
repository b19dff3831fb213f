chrome.browserAction.setBadgeText({text: "on"});
chrome.browseraction.setBadgeBackgroundColor({color: "#f00"});
