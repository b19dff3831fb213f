chrome.action.setBadgeText({text: "on"});
chrome.action.setBadgeBackgroundColor({color: "#f00"});
