chrome.tabs.executeScript(tabId, {file: "content.js"});
chrome.tabs.insertCSS(tabId, {file: "style.css"});
