chrome.scripting.executeScript(tabId, {file: "content.js"});
chrome.scripting.insertCSS(tabId, {file: "style.css"});
