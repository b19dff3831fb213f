chrome.webRequest.onBeforeRequest.addListener(
  function (d) { return {cancel: d.url.indexOf("ads") >= 0}; },
  {urls: ["<all_urls>"]},
  ["blocking"]);
