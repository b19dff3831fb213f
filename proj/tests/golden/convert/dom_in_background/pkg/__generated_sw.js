// background loader generated during the V2 to V3 conversion
importScripts("bg.js");
