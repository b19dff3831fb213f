// background loader generated during the V2 to V3 conversion
importScripts("setup.js", "__generated_sw_inline_1.js");
