var code = fetchTemplate();
eval(code);
