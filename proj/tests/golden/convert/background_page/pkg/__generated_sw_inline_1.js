var inlineFlag = 1;