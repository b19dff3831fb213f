var state = {ready: false};
