var frame = document.createElement("iframe");
document.body.appendChild(frame);
