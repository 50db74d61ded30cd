import { Client } from "./api.js";
import { App } from "./app.js";

const app = new App(new Client(""));
document.body.appendChild(app.root);
app.start();
