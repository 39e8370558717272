// Wiring: WebSocket in, keyboard in, DOM out.

import { GameClient } from "./game.js";
import { render } from "./dom.js";

const root = document.getElementById("app")!;
const ws = new WebSocket(`ws://${location.host}/ws`);

const client = new GameClient(
    (msg) => ws.send(JSON.stringify(msg)),
    (snap) => render(root, snap),
);

ws.onmessage = (event) => client.handleRaw(String(event.data));
ws.onclose = () => {
    const snap = client.snapshot();
    if (snap.phase !== "ended") {
        client.handleRaw("");  // surfaces the broken-connection banner
    }
};

window.addEventListener("keydown", (event) => {
    if (event.key === " " || event.key.startsWith("Arrow")) {
        event.preventDefault();
    }
    client.keyPressed(event.key);
});

render(root, client.snapshot());
