// DOM rendering of a Snapshot. Everything is rebuilt from the snapshot on
// every change; no incremental state lives in the DOM.

import type { Snapshot } from "./game.js";
import { buildCells, formatReward, objectColor } from "./view.js";

export function render(root: HTMLElement, snap: Snapshot): void {
    const grid = root.querySelector("#grid") as HTMLElement;
    const status = root.querySelector("#status") as HTMLElement;
    const banner = root.querySelector("#banner") as HTMLElement;
    const endPanel = root.querySelector("#end") as HTMLElement;

    banner.textContent = snap.banner ?? "";
    banner.style.display = snap.banner ? "block" : "none";

    if (snap.hello && !snap.state) {
        status.textContent = "connected, waiting for the world...";
    }
    if (!snap.hello) {
        status.textContent = snap.phase === "fatal"
            ? "connection broken" : "connecting...";
        return;
    }

    if (snap.state) {
        const cells = buildCells(snap.state, snap.hello.grid_size);
        grid.replaceChildren(...cells.map((cell) => {
            const div = document.createElement("div");
            div.className = "cell";
            if (cell.object) {
                const obj = document.createElement("div");
                obj.className = "object";
                obj.style.background = objectColor(cell.object);
                obj.textContent = cell.object.class;
                obj.title = cell.object.good ? "good: +1" : "bad: -1";
                div.appendChild(obj);
            }
            const agents = document.createElement("div");
            agents.className = "agents";
            if (cell.hasPrime) {
                const p = document.createElement("span");
                p.className = "prime";
                p.textContent = "YOU";
                agents.appendChild(p);
            }
            if (cell.hasHelper) {
                const h = document.createElement("span");
                h.className = "helper";
                h.textContent = "helper";
                agents.appendChild(h);
            }
            div.appendChild(agents);
            return div;
        }));

        const s = snap.state;
        const turn = snap.phase === "my_turn" ? " - your move" :
            snap.phase === "ended" ? " - episode over" : " ...";
        status.textContent =
            `t ${s.t}/${snap.hello.episode_steps}   ` +
            `reward ${formatReward(s.cumulative_reward)} ` +
            `(last ${formatReward(s.last_reward)})${turn}`;
    }

    if (snap.end) {
        const e = snap.end;
        endPanel.style.display = "block";
        endPanel.innerHTML =
            `<h2>episode over: ${formatReward(e.total_reward)}</h2>` +
            `<p>you collected ${formatReward(e.prime_collect)} in ${e.prime_moves} moves ` +
            `(${formatReward(e.movement_penalty)} penalty);<br>` +
            `the helper collected ${formatReward(e.helper_collect)} ` +
            `in ${e.helper_moves} moves.</p>` +
            `<p>reload the page for a new episode.</p>`;
    } else {
        endPanel.style.display = "none";
    }
}
