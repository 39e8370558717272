// Client-side session state machine. Pure logic, no DOM: the UI subscribes
// to snapshots, the socket is injected as a send callback.
//
// The input lock is the important invariant: exactly one action message per
// your_turn, never more. Keys pressed outside a turn (or while a reply is
// in flight) are dropped.

import type { ActionMsg, ActionValue, EpisodeEndMsg, HelloMsg, ServerMsg, StateMsg } from "./protocol.js";
import { parseServerMsg } from "./protocol.js";

export type Phase = "connecting" | "waiting" | "my_turn" | "ended" | "fatal";

export interface Snapshot {
    phase: Phase;
    hello: HelloMsg | null;
    state: StateMsg | null;
    end: EpisodeEndMsg | null;
    banner: string | null;   // transient error text, if any
}

const KEY_ACTIONS: Record<string, ActionValue> = {
    ArrowLeft: "left",
    ArrowRight: "right",
    " ": "stay",
    Space: "stay",
};

export class GameClient {
    private phase: Phase = "connecting";
    private hello: HelloMsg | null = null;
    private state: StateMsg | null = null;
    private end: EpisodeEndMsg | null = null;
    private banner: string | null = null;
    private canAct = false;

    constructor(
        private readonly send: (msg: ActionMsg) => void,
        private readonly onChange: (snap: Snapshot) => void,
    ) {}

    snapshot(): Snapshot {
        return {
            phase: this.phase,
            hello: this.hello,
            state: this.state,
            end: this.end,
            banner: this.banner,
        };
    }

    private emit(): void {
        this.onChange(this.snapshot());
    }

    /** Feed one raw frame from the socket. */
    handleRaw(raw: string): void {
        const msg = parseServerMsg(raw);
        if (msg === null) {
            // malformed traffic: disable input and say so
            this.phase = "fatal";
            this.canAct = false;
            this.banner = "malformed message from server; input disabled";
            this.emit();
            return;
        }
        this.handleMessage(msg);
    }

    handleMessage(msg: ServerMsg): void {
        switch (msg.kind) {
            case "hello":
                this.hello = msg;
                this.phase = "waiting";
                break;
            case "state":
                // a pure projection: the view is rebuilt from this message
                // alone, so a reconnect picks up without drift
                this.state = msg;
                this.banner = null;
                if (this.phase !== "ended") this.phase = "waiting";
                break;
            case "your_turn":
                this.canAct = true;
                this.phase = "my_turn";
                break;
            case "episode_end":
                this.end = msg;
                this.phase = "ended";
                this.canAct = false;
                break;
            case "error":
                this.banner = msg.message;
                break;
        }
        this.emit();
    }

    /** Keyboard entry point; returns true when an action was sent. */
    keyPressed(key: string): boolean {
        const value = KEY_ACTIONS[key];
        if (value === undefined) return false;
        return this.act(value);
    }

    act(value: ActionValue): boolean {
        if (!this.canAct || this.phase !== "my_turn") return false;
        this.canAct = false;       // locked until the next your_turn
        this.phase = "waiting";
        this.send({ kind: "action", value });
        this.emit();
        return true;
    }
}
