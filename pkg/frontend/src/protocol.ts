// Wire protocol with the play server: JSON messages, one per frame.
// The server owns the world; the client renders and sends actions.

export interface HelloMsg {
    kind: "hello";
    session: string;
    seed: number;
    grid_size: number;
    episode_steps: number;
    move_penalty: number;
    good_class: "A" | "B";
    turn_timeout: number | null;
}

export interface WireObject {
    cell: number;
    class: "A" | "B";
    good: boolean;
}

export interface StateMsg {
    kind: "state";
    t: number;
    prime_pos: number;
    helper_pos: number;
    objects: WireObject[];
    cumulative_reward: number;
    last_reward: number;
    done: boolean;
}

export interface YourTurnMsg {
    kind: "your_turn";
    t: number;
}

export interface EpisodeEndMsg {
    kind: "episode_end";
    total_reward: number;
    prime_collect: number;
    helper_collect: number;
    prime_moves: number;
    helper_moves: number;
    movement_penalty: number;
}

export interface ErrorMsg {
    kind: "error";
    message: string;
}

export type ServerMsg = HelloMsg | StateMsg | YourTurnMsg | EpisodeEndMsg | ErrorMsg;

export type ActionValue = "left" | "right" | "stay";

export interface ActionMsg {
    kind: "action";
    value: ActionValue;
}

const KINDS = new Set(["hello", "state", "your_turn", "episode_end", "error"]);

/** Parse one frame; returns null for anything malformed. */
export function parseServerMsg(raw: string): ServerMsg | null {
    let data: unknown;
    try {
        data = JSON.parse(raw);
    } catch {
        return null;
    }
    if (typeof data !== "object" || data === null) return null;
    const kind = (data as { kind?: unknown }).kind;
    if (typeof kind !== "string" || !KINDS.has(kind)) return null;
    return data as ServerMsg;
}
