// View model: project the last state message onto renderable cells.
// Good objects are green, bad ones red -- the human plays the role that
// sees the reward rule.

import type { StateMsg, WireObject } from "./protocol.js";

export interface CellView {
    index: number;
    hasPrime: boolean;
    hasHelper: boolean;
    object: WireObject | null;
}

export function buildCells(state: StateMsg, gridSize: number): CellView[] {
    const byCell = new Map<number, WireObject>();
    for (const obj of state.objects) byCell.set(obj.cell, obj);
    const cells: CellView[] = [];
    for (let i = 0; i < gridSize; i++) {
        cells.push({
            index: i,
            hasPrime: state.prime_pos === i,
            hasHelper: state.helper_pos === i,
            object: byCell.get(i) ?? null,
        });
    }
    return cells;
}

export function objectColor(obj: WireObject): string {
    return obj.good ? "#2e9e44" : "#d23f31";
}

export function formatReward(value: number): string {
    const text = value.toFixed(1);
    return value > 0 ? `+${text}` : text;
}
