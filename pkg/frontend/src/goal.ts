// Click-to-goal: screen point -> world meters -> GOAL message.

import { ViewTransform } from "./transform.js";
import { WireMessage } from "./types.js";

export class GoalSender {
  private seq = 0;

  nextSeq(): number {
    this.seq += 1;
    return this.seq;
  }

  /** Build the GOAL message for a click, or null when the click is outside
   *  the map extent or no robot is selected. */
  build(transform: ViewTransform, sx: number, sy: number,
        selected: string | null): WireMessage | null {
    if (!selected) return null;
    if (!transform.insideMap(sx, sy)) return null;
    const [wx, wy] = transform.toWorld(sx, sy);
    return {
      type: "GOAL",
      robot_id: selected,
      seq: this.nextSeq(),
      t_ms: Date.now(),
      payload: { x: wx, y: wy },
    };
  }
}
