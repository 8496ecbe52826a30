// Click-to-goal: screen point -> world meters -> GOAL message.
export class GoalSender {
    constructor() {
        this.seq = 0;
    }
    nextSeq() {
        this.seq += 1;
        return this.seq;
    }
    /** Build the GOAL message for a click, or null when the click is outside
     *  the map extent or no robot is selected. */
    build(transform, sx, sy, selected) {
        if (!selected)
            return null;
        if (!transform.insideMap(sx, sy))
            return null;
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
