// Console view state fed exclusively by host messages: the view never
// extrapolates a pose the host did not send.
export const TRAIL_LIMIT = 2000;
export class ViewState {
    constructor() {
        this.map = null;
        this.robots = new Map();
        this.selected = null;
        this.boundaryPeakM = null;
        this.lastError = null;
        this.pendingGoal = null;
    }
    robotView(robotId, nowMs) {
        let view = this.robots.get(robotId);
        if (!view) {
            view = {
                robotId,
                x: 0,
                y: 0,
                theta: 0,
                cov: new Array(9).fill(0),
                inCoverage: false,
                lastSeq: -1,
                lastUpdateMs: nowMs,
                trail: [],
                goalStatus: "",
            };
            this.robots.set(robotId, view);
            if (this.selected === null)
                this.selected = robotId;
        }
        return view;
    }
    apply(msg, nowMs) {
        switch (msg.type) {
            case "MAP":
                this.map = msg.payload;
                break;
            case "POSE": {
                const p = msg.payload;
                const view = this.robotView(msg.robot_id, nowMs);
                if (msg.seq <= view.lastSeq)
                    return; // stale
                view.lastSeq = msg.seq;
                view.x = p.x;
                view.y = p.y;
                view.theta = p.theta;
                view.cov = p.cov;
                view.inCoverage = p.in_coverage;
                view.lastUpdateMs = nowMs;
                view.trail.push([p.x, p.y]);
                if (view.trail.length > TRAIL_LIMIT) {
                    view.trail.splice(0, view.trail.length - TRAIL_LIMIT);
                }
                break;
            }
            case "VLP_FIX": {
                const view = this.robotView(msg.robot_id, nowMs);
                view.fixQuality = Number(msg.payload.quality ?? 0);
                break;
            }
            case "GOAL_STATUS": {
                const p = msg.payload;
                const view = this.robotView(msg.robot_id, nowMs);
                view.goalStatus = p.status;
                if (typeof p.x === "number")
                    view.goalX = p.x;
                if (typeof p.y === "number")
                    view.goalY = p.y;
                if (this.pendingGoal &&
                    this.pendingGoal.robotId === msg.robot_id &&
                    (p.status === "active" || p.status === "no_path" || p.status === "reached")) {
                    this.pendingGoal = null;
                }
                break;
            }
            case "METRIC": {
                const p = msg.payload;
                if (p.name === "boundary_peak_m")
                    this.boundaryPeakM = p.value;
                break;
            }
            case "ERROR":
                this.lastError = String(msg.payload.detail ?? msg.payload.code ?? "error");
                break;
            default:
                break;
        }
    }
}
// Arrival-rate decoupling: messages pile into a bounded queue and are
// drained once per animation frame, so a fast feed cannot outgrow memory
// or starve rendering.
export class FrameCoalescer {
    constructor(state, limit = 512) {
        this.state = state;
        this.limit = limit;
        this.queue = [];
        this.dropped = 0;
    }
    push(msg) {
        this.queue.push(msg);
        if (this.queue.length > this.limit) {
            // Keep the newest messages; POSE streams are self-superseding.
            this.queue.splice(0, this.queue.length - this.limit);
            this.dropped += 1;
        }
    }
    get queueLength() {
        return this.queue.length;
    }
    drain(nowMs) {
        const batch = this.queue;
        this.queue = [];
        for (const msg of batch) {
            this.state.apply(msg, nowMs);
        }
        return batch.length;
    }
}
