// JSON message schema shared with the host. WebSocket frames carry one
// message per text frame, no length prefix.
export function parseMessage(text) {
    let raw;
    try {
        raw = JSON.parse(text);
    }
    catch {
        return null;
    }
    if (typeof raw !== "object" || raw === null)
        return null;
    const m = raw;
    if (typeof m.type !== "string" || typeof m.robot_id !== "string")
        return null;
    if (typeof m.seq !== "number" || typeof m.t_ms !== "number")
        return null;
    if (typeof m.payload !== "object" || m.payload === null)
        return null;
    return m;
}
