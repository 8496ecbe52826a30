import { HostFeed } from "./feed.js";
import { GoalSender } from "./goal.js";
import { drawCoverage, drawMap, drawPendingGoal, drawRobot, robotColor } from "./render.js";
import { FrameCoalescer, ViewState } from "./state.js";
import { ViewTransform } from "./transform.js";
const canvas = document.getElementById("arena");
const ctx = canvas.getContext("2d");
const sidebar = document.getElementById("robots");
const statusEl = document.getElementById("status");
const metricsEl = document.getElementById("metrics");
const hintEl = document.getElementById("hint");
const state = new ViewState();
const coalescer = new FrameCoalescer(state);
const goals = new GoalSender();
let transform = null;
let feedStatus = "connecting";
const wsUrl = `ws://${location.host}/ws`;
const feed = new HostFeed(wsUrl, {
    onMessage: (msg) => coalescer.push(msg),
    onStatus: (status) => {
        feedStatus = status;
        statusEl.textContent = status === "open" ? "connected" : status;
        statusEl.className = status;
    },
});
feed.connect();
function fitCanvas() {
    const rect = canvas.parentElement.getBoundingClientRect();
    canvas.width = Math.floor(rect.width);
    canvas.height = Math.floor(rect.height);
    transform = null;
}
window.addEventListener("resize", fitCanvas);
fitCanvas();
canvas.addEventListener("click", (event) => {
    if (!transform)
        return;
    const rect = canvas.getBoundingClientRect();
    const sx = event.clientX - rect.left;
    const sy = event.clientY - rect.top;
    // clicking a robot marker selects it instead of sending a goal
    for (const view of state.robots.values()) {
        const [rx, ry] = transform.toScreen(view.x, view.y);
        if (Math.hypot(rx - sx, ry - sy) < 14) {
            state.selected = view.robotId;
            return;
        }
    }
    if (!state.selected) {
        hintEl.textContent = "select a robot first (click its marker or the sidebar)";
        return;
    }
    const msg = goals.build(transform, sx, sy, state.selected);
    if (!msg) {
        hintEl.textContent = "click inside the map to set a goal";
        return;
    }
    if (feed.send(msg)) {
        const payload = msg.payload;
        state.pendingGoal = { robotId: msg.robot_id, x: payload.x, y: payload.y };
        hintEl.textContent = `goal (${payload.x.toFixed(2)}, ${payload.y.toFixed(2)}) -> ${msg.robot_id}`;
    }
});
function renderSidebar(nowMs) {
    const parts = [];
    let index = 0;
    for (const view of state.robots.values()) {
        const color = robotColor(index++);
        const selected = state.selected === view.robotId;
        const stale = nowMs - view.lastUpdateMs > 2000;
        parts.push(`<div class="robot ${selected ? "selected" : ""} ${stale ? "stale" : ""}"` +
            ` data-robot="${view.robotId}">` +
            `<span class="dot" style="background:${color}"></span>` +
            `<b>${view.robotId}</b>` +
            ` (${view.x.toFixed(2)}, ${view.y.toFixed(2)})` +
            `${view.inCoverage ? " &#9728;" : ""}` +
            `<div class="sub">${view.goalStatus || "idle"}</div></div>`);
    }
    sidebar.innerHTML = parts.join("");
    for (const el of Array.from(sidebar.querySelectorAll(".robot"))) {
        el.addEventListener("click", () => {
            state.selected = el.dataset.robot ?? null;
        });
    }
}
function renderMetrics() {
    const peak = state.boundaryPeakM;
    const parts = [
        `boundary peak: ${peak === null ? "-" : (peak * 1000).toFixed(1) + " mm"}`,
    ];
    if (state.lastError)
        parts.push(`last error: ${state.lastError}`);
    metricsEl.textContent = parts.join("  |  ");
}
function frame() {
    const nowMs = Date.now();
    coalescer.drain(nowMs);
    ctx.clearRect(0, 0, canvas.width, canvas.height);
    if (state.map) {
        if (!transform) {
            transform = new ViewTransform({
                originX: state.map.origin_x_m,
                originY: state.map.origin_y_m,
                widthM: state.map.width * state.map.resolution_m,
                heightM: state.map.height * state.map.resolution_m,
            }, canvas.width, canvas.height);
        }
        drawMap(ctx, state.map, transform);
        drawCoverage(ctx, state.map, transform);
        let index = 0;
        for (const view of state.robots.values()) {
            drawRobot(ctx, view, transform, robotColor(index++), state.selected === view.robotId, nowMs);
        }
        drawPendingGoal(ctx, state, transform);
    }
    else {
        ctx.fillStyle = "#888";
        ctx.font = "14px sans-serif";
        ctx.fillText(feedStatus === "open" ? "waiting for MAP..." : "connecting to host...", 20, 30);
    }
    renderSidebar(nowMs);
    renderMetrics();
    requestAnimationFrame(frame);
}
requestAnimationFrame(frame);
