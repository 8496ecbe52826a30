// JSON message schema shared with the host. WebSocket frames carry one
// message per text frame, no length prefix.

export type MessageType =
  | "HELLO"
  | "MAP_REQ"
  | "MAP"
  | "POSE"
  | "VLP_FIX"
  | "GOAL"
  | "GOAL_STATUS"
  | "METRIC"
  | "ERROR";

export interface WireMessage {
  type: MessageType;
  robot_id: string;
  seq: number;
  t_ms: number;
  payload: Record<string, unknown>;
}

export interface MapPayload {
  resolution_m: number;
  origin_x_m: number;
  origin_y_m: number;
  width: number;
  height: number;
  rows: string[]; // '1' occupied, '0' free, row 0 is the map's southmost row
  beacons: BeaconInfo[];
  coverage_radius_m: number;
}

export interface BeaconInfo {
  id: number;
  x_m: number;
  y_m: number;
  height_m: number;
  diameter_m: number;
}

export interface PosePayload {
  x: number;
  y: number;
  theta: number;
  cov: number[]; // row-major 3x3
  in_coverage: boolean;
  true_x?: number;
  true_y?: number;
  true_theta?: number;
}

export interface GoalStatusPayload {
  status: string;
  x?: number;
  y?: number;
}

export interface MetricPayload {
  name: string;
  value: number;
}

export function parseMessage(text: string): WireMessage | null {
  let raw: unknown;
  try {
    raw = JSON.parse(text);
  } catch {
    return null;
  }
  if (typeof raw !== "object" || raw === null) return null;
  const m = raw as Record<string, unknown>;
  if (typeof m.type !== "string" || typeof m.robot_id !== "string") return null;
  if (typeof m.seq !== "number" || typeof m.t_ms !== "number") return null;
  if (typeof m.payload !== "object" || m.payload === null) return null;
  return m as unknown as WireMessage;
}
