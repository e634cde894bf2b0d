// Editor session state and server reconciliation.  Edits apply to the
// local grid mirror optimistically and every ack's digest is checked
// against the digest the mirror predicted; any mismatch means the server
// grid diverged (another client, a dropped frame) and the owner should
// refetch the authoritative grid instead of guessing.
//
// No DOM or WebSocket construction in here: the socket and the clock are
// injected, which is what makes the reconcile logic testable.

import { VoxelGrid, applyBrush } from "./grid.js";
import {
  BrushSize,
  ClientMessage,
  DecodedMesh,
  decodeMesh,
  parseServerMessage,
} from "./protocol.js";

export type Mode = "editing" | "viewing";

export interface SocketLike {
  send(text: string): void;
}

export interface TimerHost {
  set(fn: () => void, ms: number): unknown;
  clear(handle: unknown): void;
}

const REAL_TIMERS: TimerHost = {
  set: (fn, ms) => setTimeout(fn, ms),
  clear: (handle) => clearTimeout(handle as ReturnType<typeof setTimeout>),
};

export const GENERATE_DEBOUNCE_MS = 300;

export interface SessionEvents {
  /** mirror digest no longer matches the server: refetch the grid */
  onDesync?: () => void;
  /** a decoded mesh arrived */
  onMesh?: (mesh: DecodedMesh) => void;
  /** server rejected a message */
  onError?: (message: string) => void;
  /** anything visible changed (grid, mode, brush, style, pending count) */
  onChange?: () => void;
}

export class EditorSession {
  readonly grid: VoxelGrid;
  mode: Mode = "editing";
  brush: BrushSize = 1;
  style = 0;
  lastMesh: DecodedMesh | null = null;
  lastError: string | null = null;

  private sock: SocketLike | null = null;
  private expected: string[] = []; // digests of in-flight edits, oldest first
  private timer: unknown = null;
  private readonly timers: TimerHost;
  private readonly debounceMs: number;
  private readonly events: SessionEvents;

  constructor(
    grid: VoxelGrid,
    events: SessionEvents = {},
    opts: { debounceMs?: number; timers?: TimerHost } = {},
  ) {
    this.grid = grid;
    this.events = events;
    this.debounceMs = opts.debounceMs ?? GENERATE_DEBOUNCE_MS;
    this.timers = opts.timers ?? REAL_TIMERS;
  }

  get connected(): boolean {
    return this.sock !== null;
  }

  /** count of edits sent but not yet acknowledged */
  get pending(): number {
    return this.expected.length;
  }

  /** all acks processed and none of them disagreed */
  get converged(): boolean {
    return this.expected.length === 0;
  }

  attach(sock: SocketLike): void {
    this.sock = sock;
    this.expected = [];
    this.events.onChange?.();
  }

  detach(): void {
    this.sock = null;
    this.expected = [];
    this.cancelScheduled();
    this.events.onChange?.();
  }

  toggleMode(): Mode {
    this.mode = this.mode === "editing" ? "viewing" : "editing";
    this.events.onChange?.();
    return this.mode;
  }

  setBrush(brush: BrushSize): void {
    this.brush = brush;
    this.events.onChange?.();
  }

  /** record a style change (the owner flips it server-side over HTTP
   * first) and queue a regenerate so the preview follows */
  setStyle(style: number): void {
    this.style = style;
    this.scheduleGenerate();
    this.events.onChange?.();
  }

  /** Apply a brush edit locally and send it.  Returns false without
   * touching anything when disconnected or in viewing mode. */
  edit(op: "add" | "remove", center: readonly [number, number, number]): boolean {
    if (this.sock === null || this.mode !== "editing") return false;
    applyBrush(this.grid, op, center, this.brush);
    this.expected.push(this.grid.digest());
    this.send({ type: "edit", op, center: [center[0], center[1], center[2]], brush: this.brush });
    this.scheduleGenerate();
    this.events.onChange?.();
    return true;
  }

  requestGenerate(): boolean {
    if (this.sock === null) return false;
    this.cancelScheduled();
    this.send({ type: "generate" });
    return true;
  }

  scheduleGenerate(): void {
    if (this.sock === null) return;
    this.cancelScheduled();
    this.timer = this.timers.set(() => {
      this.timer = null;
      this.requestGenerate();
    }, this.debounceMs);
  }

  /** Adopt an authoritative grid snapshot (session create, reconnect, or
   * desync recovery).  Local prediction state resets. */
  adoptServerGrid(voxels: Uint8Array, style: number): void {
    this.grid.setFromBytes(voxels);
    this.style = style;
    this.expected = [];
    this.events.onChange?.();
  }

  /** Feed one raw WebSocket text frame through reconciliation. */
  handleText(text: string): void {
    let msg;
    try {
      msg = parseServerMessage(text);
    } catch (err) {
      this.lastError = String(err instanceof Error ? err.message : err);
      this.events.onError?.(this.lastError);
      return;
    }
    if (msg.type === "ack") {
      const want = this.expected.shift();
      if (want === undefined || want !== msg.digest) {
        this.expected = [];
        this.events.onDesync?.();
      }
      this.events.onChange?.();
    } else if (msg.type === "mesh") {
      try {
        this.lastMesh = decodeMesh(msg);
      } catch (err) {
        this.lastError = String(err instanceof Error ? err.message : err);
        this.events.onError?.(this.lastError);
        return;
      }
      this.events.onMesh?.(this.lastMesh);
      this.events.onChange?.();
    } else {
      this.lastError = msg.message;
      // an error in place of an expected ack leaves the mirror unverified
      if (this.expected.length > 0) {
        this.expected = [];
        this.events.onDesync?.();
      }
      this.events.onError?.(msg.message);
    }
  }

  private send(msg: ClientMessage): void {
    this.sock!.send(JSON.stringify(msg));
  }

  private cancelScheduled(): void {
    if (this.timer !== null) {
      this.timers.clear(this.timer);
      this.timer = null;
    }
  }
}
