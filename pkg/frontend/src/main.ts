// Browser entry point: session setup over HTTP, the edit/generate loop
// over one WebSocket, and the canvas plumbing between them.

import { brushForKey, isModeToggle, KEY_BINDINGS, styleForKey } from "./bindings.js";
import { OrbitCamera } from "./camera.js";
import { VoxelGrid } from "./grid.js";
import { editTarget, pickVoxel } from "./pick.js";
import { bytesFromBase64 } from "./protocol.js";
import { Renderer } from "./renderer.js";
import { EditorSession } from "./state.js";
import { buildGridMesh } from "./voxmesh.js";

// service models upsample the coarse grid 8x per axis, so generated mesh
// vertices land in fine-grid units and need this to share the voxel world
const FINE_TO_COARSE = 1 / 8;
const RECONNECT_MS = 1000;

interface GridSnapshot {
  dims: [number, number, number];
  voxels: string;
  digest: string;
  style: number;
}

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing #${id}`);
  return node as T;
}

async function getJSON<T>(path: string, init?: RequestInit): Promise<T> {
  const res = await fetch(path, init);
  if (!res.ok) {
    let detail = "";
    try {
      detail = ((await res.json()) as { error?: string }).error ?? "";
    } catch {
      // non-JSON error body, status alone will do
    }
    throw new Error(`${path}: HTTP ${res.status}${detail ? ` (${detail})` : ""}`);
  }
  return (await res.json()) as T;
}

async function boot(): Promise<void> {
  const canvas = el<HTMLCanvasElement>("canvas");
  const statusEl = el<HTMLElement>("status");
  const modeEl = el<HTMLElement>("mode");
  const brushEl = el<HTMLElement>("brush");
  const styleSel = el<HTMLSelectElement>("style");
  const generateBtn = el<HTMLButtonElement>("generate");
  const helpEl = el<HTMLElement>("help");

  for (const b of KEY_BINDINGS) {
    const row = document.createElement("tr");
    const input = document.createElement("td");
    input.textContent = b.input;
    const action = document.createElement("td");
    action.textContent = b.action;
    row.append(input, action);
    helpEl.appendChild(row);
  }

  const { models } = await getJSON<{ models: string[] }>("/models");
  if (models.length === 0) throw new Error("service has no models");
  const model = models[0];
  const { styles } = await getJSON<{ styles: { index: number; name: string }[] }>(
    `/models/${model}/styles`,
  );
  for (const s of styles) {
    const opt = document.createElement("option");
    opt.value = String(s.index);
    opt.textContent = `${s.index + 1}: ${s.name}`;
    styleSel.appendChild(opt);
  }

  const created = await getJSON<{ session: string; dims: [number, number, number] }>(
    "/sessions",
    {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ model, template: "box" }),
    },
  );
  const sessionId = created.session;
  const grid = new VoxelGrid(created.dims);

  const renderer = new Renderer(canvas);
  const maxDim = Math.max(...created.dims);
  const camera = new OrbitCamera(
    [created.dims[0] / 2, created.dims[1] / 2, created.dims[2] / 2],
    maxDim * 2.4,
  );

  let connected = false;
  const refreshGridMesh = () => renderer.setGridMesh(buildGridMesh(grid));

  const refreshStatus = () => {
    modeEl.textContent = session.mode;
    brushEl.textContent = String(session.brush);
    styleSel.value = String(session.style);
    const parts = [connected ? "connected" : "reconnecting"];
    if (session.pending > 0) parts.push(`${session.pending} edit(s) in flight`);
    else parts.push("in sync");
    if (session.lastMesh) parts.push(`mesh: ${session.lastMesh.triangleCount} triangles`);
    if (session.lastError) parts.push(`error: ${session.lastError}`);
    statusEl.textContent = parts.join(" | ");
  };

  const refetchGrid = async () => {
    const snap = await getJSON<GridSnapshot>(`/sessions/${sessionId}/grid`);
    session.adoptServerGrid(bytesFromBase64(snap.voxels), snap.style);
    refreshGridMesh();
  };

  const session = new EditorSession(grid, {
    onDesync: () => {
      refetchGrid().catch((err) => {
        session.lastError = String(err);
        refreshStatus();
      });
    },
    onMesh: (mesh) => renderer.setDetailMesh(mesh, FINE_TO_COARSE),
    onChange: refreshStatus,
  });

  const connect = () => {
    const proto = location.protocol === "https:" ? "wss" : "ws";
    const ws = new WebSocket(`${proto}://${location.host}/sessions/${sessionId}/ws`);
    ws.onopen = () => {
      connected = true;
      // server state is authoritative across reconnects; never replay edits
      refetchGrid()
        .then(() => session.attach(ws))
        .catch(() => ws.close());
    };
    ws.onmessage = (ev) => session.handleText(String(ev.data));
    ws.onclose = () => {
      connected = false;
      session.detach();
      setTimeout(connect, RECONNECT_MS);
    };
  };

  // ---- input ----
  let drag: { button: number; x: number; y: number; moved: boolean } | null = null;

  const pickAt = (clientX: number, clientY: number) => {
    const rect = canvas.getBoundingClientRect();
    const ndcX = ((clientX - rect.left) / rect.width) * 2 - 1;
    const ndcY = 1 - ((clientY - rect.top) / rect.height) * 2;
    const ray = camera.rayThrough(ndcX, ndcY, renderer.aspect());
    return pickVoxel(grid, ray.origin, ray.dir);
  };

  canvas.addEventListener("mousedown", (e) => {
    drag = { button: e.button, x: e.clientX, y: e.clientY, moved: false };
  });
  window.addEventListener("mousemove", (e) => {
    if (!drag) return;
    const dx = e.clientX - drag.x;
    const dy = e.clientY - drag.y;
    if (!drag.moved && Math.hypot(dx, dy) < 4) return;
    drag.moved = true;
    if (drag.button === 2) camera.pan(e.movementX, e.movementY);
    else camera.orbit(e.movementX, e.movementY);
  });
  window.addEventListener("mouseup", (e) => {
    const wasDrag = drag?.moved ?? true;
    const button = drag?.button ?? -1;
    drag = null;
    if (wasDrag || session.mode !== "editing") return;
    const hit = pickAt(e.clientX, e.clientY);
    if (!hit) return;
    const op = button === 2 ? "remove" : "add";
    const target = editTarget(hit, op);
    if (target && session.edit(op, target)) refreshGridMesh();
  });
  canvas.addEventListener("contextmenu", (e) => e.preventDefault());
  canvas.addEventListener(
    "wheel",
    (e) => {
      e.preventDefault();
      camera.zoom(e.deltaY);
    },
    { passive: false },
  );

  const setStyle = async (idx: number) => {
    await getJSON(`/sessions/${sessionId}/style`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ style: idx }),
    });
    session.setStyle(idx);
  };

  window.addEventListener("keydown", (e) => {
    const brush = brushForKey(e.code);
    if (brush !== null) {
      session.setBrush(brush);
      return;
    }
    const style = styleForKey(e.code);
    if (style !== null && style < styles.length) {
      setStyle(style).catch((err) => {
        session.lastError = String(err);
        refreshStatus();
      });
      return;
    }
    if (isModeToggle(e.code) && !e.repeat) {
      e.preventDefault();
      session.toggleMode();
    }
  });

  generateBtn.addEventListener("click", () => session.requestGenerate());
  styleSel.addEventListener("change", () => {
    setStyle(Number(styleSel.value)).catch((err) => {
      session.lastError = String(err);
      refreshStatus();
    });
  });

  const frame = () => {
    renderer.resize();
    renderer.draw(camera, session.mode);
    requestAnimationFrame(frame);
  };

  await refetchGrid();
  connect();
  refreshStatus();
  requestAnimationFrame(frame);
}

boot().catch((err) => {
  const status = document.getElementById("status");
  if (status) status.textContent = `failed to start: ${err}`;
  console.error(err);
});
