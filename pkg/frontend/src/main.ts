/** Browser entry point: wires the store to a canvas scatter view with
 * class/overlay controls, click-to-annotate, and a payload-exact tooltip. */

import { ApiClient } from "./api.js";
import { classColor, MAX_CLASSES } from "./palette.js";
import { drawOps, tooltipLines, type DrawOp } from "./render.js";
import { SessionStore } from "./store.js";
import { OVERLAY_MODES } from "./types.js";

const POINT_RADIUS = 4;
const PICK_RADIUS = 8;

interface Viewport {
  toPixel(x: number, y: number): [number, number];
  fromEvent(ev: MouseEvent): [number, number];
}

function fitViewport(
  canvas: HTMLCanvasElement,
  ops: DrawOp[],
): Viewport {
  let xLo = Infinity;
  let xHi = -Infinity;
  let yLo = Infinity;
  let yHi = -Infinity;
  for (const op of ops) {
    xLo = Math.min(xLo, op.x);
    xHi = Math.max(xHi, op.x);
    yLo = Math.min(yLo, op.y);
    yHi = Math.max(yHi, op.y);
  }
  if (!Number.isFinite(xLo)) {
    xLo = yLo = 0;
    xHi = yHi = 1;
  }
  const pad = 20;
  const sx = (canvas.width - 2 * pad) / Math.max(xHi - xLo, 1e-12);
  const sy = (canvas.height - 2 * pad) / Math.max(yHi - yLo, 1e-12);
  return {
    toPixel: (x, y) => [
      pad + (x - xLo) * sx,
      canvas.height - pad - (y - yLo) * sy,
    ],
    fromEvent: (ev) => {
      const rect = canvas.getBoundingClientRect();
      return [ev.clientX - rect.left, ev.clientY - rect.top];
    },
  };
}

function nearestOp(
  ops: DrawOp[],
  view: Viewport,
  px: number,
  py: number,
): DrawOp | null {
  let best: DrawOp | null = null;
  let bestDist = PICK_RADIUS * PICK_RADIUS;
  for (const op of ops) {
    const [ox, oy] = view.toPixel(op.x, op.y);
    const d = (ox - px) * (ox - px) + (oy - py) * (oy - py);
    if (d <= bestDist) {
      best = op;
      bestDist = d;
    }
  }
  return best;
}

function mount(): void {
  const canvas = document.getElementById("scatter") as HTMLCanvasElement;
  const ctx = canvas.getContext("2d");
  const sessionInput = document.getElementById("session-id") as HTMLInputElement;
  const loadButton = document.getElementById("load") as HTMLButtonElement;
  const classBox = document.getElementById("classes") as HTMLElement;
  const overlayBox = document.getElementById("overlays") as HTMLElement;
  const suggestButton = document.getElementById("suggest") as HTMLButtonElement;
  const statusLine = document.getElementById("status") as HTMLElement;
  const tooltip = document.getElementById("tooltip") as HTMLElement;
  if (ctx === null) {
    return;
  }

  const base = `${window.location.protocol}//${window.location.host}`;
  const store = new SessionStore(new ApiClient(base));
  let ops: DrawOp[] = [];
  let view = fitViewport(canvas, ops);

  function redraw(): void {
    ops = drawOps(store.state);
    view = fitViewport(canvas, ops);
    ctx!.clearRect(0, 0, canvas.width, canvas.height);
    for (const op of ops) {
      const [x, y] = view.toPixel(op.x, op.y);
      ctx!.beginPath();
      ctx!.arc(x, y, POINT_RADIUS, 0, 2 * Math.PI);
      ctx!.fillStyle = op.fill;
      ctx!.fill();
      if (op.highlighted) {
        ctx!.beginPath();
        ctx!.arc(x, y, POINT_RADIUS + 3, 0, 2 * Math.PI);
        ctx!.strokeStyle = "rgb(0, 0, 0)";
        ctx!.lineWidth = 1.5;
        ctx!.stroke();
      }
      if (op.marker !== null) {
        ctx!.beginPath();
        ctx!.arc(x, y, POINT_RADIUS + 1.5, 0, 2 * Math.PI);
        ctx!.strokeStyle = classColor(op.marker.classIndex);
        ctx!.lineWidth = 3;
        ctx!.stroke();
        ctx!.fillStyle = "rgb(0, 0, 0)";
        ctx!.font = "10px sans-serif";
        ctx!.fillText(String(op.marker.classIndex), x + 6, y - 6);
      }
    }
    renderControls();
    statusLine.textContent =
      store.state.message ??
      store.state.lastError ??
      (store.state.busy ? "applying annotation..." : "ready");
  }

  function renderControls(): void {
    classBox.replaceChildren();
    for (let c = 0; c < Math.min(store.state.numClasses, MAX_CLASSES); c++) {
      const button = document.createElement("button");
      button.textContent = `class ${c}`;
      button.style.borderColor = classColor(c);
      button.style.borderWidth = store.state.selectedClass === c ? "3px" : "1px";
      button.addEventListener("click", () => {
        store.selectClass(c);
      });
      classBox.appendChild(button);
    }
    overlayBox.replaceChildren();
    for (const mode of OVERLAY_MODES) {
      const button = document.createElement("button");
      button.textContent = mode;
      button.style.fontWeight =
        store.state.overlay === mode ? "bold" : "normal";
      button.addEventListener("click", () => {
        store.setOverlay(mode);
      });
      overlayBox.appendChild(button);
    }
  }

  store.subscribe(redraw);

  loadButton.addEventListener("click", () => {
    void store.load(sessionInput.value.trim());
  });
  suggestButton.addEventListener("click", () => {
    void store.followSuggestions(10);
  });
  canvas.addEventListener("click", (ev) => {
    const [px, py] = view.fromEvent(ev);
    const op = nearestOp(ops, view, px, py);
    if (op !== null) {
      void store.annotate(op.id);
    }
  });
  canvas.addEventListener("mousemove", (ev) => {
    const [px, py] = view.fromEvent(ev);
    const op = nearestOp(ops, view, px, py);
    if (op === null) {
      tooltip.style.display = "none";
      return;
    }
    tooltip.style.display = "block";
    tooltip.style.left = `${ev.clientX + 12}px`;
    tooltip.style.top = `${ev.clientY + 12}px`;
    tooltip.textContent = tooltipLines(store.state, op.id).join("\n");
  });

  redraw();
}

if (typeof document !== "undefined") {
  mount();
}
