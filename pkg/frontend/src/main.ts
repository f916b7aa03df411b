import { ApiClient } from "./api.js";
import { App } from "./app.js";
import { rasterize } from "./raster.js";
import { renderCounter, renderError, renderResult } from "./render.js";
import type { Mode } from "./types.js";

const SURFACE = 320; // display resolution of the drawing pad
const BRUSH = 16;

const apiBase =
  new URLSearchParams(location.search).get("api") ?? "http://127.0.0.1:8000";
const app = new App(new ApiClient(apiBase));

const canvas = document.getElementById("pad") as HTMLCanvasElement;
const counterEl = document.getElementById("counter")!;
const resultEl = document.getElementById("result")!;
const statusEl = document.getElementById("status")!;
const submitBtn = document.getElementById("submit") as HTMLButtonElement;
const clearBtn = document.getElementById("clear") as HTMLButtonElement;
const modeInputs = document.querySelectorAll<HTMLInputElement>(
  'input[name="mode"]',
);

canvas.width = SURFACE;
canvas.height = SURFACE;
const ctx = canvas.getContext("2d")!;

function paintBackground(): void {
  ctx.fillStyle = "#000";
  ctx.fillRect(0, 0, SURFACE, SURFACE);
}

function refreshControls(): void {
  counterEl.textContent = renderCounter(app.log.count);
  submitBtn.disabled = !app.canSubmit();
  if (app.error) {
    resultEl.innerHTML = renderError(app.error);
  } else if (app.response) {
    resultEl.innerHTML = renderResult(app.response, app.displayNames);
  } else {
    resultEl.innerHTML = "";
  }
}

function pos(ev: PointerEvent): { x: number; y: number } {
  const rect = canvas.getBoundingClientRect();
  return {
    x: ((ev.clientX - rect.left) * SURFACE) / rect.width,
    y: ((ev.clientY - rect.top) * SURFACE) / rect.height,
  };
}

function drawDot(x: number, y: number): void {
  ctx.fillStyle = "#fff";
  ctx.beginPath();
  ctx.arc(x, y, BRUSH / 2, 0, Math.PI * 2);
  ctx.fill();
}

function drawSegment(x0: number, y0: number, x1: number, y1: number): void {
  ctx.strokeStyle = "#fff";
  ctx.lineWidth = BRUSH;
  ctx.lineCap = "round";
  ctx.lineJoin = "round";
  ctx.beginPath();
  ctx.moveTo(x0, y0);
  ctx.lineTo(x1, y1);
  ctx.stroke();
}

const lastPoint = new Map<number, { x: number; y: number }>();

canvas.addEventListener("pointerdown", (ev) => {
  ev.preventDefault();
  canvas.setPointerCapture(ev.pointerId);
  const { x, y } = pos(ev);
  app.log.pointerDown(ev.pointerId, x, y, ev.timeStamp);
  lastPoint.set(ev.pointerId, { x, y });
  drawDot(x, y); // a bare tap must leave visible ink
  refreshControls();
});

canvas.addEventListener("pointermove", (ev) => {
  const prev = lastPoint.get(ev.pointerId);
  if (!prev) return;
  const { x, y } = pos(ev);
  app.log.pointerMove(ev.pointerId, x, y, ev.timeStamp);
  drawSegment(prev.x, prev.y, x, y);
  lastPoint.set(ev.pointerId, { x, y });
});

function endStroke(ev: PointerEvent): void {
  if (!lastPoint.has(ev.pointerId)) return;
  app.log.pointerUp(ev.pointerId);
  lastPoint.delete(ev.pointerId);
  refreshControls();
}
canvas.addEventListener("pointerup", endStroke);
canvas.addEventListener("pointercancel", endStroke);

clearBtn.addEventListener("click", () => {
  app.clear();
  lastPoint.clear();
  paintBackground();
  refreshControls();
});

for (const input of modeInputs) {
  input.addEventListener("change", () => {
    app.mode = input.value as Mode;
  });
}

submitBtn.addEventListener("click", async () => {
  const frame = ctx.getImageData(0, 0, SURFACE, SURFACE);
  submitBtn.disabled = true;
  await app.submit(rasterize(frame));
  refreshControls();
});

async function boot(): Promise<void> {
  paintBackground();
  refreshControls();
  try {
    await app.loadLabels();
    const health = await new ApiClient(apiBase).health();
    statusEl.textContent =
      health.status === "ok"
        ? `service ready (v${health.version})`
        : "service loading";
  } catch {
    statusEl.textContent = `service unreachable at ${apiBase}`;
  }
}

void boot();
