// DOM shell: wires the pure state machine to canvas drawing and buttons.

import { ApiClient } from "./api";
import {
  ConsoleApp,
  renderBanner,
  renderGoalLineMarkers,
  renderInlineError,
  renderOutcomeBadge,
  renderVerdictCard,
  ViewState,
} from "./app";
import { divergingColor, maxAbs, zeroContourSegments } from "./heatmap";

const API_BASE = (window as any).SAFEALT_API ?? "http://127.0.0.1:8008";

const canvas = document.getElementById("map") as HTMLCanvasElement;
const ctx = canvas.getContext("2d")!;
const cardEl = document.getElementById("card")!;
const badgeEl = document.getElementById("badge")!;
const bannerEl = document.getElementById("banner")!;
const errorEl = document.getElementById("inline-error")!;
const phiInput = document.getElementById("phi") as HTMLInputElement;
const measureSelect = document.getElementById("measure") as HTMLSelectElement;
const intentSelect = document.getElementById("intent") as HTMLSelectElement;

const app = new ConsoleApp(new ApiClient(API_BASE), render);
let playbackTimer: number | null = null;

function dataToCanvas(s: ViewState, x: number, y: number): [number, number] {
  const b = s.world!.world.bounds;
  const px = ((x - b.xmin) / (b.xmax - b.xmin)) * canvas.width;
  const py = canvas.height - ((y - b.ymin) / (b.ymax - b.ymin)) * canvas.height;
  return [px, py];
}

function drawMap(s: ViewState): void {
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  if (!s.world) return;
  const world = s.world.world;

  if (s.slice) {
    const { xs, ys, values } = s.slice;
    const scale = maxAbs(values);
    const cellW = canvas.width / xs.length;
    const cellH = canvas.height / ys.length;
    for (let i = 0; i < xs.length; i++) {
      for (let j = 0; j < ys.length; j++) {
        const [px, py] = dataToCanvas(s, xs[i], ys[j]);
        ctx.fillStyle = divergingColor(values[i][j], scale);
        ctx.fillRect(px - cellW / 2, py - cellH / 2, cellW + 1, cellH + 1);
      }
    }
    ctx.strokeStyle = "#111";
    ctx.lineWidth = 2;
    for (const seg of zeroContourSegments(xs, ys, values)) {
      const [x1, y1] = dataToCanvas(s, seg.x1, seg.y1);
      const [x2, y2] = dataToCanvas(s, seg.x2, seg.y2);
      ctx.beginPath();
      ctx.moveTo(x1, y1);
      ctx.lineTo(x2, y2);
      ctx.stroke();
    }
  }

  ctx.fillStyle = "rgba(40,40,40,0.8)";
  for (const w of world.walls) {
    const [x1, y1] = dataToCanvas(s, w.xmin, w.ymax);
    const [x2, y2] = dataToCanvas(s, w.xmax, w.ymin);
    ctx.fillRect(x1, y1, x2 - x1, y2 - y1);
  }

  // goal line with request/alternative markers
  const [glx1, gly1] = dataToCanvas(s, world.goal_line_x, world.goal_y_range[0]);
  const [, gly2] = dataToCanvas(s, world.goal_line_x, world.goal_y_range[1]);
  ctx.strokeStyle = "#2a7";
  ctx.lineWidth = 4;
  ctx.beginPath();
  ctx.moveTo(glx1 - 2, gly1);
  ctx.lineTo(glx1 - 2, gly2);
  ctx.stroke();
  const markers = renderGoalLineMarkers(s);
  for (const m of markers.matchAll(/data-gy="([-\d.e]+)"/g)) {
    const gy = parseFloat(m[1]);
    const [mx, my] = dataToCanvas(s, world.goal_line_x, gy);
    ctx.fillStyle = markers.includes("alternative") ? "#d60" : "#2a7";
    ctx.beginPath();
    ctx.arc(mx - 6, my, 7, 0, 2 * Math.PI);
    ctx.fill();
  }

  // robot pose, or playback pose when animating
  let pose = s.robot;
  if (s.trajectory) {
    const [x, y, phi] = s.trajectory.states[s.playbackCursor];
    pose = { x, y, phi };
  }
  if (pose) {
    const [rx, ry] = dataToCanvas(s, pose.x, pose.y);
    ctx.fillStyle = "#06c";
    ctx.beginPath();
    ctx.arc(rx, ry, 6, 0, 2 * Math.PI);
    ctx.fill();
    ctx.strokeStyle = "#06c";
    ctx.lineWidth = 2;
    ctx.beginPath();
    ctx.moveTo(rx, ry);
    // phi measured from +y: screen direction (sin phi, -cos phi)
    ctx.lineTo(rx + 14 * Math.sin(pose.phi), ry - 14 * Math.cos(pose.phi));
    ctx.stroke();
  }
}

function render(s: ViewState): void {
  cardEl.innerHTML = renderVerdictCard(s);
  badgeEl.innerHTML = renderOutcomeBadge(s);
  bannerEl.innerHTML = renderBanner(s);
  errorEl.innerHTML = renderInlineError(s);
  drawMap(s);
  cardEl.querySelector('[data-action="accept"]')?.addEventListener("click", () => {
    void app.accept().then(startPlayback);
  });
  cardEl.querySelector('[data-action="reject"]')?.addEventListener("click", () => {
    app.reject();
  });
}

function startPlayback(): void {
  if (playbackTimer !== null) {
    clearInterval(playbackTimer);
  }
  const dt = app.state.world ? app.state.world.world.dt : 0.1;
  playbackTimer = window.setInterval(() => {
    if (!app.tickPlayback() && playbackTimer !== null) {
      clearInterval(playbackTimer);
      playbackTimer = null;
    }
  }, dt * 1000);
}

canvas.addEventListener("click", (ev) => {
  const s = app.state;
  if (!s.world) return;
  const rect = canvas.getBoundingClientRect();
  const px = ev.clientX - rect.left;
  const py = ev.clientY - rect.top;
  const b = s.world.world.bounds;
  const x = b.xmin + (px / canvas.width) * (b.xmax - b.xmin);
  const y = b.ymin + (1 - py / canvas.height) * (b.ymax - b.ymin);
  // clicks near the goal line select a goal; elsewhere they reset the robot
  if (Math.abs(x - s.world.world.goal_line_x) < 0.35) {
    const [lo, hi] = s.world.world.goal_y_range;
    void app.clickGoal(Math.max(lo, Math.min(hi, y)));
  }
});

phiInput.addEventListener("change", () => {
  void app.setSliceCoords(parseFloat(phiInput.value), app.state.sliceGy);
});
measureSelect.addEventListener("change", () => {
  app.setMeasure(measureSelect.value, intentSelect.value || null);
});
intentSelect.addEventListener("change", () => {
  app.setMeasure(measureSelect.value, intentSelect.value || null);
});

const storedSession = sessionStorage.getItem("safealt-session");
(storedSession ? app.recover(storedSession) : app.connect()).then(() => {
  if (app.state.sessionId) {
    sessionStorage.setItem("safealt-session", app.state.sessionId);
  }
});
