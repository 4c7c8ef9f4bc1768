// Build with: wasm-pack build crates/web --target web --out-dir www/pkg
import init, { CircleRun, find_modes, neighborhood_mask } from "./pkg/psbml_web.js";

const $ = (id) => document.getElementById(id);
const num = (id) => Number($(id).value);
const COLORS = ["#d33", "#36c"];

function scatter(ctx, pts, lo, hi) {
  const { width: w, height: h } = ctx.canvas;
  const sx = (x) => ((x - lo[0]) / (hi[0] - lo[0])) * w;
  const sy = (y) => h - ((y - lo[1]) / (hi[1] - lo[1])) * h;
  ctx.clearRect(0, 0, w, h);
  ctx.globalAlpha = 0.35;
  for (let i = 0; i < pts.length; i += 3) {
    ctx.fillStyle = COLORS[pts[i + 2]] || "#555";
    ctx.fillRect(sx(pts[i]) - 1, sy(pts[i + 1]) - 1, 2, 2);
  }
  ctx.globalAlpha = 1;
  return [sx, sy];
}

function marks(ctx, xy, [sx, sy], color, r) {
  ctx.strokeStyle = color;
  ctx.lineWidth = 2;
  for (let i = 0; i < xy.length; i += 2) {
    ctx.beginPath();
    ctx.arc(sx(xy[i]), sy(xy[i + 1]), r, 0, 2 * Math.PI);
    ctx.stroke();
  }
}

// grid run ---------------------------------------------------------------

let run = null;
let timer = null;
let lines = [];

function resetRun() {
  stop();
  run?.free();
  run = new CircleRun(num("run-n"), BigInt(num("run-seed")), num("run-side"),
    $("run-nb").value, num("run-pr"), num("run-epochs"));
  lines = ["epoch  val_err  distinct"];
  drawRun();
}

function drawRun() {
  const ctx = $("run-canvas").getContext("2d");
  const tr = scatter(ctx, run.population(), [-1, -1], [1, 1]);
  marks(ctx, [0, 0], tr, "#999", 0.4 * ctx.canvas.width / 2);
  const hist = run.weight_histogram();
  const hc = $("run-hist").getContext("2d");
  hc.clearRect(0, 0, hc.canvas.width, hc.canvas.height);
  const bw = hc.canvas.width / Math.max(hist.length, 1);
  hc.fillStyle = "#666";
  hist.forEach((m, i) => {
    const bh = m * (hc.canvas.height - 12);
    hc.fillRect(i * bw + 1, hc.canvas.height - bh, bw - 2, bh);
  });
  hc.fillText("weight 0 → 1", 4, 10);
  $("run-log").textContent = lines.slice(-18).join("\n");
}

function stepRun() {
  if (!run || run.done()) return stop();
  const [e, err, distinct] = run.step();
  lines.push(`${String(e).padStart(5)}  ${err.toFixed(4)}  ${String(distinct).padStart(8)}`);
  drawRun();
}

function stop() {
  clearInterval(timer);
  timer = null;
  $("run-play").textContent = "play";
}

function togglePlay() {
  if (timer) return stop();
  timer = setInterval(stepRun, 60);
  $("run-play").textContent = "pause";
}

// modes ------------------------------------------------------------------

function showModes() {
  const kind = $("m-kind").value;
  const view = find_modes(kind, num("m-n"), num("m-m"), num("m-sigma"), BigInt(num("m-seed")));
  const [lo, hi] = kind === "circle" ? [[-1, -1], [1, 1]] : [[0, -4], [40, 20]];
  const ctx = $("m-canvas").getContext("2d");
  const tr = scatter(ctx, view.points(), lo, hi);
  const w = view.weighted(), u = view.unweighted();
  marks(ctx, u, tr, "#0a0", 6);
  marks(ctx, w, tr, "#000", 9);
  const fmt = (xy) => {
    const out = [];
    for (let i = 0; i < xy.length; i += 2) out.push(`(${xy[i].toFixed(3)}, ${xy[i + 1].toFixed(3)})`);
    return out.join("\n  ");
  };
  $("m-log").textContent = `weighted (black):\n  ${fmt(w)}\nunweighted (green):\n  ${fmt(u)}` +
    (view.unconverged() > 0 ? `\n${view.unconverged()} weighted start(s) hit the iteration cap` : "");
  view.free();
}

// neighbourhoods ---------------------------------------------------------

let focus = [0, 0];

function drawHood() {
  const w = num("h-w"), h = num("h-h");
  const mask = neighborhood_mask($("h-nb").value, w, h, focus[0], focus[1]);
  const ctx = $("h-canvas").getContext("2d");
  const cw = ctx.canvas.width / w, ch = ctx.canvas.height / h;
  ctx.clearRect(0, 0, ctx.canvas.width, ctx.canvas.height);
  for (let r = 0; r < h; r++) {
    for (let c = 0; c < w; c++) {
      ctx.fillStyle = ["#eee", "#9bd", "#27a"][mask[r * w + c]];
      ctx.fillRect(c * cw + 1, r * ch + 1, cw - 2, ch - 2);
    }
  }
}

function pickCell(ev) {
  const rect = ev.target.getBoundingClientRect();
  const w = num("h-w"), h = num("h-h");
  focus = [Math.floor(((ev.clientY - rect.top) / rect.height) * h),
           Math.floor(((ev.clientX - rect.left) / rect.width) * w)];
  drawHood();
}

function guard(f) {
  return (...a) => {
    try { f(...a); } catch (e) { alert(e); }
  };
}

await init();
$("run-reset").onclick = guard(resetRun);
$("run-step").onclick = guard(stepRun);
$("run-play").onclick = guard(togglePlay);
$("m-go").onclick = guard(showModes);
$("h-canvas").onclick = guard(pickCell);
for (const id of ["h-nb", "h-w", "h-h"]) $(id).onchange = guard(drawHood);
resetRun();
drawHood();
