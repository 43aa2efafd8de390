import init, { Demo } from "../pkg/forgefuzz_wasm.js";

const $ = (id) => document.getElementById(id);
const INK = "#1c2430", ACCENT = "#c3492b", GRID = "#eee8da";

let demo = null;
let community = null;      // latest community view
let history = [];          // {generation, score}
let animation = null;

function clear(canvas) {
  const ctx = canvas.getContext("2d");
  ctx.fillStyle = "#ffffff";
  ctx.fillRect(0, 0, canvas.width, canvas.height);
  return ctx;
}

function frame(ctx, w, h) {
  ctx.strokeStyle = GRID;
  ctx.lineWidth = 1;
  for (let i = 0; i <= 4; i++) {
    const x = 10 + (w - 20) * i / 4, y = 10 + (h - 20) * i / 4;
    ctx.beginPath(); ctx.moveTo(x, 10); ctx.lineTo(x, h - 10); ctx.stroke();
    ctx.beginPath(); ctx.moveTo(10, y); ctx.lineTo(w - 10, y); ctx.stroke();
  }
  ctx.strokeStyle = INK;
  ctx.strokeRect(10, 10, w - 20, h - 20);
}

// axes: [xdim, ydim] into the (centrality, pagerank, code) triple
const PROJECTIONS = [["proj0", 0, 1], ["proj1", 0, 2], ["proj2", 1, 2]];

function drawProjections(view) {
  for (const [id, xd, yd] of PROJECTIONS) {
    const canvas = $(id);
    const ctx = clear(canvas);
    const w = canvas.width, h = canvas.height;
    frame(ctx, w, h);
    ctx.fillStyle = "rgba(195, 73, 43, 0.55)";
    for (const p of view.points) {
      const x = 10 + p[xd] * (w - 20);
      const y = h - 10 - p[yd] * (h - 20);
      ctx.beginPath();
      ctx.arc(x, y, 3, 0, Math.PI * 2);
      ctx.fill();
    }
  }
}

function drawConvergence() {
  const canvas = $("convergence");
  const ctx = clear(canvas);
  const w = canvas.width, h = canvas.height;
  frame(ctx, w, h);
  if (history.length < 2) return;
  const maxGen = history[history.length - 1].generation;
  const maxScore = Math.max(...history.map((r) => r.score));
  ctx.strokeStyle = ACCENT;
  ctx.lineWidth = 2;
  ctx.beginPath();
  history.forEach((r, i) => {
    const x = 10 + (w - 20) * (maxGen ? r.generation / maxGen : 0);
    const y = h - 10 - (h - 20) * (r.score / maxScore);
    if (i === 0) ctx.moveTo(x, y); else ctx.lineTo(x, y);
  });
  ctx.stroke();
  ctx.fillStyle = INK;
  ctx.font = "12px sans-serif";
  ctx.fillText(`gen ${maxGen}`, w - 70, h - 16);
  ctx.fillText(maxScore.toFixed(3), 14, 22);
}

function drawBars(canvasId, values, color) {
  const canvas = $(canvasId);
  const ctx = clear(canvas);
  const w = canvas.width, h = canvas.height;
  frame(ctx, w, h);
  if (!values.length) return;
  const max = Math.max(...values);
  const bw = (w - 24) / values.length;
  ctx.fillStyle = color;
  values.forEach((v, i) => {
    const bh = max ? (h - 24) * (v / max) : 0;
    ctx.fillRect(12 + i * bw, h - 12 - bh, Math.max(bw - 1, 1), bh);
  });
}

function showCommunity(view) {
  community = view;
  $("stats").textContent =
    ` ${view.events} events (${view.push}P/${view.watch}W/${view.pull_request}PR/${view.fork}F), ` +
    `${view.follow_arcs} follow arcs, discrepancy ${view.discrepancy.toFixed(4)}`;
  drawProjections(view);
}

function stopAnimation() {
  if (animation !== null) {
    clearTimeout(animation);
    animation = null;
  }
  $("evolve").disabled = false;
  $("stop").disabled = true;
}

function generate() {
  stopAnimation();
  history = [];
  const view = JSON.parse(demo.generate(
    Number($("users").value), Number($("repos").value),
    Number($("events").value), BigInt($("seed").value),
  ));
  history.push({ generation: 0, score: view.discrepancy });
  showCommunity(view);
  drawConvergence();
  $("evo-stats").textContent = "";
}

function evolve() {
  stopAnimation();
  $("evolve").disabled = true;
  $("stop").disabled = false;
  const lambda = Number($("lambda").value);
  let remaining = Number($("gens").value);
  const batch = 5;

  const tick = () => {
    const n = Math.min(batch, remaining);
    const out = JSON.parse(demo.evolve_steps(n, lambda));
    remaining -= n;
    for (const s of out.steps) {
      history.push({ generation: s.generation + 1, score: s.score });
    }
    showCommunity(out.community);
    drawConvergence();
    const last = out.steps[out.steps.length - 1];
    if (last) {
      $("evo-stats").textContent =
        ` gen ${last.generation + 1}: score ${last.score.toFixed(4)}, ` +
        `rate ${last.rate.toExponential(2)}, ~${last.mean_mutations.toFixed(1)} mutations`;
    }
    if (remaining > 0 && animation !== null) {
      animation = setTimeout(tick, 0);
    } else {
      stopAnimation();
    }
  };
  animation = setTimeout(tick, 0);
}

function runReplay() {
  const out = JSON.parse(demo.replay(
    Number($("limit").value), BigInt($("rseed").value),
  ));
  const cpu = out.users.map((u) => u.cpu).sort((a, b) => b - a);
  drawBars("load", cpu, "rgba(28, 36, 48, 0.8)");
  drawBars("rate", out.request_buckets.map(Number), "rgba(195, 73, 43, 0.8)");
  const errors = out.follow_limit_errors;
  $("replay-stats").innerHTML =
    ` ${out.applied}/${out.total} applied` +
    (errors
      ? `, <span class="bad">${errors} follow-limit rejections</span>`
      : ", no limit errors");
}

init().then(() => {
  demo = new Demo();
  $("generate").addEventListener("click", generate);
  $("evolve").addEventListener("click", evolve);
  $("stop").addEventListener("click", stopAnimation);
  $("replay").addEventListener("click", runReplay);
  generate();
});
