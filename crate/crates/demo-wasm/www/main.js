import init, { Demo } from "./pkg/rulelens_demo.js";

const NO = "#c0392b", YES = "#2471a3";
const plane = document.getElementById("plane");
const curve = document.getElementById("curve");
const explanationBox = document.getElementById("explanation");
const globalBox = document.getElementById("global");
const status = document.getElementById("status");

let demo, land, last;

function toPx(v, side) { return (v / side) * plane.width; }

function drawLandscape() {
  const ctx = plane.getContext("2d");
  const cell = plane.width / land.res;
  land.grid.forEach((label, k) => {
    const i = k % land.res, j = Math.floor(k / land.res);
    ctx.fillStyle = label ? "#c8ddf0" : "#f3c9c4";
    // y grows upwards
    ctx.fillRect(i * cell, plane.height - (j + 1) * cell, cell + 0.5, cell + 0.5);
  });
  for (const p of land.points) {
    dot(ctx, p.xy, 2, p.label ? YES : NO, 0.35);
  }
}

function dot(ctx, [x, y], r, color, alpha = 1) {
  ctx.globalAlpha = alpha;
  ctx.fillStyle = color;
  ctx.beginPath();
  ctx.arc(toPx(x, land.side), plane.height - toPx(y, land.side), r, 0, 2 * Math.PI);
  ctx.fill();
  ctx.globalAlpha = 1;
}

function escape(s) {
  return s.replace(/[&<>]/g, c => ({ "&": "&amp;", "<": "&lt;", ">": "&gt;" })[c]);
}

function explainAt(x, y) {
  const method = document.querySelector("input[name=method]:checked").value;
  const size = Number(document.getElementById("size").value);
  const seed = Number(document.getElementById("seed").value);
  const e = JSON.parse(demo.explain(x, y, method, size, seed));
  last = [x, y];
  drawLandscape();
  const ctx = plane.getContext("2d");
  for (const p of e.points) dot(ctx, p.xy, 2.2, p.label ? YES : NO, 0.8);
  ctx.strokeStyle = "#000";
  ctx.lineWidth = 2;
  ctx.beginPath();
  ctx.arc(toPx(x, land.side), plane.height - toPx(y, land.side), 6, 0, 2 * Math.PI);
  ctx.stroke();

  const cfs = e.counterfactuals.map(c => `CF[${c.changes}] ${c.rule}`).join("\n") || "(none)";
  explanationBox.classList.remove("muted");
  explanationBox.innerHTML = `
    <div>x = (${x.toFixed(2)}, ${y.toFixed(2)}), black box says <b>${e.label ? "yes" : "no"}</b></div>
    <div>Factual rule</div><pre>${escape(e.rule)}</pre>
    <div>Counterfactuals</div><pre>${escape(cfs)}</pre>
    <table>
      <tr><td>surrogate fidelity</td><td>${e.fidelity.toFixed(3)}</td></tr>
      <tr><td>mean distance to x</td><td>${e.mean_distance.toFixed(3)}</td></tr>
      <tr><td>share labelled like x</td><td>${e.class_balance.toFixed(2)}</td></tr>
      <tr><td>flags</td><td>${e.flags.length ? e.flags.join(", ") : "none"}</td></tr>
    </table>`;
}

function drawCurve(g) {
  const ctx = curve.getContext("2d");
  const W = curve.width, H = curve.height, pad = 40;
  ctx.clearRect(0, 0, W, H);
  const cuts = g.cuts;
  const maxK = Math.max(...cuts.map(c => c.rules));
  const qs = cuts.map(c => c.q);
  const qMin = Math.min(...qs), qMax = Math.max(...qs);
  // x axis: rule count on a log scale, so the small cuts are readable
  const xOf = k => pad + (Math.log(k) / Math.log(Math.max(maxK, 2))) * (W - 2 * pad);
  const yFid = f => H - pad - f * (H - 2 * pad);
  const yQ = q => H - pad - ((q - qMin) / Math.max(qMax - qMin, 1e-9)) * (H - 2 * pad);

  ctx.strokeStyle = "#999";
  ctx.strokeRect(pad, pad, W - 2 * pad, H - 2 * pad);
  ctx.fillStyle = "#555";
  ctx.font = "12px system-ui";
  ctx.fillText("rules in cut (log)", W / 2 - 40, H - 10);
  ctx.fillText("1", pad - 3, H - pad + 14);
  ctx.fillText(String(maxK), W - pad - 10, H - pad + 14);
  ctx.fillText("fidelity 0–1", 4, pad - 10);
  ctx.fillText("q", W - pad + 6, pad + 4);

  const line = (yOf, key, color) => {
    ctx.strokeStyle = color;
    ctx.lineWidth = 1.5;
    ctx.beginPath();
    cuts.forEach((c, i) => {
      const X = xOf(c.rules), Y = yOf(c[key]);
      i ? ctx.lineTo(X, Y) : ctx.moveTo(X, Y);
    });
    ctx.stroke();
  };
  line(yFid, "fidelity", "#27ae60");
  line(yQ, "q", "#8e44ad");

  const s = cuts[g.selected];
  ctx.strokeStyle = "#000";
  ctx.setLineDash([4, 3]);
  ctx.beginPath();
  ctx.moveTo(xOf(s.rules), pad);
  ctx.lineTo(xOf(s.rules), H - pad);
  ctx.stroke();
  ctx.setLineDash([]);
  ctx.fillStyle = "#27ae60"; ctx.fillText("fidelity", W - pad - 60, pad + 16);
  ctx.fillStyle = "#8e44ad"; ctx.fillText("q", W - pad - 60, pad + 30);
}

async function globalize() {
  status.textContent = "explaining every training point…";
  await new Promise(r => setTimeout(r, 20));
  const started = performance.now();
  const g = JSON.parse(demo.globalize(300));
  const secs = ((performance.now() - started) / 1000).toFixed(1);
  const s = g.cuts[g.selected];
  status.textContent = `${g.local_rules} distinct local rules (${g.flagged} flagged explanations) in ${secs}s`;
  drawCurve(g);
  globalBox.innerHTML = `
    <div>Selected cut: <b>${s.rules}</b> rules, fidelity ${s.fidelity.toFixed(3)}, q ${s.q.toFixed(1)}
      (all local rules: fidelity ${g.cuts[0].fidelity.toFixed(3)})</div>
    <pre>${escape(g.rules.join("\n"))}\n(otherwise approved = ${g.default})</pre>`;
}

async function main() {
  await init();
  demo = new Demo(200, 7);
  land = JSON.parse(demo.landscape(96));
  drawLandscape();
  plane.addEventListener("click", ev => {
    const r = plane.getBoundingClientRect();
    const x = ((ev.clientX - r.left) / r.width) * land.side;
    const y = (1 - (ev.clientY - r.top) / r.height) * land.side;
    explainAt(x, y);
  });
  for (const el of document.querySelectorAll("input")) {
    el.addEventListener("change", () => last && explainAt(...last));
  }
  document.getElementById("globalize").addEventListener("click", globalize);
}

main();
