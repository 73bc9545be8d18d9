// Demo wiring: three panels backed by the wasm bindings. Build the module
// first with `wasm-pack build crates/wasm --target web --out-dir ../../www/pkg`.

import init, { survival_curve, cost_curve, sample_tree, infinite_tree } from "./pkg/gw_wasm.js";

const $ = (id) => document.getElementById(id);

function parseTree(text) {
  // Nested brackets -> {children: [...]}.
  const stack = [];
  let root = null;
  for (const ch of text) {
    if (ch === "(") {
      stack.push({ children: [] });
    } else if (ch === ")") {
      const node = stack.pop();
      if (stack.length === 0) root = node;
      else stack[stack.length - 1].children.push(node);
    }
  }
  return root;
}

function layoutTree(root) {
  // Leaves get consecutive x slots; parents sit at the mean of their children.
  let nextLeaf = 0;
  function place(node, depth) {
    node.depth = depth;
    if (node.children.length === 0) {
      node.x = nextLeaf++;
      return;
    }
    for (const c of node.children) place(c, depth + 1);
    node.x = node.children.reduce((s, c) => s + c.x, 0) / node.children.length;
  }
  place(root, 0);
  return nextLeaf;
}

function markReach(node, k) {
  // reach = deepest level below this node; node is "surviving" if its
  // subtree extends to level k.
  let deepest = node.depth;
  for (const c of node.children) deepest = Math.max(deepest, markReach(c, k));
  node.surviving = deepest >= k;
  return deepest;
}

function clearCanvas(canvas) {
  const ctx = canvas.getContext("2d");
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  return ctx;
}

function axes(ctx, box) {
  ctx.strokeStyle = "#d7dde4";
  ctx.lineWidth = 1;
  ctx.strokeRect(box.left, box.top, box.width, box.height);
}

// ---------- cost curve panel ----------

function drawCostCurve() {
  const k = Number($("cost-k").value);
  const K = Math.pow(10, Number($("cost-K").value));
  $("cost-k-val").textContent = k;
  $("cost-K-val").textContent = K.toPrecision(3);

  const data = JSON.parse(cost_curve(k, K, 0.2, 30.0, 120));
  const readout = $("cost-readout");
  if (data.error) {
    readout.innerHTML = `<span class="error">${data.error}</span>`;
    return;
  }
  const canvas = $("cost-canvas");
  const ctx = clearCanvas(canvas);
  const box = { left: 48, top: 12, width: canvas.width - 60, height: canvas.height - 42 };
  axes(ctx, box);

  const points = data.points.filter((p) => p.cost !== null);
  const xs = points.map((p) => Math.log10(p.mu));
  const ysAll = points.flatMap((p) => [p.cost, p.asym_large, p.asym_small]);
  const xMin = Math.min(...xs), xMax = Math.max(...xs);
  const yMin = Math.log10(Math.min(...points.map((p) => p.cost)) * 0.5);
  const yMax = Math.log10(Math.min(Math.max(...ysAll), 1e12));
  const px = (mu) => box.left + ((Math.log10(mu) - xMin) / (xMax - xMin)) * box.width;
  const py = (c) => {
    const t = (Math.log10(c) - yMin) / (yMax - yMin);
    return box.top + (1 - Math.min(Math.max(t, 0), 1)) * box.height;
  };

  const poly = (pick, style, dash) => {
    ctx.strokeStyle = style;
    ctx.setLineDash(dash);
    ctx.lineWidth = dash.length ? 1 : 2;
    ctx.beginPath();
    let started = false;
    for (const p of points) {
      const v = pick(p);
      if (v <= 0 || !isFinite(v)) continue;
      const x = px(p.mu), y = py(v);
      if (!started) { ctx.moveTo(x, y); started = true; }
      else ctx.lineTo(x, y);
    }
    ctx.stroke();
    ctx.setLineDash([]);
  };
  poly((p) => p.asym_small, "#9ca3af", [5, 4]);
  poly((p) => p.asym_large, "#9ca3af", [2, 3]);
  poly((p) => p.cost, "#2563eb", []);

  // Optimum marker.
  ctx.strokeStyle = "#15803d";
  ctx.beginPath();
  ctx.moveTo(px(data.mu_opt), box.top);
  ctx.lineTo(px(data.mu_opt), box.top + box.height);
  ctx.stroke();

  // x ticks at powers of ten and the optimum.
  ctx.fillStyle = "#5b6775";
  ctx.font = "11px system-ui";
  for (const mu of [0.2, 0.5, 1, 2, 5, 10, 30]) {
    ctx.fillText(mu, px(mu) - 6, box.top + box.height + 14);
  }
  readout.innerHTML =
    `optimal mean <b>&mu;* = ${data.mu_opt.toFixed(3)}</b> with expected cost ` +
    `<b>${data.cost_opt.toPrecision(5)}</b> &mdash; cost grows like kK&mu; for large &mu; ` +
    `and like &mu;<sup>&minus;k</sup> as &mu; &rarr; 0`;
}

// ---------- tree sampler panel ----------

let seedCounter = 1;

function drawTree() {
  const mu = Number($("tree-mu").value);
  const k = Number($("tree-k").value);
  $("tree-mu-val").textContent = mu.toFixed(2);
  $("tree-k-val").textContent = k;
  const mode = $("tree-mode").value;
  const seed = Number($("tree-seed").value);

  const data = JSON.parse(sample_tree(mu, k, mode, seed >>> 0));
  const readout = $("tree-readout");
  const canvas = $("tree-canvas");
  const ctx = clearCanvas(canvas);
  if (data.error) {
    readout.innerHTML = `<span class="error">${data.error}</span>`;
    return;
  }
  const root = parseTree(data.tree);
  const leaves = layoutTree(root);
  markReach(root, k);

  const box = { left: 16, top: 20, width: canvas.width - 32, height: canvas.height - 44 };
  const px = (x) => box.left + (leaves === 1 ? box.width / 2 : (x / (leaves - 1)) * box.width);
  const py = (d) => box.top + (k === 0 ? 0 : (d / k) * box.height);

  // Target level guide.
  ctx.strokeStyle = "#fca5a5";
  ctx.setLineDash([4, 4]);
  ctx.beginPath();
  ctx.moveTo(box.left - 8, py(k));
  ctx.lineTo(box.left + box.width + 8, py(k));
  ctx.stroke();
  ctx.setLineDash([]);

  const radius = leaves > 80 ? 2 : leaves > 30 ? 3 : 5;
  (function draw(node) {
    for (const c of node.children) {
      ctx.strokeStyle = c.surviving ? "#1c2430" : "#c4cbd4";
      ctx.lineWidth = c.surviving ? 1.6 : 1;
      ctx.beginPath();
      ctx.moveTo(px(node.x), py(node.depth));
      ctx.lineTo(px(c.x), py(c.depth));
      ctx.stroke();
      draw(c);
    }
    ctx.fillStyle = node.surviving ? "#15803d" : "#9ca3af";
    ctx.beginPath();
    ctx.arc(px(node.x), py(node.depth), radius, 0, 2 * Math.PI);
    ctx.fill();
  })(root);

  readout.innerHTML =
    `<b>${data.nodes}</b> nodes, height <b>${data.height}</b>, ` +
    (data.reaches_target
      ? `reaches level <b>${k}</b>`
      : `dies out before level <b>${k}</b>`);
}

// ---------- survival panel ----------

function drawSurvival() {
  const mu = Number($("surv-mu").value);
  const k = Number($("surv-k").value);
  const K = Number($("surv-K").value);
  $("surv-mu-val").textContent = mu.toFixed(2);
  $("surv-k-val").textContent = k;

  const data = JSON.parse(survival_curve(mu, k));
  const readout = $("surv-readout");
  if (data.error) {
    readout.innerHTML = `<span class="error">${data.error}</span>`;
    return;
  }
  const canvas = $("surv-canvas");
  const ctx = clearCanvas(canvas);
  const box = { left: 40, top: 12, width: canvas.width - 52, height: canvas.height - 42 };
  axes(ctx, box);
  const px = (l) => box.left + (l / k) * box.width;
  const py = (p) => box.top + (1 - p) * box.height;

  const inf = JSON.parse(infinite_tree(mu, K));
  if (!inf.error && inf.p > 0) {
    ctx.strokeStyle = "#fca5a5";
    ctx.setLineDash([4, 4]);
    ctx.beginPath();
    ctx.moveTo(box.left, py(inf.p));
    ctx.lineTo(box.left + box.width, py(inf.p));
    ctx.stroke();
    ctx.setLineDash([]);
  }

  ctx.strokeStyle = "#2563eb";
  ctx.lineWidth = 2;
  ctx.beginPath();
  data.p.forEach((p, l) => {
    if (l === 0) ctx.moveTo(px(l), py(p));
    else ctx.lineTo(px(l), py(p));
  });
  ctx.stroke();
  ctx.fillStyle = "#2563eb";
  data.p.forEach((p, l) => {
    ctx.beginPath();
    ctx.arc(px(l), py(p), 3, 0, 2 * Math.PI);
    ctx.fill();
  });

  ctx.fillStyle = "#5b6775";
  ctx.font = "11px system-ui";
  ctx.fillText("0", box.left - 12, box.top + box.height + 4);
  ctx.fillText("1", box.left - 12, box.top + 6);
  ctx.fillText("level l", box.left + box.width / 2 - 16, box.top + box.height + 16);

  if (inf.error) {
    readout.innerHTML =
      `p<sub>0</sub> = <b>${data.p[0].toExponential(3)}</b>; subcritical mean: ` +
      `the infinite tree dies out almost surely`;
  } else {
    readout.innerHTML =
      `p<sub>0</sub> = <b>${data.p[0].toFixed(6)}</b>, fixed point <b>p = ${inf.p.toFixed(6)}</b>, ` +
      `infinite-tree cost per step <b>${inf.cost_per_step.toPrecision(5)}</b> at K = ${K} ` +
      `(limit of the optimal mean: ${inf.mu_opt_limit.toFixed(3)})`;
  }
}

// ---------- init ----------

await init();

for (const id of ["cost-k", "cost-K"]) $(id).addEventListener("input", drawCostCurve);
for (const id of ["tree-mu", "tree-k", "tree-seed"]) $(id).addEventListener("input", drawTree);
$("tree-mode").addEventListener("change", drawTree);
$("tree-next").addEventListener("click", () => {
  seedCounter += 1;
  $("tree-seed").value = seedCounter;
  drawTree();
});
for (const id of ["surv-mu", "surv-k", "surv-K"]) $(id).addEventListener("input", drawSurvival);

drawCostCurve();
drawTree();
drawSurvival();
