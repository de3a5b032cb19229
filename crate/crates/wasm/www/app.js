// Wires the sliders to the wasm exports. Build the module first:
//   wasm-pack build crates/wasm --target web --out-dir www/pkg
// then serve crates/wasm/www with any static file server.

import init, {
  covering_summary, covering_render, covering_blocks,
  two_cubes_summary, two_cubes_render,
  content_curve, cantor_render,
} from "./pkg/coverlab_wasm.js";

const $ = (id) => document.getElementById(id);

const COV = { n_max: 4000, l_max: 9, size: 384 };
const TC_LEVEL = 9;

function drawRgba(canvas, data, w, h) {
  const ctx = canvas.getContext("2d");
  const img = new ImageData(new Uint8ClampedArray(data), w, h);
  ctx.putImageData(img, 0, 0);
}

function refreshCovering() {
  const alpha = parseFloat($("cov-alpha").value);
  const seed = parseInt($("cov-seed").value) >>> 0;
  $("cov-alpha-out").value = alpha.toFixed(1);
  const blocks = covering_blocks(alpha, seed, COV.n_max, COV.l_max);
  $("cov-block").max = Math.max(blocks - 1, 0);
  const block = Math.min(parseInt($("cov-block").value), blocks - 1);
  $("cov-block-out").value = block;
  const img = covering_render(alpha, seed, block, COV.size, COV.n_max, COV.l_max);
  drawRgba($("cov-canvas"), img, COV.size, COV.size);
  const s = JSON.parse(covering_summary(alpha, seed, COV.n_max, COV.l_max));
  if (s.error) { $("cov-stats").textContent = s.error; return; }
  const rows = s.blocks.map((b, j) =>
    `block ${j}  n≤${String(b.n_end).padStart(5)}  ℓ=${String(b.level).padStart(2)}` +
    `  stage ${String(b.stage_cells).padStart(6)}  chain ${String(b.chain_cells).padStart(6)}`
  ).join("\n");
  $("cov-stats").textContent =
    `expected dim 2/α = ${s.expected_dimension.toFixed(3)}\n` +
    `estimate        = ${s.estimate.toFixed(3)}  (r² ${s.r_squared.toFixed(3)})\n` +
    `chain survives ${s.survival} of ${s.blocks.length} blocks\n\n` + rows;
}

function refreshTwoCubes() {
  const ratio = parseInt($("tc-ratio").value);
  $("tc-ratio-out").value = ratio;
  const img = two_cubes_render(ratio, TC_LEVEL, 384);
  drawRgba($("tc-canvas"), img, 384, 384);
  const s = JSON.parse(two_cubes_summary(ratio, TC_LEVEL));
  if (s.error) { $("tc-stats").textContent = s.error; return; }
  $("tc-stats").textContent =
    `measure(A)      = ${s.measure.toFixed(5)}\n` +
    `g(A)            = ${s.g.toExponential(3)}\n` +
    `G lower bound   = ${s.g_lower.toExponential(3)}\n` +
    `amplification   = ${s.amplification.toFixed(3)}\n` +
    `witness cells   = ${s.witness_cells}`;
}

function refreshCantor() {
  const gap = parseFloat($("fc-gap").value);
  const stages = parseInt($("fc-stages").value);
  $("fc-gap-out").value = gap.toFixed(2);
  $("fc-stages-out").value = stages;
  drawRgba($("fc-strip"), cantor_render(gap, stages, 10, 760, 18), 760, 18);
  const s = JSON.parse(content_curve(gap, stages, 10, 16));
  const plot = $("fc-plot");
  const ctx = plot.getContext("2d");
  ctx.clearRect(0, 0, plot.width, plot.height);
  if (s.error) return;
  const pad = 34;
  const xmap = (t) => pad + t * (plot.width - 2 * pad);
  const ymax = Math.max(...s.curve.map(p => p.content)) * 1.05;
  const ymap = (v) => plot.height - pad - (v / ymax) * (plot.height - 2 * pad);
  ctx.strokeStyle = "#c6ccd6";
  ctx.strokeRect(pad, pad, plot.width - 2 * pad, plot.height - 2 * pad);
  ctx.fillStyle = "#444";
  ctx.font = "12px system-ui";
  ctx.fillText("t →", plot.width - pad + 4, plot.height - pad + 4);
  ctx.fillText("0", pad - 10, plot.height - pad + 12);
  ctx.fillText("1", plot.width - pad - 4, plot.height - pad + 12);
  const line = (key, color) => {
    ctx.strokeStyle = color;
    ctx.lineWidth = 2;
    ctx.beginPath();
    s.curve.forEach((p, i) => {
      const [x, y] = [xmap(p.t), ymap(p[key])];
      i === 0 ? ctx.moveTo(x, y) : ctx.lineTo(x, y);
    });
    ctx.stroke();
  };
  line("content", "#19376e");
  line("g_lower", "#c83c28");
  ctx.fillStyle = "#19376e"; ctx.fillText("net content", pad + 8, pad + 16);
  ctx.fillStyle = "#c83c28"; ctx.fillText("G lower bound", pad + 8, pad + 32);
}

async function main() {
  await init();
  $("status").textContent = "";
  for (const [id, fn] of [
    ["cov-alpha", refreshCovering], ["cov-seed", refreshCovering], ["cov-block", refreshCovering],
    ["tc-ratio", refreshTwoCubes],
    ["fc-gap", refreshCantor], ["fc-stages", refreshCantor],
  ]) {
    $(id).addEventListener("input", fn);
  }
  refreshCovering();
  refreshTwoCubes();
  refreshCantor();
}

main().catch((e) => { $("status").textContent = `failed to load wasm: ${e}`; });
