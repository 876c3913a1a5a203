// Build the bindings first:
//   cargo build --release --target wasm32-unknown-unknown -p vqstyle-web
//   wasm-bindgen --target web --out-dir crates/web/www/pkg \
//     target/wasm32-unknown-unknown/release/vqstyle_web.wasm
import init, { Demo } from "./pkg/vqstyle_web.js";

const $ = (id) => document.getElementById(id);
const grid = $("grid");
const bars = $("bars");
let demo = null;
let tokens = null;

function status(text, error = false) {
  $("status").textContent = text;
  $("status").className = error ? "err" : "";
}

function color(token, size) {
  return `hsl(${(token / size) * 300}, 65%, 55%)`;
}

function drawGrid() {
  const ctx = grid.getContext("2d");
  const h = demo.height(), w = demo.width(), z = demo.codebookSize();
  const cell = grid.width / Math.max(h, w);
  const labels = demo.semantics();
  ctx.clearRect(0, 0, grid.width, grid.height);
  for (let r = 0; r < h; r++) {
    for (let c = 0; c < w; c++) {
      const i = r * w + c;
      ctx.fillStyle = tokens ? color(tokens[i], z) : `hsl(0, 0%, ${85 - 25 * labels[i]}%)`;
      ctx.fillRect(c * cell, r * cell, cell, cell);
    }
  }
  // region boundaries
  ctx.strokeStyle = "#000";
  ctx.lineWidth = 2;
  for (let r = 1; r < h; r++) {
    for (let c = 0; c < w; c++) {
      if (labels[r * w + c] !== labels[(r - 1) * w + c]) {
        ctx.beginPath();
        ctx.moveTo(c * cell, r * cell);
        ctx.lineTo((c + 1) * cell, r * cell);
        ctx.stroke();
      }
    }
  }
}

function drawBars(view) {
  const ctx = bars.getContext("2d");
  ctx.clearRect(0, 0, bars.width, bars.height);
  const rows = [["prior", view.prior], ["likelihood", view.likelihood], ["posterior", view.posterior]];
  const z = view.prior.length;
  const band = bars.height / rows.length;
  const bw = (bars.width - 80) / z;
  ctx.font = "12px system-ui";
  rows.forEach(([name, values], k) => {
    const top = k * band + 8, base = (k + 1) * band - 14;
    const max = Math.max(...values);
    ctx.fillStyle = "#222";
    ctx.fillText(name, 0, top + 10);
    values.forEach((v, t) => {
      const hgt = max > 0 ? (v / max) * (base - top) : 0;
      ctx.fillStyle = color(t, z);
      ctx.fillRect(80 + t * bw, base - hgt, Math.max(bw - 1, 1), hgt);
      if (t === view.token) {
        ctx.strokeStyle = "#000";
        ctx.strokeRect(80 + t * bw, top, Math.max(bw - 1, 1), base - top);
      }
    });
  });
  ctx.fillStyle = "#222";
  ctx.fillText(`cell (${view.row}, ${view.col}), label ${view.label}, drawn token ${view.token}`, 0, bars.height - 2);
}

function fillStyles() {
  const names = demo.styleNames();
  const option = (value, text) => `<option value="${value}">${text}</option>`;
  $("style").innerHTML = option("", "none (prior only)") + names.map((n, i) => option(i, n)).join("");
  $("style").value = "0";
  $("mix-selects").innerHTML = Array.from({ length: demo.labelCount() }, (_, j) =>
    `<label>Region ${j} <select id="mix-${j}">${names.map((n, i) => option(i, n)).join("")}</select></label>`
  ).join("");
  for (let j = 0; j < demo.labelCount(); j++) $(`mix-${j}`).value = String(j % names.length);
}

function guarded(fn) {
  return (...args) => {
    try {
      fn(...args);
    } catch (e) {
      status(String(e), true);
    }
  };
}

function afterDraw(result, what) {
  tokens = result;
  drawGrid();
  bars.getContext("2d").clearRect(0, 0, bars.width, bars.height);
  status(`${what}; closest style by histogram: ${demo.closestStyle()}. Click a cell to inspect.`);
}

const params = () => ({ seed: Number($("seed").value) >>> 0, lambda: Number($("lambda").value) });

$("build").onclick = guarded(() => {
  status("Building world and training prior…");
  setTimeout(guarded(() => {
    const t0 = performance.now();
    demo?.free();
    demo = new Demo($("preset").value, Number($("world-seed").value) >>> 0);
    tokens = null;
    fillStyles();
    drawGrid();
    for (const id of ["sample", "mix", "layout"]) $(id).disabled = false;
    status(`Ready in ${((performance.now() - t0) / 1000).toFixed(1)} s: ${demo.height()}x${demo.width()} grids, ${demo.codebookSize()} tokens.`);
  }), 10);
});

$("layout").onclick = guarded(() => {
  demo.newLayout((Math.random() * 2 ** 32) >>> 0);
  tokens = null;
  drawGrid();
  status("New layout.");
});

$("sample").onclick = guarded(() => {
  const { seed, lambda } = params();
  const value = $("style").value;
  const style = value === "" ? undefined : Number(value);
  const label = style === undefined ? "unguided" : `guided toward ${demo.styleNames()[style]}, λ = ${lambda}`;
  afterDraw(demo.sample(style, lambda, seed), label);
});

$("mix").onclick = guarded(() => {
  const { seed, lambda } = params();
  const picks = Array.from({ length: demo.labelCount() }, (_, j) => Number($(`mix-${j}`).value));
  const names = demo.styleNames();
  afterDraw(demo.mix(Uint32Array.from(picks), lambda, seed), `regions from ${picks.map((i) => names[i]).join(" / ")}`);
});

grid.onclick = guarded((ev) => {
  if (!tokens) return;
  const rect = grid.getBoundingClientRect();
  const cell = grid.width / Math.max(demo.height(), demo.width());
  const col = Math.floor(((ev.clientX - rect.left) * (grid.width / rect.width)) / cell);
  const row = Math.floor(((ev.clientY - rect.top) * (grid.height / rect.height)) / cell);
  drawBars(JSON.parse(demo.inspect(row, col)));
});

$("lambda").oninput = () => ($("lambda-out").value = $("lambda").value);

await init();
status("Press Build to create a world.");
