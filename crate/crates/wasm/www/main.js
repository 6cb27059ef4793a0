import init, { Demo, sheet_surface } from "./pkg/epsteer_wasm.js";

const $ = (id) => document.getElementById(id);
const COLORS = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];
const X_RANGE = [-1.5, 1.5];
const Y_RANGE = [-0.5, 2.5];

let demo = null;

function report(id, text, failed = false) {
  const el = $(id);
  el.textContent = text;
  el.classList.toggle("error", failed);
}

function guarded(id, fn) {
  return () => {
    try {
      fn();
    } catch (e) {
      report(id, String(e.message ?? e), true);
    }
  };
}

// Line plot of named series sharing an x array.
function linePlot(canvas, xs, series, { yMin = 0, yMax = 1, xLabel = "t" } = {}) {
  const ctx = canvas.getContext("2d");
  const { width: w, height: h } = canvas;
  const pad = { l: 40, r: 10, t: 10, b: 28 };
  const xMax = Math.max(...xs, 1e-9);
  const sx = (x) => pad.l + (x / xMax) * (w - pad.l - pad.r);
  const sy = (y) => h - pad.b - ((y - yMin) / (yMax - yMin)) * (h - pad.t - pad.b);
  ctx.clearRect(0, 0, w, h);
  ctx.strokeStyle = "#999";
  ctx.strokeRect(pad.l, pad.t, w - pad.l - pad.r, h - pad.t - pad.b);
  ctx.fillStyle = "#444";
  ctx.font = "11px sans-serif";
  ctx.fillText(yMax.toFixed(2), 4, pad.t + 8);
  ctx.fillText(yMin.toFixed(2), 4, h - pad.b);
  ctx.fillText(`${xLabel} = ${xMax.toFixed(3)}`, w - 90, h - 8);
  series.forEach(({ name, ys }, k) => {
    ctx.strokeStyle = COLORS[k % COLORS.length];
    ctx.beginPath();
    ys.forEach((y, i) => (i ? ctx.lineTo(sx(xs[i]), sy(y)) : ctx.moveTo(sx(xs[i]), sy(y))));
    ctx.stroke();
    ctx.fillStyle = ctx.strokeStyle;
    ctx.fillText(name, pad.l + 8 + 110 * k, h - 8);
  });
}

function barPlot(canvas, values) {
  const ctx = canvas.getContext("2d");
  const { width: w, height: h } = canvas;
  const max = Math.max(...values, 1e-9);
  const bw = (w - 20) / values.length;
  ctx.clearRect(0, 0, w, h);
  ctx.fillStyle = "#1f77b4";
  values.forEach((v, j) => {
    const bh = (v / max) * (h - 30);
    ctx.fillRect(10 + j * bw, h - 20 - bh, Math.max(bw - 1, 1), bh);
  });
  ctx.fillStyle = "#444";
  ctx.font = "11px sans-serif";
  ctx.fillText(`dwell per interval, max ${max.toFixed(3)}`, 10, h - 5);
}

function toCanvas(canvas, x, y) {
  const u = (x - X_RANGE[0]) / (X_RANGE[1] - X_RANGE[0]);
  const v = (y - Y_RANGE[0]) / (Y_RANGE[1] - Y_RANGE[0]);
  return [u * canvas.width, (1 - v) * canvas.height];
}

function drawLoop(canvas) {
  if (!demo) return;
  const ctx = canvas.getContext("2d");
  const pts = demo.loopPoints();
  ctx.strokeStyle = "#fff";
  ctx.lineWidth = 2;
  ctx.beginPath();
  for (let i = 0; i < pts.length; i += 2) {
    const [cx, cy] = toCanvas(canvas, pts[i], pts[i + 1]);
    i ? ctx.lineTo(cx, cy) : ctx.moveTo(cx, cy);
  }
  ctx.stroke();
  ctx.lineWidth = 1;
  const [ex, ey] = toCanvas(canvas, 0, 1);
  ctx.fillStyle = "#000";
  ctx.beginPath();
  ctx.arc(ex, ey, 4, 0, 2 * Math.PI);
  ctx.fill();
}

function drawSheets() {
  const n = Number($("grid").value);
  // An even count keeps the grid off the exceptional point at (0, 1).
  const m = n % 2 ? n + 1 : n;
  const vals = sheet_surface(m, m, X_RANGE[0], X_RANGE[1], Y_RANGE[0], Y_RANGE[1]);
  const offset = $("part").value === "im" ? 3 : 2;
  const field = [];
  for (let i = 0; i < vals.length; i += 6) field.push(vals[i + offset]);
  const lo = Math.min(...field);
  const hi = Math.max(...field);
  const canvas = $("sheet-canvas");
  const ctx = canvas.getContext("2d");
  const cw = canvas.width / m;
  const ch = canvas.height / m;
  field.forEach((f, k) => {
    const ix = k % m;
    const iy = Math.floor(k / m);
    const s = (f - lo) / (hi - lo || 1);
    ctx.fillStyle = `hsl(${240 - 240 * s}, 70%, 50%)`;
    ctx.fillRect(ix * cw, canvas.height - (iy + 1) * ch, cw + 1, ch + 1);
  });
  drawLoop(canvas);
  report("sheet-status", `${m}×${m} nodes, upper sheet ${$("part").value} ω in [${lo.toFixed(3)}, ${hi.toFixed(3)}]`);
}

function simulate() {
  const trace = JSON.parse(
    demo.simulate($("method").value, Number($("value").value), $("direction").value, $("mode").value),
  );
  const s = trace.samples;
  linePlot($("sim-canvas"), s.map((r) => r.t), [
    { name: "ζ_A", ys: s.map((r) => r.zeta_A) },
    { name: "ζ_B", ys: s.map((r) => r.zeta_B) },
    { name: "P₁", ys: s.map((r) => r.p1) },
  ]);
  const end = s[s.length - 1];
  report(
    "sim-status",
    `${trace.method} ${trace.direction} ${trace.mode}: total time ${trace.total_time.toFixed(4)}, ` +
      `end ζ_A ${end.zeta_A.toFixed(4)}, ζ_B ${end.zeta_B.toFixed(4)}`,
  );
}

function optimize() {
  report("opt-status", "optimizing…");
  // Let the status paint before the synchronous search.
  setTimeout(
    guarded("opt-status", () => {
      const r = JSON.parse(
        demo.optimize(
          $("targets").value,
          Number($("purity").value),
          Number($("generations").value),
          Number($("seed").value),
        ),
      );
      const series = r.traces.map((t) => {
        const target = t.label.endsWith("_B") ? "zeta_B" : "zeta_A";
        return { name: t.label, ys: t.samples.map((x) => x[target]), xs: t.samples.map((x) => x.j) };
      });
      linePlot($("opt-canvas"), series[0].xs, series, { xLabel: "j" });
      barPlot($("dwell-canvas"), r.dwells);
      const achieved = Object.entries(r.achieved)
        .map(([k, v]) => `${k} ${v.toFixed(4)}`)
        .join(", ");
      report("opt-status", `feasible ${r.feasible}, total time ${r.total_time.toFixed(4)}\n${achieved}`);
    }),
    10,
  );
}

function rebuild() {
  demo?.free();
  demo = new Demo(Number($("radius").value), Number($("intervals").value));
  report("loop-status", `loop ready: ${demo.loopPoints().length / 2} points`);
}

$("method").addEventListener("change", () => {
  $("value").value = $("method").value === "stable" ? "0.9" : "4";
});
$("rebuild").addEventListener("click", guarded("loop-status", rebuild));
$("sheets").addEventListener("click", guarded("sheet-status", drawSheets));
$("simulate").addEventListener("click", guarded("sim-status", simulate));
$("optimize").addEventListener("click", optimize);

await init();
guarded("loop-status", rebuild)();
guarded("sheet-status", drawSheets)();
