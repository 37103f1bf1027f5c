import init, { curve_flow, shrinker_residual, lagrangian_angle_grid } from "./pkg/codimflow_web.js";

const $ = (id) => document.getElementById(id);
const num = (id) => parseFloat($(id).value);

function guard(out, f) {
  try {
    f();
  } catch (e) {
    out.textContent = `error: ${e.message ?? e}`;
  }
}

function drawCurves(canvas, frames) {
  const ctx = canvas.getContext("2d");
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  let r = 0;
  for (const f of frames) for (const v of f.xy) r = Math.max(r, Math.abs(v));
  const s = (0.45 * canvas.width) / (r || 1);
  const cx = canvas.width / 2, cy = canvas.height / 2;
  frames.forEach((f, i) => {
    ctx.strokeStyle = `hsl(${220 - (200 * i) / frames.length}, 70%, 45%)`;
    ctx.beginPath();
    for (let k = 0; k <= f.xy.length / 2; k++) {
      const j = (k % (f.xy.length / 2)) * 2;
      const x = cx + s * f.xy[j], y = cy - s * f.xy[j + 1];
      k === 0 ? ctx.moveTo(x, y) : ctx.lineTo(x, y);
    }
    ctx.stroke();
  });
}

function drawField(canvas, n, values) {
  const ctx = canvas.getContext("2d");
  const img = ctx.createImageData(n, n);
  const lo = Math.min(...values), hi = Math.max(...values);
  values.forEach((v, i) => {
    const u = hi > lo ? (v - lo) / (hi - lo) : 0.5;
    img.data.set([255 * u, 80, 255 * (1 - u), 255], 4 * i);
  });
  const tmp = document.createElement("canvas");
  tmp.width = tmp.height = n;
  tmp.getContext("2d").putImageData(img, 0, 0);
  ctx.imageSmoothingEnabled = false;
  ctx.drawImage(tmp, 0, 0, canvas.width, canvas.height);
  return [lo, hi];
}

await init();

$("curve-run").onclick = () => guard($("curve-out"), () => {
  const r = JSON.parse(curve_flow($("curve").value, num("curve-param"), num("curve-n") | 0, 24));
  drawCurves($("curve-canvas"), r.frames);
  $("curve-out").textContent =
    `stopped: ${r.termination} after ${r.steps} steps\nT̂ ≈ ${r.t_hat?.toFixed(5)}\nblow-up: ${r.classification}`;
});

$("shrink-run").onclick = () => guard($("shrink-out"), () => {
  const r = JSON.parse(shrinker_residual($("shrink-name").value, num("shrink-r")));
  $("shrink-out").textContent = `|H + F⊥|  max ${r.linf.toExponential(3)}   rms ${r.l2.toExponential(3)}`;
});

$("lag-run").onclick = () => guard($("lag-out"), () => {
  const r = JSON.parse(lagrangian_angle_grid(num("lag-s1"), num("lag-s2"), num("lag-amp"), 64));
  const [lo, hi] = drawField($("lag-canvas"), r.n, r.alpha);
  $("lag-out").textContent =
    `α ∈ [${lo.toFixed(4)}, ${hi.toFixed(4)}]\ndet(I + i Hess u) vs e^{iα}√det g: ${r.identity_defect.toExponential(2)}`;
});
