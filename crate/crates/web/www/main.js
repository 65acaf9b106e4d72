// Build the bindings first: wasm-pack build crates/web --target web --out-dir www/pkg
import init, { frontTrace, maxLaw, samplePopulation } from "./pkg/vsbbm_web.js";

const $ = (id) => document.getElementById(id);

function params() {
  return {
    kind: $("kind").value,
    alpha: Number($("alpha").value),
    horizon: Number($("horizon").value),
    dx: Number($("dx").value),
    seed: BigInt($("seed").value || 0),
  };
}

function plot(xs, ys, { bars = false, xlabel = "", ylabel = "" } = {}) {
  const c = $("plot");
  const g = c.getContext("2d");
  const pad = 40;
  g.clearRect(0, 0, c.width, c.height);
  const [x0, x1] = [Math.min(...xs), Math.max(...xs)];
  const [y0, y1] = [Math.min(0, ...ys), Math.max(...ys)];
  const sx = (x) => pad + ((x - x0) / (x1 - x0 || 1)) * (c.width - 2 * pad);
  const sy = (y) => c.height - pad - ((y - y0) / (y1 - y0 || 1)) * (c.height - 2 * pad);
  g.strokeStyle = "#999";
  g.strokeRect(pad, pad, c.width - 2 * pad, c.height - 2 * pad);
  g.fillStyle = "#222";
  g.fillText(x0.toFixed(2), pad, c.height - pad + 14);
  g.fillText(x1.toFixed(2), c.width - pad - 30, c.height - pad + 14);
  g.fillText(y1.toFixed(2), 2, pad + 4);
  g.fillText(y0.toFixed(2), 2, c.height - pad);
  g.fillText(xlabel, c.width / 2, c.height - 8);
  g.fillText(ylabel, 2, pad - 10);
  g.strokeStyle = "#1f5fa8";
  g.fillStyle = "#1f5fa8";
  if (bars) {
    const w = (c.width - 2 * pad) / xs.length;
    xs.forEach((x, i) => g.fillRect(sx(x), sy(ys[i]), Math.max(1, w - 1), sy(y0) - sy(ys[i])));
  } else {
    g.beginPath();
    xs.forEach((x, i) => (i ? g.lineTo(sx(x), sy(ys[i])) : g.moveTo(sx(x), sy(ys[i]))));
    g.stroke();
  }
}

function run(f) {
  $("status").textContent = "";
  try {
    f();
  } catch (e) {
    $("status").textContent = String(e.message ?? e);
  }
}

$("front").onclick = () => run(() => {
  const p = params();
  const r = JSON.parse(frontTrace(p.kind, p.alpha, p.horizon, p.dx));
  $("title").textContent = `Front ${r.profile}`;
  plot(r.times, r.fronts, { xlabel: "time", ylabel: "front" });
  $("caption").textContent = `X(${p.horizon}) = ${r.fronts.at(-1).toFixed(4)}`;
});

$("law").onclick = () => run(() => {
  const p = params();
  const r = JSON.parse(maxLaw(p.kind, p.alpha, p.horizon, p.dx, 300));
  $("title").textContent = `P(max <= x), ${r.profile}`;
  plot(r.x, r.cdf, { xlabel: "x", ylabel: "CDF" });
  $("caption").textContent = `median ${r.median?.toFixed(4)}`;
});

$("sample").onclick = () => run(() => {
  const p = params();
  const h = Math.min(p.horizon, 10);
  const r = JSON.parse(samplePopulation(p.kind, p.alpha, h, p.seed, 60));
  $("title").textContent = `Particles below the maximum, ${r.profile}`;
  plot(r.edges, r.counts, { bars: true, xlabel: "distance below max", ylabel: "count" });
  $("caption").textContent = `${r.population} particles, max ${r.max?.toFixed(4)}`;
});

await init();
