import init, { simulate, etcFrontier, stmCurve } from "./pkg/triggerkit_web.js";

const $ = (id) => document.getElementById(id);
const num = (id) => parseFloat($(id).value);

function axes(canvas, xs, ys, opts = {}) {
  const ctx = canvas.getContext("2d");
  const w = canvas.width, h = canvas.height, pad = { l: 60, r: 12, t: 12, b: 26 };
  ctx.clearRect(0, 0, w, h);
  const x0 = opts.x0 ?? Math.min(...xs), x1 = opts.x1 ?? Math.max(...xs);
  let y0 = opts.y0 ?? Math.min(0, ...ys), y1 = opts.y1 ?? Math.max(...ys);
  if (!(y1 > y0)) { y1 = y0 + 1; }
  const px = (x) => pad.l + (x - x0) / (x1 - x0 || 1) * (w - pad.l - pad.r);
  const py = (y) => h - pad.b - (y - y0) / (y1 - y0) * (h - pad.t - pad.b);
  ctx.strokeStyle = "#888";
  ctx.strokeRect(pad.l, pad.t, w - pad.l - pad.r, h - pad.t - pad.b);
  ctx.fillStyle = "#333";
  ctx.font = "11px sans-serif";
  for (let i = 0; i <= 4; i++) {
    const fx = x0 + (x1 - x0) * i / 4, fy = y0 + (y1 - y0) * i / 4;
    ctx.textAlign = "center";
    ctx.fillText(fx.toPrecision(3), px(fx), h - 8);
    ctx.textAlign = "right";
    ctx.fillText(fy.toPrecision(3), pad.l - 4, py(fy) + 4);
  }
  if (opts.label) { ctx.textAlign = "left"; ctx.fillText(opts.label, pad.l + 6, pad.t + 14); }
  return { ctx, px, py };
}

function line({ ctx, px, py }, xs, ys, color) {
  ctx.strokeStyle = color;
  ctx.beginPath();
  xs.forEach((x, i) => (i ? ctx.lineTo(px(x), py(ys[i])) : ctx.moveTo(px(x), py(ys[i]))));
  ctx.stroke();
}

function runSimulation() {
  const t0 = performance.now();
  try {
    const v = simulate($("sim-kind").value, num("sim-g"), num("sim-r"), num("sim-eps"), num("sim-param"), num("sim-tend"));
    const t = v.times, n = v.norms, ev = v.events;
    line(axes($("sim-norm"), t, n, { label: "‖x(t)‖" }), t, n, "#1f77b4");
    const gaps = Array.from(ev.slice(1), (e, i) => e - ev[i]);
    const g = axes($("sim-gaps"), t, gaps, { x0: t[0], x1: t[t.length - 1], label: "t_{k+1} − t_k" });
    g.ctx.strokeStyle = "#555";
    gaps.forEach((d, i) => { g.ctx.beginPath(); g.ctx.moveTo(g.px(ev[i + 1]), g.py(0)); g.ctx.lineTo(g.px(ev[i + 1]), g.py(d)); g.ctx.stroke(); });
    const minGap = gaps.length ? Math.min(...gaps) : NaN;
    $("sim-out").textContent = `${ev.length} transmissions, shortest gap ${minGap.toPrecision(4)}, final norm ${n[n.length - 1].toExponential(3)} (${(performance.now() - t0).toFixed(0)} ms)`;
  } catch (e) {
    $("sim-out").textContent = `error: ${e.message ?? e}`;
  }
}

function runFrontier() {
  const a = num("fr-from"), b = num("fr-to"), k = 40;
  const taus = Float64Array.from({ length: k }, (_, i) => a + (b - a) * i / (k - 1));
  try {
    const e1 = etcFrontier(1, taus), e2 = etcFrontier(2, taus);
    const all = [...e1, ...e2];
    const ax = axes($("fr-plot"), taus, all, { label: "ε bound: G = 1 (blue), G = 2 (red)" });
    line(ax, taus, e1, "#1f77b4");
    line(ax, taus, e2, "#d62728");
    const gap = Math.max(...Array.from(e1, (v, i) => Math.abs(v - e2[i]) / v));
    $("fr-out").textContent = `ε(${a}) = ${e1[0].toFixed(5)} for G = 1, ${e2[0].toFixed(5)} for G = 2; largest relative gap ${(100 * gap).toFixed(1)}%`;
  } catch (e) {
    $("fr-out").textContent = `error: ${e.message ?? e}`;
  }
}

function runStm() {
  const r = num("stm-r"), eps = num("stm-eps"), tauMax = num("stm-tau"), k = 120;
  const hi = Math.max(2 * tauMax, 1.5);
  const taus = Float64Array.from({ length: k }, (_, i) => hi * (i + 1) / k);
  try {
    const out = stmCurve(r, eps, tauMax, taus);
    const margin = out[out.length - 1];
    const vals = out.slice(0, k);
    const level = 1 - 1.92 * eps;
    const ax = axes($("stm-plot"), taus, [...vals, level], { y0: 0, label: "ϖ(τ) and the level 1 − Γ‖B‖ε/γ" });
    line(ax, taus, vals, "#1f77b4");
    line(ax, [taus[0], hi], [level, level], "#d62728");
    ax.ctx.strokeStyle = "#2ca02c";
    ax.ctx.beginPath(); ax.ctx.moveTo(ax.px(tauMax), ax.py(0)); ax.ctx.lineTo(ax.px(tauMax), ax.py(level)); ax.ctx.stroke();
    $("stm-out").textContent = `margin at τ_max = ${tauMax}: ${margin.toFixed(5)} (${margin > 0 ? "certified" : "not certified"})`;
  } catch (e) {
    $("stm-out").textContent = `error: ${e.message ?? e}`;
  }
}

await init();
$("sim-run").onclick = runSimulation;
$("fr-run").onclick = runFrontier;
$("stm-run").onclick = runStm;
runStm();
runFrontier();
