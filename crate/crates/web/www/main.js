import init, { bus_geometry, dps_sequences, region_stats } from "./pkg/vehchan_web.js";

const $ = (id) => document.getElementById(id);
const COLORS = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

function plotLines(canvas, series, xs) {
  const ctx = canvas.getContext("2d");
  const { width: w, height: h } = canvas;
  ctx.clearRect(0, 0, w, h);
  const all = series.flat().filter(Number.isFinite);
  let lo = Math.min(...all), hi = Math.max(...all);
  if (hi - lo < 1e-12) { lo -= 1; hi += 1; }
  const x0 = xs[0], x1 = xs[xs.length - 1];
  const px = (x) => 30 + ((x - x0) / (x1 - x0 || 1)) * (w - 40);
  const py = (y) => h - 20 - ((y - lo) / (hi - lo)) * (h - 30);
  ctx.strokeStyle = "#999";
  ctx.strokeRect(30, 10, w - 40, h - 30);
  ctx.fillStyle = "#333";
  ctx.fillText(hi.toFixed(1), 2, 14);
  ctx.fillText(lo.toFixed(1), 2, h - 20);
  series.forEach((ys, k) => {
    ctx.strokeStyle = COLORS[k % COLORS.length];
    ctx.beginPath();
    ys.forEach((y, i) => (i ? ctx.lineTo(px(xs[i]), py(y)) : ctx.moveTo(px(xs[i]), py(y))));
    ctx.stroke();
  });
}

// Bus geometry: world coordinates in meters, 8 px per meter, origin at the center.
const geo = { tx: [-25, 8], rx: [25, -8] };
const SCALE = 8;

function drawGeometry() {
  const c = $("geo"), ctx = c.getContext("2d");
  const toPx = ([x, y]) => [c.width / 2 + x * SCALE, c.height / 2 - y * SCALE];
  const r = JSON.parse(bus_geometry(geo.tx[0], geo.tx[1], geo.rx[0], geo.rx[1],
    Number($("heading").value), Number($("bus-len").value), Number($("bus-wid").value)));
  ctx.clearRect(0, 0, c.width, c.height);
  if (r.error) { $("geo-out").textContent = r.error; return; }
  ctx.fillStyle = r.olos ? "#f3c1c1" : "#d9e4f2";
  ctx.beginPath();
  r.corners.forEach((p, i) => (i ? ctx.lineTo(...toPx(p)) : ctx.moveTo(...toPx(p))));
  ctx.closePath();
  ctx.fill();
  ctx.strokeStyle = "#555";
  ctx.stroke();
  ctx.strokeStyle = r.olos ? "#d62728" : "#2ca02c";
  ctx.beginPath(); ctx.moveTo(...toPx(geo.tx)); ctx.lineTo(...toPx(geo.rx)); ctx.stroke();
  if (!r.olos) {
    ctx.strokeStyle = "#1f77b4";
    ctx.setLineDash([4, 4]);
    ctx.beginPath(); ctx.moveTo(...toPx(geo.tx)); ctx.lineTo(...toPx(r.md_point)); ctx.lineTo(...toPx(geo.rx)); ctx.stroke();
    ctx.setLineDash([]);
  }
  for (const [p, label] of [[geo.tx, "Tx"], [geo.rx, "Rx"]]) {
    const [x, y] = toPx(p);
    ctx.fillStyle = "#000";
    ctx.fillRect(x - 3, y - 3, 6, 6);
    ctx.fillText(label, x + 5, y - 5);
  }
  $("geo-out").textContent =
    `case ${r.case}, x_MD = ${r.x_md.toFixed(2)} m, LOS ${r.d_los.toFixed(1)} m` +
    (r.olos ? `\nobstructed: +${r.extra_loss_db.toFixed(1)} dB, exponent increment ${r.alpha.toFixed(3)}` : "\nLOS clear");
}

function onGeoClick(ev) {
  const c = $("geo"), rect = c.getBoundingClientRect();
  const p = [(ev.clientX - rect.left - c.width / 2) / SCALE, (c.height / 2 - (ev.clientY - rect.top)) / SCALE];
  if (ev.shiftKey) geo.rx = p; else geo.tx = p;
  drawGeometry();
}

function drawDps() {
  const len = Number($("dps-len").value);
  const r = JSON.parse(dps_sequences(len, Number($("dps-w").value), Number($("dps-count").value)));
  if (r.error) { $("dps-out").textContent = r.error; return; }
  plotLines($("dps"), r.sequences, [...Array(len).keys()]);
  $("dps-out").textContent = "concentrations: " + r.concentrations.map((l) => l.toFixed(6)).join(", ");
}

function drawLsf() {
  const vals = $("paths").value.trim().split(/\s+/).map(Number);
  const flat = [];
  for (let i = 0; i + 2 < vals.length; i += 3) flat.push(vals[i] * 1e-9, vals[i + 1], vals[i + 2]);
  const [m, q] = [240, 601];
  const r = JSON.parse(region_stats(new Float64Array(flat), m, q, 500e-6, 250e3, Number($("snr").value)));
  if (r.error) { $("lsf-out").textContent = r.error; return; }
  const delays = r.pdp_db.map((_, i) => i * r.tau_s * 1e9);
  const dopplers = r.dsd_db.map((_, i) => (i - m / 2) * r.nu_s);
  plotLines($("pdp"), [r.pdp_db, r.pdp_db.map(() => r.noise_floor_db)], delays);
  plotLines($("dsd"), [r.dsd_db], dopplers);
  const f = (x, d) => (x === null ? "n/a" : x.toFixed(d));
  $("lsf-out").textContent =
    `mean delay ${f(r.mean_delay_ns, 1)} ns, RMS delay spread ${f(r.rms_delay_ns, 1)} ns\n` +
    `mean Doppler ${f(r.mean_doppler_hz, 1)} Hz, RMS Doppler spread ${f(r.rms_doppler_hz, 1)} Hz`;
}

await init();
$("geo").addEventListener("click", onGeoClick);
for (const id of ["heading", "bus-len", "bus-wid"]) $(id).addEventListener("input", drawGeometry);
$("dps-go").addEventListener("click", drawDps);
$("lsf-go").addEventListener("click", drawLsf);
drawGeometry();
drawDps();
drawLsf();
