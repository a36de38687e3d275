import init, { analyze_synthetic, sweep_thresholds, simulate_link } from './pkg/fogecg_wasm.js';

const $ = (id) => document.getElementById(id);
const fmt = (v, d = 2) => (v === null || v === undefined ? '-' : Number(v).toFixed(d));

function formValues(id) {
  const out = {};
  for (const input of $(id).querySelectorAll('input')) {
    out[input.name] = input.type === 'number' ? Number(input.value) : input.value;
  }
  return out;
}

function call(fn, request, outId) {
  try {
    return JSON.parse(fn(JSON.stringify(request)));
  } catch (e) {
    $(outId).innerHTML = `<p class="error">${e.message || e}</p>`;
    return null;
  }
}

function setupCanvas(canvas) {
  const ratio = window.devicePixelRatio || 1;
  const w = canvas.clientWidth, h = canvas.clientHeight;
  canvas.width = w * ratio;
  canvas.height = h * ratio;
  const ctx = canvas.getContext('2d');
  ctx.scale(ratio, ratio);
  ctx.clearRect(0, 0, w, h);
  return { ctx, w, h };
}

function table(head, rows, chosen = -1) {
  const th = head.map((h) => `<th>${h}</th>`).join('');
  const body = rows
    .map((r, i) => `<tr${i === chosen ? ' class="chosen"' : ''}>${r.map((c) => `<td>${c}</td>`).join('')}</tr>`)
    .join('');
  return `<table><tr>${th}</tr>${body}</table>`;
}

// Draws up to `seconds` of signal; returns the x/y mappers for overlays.
function plotSignal(canvas, values, fsHz, seconds, extra = []) {
  const { ctx, w, h } = setupCanvas(canvas);
  const n = Math.min(values.length, Math.round(seconds * fsHz));
  const all = values.slice(0, n).concat(...extra.map((e) => e.data.slice(0, n)));
  const lo = Math.min(...all), hi = Math.max(...all);
  const x = (i) => (i / (n - 1)) * (w - 10) + 5;
  const y = (v) => h - 10 - ((v - lo) / (hi - lo || 1)) * (h - 20);
  const line = (data, color) => {
    ctx.strokeStyle = color;
    ctx.beginPath();
    for (let i = 0; i < n; i++) (i ? ctx.lineTo : ctx.moveTo).call(ctx, x(i), y(data[i]));
    ctx.stroke();
  };
  line(values, '#1f4e79');
  for (const e of extra) line(e.data, e.color);
  return { ctx, x, y, n };
}

function runEcg() {
  const req = formValues('ecg-form');
  const res = call(analyze_synthetic, req, 'ecg-out');
  if (!res) return;
  const { ctx, x, y, n } = plotSignal($('ecg-canvas'), res.values, res.fs_hz, 8);
  ctx.fillStyle = '#c0392b';
  for (const p of res.peaks) if (p < n) ctx.fillRect(x(p) - 2, y(res.values[p]) - 2, 4, 4);
  ctx.fillStyle = '#999';
  for (const p of res.rejected) if (p < n) ctx.fillRect(x(p) - 2, y(res.values[p]) - 2, 4, 4);

  const h = res.hrv;
  let html = table(
    ['BPM', 'IBI ms', 'SDNN ms', 'RMSSD ms', 'pNN50 %', 'vital'],
    [[fmt(h.bpm, 1), fmt(h.ibi_ms, 1), fmt(h.sdnn_ms), fmt(h.rmssd_ms), fmt(h.pnn50_pct, 1), res.vital.state]],
  );
  if (res.verdict) {
    const rows = res.verdict.periods.map((p, i) => [i + 1, fmt(p.rr_ms, 1), fmt(p.pr_ms, 1), fmt(p.qrs_ms, 1), fmt(p.qt_ms, 1)]);
    html += table(['period', 'RR', 'PR', 'QRS', 'QT'], rows);
    const v = res.verdict.violations.map((v) => `${v.parameter} period ${v.period}: ${fmt(v.value, 1)} ms`).join('; ');
    html += `<p>Heart: <b>${res.verdict.status}</b>${v ? ` (${v})` : ''}. Low-confidence beats excluded: ${res.beats.filter((b) => b.confidence === 'low').length}.</p>`;
  } else {
    html += `<p class="error">No interval verdict: ${res.note}</p>`;
  }
  $('ecg-out').innerHTML = html;
}

function runSweep() {
  const res = call(sweep_thresholds, formValues('ecg-form'), 'sweep-out');
  if (!res) return;
  const chosen = res.candidates.findIndex((c) => c.threshold_pct === res.chosen_threshold_pct);
  const pct = chosen >= 0 ? res.candidates[chosen].threshold_pct : 0;
  const raised = res.moving_average.map((m) => m * (1 + pct / 100));
  plotSignal($('sweep-canvas'), res.values, res.fs_hz, 5, [
    { data: res.moving_average, color: '#aaa' },
    { data: raised, color: '#27ae60' },
  ]);
  const rows = res.candidates.map((c) => [
    c.threshold_pct, c.accepted.length, c.rejected.length, fmt(c.bpm, 1), fmt(c.rrsd_ms), c.plausible ? 'yes' : 'no',
  ]);
  $('sweep-out').innerHTML = table(['raise %', 'peaks', 'rejected', 'BPM', 'RR sd ms', 'plausible'], rows, chosen);
}

function parseOutages(text) {
  return text
    .split(',')
    .map((s) => s.trim())
    .filter(Boolean)
    .map((s) => s.split('-').map(Number));
}

function runLink() {
  const form = formValues('link-form');
  const req = { ...form, disconnects: parseOutages(form.disconnects) };
  const res = call(simulate_link, req, 'link-out');
  if (!res) return;
  const { ctx, w, h } = setupCanvas($('link-canvas'));
  const end = Math.max(form.duration_s * 1000, ...res.trace.map((t) => t.recv_t_ms || 0)) * 1.02;
  const x = (t) => 5 + (t / end) * (w - 10);
  ctx.fillStyle = '#fbe3e3';
  for (const o of res.outages_ms) ctx.fillRect(x(o.start_ms), 0, x(o.end_ms) - x(o.start_ms), h);
  const rowH = (h - 20) / Math.max(res.trace.length, 1);
  res.trace.forEach((t, i) => {
    const yy = 10 + i * rowH + rowH / 2;
    ctx.strokeStyle = t.recv_t_ms - t.send_t_ms > 5000 ? '#c0392b' : '#1f4e79';
    ctx.beginPath();
    ctx.moveTo(x(t.send_t_ms), yy);
    ctx.lineTo(x(t.recv_t_ms), yy);
    ctx.stroke();
    ctx.fillStyle = ctx.strokeStyle;
    ctx.fillRect(x(t.recv_t_ms) - 2, yy - 2, 4, 4);
  });
  const d = res.diff, b = res.bandwidth;
  $('link-out').innerHTML = table(
    ['batches sent', 'delivered', 'out-of-order arrivals', 'missing samples', 'identical', 'bytes/s', 'loss %'],
    [[d.sent_batches, d.delivered_batches, d.arrival_inversions, d.missing_samples, d.identical ? 'yes' : 'no', b ? fmt(b.bytes_per_s, 0) : '-', b ? fmt(b.loss_pct, 1) : '-']],
  );
}

await init();
$('ecg-run').addEventListener('click', runEcg);
$('sweep-run').addEventListener('click', runSweep);
$('link-run').addEventListener('click', runLink);
runEcg();
runSweep();
runLink();
