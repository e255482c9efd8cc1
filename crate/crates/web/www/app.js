import init, { analyzePdf, varianceCurve, samplePdf, Model } from "./pkg/pdfsift_web.js";

const $ = (id) => document.getElementById(id);
const num = (id) => Number($(id).value);

let current = null; // { name, bytes }
let model = null;

// Yield so status text paints before a long synchronous call.
const nextFrame = () => new Promise((r) => requestAnimationFrame(() => setTimeout(r, 0)));

function fmt(v) {
  return Number.isInteger(v) ? String(v) : v.toPrecision(6);
}

function showFeatures(features) {
  const rows = Object.entries(features)
    .map(([k, v]) => `<tr><td>${k}</td><td>${fmt(v)}</td></tr>`)
    .join("");
  $("features").innerHTML = rows;
}

function inspect(name, bytes) {
  current = { name, bytes };
  const r = JSON.parse(analyzePdf(bytes));
  const { features, ...rest } = r;
  $("file-status").textContent = `${name}: ${bytes.length} bytes`;
  $("summary").textContent = JSON.stringify(rest, null, 2);
  showFeatures(features);
  $("t-score").disabled = !model;
}

function plot(canvas, series, { yMin = 0, yMax = 1, marks = [] } = {}) {
  const ctx = canvas.getContext("2d");
  const { width: w, height: h } = canvas;
  const pad = 36;
  ctx.clearRect(0, 0, w, h);
  ctx.font = "11px system-ui";
  ctx.strokeStyle = "#999";
  ctx.strokeRect(pad, 8, w - pad - 8, h - pad - 8);
  const n = Math.max(...series.map((s) => s.values.length));
  const x = (i) => pad + ((w - pad - 8) * i) / Math.max(n - 1, 1);
  const y = (v) => 8 + (h - pad - 8) * (1 - (v - yMin) / (yMax - yMin || 1));
  ctx.fillStyle = "#666";
  ctx.fillText(fmt(yMax), 2, 16);
  ctx.fillText(fmt(yMin), 2, h - pad);
  ctx.fillText("1", pad, h - pad + 14);
  ctx.fillText(String(n), w - 20, h - pad + 14);
  for (const m of marks) {
    ctx.strokeStyle = "#bbb";
    ctx.setLineDash([4, 4]);
    ctx.beginPath();
    ctx.moveTo(pad, y(m));
    ctx.lineTo(w - 8, y(m));
    ctx.stroke();
    ctx.setLineDash([]);
  }
  let legend = pad + 6;
  for (const s of series) {
    ctx.strokeStyle = s.color;
    ctx.beginPath();
    s.values.forEach((v, i) => (i ? ctx.lineTo(x(i), y(v)) : ctx.moveTo(x(i), y(v))));
    ctx.stroke();
    ctx.fillStyle = s.color;
    ctx.fillText(s.label, legend, h - 6);
    legend += ctx.measureText(s.label).width + 16;
  }
}

async function runVariance() {
  $("v-status").textContent = "generating corpus and fitting PCA...";
  await nextFrame();
  try {
    const r = JSON.parse(varianceCurve(num("v-benign"), num("v-malicious"), num("v-seed"), num("v-overlap")));
    plot($("v-chart"), [{ label: "cumulative explained variance vs components", values: r.curve, color: "#1f5fa8" }], {
      marks: [0.9, 0.99],
    });
    $("v-status").textContent =
      `${r.curve.length} components; 90% of variance needs ${r.auto_90}, 99% needs ${r.auto_99}`;
  } catch (e) {
    $("v-status").textContent = String(e);
  }
}

async function runTraining() {
  $("t-status").textContent = "generating corpus and training...";
  await nextFrame();
  try {
    if (model) model.free();
    model = Model.train(
      num("t-benign"), num("t-malicious"), num("t-seed"), num("t-overlap"),
      $("t-components").value.trim(), num("t-epochs"),
    );
    const s = JSON.parse(model.summary());
    const { history, ...rest } = s;
    $("t-summary").textContent = JSON.stringify(rest, null, 2);
    const losses = history.map((r) => r[1]);
    plot($("t-chart"), [
      { label: "train loss", values: losses, color: "#b05a00" },
      { label: "train accuracy", values: history.map((r) => r[2]), color: "#1f5fa8" },
      { label: "validation accuracy", values: history.map((r) => r[3]), color: "#1b7a1b" },
    ], { yMax: Math.max(1, ...losses) });
    $("t-status").textContent = `trained with P=${s.components}, best epoch ${s.best_epoch}`;
    $("t-score").disabled = !current;
    $("t-download").disabled = false;
  } catch (e) {
    model = null;
    $("t-status").textContent = String(e);
  }
}

function scoreCurrent() {
  if (!model || !current) return;
  const r = JSON.parse(model.score(current.bytes));
  $("t-score-out").innerHTML =
    `${current.name}: probability ${fmt(r.probability)} ` +
    `<span class="verdict-${r.verdict}">${r.verdict}</span> (threshold ${r.threshold})`;
}

function downloadBundle() {
  const blob = new Blob([model.bundleText()], { type: "text/plain" });
  const a = document.createElement("a");
  a.href = URL.createObjectURL(blob);
  a.download = "pdfsift.model";
  a.click();
  URL.revokeObjectURL(a.href);
}

await init();

$("file").addEventListener("change", async (ev) => {
  const f = ev.target.files[0];
  if (f) inspect(f.name, new Uint8Array(await f.arrayBuffer()));
});
let sampleSeed = 0;
$("sample-benign").addEventListener("click", () => inspect(`benign sample ${sampleSeed}`, samplePdf(false, sampleSeed++)));
$("sample-malicious").addEventListener("click", () => inspect(`malicious sample ${sampleSeed}`, samplePdf(true, sampleSeed++)));
$("v-run").addEventListener("click", runVariance);
$("t-run").addEventListener("click", runTraining);
$("t-score").addEventListener("click", scoreCurrent);
$("t-download").addEventListener("click", downloadBundle);

inspect("malicious sample", samplePdf(true, 0));
