import init, { simulateField, fieldSpectrum, randomCodes, augmentPoint } from "./pkg/spark_web.js";

const $ = (id) => document.getElementById(id);
const num = (id) => Number($(id).value);

let frames = null;
let size = 0;
let codes = null;
let codeSeed = 1;
let query = null;

function diverging(v, scale) {
  const t = Math.max(-1, Math.min(1, v / scale));
  return t >= 0 ? [255, 255 * (1 - t), 255 * (1 - t)] : [255 * (1 + t), 255 * (1 + t), 255];
}

function drawField(i) {
  const cv = $("field");
  const off = new OffscreenCanvas(size, size);
  const ctx = off.getContext("2d");
  const img = ctx.createImageData(size, size);
  const n = size * size;
  const f = frames.subarray(i * n, (i + 1) * n);
  let scale = 1e-12;
  for (const v of f) scale = Math.max(scale, Math.abs(v));
  for (let j = 0; j < n; j++) {
    const [r, g, b] = diverging(f[j], scale);
    img.data.set([r, g, b, 255], 4 * j);
  }
  ctx.putImageData(img, 0, 0);
  const c = cv.getContext("2d");
  c.imageSmoothingEnabled = false;
  c.drawImage(off, 0, 0, cv.width, cv.height);
  $("frame-label").textContent = `frame ${i}, max |w| = ${scale.toFixed(3)}`;
  drawSpectrum(f);
}

function drawSpectrum(field) {
  const e = fieldSpectrum(field, size);
  const cv = $("spectrum");
  const c = cv.getContext("2d");
  c.clearRect(0, 0, cv.width, cv.height);
  const logs = Array.from(e.slice(1), (v) => Math.log10(Math.max(v, 1e-30)));
  const hi = Math.max(...logs);
  const lo = Math.max(Math.min(...logs), hi - 12);
  c.strokeStyle = "#036";
  c.beginPath();
  logs.forEach((v, i) => {
    const x = 20 + (i / Math.max(1, logs.length - 1)) * (cv.width - 40);
    const y = cv.height - 20 - ((Math.max(v, lo) - lo) / Math.max(hi - lo, 1e-9)) * (cv.height - 40);
    i === 0 ? c.moveTo(x, y) : c.lineTo(x, y);
  });
  c.stroke();
  c.fillText(`log10 E(k), k = 1..${logs.length}`, 24, 14);
}

function runSimulation() {
  try {
    size = num("size");
    frames = simulateField(size, num("nu"), num("frames"), 10, BigInt(num("seed")));
    $("frame").max = num("frames") - 1;
    $("frame").value = 0;
    drawField(0);
    $("status").textContent = "";
  } catch (e) {
    $("status").textContent = String(e);
  }
}

const toCanvas = (v) => 200 + v * 80;
const fromCanvas = (p) => (p - 200) / 80;

function drawCodes() {
  const cv = $("codes");
  const c = cv.getContext("2d");
  c.clearRect(0, 0, cv.width, cv.height);
  c.fillStyle = "#888";
  for (let j = 0; j < codes.length / 2; j++) {
    c.beginPath();
    c.arc(toCanvas(codes[2 * j]), toCanvas(codes[2 * j + 1]), 4, 0, 2 * Math.PI);
    c.fill();
  }
  if (!query) return;
  try {
    const r = augmentPoint(codes, query[0], query[1], num("k"), num("tau"));
    const lines = [];
    for (let i = 4; i < r.length; i += 2) {
      const j = r[i];
      c.strokeStyle = `rgba(200,0,0,${0.2 + 0.8 * r[i + 1]})`;
      c.beginPath();
      c.moveTo(toCanvas(query[0]), toCanvas(query[1]));
      c.lineTo(toCanvas(codes[2 * j]), toCanvas(codes[2 * j + 1]));
      c.stroke();
      lines.push(`code ${j}: weight ${r[i + 1].toFixed(4)}`);
    }
    const dot = (x, y, color) => {
      c.fillStyle = color;
      c.beginPath();
      c.arc(toCanvas(x), toCanvas(y), 5, 0, 2 * Math.PI);
      c.fill();
    };
    dot(query[0], query[1], "#06c");
    dot(r[0], r[1], "#000");
    dot(r[2], r[3], "#c00");
    $("weights").textContent = lines.join("\n");
    $("status").textContent = "";
  } catch (e) {
    $("status").textContent = String(e);
  }
}

function reseed() {
  codes = randomCodes(num("m"), BigInt(codeSeed++));
  drawCodes();
}

await init();
$("status").textContent = "";
$("run").onclick = runSimulation;
$("frame").oninput = () => drawField(Number($("frame").value));
$("reseed").onclick = reseed;
for (const id of ["k", "tau"]) $(id).oninput = drawCodes;
$("m").onchange = reseed;
$("codes").onclick = (ev) => {
  const rect = ev.target.getBoundingClientRect();
  query = [fromCanvas(ev.clientX - rect.left), fromCanvas(ev.clientY - rect.top)];
  drawCodes();
};
reseed();
runSimulation();
