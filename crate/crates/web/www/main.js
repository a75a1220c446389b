import init, { Demo, heaviside_curve, arsinh_curve } from "./pkg/wavetopo_web.js";

const $ = (id) => document.getElementById(id);
let demo = null;
let running = false;

function drawLayout() {
  const w = demo.width(), h = demo.height();
  const gray = demo.raster();
  const img = new ImageData(w, h);
  for (let i = 0; i < gray.length; i++) {
    img.data.set([gray[i], gray[i], gray[i], 255], 4 * i);
  }
  const off = new OffscreenCanvas(w, h);
  off.getContext("2d").putImageData(img, 0, 0);
  const canvas = $("layout");
  const scale = Math.floor(Math.min(480 / w, 480 / h));
  canvas.width = w * scale;
  canvas.height = h * scale;
  const ctx = canvas.getContext("2d");
  ctx.imageSmoothingEnabled = false;
  ctx.drawImage(off, 0, 0, canvas.width, canvas.height);
  $("stats").textContent = demo.iteration() === 0 ? "iteration 0" :
    `iteration ${demo.iteration()}  J/J0 ${demo.objective_ratio().toFixed(4)}  ` +
    `volume ${demo.volume_fraction().toFixed(4)}  constraint ${demo.constraint().toFixed(4)}` +
    (demo.converged() ? "  converged" : "");
}

function reset() {
  running = false;
  $("run").textContent = "Run";
  if (demo) {
    demo.free();
    demo = null;
  }
  try {
    demo = new Demo($("preset").value, $("scheme").value, Number($("beta").value), 2);
    drawLayout();
  } catch (e) {
    $("stats").textContent = String(e);
  }
}

function advance(n) {
  try {
    const done = demo.step(n);
    drawLayout();
    return !done;
  } catch (e) {
    $("stats").textContent = String(e);
    return false;
  }
}

function loop() {
  if (!running) return;
  if (advance(1)) {
    requestAnimationFrame(loop);
  } else {
    running = false;
    $("run").textContent = "Run";
  }
}

function plot(id, ys, xlabel) {
  const c = $(id), ctx = c.getContext("2d");
  const lo = Math.min(...ys), hi = Math.max(...ys);
  ctx.clearRect(0, 0, c.width, c.height);
  ctx.strokeStyle = "#ccc";
  ctx.strokeRect(0, 0, c.width, c.height);
  ctx.beginPath();
  ys.forEach((y, i) => {
    const px = (i / (ys.length - 1)) * c.width;
    const py = c.height - 10 - ((y - lo) / (hi - lo || 1)) * (c.height - 20);
    i === 0 ? ctx.moveTo(px, py) : ctx.lineTo(px, py);
  });
  ctx.strokeStyle = "#036";
  ctx.stroke();
  ctx.fillStyle = "#333";
  ctx.fillText(xlabel, 6, 14);
}

function curves() {
  const beta = Number($("beta").value), gamma = Number($("gamma").value);
  $("beta-value").textContent = beta;
  $("gamma-value").textContent = gamma;
  plot("heaviside", Array.from(heaviside_curve(beta, 200)), "Θ(φ), φ ∈ [-1, 1]");
  plot("arsinh", Array.from(arsinh_curve(gamma, 4, 200)), "arsinh(γx)/γ, x ∈ [-4, 4]");
}

await init();
$("reset").onclick = reset;
$("preset").onchange = reset;
$("scheme").onchange = reset;
$("step").onclick = () => { running = false; advance(1); };
$("run").onclick = () => {
  running = !running;
  $("run").textContent = running ? "Pause" : "Run";
  loop();
};
$("beta").oninput = () => { curves(); };
$("beta").onchange = reset;
$("gamma").oninput = curves;
curves();
reset();
