import init, { Demo, Layer } from "./pkg/qmgp_wasm.js";

const $ = (id) => document.getElementById(id);
const num = (id) => Number($(id).value);
let demo = null;

// five-stop approximation of viridis
const STOPS = [[68, 1, 84], [59, 82, 139], [33, 145, 140], [94, 201, 98], [253, 231, 37]];

function color(u) {
  const x = Math.min(Math.max(u, 0), 1) * (STOPS.length - 1);
  const k = Math.min(Math.floor(x), STOPS.length - 2);
  const f = x - k;
  return STOPS[k].map((a, j) => Math.round(a + f * (STOPS[k + 1][j] - a)));
}

function draw(id, values, lo, hi) {
  const canvas = $(id);
  const nx = demo.nx(), ny = demo.ny();
  canvas.width = ny;
  canvas.height = nx;
  const ctx = canvas.getContext("2d");
  const img = ctx.createImageData(ny, nx);
  for (let i = 0; i < nx; i++) {
    for (let j = 0; j < ny; j++) {
      const v = values[i * ny + j];
      // rows of the image run top to bottom, so flip x to put the origin bottom-left
      const p = 4 * ((nx - 1 - i) * ny + j);
      if (Number.isNaN(v)) continue;
      const [r, g, b] = color((v - lo) / (hi - lo || 1));
      img.data.set([r, g, b, 255], p);
    }
  }
  ctx.putImageData(img, 0, 0);
}

function clearCanvas(id) {
  const c = $(id);
  c.getContext("2d").clearRect(0, 0, c.width, c.height);
}

function range(arrays) {
  let lo = Infinity, hi = -Infinity;
  for (const a of arrays) for (const v of a) if (!Number.isNaN(v)) { lo = Math.min(lo, v); hi = Math.max(hi, v); }
  return [lo, hi];
}

function render() {
  if (!demo) return;
  const t = num("frame");
  $("frameLabel").textContent = t;
  const truth = demo.frame(Layer.Truth, t);
  const obs = demo.frame(Layer.Observed, t);
  const fitted = demo.summary() !== "";
  const filled = fitted ? demo.frame(Layer.Filled, t) : null;
  const [lo, hi] = range(fitted ? [truth, obs, filled] : [truth, obs]);
  draw("truth", truth, lo, hi);
  draw("observed", obs, lo, hi);
  if (fitted) {
    draw("filled", filled, lo, hi);
    const sd = demo.frame(Layer.Sd, t);
    const [, sdHi] = range([sd]);
    draw("sd", sd, 0, Number.isFinite(sdHi) ? sdHi : 1);
  } else {
    clearCanvas("filled");
    clearCanvas("sd");
  }
}

// let the status line repaint before blocking work
const later = (f) => new Promise((resolve) => setTimeout(() => resolve(f()), 20));

async function simulate() {
  $("status").textContent = "simulating…";
  $("fit").disabled = true;
  await later(() => {
    try {
      demo?.free();
      demo = new Demo(num("nx"), num("ny"), num("nt"), num("c"), num("a1"), 0.5, num("tau2"), $("clouds").checked, BigInt(num("seed")));
      $("frame").max = demo.nt() - 1;
      $("frame").value = Math.min(num("frame"), demo.nt() - 1);
      $("summary").textContent = "";
      $("status").textContent = `${demo.nx() * demo.ny() * demo.nt()} cells, ${demo.n_masked()} missing`;
      $("fit").disabled = false;
      render();
    } catch (e) {
      demo = null;
      $("status").textContent = `error: ${e.message ?? e}`;
    }
  });
}

async function fit() {
  $("status").textContent = "running the Gibbs sampler…";
  $("fit").disabled = true;
  await later(() => {
    try {
      const t0 = performance.now();
      const s = JSON.parse(demo.fit(num("iter"), num("burn"), num("ix"), num("iy"), num("it"), BigInt(num("seed"))));
      const secs = (performance.now() - t0) / 1000;
      $("status").textContent = `fitted in ${secs.toFixed(1)} s (${(1000 * secs / num("iter")).toFixed(1)} ms per iteration)`;
      $("summary").textContent = JSON.stringify(s, null, 2);
      render();
    } catch (e) {
      $("status").textContent = `error: ${e.message ?? e}`;
    }
    $("fit").disabled = false;
  });
}

await init();
$("simulate").addEventListener("click", simulate);
$("fit").addEventListener("click", fit);
$("frame").addEventListener("input", render);
simulate();
