import init, { normal_image, align_scene, refine_scene } from "./pkg/more_wasm.js";

const W = 64;
const H = 48;
const $ = (id) => document.getElementById(id);
const num = (id) => Number($(id).value);

function paint(canvas, rgba) {
  const ctx = canvas.getContext("2d");
  ctx.putImageData(new ImageData(new Uint8ClampedArray(rgba), W, H), 0, 0);
}

function fail(el, err) {
  el.textContent = String(err);
  el.className = "error";
}

function drawNormals() {
  const msg = $("n-msg");
  msg.textContent = "";
  msg.className = "";
  try {
    paint($("n-canvas"), normal_image($("n-surface").value, num("n-param"), num("n-noise"), 1n));
    msg.textContent = "red, green, blue = x, y, z of the world normal";
  } catch (e) {
    fail(msg, e);
  }
}

function runAlign() {
  const out = $("a-report");
  out.className = "";
  try {
    const report = align_scene(num("a-scale"), num("a-sx"), num("a-sy"), num("a-sz"), num("a-out"), BigInt(num("a-seed")));
    out.textContent = JSON.stringify(JSON.parse(report), null, 2);
  } catch (e) {
    fail(out, e);
  }
}

function drawTrace(totals, levels) {
  const c = $("trace");
  const ctx = c.getContext("2d");
  ctx.clearRect(0, 0, c.width, c.height);
  const logs = Array.from(totals, (t) => Math.log10(Math.max(t, 1e-300)));
  const lo = Math.min(...logs);
  const hi = Math.max(...logs);
  const x = (i) => 30 + (i / Math.max(logs.length - 1, 1)) * (c.width - 40);
  const y = (v) => c.height - 20 - ((v - lo) / Math.max(hi - lo, 1e-12)) * (c.height - 40);
  ctx.lineWidth = 2;
  for (let i = 1; i < logs.length; i++) {
    ctx.strokeStyle = levels[i] === 0 ? "#1565c0" : "#ef6c00";
    ctx.beginPath();
    ctx.moveTo(x(i - 1), y(logs[i - 1]));
    ctx.lineTo(x(i), y(logs[i]));
    ctx.stroke();
  }
  ctx.fillStyle = "#444";
  ctx.fillText("log10 total loss (orange: coarse level, blue: full resolution)", 30, 12);
}

function runRefine() {
  const msg = $("r-msg");
  msg.className = "";
  msg.textContent = "running...";
  setTimeout(() => {
    try {
      const t0 = performance.now();
      const run = refine_scene(num("r-noise"), num("r-iters"), num("r-lp"), num("r-lr"), num("r-ls"), num("r-ln"), 1n);
      const ms = performance.now() - t0;
      const [lo, hi] = [3.9, 4.1];
      paint($("r-before"), run.depth_image(false, lo, hi));
      paint($("r-after"), run.depth_image(true, lo, hi));
      drawTrace(run.totals(), run.levels());
      msg.textContent =
        `mean residual at matches ${run.residual_before().toFixed(4)} -> ${run.residual_after().toFixed(4)}` +
        ` (${ms.toFixed(0)} ms); left: depth before, right: after, colors span ${lo} to ${hi}`;
      run.free();
    } catch (e) {
      fail(msg, e);
    }
  }, 10);
}

await init();
$("n-surface").addEventListener("change", (e) => {
  $("n-param").value = e.target.selectedOptions[0].dataset.param;
  drawNormals();
});
for (const id of ["n-param", "n-noise"]) $(id).addEventListener("input", drawNormals);
$("a-run").addEventListener("click", runAlign);
$("r-run").addEventListener("click", runRefine);
drawNormals();
runAlign();
