import init, { manifold, deepfool, radar } from "./pkg/trilemma_web.js";

const $ = (id) => document.getElementById(id);
const points = { real: [], synth: [] };
const SCALE = 40; // canvas pixels per unit, origin at the centre

function show(el, fn) {
  try {
    el.classList.remove("error");
    return fn();
  } catch (e) {
    el.classList.add("error");
    el.textContent = String(e);
    return null;
  }
}

function drawPlane(view) {
  const c = $("plane").getContext("2d");
  c.clearRect(0, 0, 400, 400);
  const plot = (pts, radii, color) => {
    pts.forEach(([x, y], i) => {
      const px = 200 + x * SCALE, py = 200 - y * SCALE;
      if (radii) {
        c.strokeStyle = color + "55";
        c.beginPath();
        c.arc(px, py, radii[i] * SCALE, 0, 2 * Math.PI);
        c.stroke();
      }
      c.fillStyle = color;
      c.beginPath();
      c.arc(px, py, 3, 0, 2 * Math.PI);
      c.fill();
    });
  };
  plot(points.real, view && view.real_radii, "#1f77b4");
  plot(points.synth, view && view.synth_radii, "#d62728");
}

function updateManifold() {
  const out = $("manifold-out");
  const k = Number($("k").value);
  if (points.real.length <= k || points.synth.length <= k) {
    out.textContent = `need more than k = ${k} points of each kind`;
    drawPlane(null);
    return;
  }
  const view = show(out, () => JSON.parse(manifold(JSON.stringify(points), k)));
  if (view) {
    out.textContent = `precision ${view.precision.toFixed(3)}   recall ${view.recall.toFixed(3)}`;
  }
  drawPlane(view);
}

function gaussian() {
  return Math.sqrt(-2 * Math.log(1 - Math.random())) * Math.cos(2 * Math.PI * Math.random());
}

await init();

$("plane").addEventListener("click", (e) => {
  const r = e.target.getBoundingClientRect();
  const p = [(e.clientX - r.left - 200) / SCALE, (200 - (e.clientY - r.top)) / SCALE];
  (e.shiftKey ? points.synth : points.real).push(p);
  updateManifold();
});
$("k").addEventListener("change", updateManifold);
$("clear").addEventListener("click", () => {
  points.real = [];
  points.synth = [];
  updateManifold();
});
$("random").addEventListener("click", () => {
  points.real = Array.from({ length: 40 }, () => [gaussian(), gaussian()]);
  points.synth = Array.from({ length: 40 }, () => [0.6 * gaussian() + 1, 0.6 * gaussian()]);
  updateManifold();
});

$("attack").addEventListener("click", () => {
  const out = $("attack-out");
  show(out, () => {
    const r = JSON.parse(deepfool($("attack-in").value));
    const o = r.outcome;
    out.textContent =
      `class ${o.original_class} -> ${o.final_class}, flipped ${o.flipped}, ` +
      `${o.iterations} iteration(s), |r| = ${o.perturbation_l2.toFixed(6)}\n` +
      r.trace.map((p, i) => `${i}: [${p.map((v) => v.toFixed(4)).join(", ")}]`).join("\n");
  });
});

$("draw").addEventListener("click", () => {
  const el = $("radar");
  show(el, () => {
    el.innerHTML = radar($("table").value, $("mean-range").checked);
  });
});

$("random").click();
$("draw").click();
