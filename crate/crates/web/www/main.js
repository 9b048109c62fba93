import init, { baseline, simulate, reproduction, stability_map } from "./pkg/behavior_epi_web.js";

const ids = ["a1", "a2", "tau12", "tau21", "theta1", "k", "days"];
const colors = { G1DFE: "#4e79a7", G2DFE: "#f28e2b", G3DFE: "#59a14f", TDFE: "#e15759" };
let base;

function value(id) {
  return Number(document.getElementById(id).value);
}

function currentParams() {
  const p = structuredClone(base);
  p.a = [value("a1"), value("a2")];
  p.c_b = [[0, 1 / value("tau12")], [1 / value("tau21"), 0]];
  p.theta[1].value = value("theta1");
  return JSON.stringify(p);
}

function plot(canvas, xs, series, yMax) {
  const ctx = canvas.getContext("2d");
  const { width: w, height: h } = canvas;
  ctx.clearRect(0, 0, w, h);
  const xMax = xs[xs.length - 1] || 1;
  for (const { ys, color, max } of series) {
    const top = max ?? yMax;
    ctx.strokeStyle = color;
    ctx.beginPath();
    ys.forEach((y, i) => {
      const px = (xs[i] / xMax) * (w - 10) + 5;
      const py = h - 5 - (y / top) * (h - 20);
      i ? ctx.lineTo(px, py) : ctx.moveTo(px, py);
    });
    ctx.stroke();
  }
}

function drawMap(gammaNow, rcNow) {
  const m = JSON.parse(stability_map(3, 3, 60));
  const c = document.getElementById("map");
  const ctx = c.getContext("2d");
  const n = m.gamma.length;
  const s = c.width / n;
  m.labels.forEach((row, j) =>
    row.forEach((label, i) => {
      ctx.fillStyle = colors[label];
      ctx.fillRect(i * s, c.height - (j + 1) * s, s, s);
    })
  );
  if (Number.isFinite(gammaNow) && Number.isFinite(rcNow)) {
    ctx.fillStyle = "#000";
    ctx.beginPath();
    ctx.arc(Math.min(gammaNow / 3, 1) * c.width, c.height - Math.min(rcNow / 3, 1) * c.height, 5, 0, 2 * Math.PI);
    ctx.fill();
  }
}

function update() {
  for (const id of ids) document.querySelector(`output[for=${id}]`).textContent = value(id);
  const err = document.getElementById("error");
  err.textContent = "";
  try {
    const params = currentParams();
    const r = JSON.parse(simulate(params, value("k"), value("days")));
    document.getElementById("summary").textContent =
      `Peak hospitalized ${Math.round(r.peak)} on day ${r.peak_day}; deaths ${Math.round(r.total_deaths)}.`;
    const peak = Math.max(...r.ih, 1);
    plot(document.getElementById("traj"), r.day, [
      { ys: r.ih, color: "#4e79a7", max: peak * 1.05 },
      { ys: r.deaths, color: "#e15759", max: Math.max(...r.deaths, 1) * 1.05 },
    ]);
    plot(document.getElementById("contact"), r.day, r.contact.map((ys, g) => ({ ys, color: g ? "#f28e2b" : "#59a14f" })), 1);

    const rc = JSON.parse(reproduction(params));
    document.querySelector("#rc tbody").innerHTML = rc.phases
      .map((p) => `<tr><td>${p.start_day}</td><td>${p.theta.toFixed(3)}</td><td>${p.r_c.toFixed(3)}</td></tr>`)
      .join("");
    document.getElementById("gamma").textContent = `R0 = ${rc.r0.toFixed(2)}, influence ratio = ${rc.gamma.toFixed(3)}`;
    drawMap(rc.gamma, rc.phases[1].r_c);
  } catch (e) {
    err.textContent = e.message ?? String(e);
  }
}

await init();
base = JSON.parse(baseline("two-group"));
for (const id of ids) document.getElementById(id).addEventListener("input", update);
update();
