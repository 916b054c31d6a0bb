import init, { translate, reward_heatmap, grid_oracle } from "./pkg/ltl_rl_web.js";

const PI = Math.PI;
const bounds = { x: [-5, 5], y: [-5, 5], theta: [-PI, PI] };
const layouts = {
  "Example 1": { bounds, dt: 0.1, regions: [
    { name: "a", rect: [-3.5, -2, -3.5, -2] }, { name: "b", rect: [2, 3.5, 2, 3.5] } ] },
  "Example 2": { bounds, dt: 0.1, regions: [
    { name: "a", rect: [-3, -1.5, -3, -1.5] }, { name: "b", rect: [-3, -1.5, 1.5, 3] },
    { name: "c", rect: [2, 3.5, 1.5, 3] }, { name: "d", rect: [2, 3.5, -3, -1.5] } ] },
  "Example 3, case 1": { bounds, dt: 0.1, regions: [
    { name: "a", rect: [-4, -3, -3, -2] }, { name: "b", rect: [-4, -3, 1, 2] },
    { name: "c", rect: [-1, 1.5, -1, 3.5] }, { name: "d", rect: [3, 4.5, 1.5, 3] } ] },
  "Example 3, case 2": { bounds, dt: 0.1, allow_overlap: true, regions: [
    { name: "a", rect: [-4, -3, -3, -2] }, { name: "b", rect: [-4, -3, 1, 2] },
    { name: "c", rect: [-4.5, -2.5, 0, 3] }, { name: "d", rect: [3, 4.5, 1.5, 3] } ] },
};
const grids = {
  "5x5, a then b": { width: 5, height: 5, labels: { a: [[0, 0]], b: [[4, 4]] } },
  "5x5, b walled off": { width: 5, height: 5, labels: { a: [[0, 0]], b: [[4, 4]] }, walls: [[3, 4], [4, 3], [3, 3]] },
  "6x6, b inside c": { width: 6, height: 6, labels: {
    a: [[0, 0]], b: [[0, 4]], c: [[0, 3], [1, 3], [1, 4], [0, 4], [0, 5], [1, 5]], d: [[5, 4]] } },
};
const gridFormula = { "6x6, b inside c": "F (a & F d) | F (b & (!c U d))" };

const $ = (id) => document.getElementById(id);
const num = (id) => parseFloat($(id).value);

function fail(el, e) {
  el.textContent = String(e);
  el.className = "err";
}

function fillSelect(sel, names) {
  for (const n of names) {
    const o = document.createElement("option");
    o.textContent = n;
    sel.appendChild(o);
  }
}

function runTranslate() {
  const hoa = $("tr-hoa"), ann = $("tr-ann");
  try {
    const r = JSON.parse(translate($("tr-ltl").value));
    hoa.className = ann.className = "";
    hoa.textContent = r.hoa;
    const a = r.annotated;
    ann.textContent = "states:\n" + r.names.map((n, q) => `  ${q}: ${n}`).join("\n") +
      `\ntraps: [${a.traps}]\nannotated edges per set:\n` +
      a.b_maps.map((m, i) => `  F${i}: [${m.map((b, e) => (b ? e : null)).filter((e) => e !== null)}]`).join("\n");
  } catch (e) {
    fail(hoa, e);
    ann.textContent = "";
  }
}

function colour(t) {
  // t in [0, 1]: dark blue (low) to yellow (high)
  const r = Math.round(255 * Math.min(1, 1.6 * t));
  const g = Math.round(220 * t);
  const b = Math.round(160 * (1 - t));
  return `rgb(${r},${g},${b})`;
}

function runHeatmap() {
  const info = $("hm-info"), cv = $("hm-canvas"), ctx = cv.getContext("2d");
  const ws = layouts[$("hm-ws").value];
  try {
    const r = JSON.parse(reward_heatmap(JSON.stringify(ws), $("hm-ltl").value, parseInt($("hm-q").value, 10), 80,
      num("hm-rg"), num("hm-rn"), num("hm-rd")));
    const lo = Math.min(...r.values), hi = Math.max(...r.values);
    const px = cv.width / r.n;
    for (let j = 0; j < r.n; j++) {
      for (let i = 0; i < r.n; i++) {
        const v = r.values[j * r.n + i];
        ctx.fillStyle = colour(hi > lo ? (v - lo) / (hi - lo) : 0.5);
        ctx.fillRect(i * px, cv.height - (j + 1) * px, px + 0.5, px + 0.5);
      }
    }
    const sx = cv.width / (r.x[1] - r.x[0]), sy = cv.height / (r.y[1] - r.y[0]);
    ctx.strokeStyle = "#fff";
    ctx.fillStyle = "#fff";
    ctx.font = "13px sans-serif";
    for (const reg of r.regions) {
      const [x0, x1, y0, y1] = reg.rect;
      ctx.strokeRect((x0 - r.x[0]) * sx, cv.height - (y1 - r.y[0]) * sy, (x1 - x0) * sx, (y1 - y0) * sy);
      ctx.fillText(reg.name, (x0 - r.x[0]) * sx + 3, cv.height - (y1 - r.y[0]) * sy + 13);
    }
    info.className = "";
    info.textContent = `automaton states: ${r.states}\ntraps: [${r.traps}]\nreward range: ${lo.toFixed(3)} .. ${hi.toFixed(3)}`;
  } catch (e) {
    fail(info, e);
  }
}

const arrows = { up: "↑", right: "→", down: "↓", left: "←" };

function runOracle() {
  const info = $("or-info"), cv = $("or-canvas"), ctx = cv.getContext("2d");
  try {
    const r = JSON.parse(grid_oracle($("or-grid").value, $("or-ltl").value, 50, -0.1, -10, num("or-gamma")));
    const s = Math.floor(Math.min(cv.width / r.width, cv.height / r.height));
    ctx.clearRect(0, 0, cv.width, cv.height);
    const names = {};
    for (const [n, cells] of Object.entries(r.labels)) for (const [x, y] of cells) (names[`${x},${y}`] ??= []).push(n);
    ctx.textAlign = "center";
    for (const c of r.cells) {
      const X = c.x * s, Y = (r.height - 1 - c.y) * s;
      ctx.fillStyle = c.wall ? "#444" : c.satisfied ? "#bfe3b4" : c.reachable ? "#f4c7a1" : "#ddd";
      ctx.fillRect(X, Y, s - 2, s - 2);
      if (c.wall) continue;
      ctx.fillStyle = "#222";
      ctx.font = `${Math.floor(s / 2.5)}px sans-serif`;
      if (c.move) ctx.fillText(arrows[c.move], X + s / 2, Y + s / 1.6);
      ctx.font = `${Math.floor(s / 5)}px sans-serif`;
      const lab = names[`${c.x},${c.y}`];
      if (lab) ctx.fillText(lab.join(","), X + s / 2, Y + s / 4.5);
    }
    info.className = "";
    info.textContent = `green: greedy policy completes a round from q0\n` +
      `orange: a round is reachable but greedy misses it\ngrey: unreachable\n\n` +
      `matches reachability: ${r.matches_ground_truth}\nsweeps: ${r.sweeps}`;
  } catch (e) {
    fail(info, e);
  }
}

function loadPreset() {
  const name = $("or-preset").value;
  $("or-grid").value = JSON.stringify(grids[name]);
  $("or-ltl").value = gridFormula[name] ?? "F (a & F b)";
}

await init();
fillSelect($("hm-ws"), Object.keys(layouts));
fillSelect($("or-preset"), Object.keys(grids));
$("or-preset").addEventListener("change", () => { loadPreset(); runOracle(); });
$("hm-ws").addEventListener("change", () => {
  $("hm-ltl").value = { "Example 1": "F (a & F b)", "Example 2": "F (a & F (b & F (c & F d)))" }[$("hm-ws").value]
    ?? "F (a & F d) | F (b & (!c U d))";
  runHeatmap();
});
$("tr-go").addEventListener("click", runTranslate);
$("hm-go").addEventListener("click", runHeatmap);
$("or-go").addEventListener("click", runOracle);
loadPreset();
runTranslate();
runHeatmap();
runOracle();
