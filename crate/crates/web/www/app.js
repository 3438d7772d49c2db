import init, { Classifier, benchSched } from "./pkg/helm_web.js";

const $ = (id) => document.getElementById(id);
let demo;

function el(tag, attrs = {}, ...children) {
  const e = document.createElement(tag);
  Object.assign(e, attrs);
  e.append(...children);
  return e;
}

function bar(p) {
  const outer = el("div", { className: "bar" });
  const inner = el("div");
  inner.style.width = `${(100 * p).toFixed(1)}%`;
  outer.append(inner);
  return outer;
}

function act(f) {
  try {
    render(JSON.parse(f()));
    $("error").textContent = "";
  } catch (e) {
    $("error").textContent = e.message ?? String(e);
  }
}

function describe(form) {
  if (!form) return "";
  if (form.form === "graded") return `p=${form.value}`;
  return String(form.value);
}

function render(v) {
  $("confident").textContent = v.confident ? `confident: ${v.ranking[0][0]}` : "";
  $("confident").className = v.confident ? "confident" : "";

  const q = $("question");
  q.replaceChildren();
  if (v.question) {
    q.append(`${v.question.label}? (merit ${v.question.merit.toFixed(4)}) `);
    for (const state of v.question.states) {
      q.append(el("button", { textContent: state, onclick: () => act(() => demo.answer(v.question.question, state)) }));
    }
  } else {
    q.append("no question can change the ranking");
  }

  const obs = $("observations");
  obs.replaceChildren();
  for (const o of v.observations) {
    const slider = el("input", { type: "range", min: 0, max: 1, step: 0.05, value: o.detected });
    slider.onchange = () => act(() => demo.setGraded(o.id, Number(slider.value)));
    const clear = el("button", { textContent: "clear", disabled: !o.evidence, onclick: () => act(() => demo.clear(o.id)) });
    obs.append(el("div", { className: "obs" },
      el("span", { className: o.evidence ? "given" : "", textContent: o.label }),
      slider,
      el("span", { textContent: o.detected.toFixed(3) }),
      el("span", {}, clear, " ", describe(o.evidence))));
  }

  const rank = $("ranking");
  rank.replaceChildren();
  for (const [cls, p] of v.ranking) {
    rank.append(el("div", { className: "row" }, el("span", { textContent: cls }), bar(p), el("span", { textContent: p.toFixed(3) })));
  }

  const merits = $("merits");
  merits.replaceChildren(el("tr", {}, ...["question", "dP", "cost", "merit"].map((h) => el("th", { textContent: h }))));
  for (const m of v.merits) {
    merits.append(el("tr", {}, ...[m.question, m.delta_p.toFixed(4), m.cost.toFixed(2), m.merit.toFixed(4)].map((t) => el("td", { textContent: t }))));
  }
}

function runBench() {
  const table = $("bench-table");
  try {
    const args = ["nodes", "evidence", "trials"].map((id) => Number($(id).value));
    const r = JSON.parse(benchSched(...args, BigInt($("seed").value)));
    const reference = Object.fromEntries(r.reference);
    table.replaceChildren(el("tr", {}, ...["policy", "median activations", "reference"].map((h) => el("th", { textContent: h }))));
    for (const [policy, median] of r.medians) {
      table.append(el("tr", {}, ...[policy, String(median), String(reference[policy])].map((t) => el("td", { textContent: t }))));
    }
    const dev = r.max_deviation == null ? "n/a" : r.max_deviation.toExponential(1);
    table.append(el("tr", {}, el("td", { colSpan: 3, textContent:
      `${r.trials} trials, ${r.failures} failed, ${r.ordering_violations} out of order, max error vs enumeration ${dev}` })));
    $("error").textContent = "";
  } catch (e) {
    $("error").textContent = e.message ?? String(e);
  }
}

await init();
demo = new Classifier($("engine").value);
render(JSON.parse(demo.view()));
$("engine").onchange = () => act(() => demo.setEngine($("engine").value));
$("reset").onclick = () => act(() => demo.reset());
$("bench").onclick = runBench;
