/** DOM wiring: fragment browser, candidate panel, alignment workspace,
 * verdict recording and match history. All data comes from the HTTP API;
 * refreshing the page loses only the in-progress alignment transform. */

import { ApiClient } from "./api.js";
import { residualReadout } from "./geometry.js";
import { drawThumbnail, drawWorkspace, workspaceScale } from "./render.js";
import { AppStore, type GroupFilter } from "./state.js";
import { K_CHOICES, METHODS, type Method } from "./types.js";

const api = new ApiClient("");
const store = new AppStore(api);

const heightsCache = new Map<string, number[]>();
let thumbnailQueue: string[] = [];
let thumbnailWorkers = 0;
const THUMBNAIL_CONCURRENCY = 6;

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

function requestThumbnail(id: string): void {
  if (heightsCache.has(id) || thumbnailQueue.includes(id)) return;
  thumbnailQueue.push(id);
  pumpThumbnails();
}

function pumpThumbnails(): void {
  while (thumbnailWorkers < THUMBNAIL_CONCURRENCY && thumbnailQueue.length > 0) {
    const id = thumbnailQueue.shift()!;
    thumbnailWorkers += 1;
    api
      .getFragment(id)
      .then((detail) => {
        heightsCache.set(id, detail.heights);
        const canvas = document.querySelector<HTMLCanvasElement>(
          `canvas[data-thumb="${CSS.escape(id)}"]`,
        );
        if (canvas) drawThumbnail(canvas, detail.heights);
      })
      .catch(() => {
        // a missing thumbnail is not worth a banner
      })
      .finally(() => {
        thumbnailWorkers -= 1;
        pumpThumbnails();
      });
  }
}

// ---------------------------------------------------------------------------
// fragment browser

function renderBrowser(): void {
  const list = el<HTMLUListElement>("fragment-list");
  const fragments = store.visibleFragments();
  el<HTMLSpanElement>("fragment-count").textContent = String(fragments.length);
  if (fragments.length === 0) {
    list.innerHTML = `<li class="empty">no fragments in this view</li>`;
    return;
  }
  list.innerHTML = "";
  for (const fragment of fragments) {
    const item = document.createElement("li");
    item.className = "fragment-row";
    if (store.selectedTarget?.id === fragment.id) item.classList.add("selected");
    const canvas = document.createElement("canvas");
    canvas.width = 120;
    canvas.height = 36;
    canvas.dataset.thumb = fragment.id;
    const label = document.createElement("div");
    label.innerHTML = `<strong>${fragment.id}</strong><br><small>${fragment.group}${
      fragment.paired ? "" : " &middot; unpaired"
    }</small>`;
    item.append(canvas, label);
    item.addEventListener("click", () => void store.selectTarget(fragment.id));
    list.append(item);
    const cached = heightsCache.get(fragment.id);
    if (cached) drawThumbnail(canvas, cached);
    else requestThumbnail(fragment.id);
  }
}

// ---------------------------------------------------------------------------
// candidate panel

function renderCandidates(): void {
  const tbody = el<HTMLTableSectionElement>("candidate-rows");
  const meta = el<HTMLParagraphElement>("candidate-meta");
  const verified = store.verifiedCandidateIds();
  if (!store.selectedTarget) {
    meta.textContent = "select a target fragment to rank its candidates";
    tbody.innerHTML = "";
    return;
  }
  const response = store.candidates;
  if (!response) {
    meta.textContent = store.loading ? "ranking..." : "no candidates loaded";
    tbody.innerHTML = "";
    return;
  }
  meta.textContent =
    `${response.candidates.length} of ${response.pool_size} candidates ` +
    `for ${response.target_id} (${response.method})`;
  tbody.innerHTML = "";
  for (const row of response.candidates) {
    const tr = document.createElement("tr");
    if (store.pair?.candidate.id === row.candidate_id) tr.classList.add("selected");
    const badge = verified.has(row.candidate_id)
      ? `<span class="badge">verified</span>`
      : "";
    tr.innerHTML =
      `<td>${row.rank}</td><td>${row.candidate_id}</td>` +
      `<td>${row.score.toFixed(4)}</td><td>${badge}</td>`;
    tr.addEventListener("click", () => void store.openCandidate(row.candidate_id));
    tbody.append(tr);
  }
}

// ---------------------------------------------------------------------------
// alignment workspace

function renderWorkspace(): void {
  const canvas = el<HTMLCanvasElement>("workspace-canvas");
  const readout = el<HTMLDivElement>("residual-readout");
  const title = el<HTMLHeadingElement>("workspace-title");
  const pair = store.pair;
  const ctx = canvas.getContext("2d");
  if (!pair) {
    title.textContent = "alignment workspace";
    readout.textContent = "open a candidate to align it against the target";
    ctx?.clearRect(0, 0, canvas.width, canvas.height);
    return;
  }
  title.textContent = `${pair.target.id} vs ${pair.candidate.id} (rank ${pair.rank})`;
  const upper =
    pair.target.group === "upper" ? pair.target.heights : pair.candidate.heights;
  const lower =
    pair.target.group === "upper" ? pair.candidate.heights : pair.target.heights;
  drawWorkspace(canvas, pair.target.heights, pair.candidate.heights, store.transform, store.view);
  const r = residualReadout(upper, lower, store.transform);
  const fmt = (x: number) => (Number.isNaN(x) ? "n/a" : x.toFixed(4));
  readout.innerHTML =
    `mean residual <strong>${fmt(r.mean)}</strong> &middot; ` +
    `max <strong>${fmt(r.max)}</strong> &middot; overlap ${r.overlap} fibers ` +
    `&middot; shift (${store.transform.dx.toFixed(1)}, ${store.transform.dy.toFixed(2)}) ` +
    `&middot; rotation ${store.transform.rotationDeg.toFixed(1)}&deg;`;
  el<HTMLButtonElement>("confirm-btn").disabled = store.verdictInFlight;
  el<HTMLButtonElement>("reject-btn").disabled = store.verdictInFlight;
}

function wireWorkspaceControls(): void {
  const canvas = el<HTMLCanvasElement>("workspace-canvas");
  let dragging = false;
  let lastX = 0;
  let lastY = 0;
  canvas.addEventListener("pointerdown", (event) => {
    if (!store.pair) return;
    dragging = true;
    lastX = event.clientX;
    lastY = event.clientY;
    canvas.setPointerCapture(event.pointerId);
  });
  canvas.addEventListener("pointermove", (event) => {
    if (!dragging || !store.pair) return;
    const { sx, sy } = workspaceScale(
      canvas,
      store.pair.target.heights,
      store.pair.candidate.heights,
      store.transform,
    );
    // canvas y grows downward; profile y grows upward
    store.translateBy((event.clientX - lastX) / sx, -(event.clientY - lastY) / sy);
    lastX = event.clientX;
    lastY = event.clientY;
  });
  const stop = () => {
    dragging = false;
  };
  canvas.addEventListener("pointerup", stop);
  canvas.addEventListener("pointercancel", stop);

  const nudge = (dxPx: number, dyPx: number) => () => {
    if (!store.pair) return;
    const { sx, sy } = workspaceScale(
      canvas,
      store.pair.target.heights,
      store.pair.candidate.heights,
      store.transform,
    );
    store.translateBy(dxPx / sx, -dyPx / sy);
  };
  el<HTMLButtonElement>("nudge-left").addEventListener("click", nudge(-1, 0));
  el<HTMLButtonElement>("nudge-right").addEventListener("click", nudge(1, 0));
  el<HTMLButtonElement>("nudge-up").addEventListener("click", nudge(0, -1));
  el<HTMLButtonElement>("nudge-down").addEventListener("click", nudge(0, 1));
  el<HTMLButtonElement>("rotate-ccw").addEventListener("click", () =>
    store.rotateBy(-0.5),
  );
  el<HTMLButtonElement>("rotate-cw").addEventListener("click", () =>
    store.rotateBy(0.5),
  );
  el<HTMLButtonElement>("reset-transform").addEventListener("click", () =>
    store.resetTransform(),
  );

  const overlay = el<HTMLInputElement>("toggle-overlay");
  const enhance = el<HTMLInputElement>("toggle-enhance");
  const swap = el<HTMLInputElement>("toggle-swap");
  overlay.checked = store.view.overlay;
  overlay.addEventListener("change", () => store.setView({ overlay: overlay.checked }));
  enhance.addEventListener("change", () =>
    store.setView({ edgeEnhance: enhance.checked }),
  );
  swap.addEventListener("change", () => store.setView({ layerSwap: swap.checked }));

  const note = el<HTMLInputElement>("verdict-note");
  el<HTMLButtonElement>("confirm-btn").addEventListener("click", () => {
    void store.submitVerdict("confirmed", note.value);
  });
  el<HTMLButtonElement>("reject-btn").addEventListener("click", () => {
    void store.submitVerdict("rejected", note.value);
  });
}

// ---------------------------------------------------------------------------
// history, banner, toast

function renderHistory(): void {
  const list = el<HTMLUListElement>("history-list");
  if (store.matches.length === 0) {
    list.innerHTML = `<li class="empty">no verdicts recorded yet</li>`;
    return;
  }
  list.innerHTML = "";
  const newestFirst = [...store.matches].sort((a, b) => b.record_id - a.record_id);
  for (const record of newestFirst) {
    const item = document.createElement("li");
    if (record.target_id === store.selectedTarget?.id) item.classList.add("current");
    item.innerHTML =
      `<strong>#${record.record_id}</strong> ${record.verdict}: ` +
      `${record.target_id} &rarr; ${record.candidate_id}` +
      (record.note ? `<br><small>${record.note}</small>` : "");
    list.append(item);
  }
}

function renderChrome(): void {
  const banner = el<HTMLDivElement>("banner");
  if (store.banner) {
    banner.hidden = false;
    el<HTMLSpanElement>("banner-text").textContent = store.banner;
  } else {
    banner.hidden = true;
  }
  const toast = el<HTMLDivElement>("toast");
  if (store.toast) {
    toast.hidden = false;
    toast.textContent = store.toast;
  } else {
    toast.hidden = true;
  }
}

// ---------------------------------------------------------------------------
// bootstrap

function renderAll(): void {
  renderChrome();
  renderBrowser();
  renderCandidates();
  renderWorkspace();
  renderHistory();
}

function wireStaticControls(): void {
  const groupSelect = el<HTMLSelectElement>("group-filter");
  groupSelect.addEventListener("change", () =>
    store.setGroupFilter(groupSelect.value as GroupFilter),
  );

  const kSelect = el<HTMLSelectElement>("k-select");
  kSelect.innerHTML = K_CHOICES.map((k) => `<option value="${k}">${k}</option>`).join("");
  kSelect.addEventListener("change", () => void store.setK(Number(kSelect.value)));

  const methodSelect = el<HTMLSelectElement>("method-select");
  methodSelect.innerHTML = METHODS.map(
    (m) => `<option value="${m}">${m}</option>`,
  ).join("");
  methodSelect.addEventListener("change", () =>
    void store.setMethod(methodSelect.value as Method),
  );

  el<HTMLButtonElement>("banner-retry").addEventListener("click", () =>
    void store.loadAll(),
  );

  wireWorkspaceControls();
}

async function boot(): Promise<void> {
  wireStaticControls();
  store.subscribe(renderAll);
  try {
    const health = await api.health();
    el<HTMLSpanElement>("dataset-info").textContent =
      `${health.dataset}: ${health.n_pairs} pairs, ${health.n_fragments} fragments`;
  } catch {
    // loadAll reports the banner; health info is cosmetic
  }
  await store.loadAll();
}

void boot();
