/** Application wiring: panels, tools, and service round trips. */

import { Api, ApiError } from "./api.js";
import { decodePoints } from "./decode.js";
import { Palette } from "./palette.js";
import { queueRows } from "./queue.js";
import { pickLasso, pickRect, type Pt } from "./select2d.js";
import { AnnotationStore } from "./store.js";
import type { ScanSummary, SelectionLatest } from "./types.js";
import { CloudViewer } from "./viewer.js";

type Tool = "orbit" | "rect" | "lasso";

const api = new Api("..");

const el = {
  banner: document.getElementById("banner") as HTMLDivElement,
  scanList: document.getElementById("scan-list") as HTMLUListElement,
  queue: document.getElementById("queue") as HTMLDivElement,
  legend: document.getElementById("legend") as HTMLDivElement,
  image: document.getElementById("image-panel") as HTMLDivElement,
  canvas: document.getElementById("cloud") as HTMLCanvasElement,
  overlay: document.getElementById("overlay") as HTMLCanvasElement,
  title: document.getElementById("scan-title") as HTMLSpanElement,
  pending: document.getElementById("pending") as HTMLSpanElement,
  paintBtn: document.getElementById("paint") as HTMLButtonElement,
  submitBtn: document.getElementById("submit") as HTMLButtonElement,
  discardBtn: document.getElementById("discard") as HTMLButtonElement,
  doneBtn: document.getElementById("done") as HTMLButtonElement,
  runSelection: document.getElementById("run-selection") as HTMLButtonElement,
  selectionN: document.getElementById("selection-n") as HTMLInputElement,
  toolRadios: document.querySelectorAll<HTMLInputElement>("input[name=tool]"),
};

let palette: Palette;
let store: AnnotationStore;
let viewer: CloudViewer;
let scans: ScanSummary[] = [];
let latestSelection: SelectionLatest | null = null;
let tool: Tool = "orbit";

// ------------------------------------------------------------- banner

function banner(kind: "error" | "ok", text: string, retry?: () => void): void {
  el.banner.className = kind;
  el.banner.textContent = text;
  if (retry) {
    const b = document.createElement("button");
    b.textContent = "retry";
    b.onclick = () => {
      clearBanner();
      retry();
    };
    el.banner.appendChild(b);
  }
  el.banner.hidden = false;
  if (kind === "ok") setTimeout(clearBanner, 2500);
}

function clearBanner(): void {
  el.banner.hidden = true;
  el.banner.textContent = "";
}

function describe(err: unknown): string {
  if (err instanceof ApiError) return `${err.status}: ${err.detail}`;
  return err instanceof Error ? err.message : String(err);
}

// ------------------------------------------------------------- panels

function renderLegend(): void {
  el.legend.innerHTML = "";
  for (const c of palette.all()) {
    const row = document.createElement("label");
    row.className = "legend-row";
    const paintable = palette.paintable().some((p) => p.id === c.id);
    row.innerHTML =
      `<input type="radio" name="class" value="${c.id}" ${paintable ? "" : "disabled"}>` +
      `<span class="swatch" style="background:${palette.cssColor(c.id)}"></span>` +
      `<span>${c.name}${c.is_3d ? "" : " (image only)"}</span>`;
    const radio = row.querySelector("input") as HTMLInputElement;
    radio.onchange = () => {
      store.setActiveClass(c.id);
    };
    el.legend.appendChild(row);
  }
}

function renderScanList(): void {
  el.scanList.innerHTML = "";
  for (const s of scans) {
    const li = document.createElement("li");
    li.dataset.scanId = s.scan_id;
    if (s.scan_id === store.currentScanId) li.classList.add("current");
    const dirty = store.dirtyScanIds().includes(s.scan_id) ? " ✎" : "";
    li.innerHTML =
      `<span class="scan-id">${s.scan_id}${dirty}</span>` +
      `<span class="status ${s.status}">${s.status}</span>` +
      `<span class="points">${s.n_points} pts</span>`;
    if (s.status === "TEST") {
      li.classList.add("held-out");
      li.title = "held-out test scan: labels are not viewable";
    } else {
      li.onclick = () => {
        void openScan(s.scan_id);
      };
    }
    el.scanList.appendChild(li);
  }
}

function renderQueue(): void {
  const rows = queueRows(latestSelection, scans);
  if (rows.length === 0) {
    el.queue.innerHTML = `<p class="empty">queue is empty, run a selection round</p>`;
    return;
  }
  const header =
    `<tr><th>scan</th><th title="combined rank">R</th>` +
    `<th title="entropy rank">rank_H</th><th title="uncertainty rank">rank_U</th><th></th></tr>`;
  const body = rows
    .map(
      (r) =>
        `<tr data-scan-id="${r.scanId}"><td class="open">${r.scanId}</td>` +
        `<td>${r.r}</td><td>${r.rankH}</td><td>${r.rankU}</td>` +
        `<td><button class="done-row">done</button></td></tr>`,
    )
    .join("");
  el.queue.innerHTML = `<table>${header}${body}</table>`;
  for (const td of el.queue.querySelectorAll<HTMLTableCellElement>("td.open")) {
    td.onclick = () => {
      void openScan(td.parentElement!.dataset.scanId!);
    };
  }
  for (const btn of el.queue.querySelectorAll<HTMLButtonElement>("button.done-row")) {
    btn.onclick = () => {
      void completeScan(btn.closest("tr")!.dataset.scanId!);
    };
  }
}

function renderImage(scan: ScanSummary): void {
  el.image.innerHTML = "";
  if (!scan.image_id) {
    el.image.innerHTML = `<p class="empty">no paired camera frame</p>`;
    return;
  }
  const img = document.createElement("img");
  img.src = api.imageUrl(scan.scan_id);
  img.alt = `segmentation frame ${scan.image_id}`;
  const caption = document.createElement("p");
  caption.textContent = `${scan.image_id}, sync ${((scan.sync_dt ?? 0) * 1e3).toFixed(1)} ms`;
  el.image.append(img, caption);
}

function refreshPending(): void {
  const n = store.currentScanId ? store.pendingCount() : 0;
  el.pending.textContent = n ? `${n} pending` : "";
  el.submitBtn.disabled = n === 0;
  el.discardBtn.disabled = n === 0;
}

// ------------------------------------------------------------- actions

async function refreshScans(): Promise<void> {
  scans = (await api.listScans()).scans;
  renderScanList();
  renderQueue();
}

async function refreshSelection(): Promise<void> {
  try {
    latestSelection = await api.selectionLatest();
  } catch (err) {
    if (err instanceof ApiError && err.status === 404) latestSelection = null;
    else throw err;
  }
  renderQueue();
}

async function openScan(scanId: string): Promise<void> {
  try {
    if (store.currentScanId) store.savePose(viewer.getPose());
    const scan = scans.find((s) => s.scan_id === scanId);
    if (!scan) throw new Error(`unknown scan ${scanId}`);
    const [pointBytes, labels] = await Promise.all([
      api.fetchPoints(scanId),
      scan.has_labels
        ? api.fetchLabels(scanId)
        : Promise.resolve({
            scan_id: scanId,
            labels: new Array<number>(scan.n_points).fill(0),
            provenance: new Array<number>(scan.n_points).fill(0),
            counts: { auto_count: scan.n_points, corrected_count: 0, unlabeled_count: scan.n_points },
          }),
    ]);
    const cloud = decodePoints(pointBytes);
    store.openScan(scanId, labels.labels, labels.provenance);
    viewer.setCloud(cloud);
    const pose = store.poseOf(scanId);
    if (pose) viewer.setPose(pose);
    viewer.setColors(palette.colorize(store.displayedLabels()));
    el.title.textContent = `${scanId} (${cloud.count} points, ${scan.status})`;
    renderImage(scan);
    renderScanList();
    refreshPending();
    clearBanner();
  } catch (err) {
    banner("error", `loading ${scanId} failed, ${describe(err)}`, () => void openScan(scanId));
  }
}

function paintSelection(): void {
  try {
    const touched = store.paint();
    const active = palette.get(store.activeClass!);
    viewer.tintIndices(touched, [
      active.color[0] / 255,
      active.color[1] / 255,
      active.color[2] / 255,
    ]);
    refreshPending();
    renderScanList();
  } catch (err) {
    banner("error", describe(err));
  }
}

async function submitCorrections(): Promise<void> {
  const scanId = store.currentScanId;
  if (!scanId) return;
  const entries = store.beginSubmit();
  if (entries.length === 0) return;
  try {
    const res = await api.submitCorrections(scanId, entries);
    store.commitSubmit(entries);
    banner("ok", `${res.applied} corrections saved on ${scanId}`);
  } catch (err) {
    // rollback: draft is already drained, so repainting from the store
    // restores the last server state
    banner("error", `submit failed, ${describe(err)}`);
  }
  viewer.setColors(palette.colorize(store.displayedLabels()));
  refreshPending();
  renderScanList();
}

function discardDraft(): void {
  store.discardDraft();
  viewer.setColors(palette.colorize(store.displayedLabels()));
  refreshPending();
  renderScanList();
}

async function completeScan(scanId: string): Promise<void> {
  try {
    await api.completeScan(scanId);
    banner("ok", `${scanId} marked corrected`);
    await refreshScans();
  } catch (err) {
    banner("error", `complete failed, ${describe(err)}`);
  }
}

async function runSelection(): Promise<void> {
  const n = Math.max(1, Number(el.selectionN.value) || 1);
  try {
    latestSelection = await api.runSelection(n);
    await refreshScans();
    banner("ok", `selection round ${latestSelection.iteration} picked ${latestSelection.selected.length} scans`);
  } catch (err) {
    banner("error", `selection failed, ${describe(err)}`, () => void runSelection());
  }
}

// ------------------------------------------------------------- tools

function attachSelectionTools(): void {
  const ctx = el.overlay.getContext("2d")!;
  let path: Pt[] = [];
  let active = false;

  const syncSize = () => {
    el.overlay.width = el.overlay.clientWidth;
    el.overlay.height = el.overlay.clientHeight;
  };
  new ResizeObserver(syncSize).observe(el.overlay);
  syncSize();

  const localPt = (e: PointerEvent): Pt => {
    const r = el.overlay.getBoundingClientRect();
    return { x: e.clientX - r.left, y: e.clientY - r.top };
  };

  const draw = () => {
    ctx.clearRect(0, 0, el.overlay.width, el.overlay.height);
    if (path.length < 2) return;
    ctx.strokeStyle = "#ffd166";
    ctx.lineWidth = 1.5;
    ctx.setLineDash(tool === "rect" ? [6, 4] : []);
    ctx.beginPath();
    if (tool === "rect") {
      const a = path[0];
      const b = path[path.length - 1];
      ctx.strokeRect(Math.min(a.x, b.x), Math.min(a.y, b.y), Math.abs(b.x - a.x), Math.abs(b.y - a.y));
    } else {
      ctx.moveTo(path[0].x, path[0].y);
      for (const p of path.slice(1)) ctx.lineTo(p.x, p.y);
      ctx.stroke();
    }
  };

  el.overlay.addEventListener("pointerdown", (e) => {
    if (tool === "orbit") return;
    active = true;
    path = [localPt(e)];
    el.overlay.setPointerCapture(e.pointerId);
    e.stopPropagation();
  });
  el.overlay.addEventListener("pointermove", (e) => {
    if (!active) return;
    path.push(localPt(e));
    draw();
  });
  el.overlay.addEventListener("pointerup", () => {
    if (!active) return;
    active = false;
    ctx.clearRect(0, 0, el.overlay.width, el.overlay.height);
    if (path.length < 2) return;
    const screen = viewer.projectAll();
    const picked =
      tool === "rect"
        ? pickRect(screen, {
            x0: path[0].x,
            y0: path[0].y,
            x1: path[path.length - 1].x,
            y1: path[path.length - 1].y,
          })
        : pickLasso(screen, path);
    try {
      store.setSelection(picked);
      highlightSelection(picked);
      el.paintBtn.disabled = picked.length === 0;
    } catch (err) {
      banner("error", describe(err));
    }
    path = [];
  });
}

function highlightSelection(picked: number[]): void {
  viewer.setColors(palette.colorize(store.displayedLabels()));
  viewer.tintIndices(picked, [1, 1, 1]);
}

// The overlay sits above the webgl canvas; in orbit mode it must not eat
// pointer events, in selection modes it must.
function applyToolMode(): void {
  el.overlay.style.pointerEvents = tool === "orbit" ? "none" : "auto";
}

// ------------------------------------------------------------- boot

async function boot(): Promise<void> {
  try {
    const classListing = await api.listClasses();
    palette = new Palette(classListing.classes);
    store = new AnnotationStore(palette, "ui");
    viewer = new CloudViewer(el.canvas);
    renderLegend();
    attachSelectionTools();
    applyToolMode();
    await refreshScans();
    await refreshSelection();

    el.paintBtn.onclick = paintSelection;
    el.submitBtn.onclick = () => void submitCorrections();
    el.discardBtn.onclick = discardDraft;
    el.doneBtn.onclick = () => {
      if (store.currentScanId) void completeScan(store.currentScanId);
    };
    el.runSelection.onclick = () => void runSelection();
    for (const radio of el.toolRadios) {
      radio.onchange = () => {
        tool = radio.value as Tool;
        applyToolMode();
      };
    }
  } catch (err) {
    banner("error", `startup failed, ${describe(err)}`, () => void boot());
  }
}

void boot();
