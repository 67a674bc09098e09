/** Client-side annotation state: one document per opened scan.
 *
 * Labels are layered: `base` is the last server state, `draft` the
 * unsubmitted paints on top. Drafts are kept per scan so switching
 * scans never loses work; they leave the store only through an explicit
 * submit or discard. A failed submit drops its entries, which rolls the
 * optimistic colors back to the server state.
 */

import type { Palette } from "./palette.js";
import type { CorrectionEntry } from "./types.js";

export interface CameraPose {
  theta: number;
  phi: number;
  radius: number;
  target: [number, number, number];
}

interface DraftEntry {
  classId: number;
  timestamp: number;
}

interface ScanDoc {
  nPoints: number;
  base: Uint16Array;
  provenance: Uint8Array;
  draft: Map<number, DraftEntry>;
  pose?: CameraPose;
}

export class AnnotationStore {
  private docs = new Map<string, ScanDoc>();
  private currentId: string | null = null;
  private activeClassId: number | null = null;
  private selection = new Set<number>();
  private lastStamp = 0;

  constructor(
    private palette: Palette,
    private author: string = "ui",
    private now: () => number = () => Date.now() / 1000,
  ) {}

  /** Register (or refresh) a scan and make it current.
   *
   * An existing draft survives, except entries that no longer reference
   * a loaded point; the selection is transient and resets.
   */
  openScan(scanId: string, labels: ArrayLike<number>, provenance: ArrayLike<number>): void {
    if (labels.length !== provenance.length) {
      throw new Error(
        `scan ${scanId}: ${labels.length} labels but ${provenance.length} provenance flags`,
      );
    }
    const prior = this.docs.get(scanId);
    const draft = prior ? prior.draft : new Map<number, DraftEntry>();
    for (const idx of [...draft.keys()]) {
      if (idx >= labels.length) draft.delete(idx);
    }
    this.docs.set(scanId, {
      nPoints: labels.length,
      base: Uint16Array.from(labels as ArrayLike<number>),
      provenance: Uint8Array.from(provenance as ArrayLike<number>),
      draft,
      pose: prior?.pose,
    });
    this.currentId = scanId;
    this.selection.clear();
  }

  get currentScanId(): string | null {
    return this.currentId;
  }

  private doc(scanId?: string): ScanDoc {
    const id = scanId ?? this.currentId;
    if (id === null) throw new Error("no scan is open");
    const d = this.docs.get(id);
    if (!d) throw new Error(`scan ${id} was never opened`);
    return d;
  }

  // ------------------------------------------------------- painting

  get activeClass(): number | null {
    return this.activeClassId;
  }

  /** Only classes the server declared paintable are accepted. */
  setActiveClass(classId: number): void {
    if (!this.palette.paintable().some((c) => c.id === classId)) {
      throw new Error(`class ${classId} is not paintable`);
    }
    this.activeClassId = classId;
  }

  setSelection(indices: Iterable<number>): void {
    const d = this.doc();
    const next = new Set<number>();
    for (const i of indices) {
      if (!Number.isInteger(i) || i < 0 || i >= d.nPoints) {
        throw new Error(`point index ${i} outside the loaded scan`);
      }
      next.add(i);
    }
    this.selection = next;
  }

  get selectionSize(): number {
    return this.selection.size;
  }

  selectedIndices(): number[] {
    return [...this.selection].sort((a, b) => a - b);
  }

  /** Apply the active class to the current selection.
   *
   * Returns the painted indices; repainting an index overwrites its
   * earlier draft entry (last class wins locally).
   */
  paint(): number[] {
    if (this.activeClassId === null) throw new Error("no active class");
    if (this.selection.size === 0) throw new Error("empty selection");
    const d = this.doc();
    const stamp = this.nextStamp();
    const touched = this.selectedIndices();
    for (const i of touched) {
      d.draft.set(i, { classId: this.activeClassId, timestamp: stamp });
    }
    return touched;
  }

  private nextStamp(): number {
    // strictly increasing so the server's last-write-wins matches ours
    this.lastStamp = Math.max(this.now(), this.lastStamp + 1e-3);
    return this.lastStamp;
  }

  // ------------------------------------------------------- reading back

  displayedLabel(index: number, scanId?: string): number {
    const d = this.doc(scanId);
    if (index < 0 || index >= d.nPoints) {
      throw new Error(`point index ${index} outside the loaded scan`);
    }
    return d.draft.get(index)?.classId ?? d.base[index];
  }

  /** Base labels with the draft overlaid, ready for recoloring. */
  displayedLabels(scanId?: string): Uint16Array {
    const d = this.doc(scanId);
    const out = d.base.slice();
    for (const [i, e] of d.draft) out[i] = e.classId;
    return out;
  }

  isCorrected(index: number, scanId?: string): boolean {
    const d = this.doc(scanId);
    return d.draft.has(index) || d.provenance[index] === 1;
  }

  pendingCount(scanId?: string): number {
    return this.doc(scanId).draft.size;
  }

  /** Scans holding unsubmitted work (drafts survive scan switches). */
  dirtyScanIds(): string[] {
    return [...this.docs.entries()].filter(([, d]) => d.draft.size > 0).map(([id]) => id);
  }

  // ------------------------------------------------------- submit lifecycle

  /** Drain the draft into a correction payload.
   *
   * The draft is emptied immediately: commitSubmit folds the entries
   * into the base on success, and doing nothing on failure leaves the
   * display back at the server state (the rollback).
   */
  beginSubmit(scanId?: string): CorrectionEntry[] {
    const d = this.doc(scanId);
    const entries = [...d.draft.entries()]
      .sort((a, b) => a[1].timestamp - b[1].timestamp)
      .map(([i, e]) => ({
        point_index: i,
        new_class_id: e.classId,
        author: this.author,
        timestamp: e.timestamp,
      }));
    d.draft.clear();
    return entries;
  }

  commitSubmit(entries: CorrectionEntry[], scanId?: string): void {
    const d = this.doc(scanId);
    for (const e of entries) {
      if (e.point_index < 0 || e.point_index >= d.nPoints) continue;
      d.base[e.point_index] = e.new_class_id;
      d.provenance[e.point_index] = 1;
    }
  }

  discardDraft(scanId?: string): number[] {
    const d = this.doc(scanId);
    const indices = [...d.draft.keys()].sort((a, b) => a - b);
    d.draft.clear();
    return indices;
  }

  // ------------------------------------------------------- camera memory

  savePose(pose: CameraPose, scanId?: string): void {
    this.doc(scanId).pose = pose;
  }

  poseOf(scanId?: string): CameraPose | undefined {
    return this.doc(scanId).pose;
  }
}
