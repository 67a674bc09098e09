/** Thin typed fetch layer over the annotation service. */

import type {
  ClassListing,
  CorrectionEntry,
  CorrectionsResult,
  LabelPayload,
  ScanListing,
  ScanSummary,
  SelectionLatest,
} from "./types.js";

export class ApiError extends Error {
  constructor(
    public status: number,
    public detail: string,
    public url: string,
  ) {
    super(`${status} ${detail}`);
  }
}

async function raiseForStatus(res: Response): Promise<void> {
  if (res.ok) return;
  let detail = res.statusText;
  try {
    const body = await res.json();
    if (typeof body?.detail === "string") detail = body.detail;
  } catch {
    // non-JSON error body, statusText is all we have
  }
  throw new ApiError(res.status, detail, res.url);
}

export class Api {
  constructor(private base: string = "..") {}

  private url(path: string): string {
    return `${this.base}${path}`;
  }

  private async getJson<T>(path: string): Promise<T> {
    const res = await fetch(this.url(path));
    await raiseForStatus(res);
    return (await res.json()) as T;
  }

  listScans(): Promise<ScanListing> {
    return this.getJson("/scans");
  }

  listClasses(): Promise<ClassListing> {
    return this.getJson("/classes");
  }

  async fetchPoints(scanId: string): Promise<ArrayBuffer> {
    const res = await fetch(this.url(`/scans/${scanId}/points`));
    await raiseForStatus(res);
    return res.arrayBuffer();
  }

  fetchLabels(scanId: string): Promise<LabelPayload> {
    return this.getJson(`/scans/${scanId}/labels`);
  }

  imageUrl(scanId: string): string {
    return this.url(`/scans/${scanId}/image`);
  }

  selectionLatest(): Promise<SelectionLatest> {
    return this.getJson("/selection/latest");
  }

  async submitCorrections(
    scanId: string,
    corrections: CorrectionEntry[],
  ): Promise<CorrectionsResult> {
    const res = await fetch(this.url(`/scans/${scanId}/corrections`), {
      method: "PUT",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ corrections }),
    });
    await raiseForStatus(res);
    return (await res.json()) as CorrectionsResult;
  }

  async completeScan(scanId: string): Promise<ScanSummary> {
    const res = await fetch(this.url(`/scans/${scanId}/complete`), { method: "POST" });
    await raiseForStatus(res);
    return (await res.json()) as ScanSummary;
  }

  async runSelection(n: number): Promise<SelectionLatest> {
    const res = await fetch(this.url("/selection/run"), {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ n, wait: true }),
    });
    await raiseForStatus(res);
    return (await res.json()) as SelectionLatest;
  }
}
