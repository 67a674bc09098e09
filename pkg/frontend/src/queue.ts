/** Annotation queue model: which scans the latest selection round put in
 * front of the annotator, with their ranking scores. */

import type { ScanSummary, SelectionLatest } from "./types.js";

export interface QueueRow {
  scanId: string;
  rankH: number;
  rankU: number;
  r: number;
  meanEntropy: number;
  meanUncertainty: number;
  status: ScanSummary["status"];
}

/** Rows for the queue panel, in selection order.
 *
 * Only scans picked by the latest round appear; a scan leaves the queue
 * when its status moves past PENDING_ANNOTATION (the done action).
 */
export function queueRows(
  latest: SelectionLatest | null,
  scans: ScanSummary[],
): QueueRow[] {
  if (!latest) return [];
  const byId = new Map(scans.map((s) => [s.scan_id, s]));
  const picked = new Set(latest.selected);
  const rows: QueueRow[] = [];
  for (const r of latest.ranked) {
    if (!picked.has(r.scan_id)) continue;
    const scan = byId.get(r.scan_id);
    if (!scan || scan.status !== "PENDING_ANNOTATION") continue;
    rows.push({
      scanId: r.scan_id,
      rankH: r.rank_H,
      rankU: r.rank_U,
      r: r.R,
      meanEntropy: r.mean_entropy,
      meanUncertainty: r.mean_uncertainty,
      status: scan.status,
    });
  }
  return rows;
}
