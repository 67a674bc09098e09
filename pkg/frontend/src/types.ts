/** Payload shapes of the annotation service, field for field. */

export type ScanStatus = "RAW" | "COARSE" | "PENDING_ANNOTATION" | "CORRECTED" | "TEST";

export interface ScanSummary {
  scan_id: string;
  cloud: string;
  t_scan: number;
  v_current: number;
  n_points: number;
  status: ScanStatus;
  image_id: string | null;
  sync_dt: number | null;
  labels: string | null;
  prediction: string | null;
  has_labels: boolean;
  has_prediction: boolean;
}

export interface ImageSummary {
  image_id: string;
  t_image: number;
  label_image: string;
}

export interface ScanListing {
  scans: ScanSummary[];
  images: ImageSummary[];
}

export interface ClassInfo {
  id: number;
  name: string;
  is_3d: boolean;
  color: [number, number, number];
}

export interface ClassListing {
  classes: ClassInfo[];
  class_map: Record<string, string>;
}

export interface LabelPayload {
  scan_id: string;
  labels: number[];
  provenance: number[];
  counts: { auto_count: number; corrected_count: number; unlabeled_count: number };
}

export interface CorrectionEntry {
  point_index: number;
  new_class_id: number;
  author: string;
  timestamp: number;
}

export interface CorrectionsResult {
  scan_id: string;
  applied: number;
  counts: LabelPayload["counts"];
}

export interface RankedScan {
  scan_id: string;
  rank_H: number;
  rank_U: number;
  R: number;
  mean_entropy: number;
  mean_uncertainty: number;
}

export interface SelectionLatest {
  iteration: number;
  ranked: RankedScan[];
  selected: string[];
}
