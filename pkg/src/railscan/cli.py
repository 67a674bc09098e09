"""Command line front end for the annotation pipeline.

Every subcommand reads and writes dataset files through the manifest only.
Success prints a JSON summary on stdout and exits 0; any failure prints a
structured error report on stderr and exits nonzero.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .cloud import (
    load_labels,
    load_predictions,
    save_cloud,
    save_labels,
    save_predictions,
)
from .evaluation import ConfusionMatrix, build_report, improvement
from .manifest import DatasetManifest, ScanStatus
from .preprocess import (
    DEFAULT_KNN_ALPHA,
    DEFAULT_KNN_K,
    DEFAULT_MAX_DT,
    DEFAULT_MIN_RANGE,
    MotionParams,
    compose_masks,
    filter_reflections,
    motion_correct,
    remove_outliers,
    sync_pairs,
)
from .selection import SelectionConfig, select_for_labeling
from .synth import SynthSceneConfig, default_synth_camera, synth_dataset
from .transfer import transfer_labels


def _load_manifest(args) -> DatasetManifest:
    return DatasetManifest.load(args.manifest)


def _train_scan_ids(manifest: DatasetManifest):
    # every mutating stage leaves the held-out split untouched
    return [
        sid
        for sid, e in manifest.scans.items()
        if e.status is not ScanStatus.TEST
    ]


# ------------------------------------------------------------ subcommands


def cmd_synth(args) -> dict:
    cfg = SynthSceneConfig(
        seed=args.seed,
        speed=args.speed,
        reflection_fraction=args.reflection_fraction,
        camera=default_synth_camera(args.image_width, args.image_height),
    )
    manifest = synth_dataset(
        args.out,
        cfg=cfg,
        n_scans=args.n_scans,
        n_test=args.n_test,
        pair_all=args.pair_all,
        with_predictions=args.predictions,
        prediction_noise=args.prediction_noise,
        points_scale=args.points_scale,
    )
    return {
        "manifest": str(Path(args.out) / "manifest.json"),
        "scans": len(manifest.scans),
        "images": len(manifest.images),
        "points": sum(e.n_points for e in manifest.scans.values()),
    }


def cmd_preprocess(args) -> dict:
    manifest = _load_manifest(args)
    rows = []
    for sid in _train_scan_ids(manifest):
        entry = manifest.scan(sid)
        cloud = manifest.load_scan_cloud(sid)
        # side files are loaded against the original cloud, before any
        # row counts change underneath them
        labels = manifest.load_scan_labels(sid) if entry.labels else None
        preds = manifest.load_scan_predictions(sid) if entry.prediction else None
        filtered, range_mask = filter_reflections(cloud, args.min_range)
        cleaned, knn_mask = remove_outliers(filtered, args.knn_k, args.knn_alpha)
        mask = compose_masks(range_mask, knn_mask)

        rel = f"clouds/{sid}.clean.bin"
        save_cloud(cleaned, manifest.resolve(rel))
        entry.cloud = rel
        entry.n_points = cleaned.n_points
        if labels is not None:
            rel = f"labels/{sid}.clean.labels"
            save_labels(labels.subset(mask), manifest.resolve(rel))
            manifest.set_labels(sid, rel)
        if preds is not None:
            rel = f"preds/{sid}.clean.pred"
            save_predictions(preds.subset(mask), manifest.resolve(rel))
            manifest.set_prediction(sid, rel)
        rows.append(
            {
                "scan_id": sid,
                "kept": cleaned.n_points,
                "dropped_reflections": int((~range_mask).sum()),
                "dropped_outliers": int((~knn_mask).sum()),
            }
        )
    manifest.save()
    return {"scans": rows}


def cmd_sync(args) -> dict:
    manifest = _load_manifest(args)
    scan_times = [(sid, e.t_scan) for sid, e in manifest.scans.items()]
    image_times = [(iid, e.t_image) for iid, e in manifest.images.items()]
    pairs = sync_pairs(scan_times, image_times, args.max_dt_ms / 1000.0)
    for p in pairs:
        manifest.set_sync(p.scan_id, p.image_id, p.dt)
    manifest.save()
    paired = {p.scan_id for p in pairs}
    return {
        "pairs": [
            {"scan_id": p.scan_id, "image_id": p.image_id, "dt": p.dt}
            for p in pairs
        ],
        "unpaired_scans": [s for s, _ in scan_times if s not in paired],
    }


def cmd_motion_correct(args) -> dict:
    manifest = _load_manifest(args)
    direction = tuple(float(x) for x in args.travel_dir.split(","))
    if len(direction) != 3:
        raise ValueError("travel-dir must be three comma-separated numbers")
    rows = []
    for sid in _train_scan_ids(manifest):
        entry = manifest.scan(sid)
        cloud = manifest.load_scan_cloud(sid)
        params = MotionParams(direction, entry.v_current)
        corrected = motion_correct(cloud, params)
        rel = f"clouds/{sid}.moco.bin"
        save_cloud(corrected, manifest.resolve(rel))
        entry.cloud = rel
        rows.append(
            {
                "scan_id": sid,
                "v_current": entry.v_current,
                "max_shift": float(np.abs(cloud.t_rel * entry.v_current).max())
                if cloud.n_points
                else 0.0,
            }
        )
    manifest.save()
    return {"scans": rows}


def cmd_transfer(args) -> dict:
    manifest = _load_manifest(args)
    labeled, skipped = [], []
    for sid in _train_scan_ids(manifest):
        entry = manifest.scan(sid)
        if entry.image_id is None or entry.labels is not None:
            skipped.append(sid)
            continue
        cloud = manifest.load_scan_cloud(sid)
        image = manifest.load_image(entry.image_id)
        arr = transfer_labels(cloud, image, manifest.calibration)
        rel = f"labels/{sid}.labels"
        save_labels(arr, manifest.resolve(rel))
        manifest.set_labels(sid, rel)
        if entry.status is ScanStatus.RAW:
            manifest.set_status(sid, ScanStatus.COARSE)
        labeled.append(
            {
                "scan_id": sid,
                "points": len(arr),
                "labeled": int((arr.labels != 0).sum()),
            }
        )
    manifest.save()
    return {"labeled": labeled, "skipped": skipped}


def cmd_select(args) -> dict:
    manifest = _load_manifest(args)
    result = select_for_labeling(manifest, SelectionConfig(n=args.n))
    return result.to_dict()


def _pred_for(stem: str, pred_dir: Path):
    as_labels = pred_dir / f"{stem}.labels"
    if as_labels.exists():
        return load_labels(as_labels, scan_id=stem).labels
    as_probs = pred_dir / f"{stem}.pred"
    if as_probs.exists():
        return load_predictions(as_probs, scan_id=stem).argmax_labels()
    return None


def cmd_evaluate(args) -> dict:
    if args.pred_dir:
        if args.gt_dir is None:
            raise ValueError("--pred-dir requires --gt-dir")
        runs = _evaluate_dirs(Path(args.gt_dir), args.pred_dir)
    else:
        if args.manifest is None:
            raise ValueError("evaluate needs either --manifest or --pred-dir")
        runs = [_evaluate_manifest(_load_manifest(args))]

    improvements = []
    for i in range(len(runs)):
        for j in range(i + 1, len(runs)):
            old, new = runs[i], runs[j]
            improvements.append(
                {
                    "baseline": old.name,
                    "run": new.name,
                    "miou_pct": improvement(old.miou, new.miou)
                    if old.miou > 0
                    else None,
                    "fwiou_pct": improvement(old.fwiou, new.fwiou)
                    if old.fwiou > 0
                    else None,
                }
            )
    payload = {"runs": [r.to_dict() for r in runs], "improvements": improvements}
    if args.report:
        Path(args.report).write_text(json.dumps(payload, indent=2))
    return payload


def _evaluate_dirs(gt_dir: Path, pred_dir_args):
    gt_files = sorted(gt_dir.glob("*.labels"))
    if not gt_files:
        raise ValueError(f"no *.labels files under {gt_dir}")
    runs = []
    for spec_arg in pred_dir_args:
        name, _, dir_part = spec_arg.partition("=")
        if not dir_part:
            name, dir_part = Path(spec_arg).name, spec_arg
        pred_dir = Path(dir_part)
        missing = [
            f.stem for f in gt_files if _pred_for(f.stem, pred_dir) is None
        ]
        if missing:
            raise FileNotFoundError(
                f"run {name!r}: no prediction in {pred_dir} for: "
                + ", ".join(missing)
            )
        cm = ConfusionMatrix()
        for f in gt_files:
            gt = load_labels(f, scan_id=f.stem)
            cm.accumulate(gt.labels, _pred_for(f.stem, pred_dir))
        runs.append(build_report(cm, name=name))
    return runs


def _evaluate_manifest(manifest: DatasetManifest):
    cm = ConfusionMatrix(classes=manifest.classes)
    for sid in manifest.scan_ids_by_status(ScanStatus.TEST):
        entry = manifest.scan(sid)
        if entry.labels is None or entry.prediction is None:
            continue
        gt = manifest.load_scan_labels(sid, allow_test=True)
        pred = manifest.load_scan_predictions(sid)
        cm.accumulate(gt.labels, pred.argmax_labels())
    if cm.scans_evaluated == 0:
        raise ValueError("no test scan has both labels and a prediction")
    return build_report(cm, name="test-split")


def cmd_serve(args) -> dict:
    from .service import serve

    serve(args.manifest, host=args.host, port=args.port, ui_dir=args.ui)
    return {"status": "stopped"}


# ----------------------------------------------------------------- main


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="railscan",
        description="Semi-automated annotation pipeline for railway LiDAR scans.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def with_manifest(p):
        p.add_argument("--manifest", required=True, help="path to manifest.json")
        return p

    p = sub.add_parser("synth", help="generate a synthetic dataset")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--n-scans", type=int, default=6)
    p.add_argument("--n-test", type=int, default=2)
    p.add_argument("--pair-all", action="store_true")
    p.add_argument("--predictions", action="store_true")
    p.add_argument("--prediction-noise", type=float, default=0.25)
    p.add_argument("--points-scale", type=float, default=1.0)
    p.add_argument("--speed", type=float, default=27.78)
    p.add_argument("--reflection-fraction", type=float, default=0.0)
    p.add_argument("--image-width", type=int, default=2048)
    p.add_argument("--image-height", type=int, default=1536)
    p.set_defaults(func=cmd_synth)

    p = with_manifest(sub.add_parser("preprocess", help="range + outlier filtering"))
    p.add_argument("--min-range", type=float, default=DEFAULT_MIN_RANGE)
    p.add_argument("--knn-k", type=int, default=DEFAULT_KNN_K)
    p.add_argument("--knn-alpha", type=float, default=DEFAULT_KNN_ALPHA)
    p.set_defaults(func=cmd_preprocess)

    p = with_manifest(sub.add_parser("sync", help="pair scans with camera frames"))
    p.add_argument("--max-dt-ms", type=float, default=DEFAULT_MAX_DT * 1000.0)
    p.set_defaults(func=cmd_sync)

    p = with_manifest(
        sub.add_parser("motion-correct", help="undistort moving-sensor sweeps")
    )
    p.add_argument(
        "--speed-source",
        choices=["manifest"],
        default="manifest",
        help="where per-scan speed comes from",
    )
    p.add_argument(
        "--travel-dir",
        default="1,0,0",
        help="unit travel direction in the sensor frame, comma separated",
    )
    p.set_defaults(func=cmd_motion_correct)

    p = with_manifest(sub.add_parser("transfer", help="project image labels to points"))
    p.set_defaults(func=cmd_transfer)

    p = with_manifest(sub.add_parser("select", help="rank and queue uncertain scans"))
    p.add_argument("--n", type=int, default=10)
    p.add_argument(
        "--iteration",
        choices=["auto"],
        default="auto",
        help="iteration numbering follows the manifest's round log",
    )
    p.set_defaults(func=cmd_select)

    p = sub.add_parser("evaluate", help="score labelings against ground truth")
    p.add_argument("--manifest", help="evaluate the manifest's held-out split")
    p.add_argument(
        "--pred-dir",
        action="append",
        metavar="NAME=DIR",
        help="labeled run to score; repeat to compare runs",
    )
    p.add_argument("--gt-dir", help="directory of ground-truth .labels files")
    p.add_argument("--report", help="write the report JSON here as well")
    p.set_defaults(func=cmd_evaluate)

    p = with_manifest(sub.add_parser("serve", help="run the annotation service"))
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8411)
    p.add_argument("--ui", help="static directory to mount at /ui")
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        result = args.func(args)
    except Exception as exc:
        report = {"error": type(exc).__name__, "message": str(exc)}
        print(json.dumps(report, indent=2), file=sys.stderr)
        return 1
    print(json.dumps(result, indent=2))
    return 0


if __name__ == "__main__":
    sys.exit(main())
