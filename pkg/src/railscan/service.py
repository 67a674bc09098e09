"""HTTP service over one dataset manifest.

Serves scans, labels, and camera label images to the annotation client,
accepts human corrections, and runs selection rounds. Any number of readers
may hit the service concurrently; every mutation (corrections, completions,
selection runs) funnels through a single lock, and anything slow runs on a
one-worker executor behind a job id.

Corrections are durable before they are acknowledged: each PUT is appended
and fsynced to a per-scan JSONL journal, then the label file is rewritten
atomically. A crash between the two leaves the journal ahead of the labels,
never the reverse.
"""

from __future__ import annotations

import io
import json
import os
import tempfile
import threading
import time
import uuid
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import List, Optional

from fastapi import Body, FastAPI, HTTPException, Response
from fastapi.middleware.cors import CORSMiddleware
from fastapi.staticfiles import StaticFiles
from PIL import Image
from pydantic import BaseModel, Field

from .cloud import cloud_to_bytes, labels_to_bytes
from .evaluation import ConfusionMatrix, build_report
from .manifest import DatasetManifest, ScanStatus
from .selection import SelectionConfig, select_for_labeling
from .transfer import CorrectionSet, apply_corrections, label_status

MUTABLE_STATUSES = (
    ScanStatus.COARSE,
    ScanStatus.PENDING_ANNOTATION,
    ScanStatus.CORRECTED,
)


class CorrectionIn(BaseModel):
    point_index: int
    new_class_id: int
    author: str = ""
    timestamp: float


class CorrectionsPayload(BaseModel):
    corrections: List[CorrectionIn] = Field(min_length=1)


class SelectionRunPayload(BaseModel):
    n: int = 10
    wait: bool = False


def _atomic_write(path: Path, data: bytes) -> None:
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _append_journal(path: Path, record: dict) -> None:
    with open(path, "ab") as fh:
        fh.write(json.dumps(record).encode("utf-8") + b"\n")
        fh.flush()
        os.fsync(fh.fileno())


def _png_palette_bytes(pixels, classes) -> bytes:
    img = Image.fromarray(pixels, mode="P")
    palette = [0] * 768
    for c in classes:
        palette[c.id * 3 : c.id * 3 + 3] = list(c.color)
    img.putpalette(palette)
    buf = io.BytesIO()
    img.save(buf, format="PNG")
    return buf.getvalue()


def _scan_summary(entry) -> dict:
    d = entry.to_dict()
    d["has_labels"] = entry.labels is not None
    d["has_prediction"] = entry.prediction is not None
    return d


def create_app(manifest_path, ui_dir: Optional[Path] = None) -> FastAPI:
    """Build the service around one manifest file.

    The manifest is loaded once and held in memory; every mutation saves it
    back through the manifest's own atomic writer.
    """
    manifest = DatasetManifest.load(manifest_path)
    app = FastAPI(title="railscan dataset service")
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"]
    )
    lock = threading.Lock()
    jobs: dict = {}
    executor = ThreadPoolExecutor(max_workers=1)
    app.state.manifest = manifest
    app.state.jobs = jobs

    def scan_or_404(scan_id: str):
        try:
            return manifest.scan(scan_id)
        except KeyError:
            raise HTTPException(404, f"unknown scan {scan_id!r}")

    # ------------------------------------------------------------- reads

    @app.get("/scans")
    def list_scans():
        return {
            "scans": [_scan_summary(e) for e in manifest.scans.values()],
            "images": [e.to_dict() for e in manifest.images.values()],
        }

    @app.get("/classes")
    def list_classes():
        return {
            "classes": manifest.classes.to_dicts(),
            "class_map": dict(manifest.class_map),
        }

    @app.get("/scans/{scan_id}/points")
    def get_points(scan_id: str):
        scan_or_404(scan_id)
        cloud = manifest.load_scan_cloud(scan_id)
        return Response(
            content=cloud_to_bytes(cloud), media_type="application/octet-stream"
        )

    @app.get("/scans/{scan_id}/labels")
    def get_labels(scan_id: str):
        entry = scan_or_404(scan_id)
        if entry.status is ScanStatus.TEST:
            raise HTTPException(
                403, f"scan {scan_id} is in the held-out test split"
            )
        if entry.labels is None:
            raise HTTPException(404, f"scan {scan_id} has no labels yet")
        arr = manifest.load_scan_labels(scan_id)
        return {
            "scan_id": scan_id,
            "labels": arr.labels.tolist(),
            "provenance": arr.provenance.tolist(),
            "counts": label_status(arr),
        }

    @app.get("/scans/{scan_id}/image")
    def get_image(scan_id: str):
        entry = scan_or_404(scan_id)
        if entry.image_id is None:
            raise HTTPException(404, f"scan {scan_id} has no paired image")
        img = manifest.load_image(entry.image_id)
        return Response(
            content=_png_palette_bytes(img.pixels, manifest.classes),
            media_type="image/png",
        )

    @app.get("/selection/latest")
    def selection_latest():
        if not manifest.al_iterations:
            raise HTTPException(404, "no selection round has run yet")
        return manifest.al_iterations[-1]

    @app.get("/metrics/report")
    def metrics_report():
        cm = ConfusionMatrix(classes=manifest.classes)
        for scan_id in manifest.scan_ids_by_status(ScanStatus.TEST):
            entry = manifest.scan(scan_id)
            if entry.labels is None or entry.prediction is None:
                continue
            gt = manifest.load_scan_labels(scan_id, allow_test=True)
            pred = manifest.load_scan_predictions(scan_id)
            cm.accumulate(gt.labels, pred.argmax_labels())
        if cm.scans_evaluated == 0:
            raise HTTPException(
                404, "no test scan has both labels and a prediction"
            )
        return build_report(cm, name="test-split").to_dict()

    @app.get("/jobs/{job_id}")
    def get_job(job_id: str):
        job = jobs.get(job_id)
        if job is None:
            raise HTTPException(404, f"unknown job {job_id!r}")
        return job

    # --------------------------------------------------------- mutations

    @app.put("/scans/{scan_id}/corrections")
    def put_corrections(scan_id: str, payload: CorrectionsPayload):
        with lock:
            entry = scan_or_404(scan_id)
            if entry.status not in MUTABLE_STATUSES:
                raise HTTPException(
                    409,
                    f"scan {scan_id} is {entry.status.value}; corrections need "
                    "a labeled, non-test scan",
                )
            if entry.labels is None:
                raise HTTPException(409, f"scan {scan_id} has no labels to correct")
            rows = [c.model_dump() for c in payload.corrections]
            corrections = CorrectionSet.from_dicts(scan_id, rows)
            labels = manifest.load_scan_labels(scan_id)
            try:
                updated = apply_corrections(labels, corrections)
            except (ValueError, IndexError) as exc:
                raise HTTPException(422, str(exc))

            label_path = manifest.resolve(entry.labels)
            journal = label_path.with_suffix(label_path.suffix + ".corrections.jsonl")
            _append_journal(
                journal, {"received_at": time.time(), "corrections": rows}
            )
            _atomic_write(label_path, labels_to_bytes(updated))
            return {
                "scan_id": scan_id,
                "applied": len(corrections),
                "counts": label_status(updated),
            }

    @app.post("/scans/{scan_id}/complete")
    def complete_scan(scan_id: str):
        with lock:
            entry = scan_or_404(scan_id)
            if entry.labels is None:
                raise HTTPException(409, f"scan {scan_id} has no labels yet")
            try:
                manifest.set_status(scan_id, ScanStatus.CORRECTED)
            except ValueError as exc:
                raise HTTPException(409, str(exc))
            manifest.save()
            return _scan_summary(entry)

    def run_selection(n: int) -> dict:
        with lock:
            result = select_for_labeling(manifest, SelectionConfig(n=n))
            return result.to_dict()

    @app.post("/selection/run")
    def selection_run(payload: SelectionRunPayload = Body(default=SelectionRunPayload())):
        if payload.n < 1:
            raise HTTPException(422, "selection size n must be >= 1")
        if payload.wait:
            try:
                return run_selection(payload.n)
            except ValueError as exc:
                raise HTTPException(409, str(exc))
        job_id = uuid.uuid4().hex[:12]
        jobs[job_id] = {"job_id": job_id, "status": "running"}

        def work():
            try:
                result = run_selection(payload.n)
                jobs[job_id] = {"job_id": job_id, "status": "done", "result": result}
            except Exception as exc:
                jobs[job_id] = {"job_id": job_id, "status": "failed", "error": str(exc)}

        executor.submit(work)
        return Response(
            content=json.dumps({"job_id": job_id, "status": "running"}),
            status_code=202,
            media_type="application/json",
        )

    if ui_dir is not None and Path(ui_dir).is_dir():
        app.mount("/ui", StaticFiles(directory=ui_dir, html=True), name="ui")

    return app


def serve(manifest_path, host: str = "127.0.0.1", port: int = 8411,
          ui_dir: Optional[Path] = None) -> None:
    """Run the service until interrupted."""
    import uvicorn

    uvicorn.run(create_app(manifest_path, ui_dir=ui_dir), host=host, port=port)
