"""Generate a small synthetic railway dataset and look around in it.

The generator writes the same artifacts a real recording session would
produce: binary sweeps, ground-truth labels, per-pixel segmentation frames
for the paired camera, softmax predictions, and a manifest.json tying it
all together. Everything is derived from one seed, so rerunning this
script gives byte-identical files.
"""

import tempfile
from collections import Counter
from pathlib import Path

import numpy as np
from PIL import Image

from railscan import SynthSceneConfig, default_synth_camera, synth_dataset
from railscan.cloud import load_labels
from railscan.preprocess import sync_pairs

out = Path(tempfile.mkdtemp(prefix="railscan-demo-"))
print(f"writing dataset to {out}")

cfg = SynthSceneConfig(seed=7, camera=default_synth_camera(1024, 768))
manifest = synth_dataset(
    out,
    cfg=cfg,
    n_scans=4,
    n_test=1,
    pair_all=True,
    with_predictions=True,
    prediction_noise=0.3,
    points_scale=0.25,
)

# The generator registers camera frames but leaves pairing to the sync
# stage; with pair_all every frame sits 4 ms after its sweep.
pairs = sync_pairs(
    [(sid, e.t_scan) for sid, e in manifest.scans.items()],
    [(iid, e.t_image) for iid, e in manifest.images.items()],
)
for p in pairs:
    manifest.set_sync(p.scan_id, p.image_id, p.dt)
manifest.save()

# ---------------------------------------------------------------- manifest

print(f"\nmanifest at {manifest.path}")
print(f"{len(manifest.scans)} scans, {len(manifest.images)} camera frames\n")
print(f"{'scan':8} {'status':8} {'points':>7} {'t_scan':>8} {'image':8} {'dt [ms]':>8}")
for sid, entry in manifest.scans.items():
    dt = f"{entry.sync_dt * 1e3:+.1f}" if entry.sync_dt is not None else "-"
    img = entry.image_id or "-"
    print(f"{sid:8} {entry.status.value:8} {entry.n_points:>7} {entry.t_scan:>8.3f} {img:8} {dt:>8}")

# ------------------------------------------------------------- one sweep

sid = next(iter(manifest.scans))
cloud = manifest.load_scan_cloud(sid)
print(f"\nscan {sid}: {len(cloud)} points")
print(f"  x range  {cloud.xyz[:, 0].min():7.2f} .. {cloud.xyz[:, 0].max():7.2f} m")
print(f"  y range  {cloud.xyz[:, 1].min():7.2f} .. {cloud.xyz[:, 1].max():7.2f} m")
print(f"  z range  {cloud.xyz[:, 2].min():7.2f} .. {cloud.xyz[:, 2].max():7.2f} m")
print(f"  t_rel    {cloud.t_rel.min():7.4f} .. {cloud.t_rel.max():7.4f} s")

# Ground truth for training scans lives next to the generated sweeps; the
# manifest only points at it for the held-out split.
truth = load_labels(out / "gt" / f"{sid}.labels", scan_id=sid)
counts = Counter(truth.labels.tolist())
print("\nground-truth class mix:")
for class_id, n in sorted(counts.items()):
    name = truth.classes.by_id(class_id).name
    print(f"  {name:14} {n:>6}  ({100.0 * n / len(truth):5.1f} %)")

# -------------------------------------------------------- camera frame

entry = manifest.scan(sid)
frame = manifest.load_image(entry.image_id)
png = Image.fromarray(frame.pixels, mode="P")
palette = bytearray(768)
for c in frame.classes:
    palette[3 * c.id : 3 * c.id + 3] = bytes(c.color)
png.putpalette(bytes(palette))
png_path = out / f"{entry.image_id}.png"
png.save(png_path)
print(f"\npaired segmentation frame ({frame.width}x{frame.height}) saved to {png_path}")
print(f"classes present in the frame: "
      f"{', '.join(frame.classes.by_id(int(i)).name for i in np.unique(frame.pixels))}")
