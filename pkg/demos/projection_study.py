"""How ego motion and calibration error show up in transferred labels."""

import numpy as np

from railscan import SynthSceneConfig, synth_scene
from railscan.camera import nearest_pixel, project_points
from railscan.preprocess import MotionParams, motion_correct
from railscan.transfer import transfer_labels

scene = synth_scene(SynthSceneConfig(seed=3, speed=27.78))
cloud = scene.cloud_distorted
calib = scene.calibration
print(f"sweep: {len(cloud)} points at {scene.config.speed} m/s "
      f"({scene.config.speed * 3.6:.0f} km/h)")

# a quarter-second sweep at 27.78 m/s smears the latest returns almost 7 m
shift = np.linalg.norm(cloud.xyz - scene.cloud_true.xyz, axis=1)
print(f"distortion: max {shift.max():.3f} m, mean {shift.mean():.3f} m")

undone = motion_correct(cloud, MotionParams((1.0, 0.0, 0.0), scene.config.speed))
residual = np.linalg.norm(undone.xyz - scene.cloud_true.xyz, axis=1)
print(f"after correction: max residual {residual.max():.2e} m")

u, v, valid = project_points(scene.cloud_true.xyz, calib)
print(f"\nprojection: {valid.sum()} of {len(cloud)} points land in the "
      f"{calib.width}x{calib.height} frame")

def transfer_accuracy(c):
    got = transfer_labels(scene.cloud_true, scene.label_image, c)
    _, _, ok = project_points(scene.cloud_true.xyz, c)
    agree = got.labels[ok] == scene.labels.labels[ok]
    return got, ok, float(agree.mean())

got, ok, acc = transfer_accuracy(calib)
print(f"transfer with exact calibration: {100 * acc:.2f} % of valid points correct")
# residual misses sit where one beam spans two classes inside a pixel

# a 5 cm translation error drags labels across class boundaries
bad = calib.with_translation_offset((0.05, 0.0, 0.0))
got2, ok2, acc2 = transfer_accuracy(bad)
print(f"with a 5 cm calibration shift: {100 * acc2:.2f} %")

newly_wrong = ok & ok2 & (got.labels == scene.labels.labels) & (got2.labels != scene.labels.labels)
u2, v2, _ = project_points(scene.cloud_true.xyz, bad)
px = nearest_pixel(u2[newly_wrong], calib.width)
py = nearest_pixel(v2[newly_wrong], calib.height)

# distance (in pixels, chebyshev) from each new miss to the nearest class edge
from scipy import ndimage

pix = scene.label_image.pixels
edge = np.zeros_like(pix, dtype=bool)
edge[:-1, :] |= pix[:-1, :] != pix[1:, :]
edge[1:, :] |= pix[:-1, :] != pix[1:, :]
edge[:, :-1] |= pix[:, :-1] != pix[:, 1:]
edge[:, 1:] |= pix[:, :-1] != pix[:, 1:]
d = ndimage.distance_transform_cdt(~edge, metric="chessboard")[py, px]
print(f"{newly_wrong.sum()} points flipped from right to wrong; "
      f"{100 * float((d <= 3).mean()):.1f} % of them within 3 px of a class boundary")
