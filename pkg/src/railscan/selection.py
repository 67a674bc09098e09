"""Pick the scans whose predictions look least trustworthy.

Per-point normalized entropy and max-probability uncertainty are averaged
per scan, each scan gets one rank per score (rank 1 = most informative),
and the scans with the smallest rank sum go to the annotation queue.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from .cloud import PredictionMatrix
from .manifest import DatasetManifest, ScanEntry, ScanStatus

DEFAULT_SELECTION_N = 10

# Statuses eligible for selection by default: auto-labeled scans nobody
# has touched. Scans already queued or corrected are out, and TEST is
# excluded unconditionally below.
DEFAULT_CANDIDATE_STATUSES = (ScanStatus.COARSE,)


def _check_simplex(probs) -> np.ndarray:
    p = np.asarray(probs, dtype=np.float64).reshape(-1)
    if p.size < 2:
        raise ValueError("probability vector must have at least 2 entries")
    if not np.all(np.isfinite(p)):
        raise ValueError("probability vector has non-finite entries")
    if np.any(p < 0.0) or np.any(p > 1.0):
        raise ValueError("probabilities must lie in [0, 1]")
    total = float(p.sum())
    if abs(total - 1.0) > 1e-4:
        raise ValueError(f"probabilities sum to {total}, expected 1 within 1e-4")
    return p


def point_entropy(probs) -> float:
    """Shannon entropy in bits divided by log2(n_classes), so an n-way
    uniform vector scores exactly 1 and a one-hot vector scores 0."""
    p = _check_simplex(probs)
    nz = p[p > 0.0]
    h = -float(np.sum(nz * np.log2(nz))) / math.log2(p.size)
    return min(1.0, max(0.0, h))


def point_uncertainty(probs) -> float:
    """1 - max probability: 0 for a confident one-hot prediction, at most
    1 - 1/n_classes for the uniform one."""
    p = _check_simplex(probs)
    return 1.0 - float(p.max())


@dataclass(frozen=True)
class ScanScore:
    scan_id: str
    mean_entropy: float
    mean_uncertainty: float
    n_points: int

    def __post_init__(self):
        if self.n_points < 1:
            raise ValueError(f"scan {self.scan_id}: score needs >= 1 point")
        for name in ("mean_entropy", "mean_uncertainty"):
            v = getattr(self, name)
            if not (0.0 <= v <= 1.0):
                raise ValueError(f"scan {self.scan_id}: {name} {v} outside [0, 1]")


def score_scan(pred: PredictionMatrix) -> ScanScore:
    if pred.n_points < 1:
        raise ValueError(f"scan {pred.scan_id}: cannot score an empty prediction")
    p = pred.probs.astype(np.float64)
    # 0 * log2(0) is defined as 0; mask zeros before taking the log.
    logp = np.log2(np.where(p > 0.0, p, 1.0))
    h = -np.sum(p * logp, axis=1) / math.log2(p.shape[1])
    h = np.clip(h, 0.0, 1.0)
    u = 1.0 - p.max(axis=1)
    return ScanScore(
        scan_id=pred.scan_id,
        mean_entropy=float(h.mean()),
        mean_uncertainty=float(u.mean()),
        n_points=pred.n_points,
    )


@dataclass(frozen=True)
class RankedScan:
    scan_id: str
    rank_h: int
    rank_u: int
    r: int
    mean_entropy: float
    mean_uncertainty: float

    def to_dict(self) -> dict:
        return {
            "scan_id": self.scan_id,
            "rank_H": self.rank_h,
            "rank_U": self.rank_u,
            "R": self.r,
            "mean_entropy": self.mean_entropy,
            "mean_uncertainty": self.mean_uncertainty,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RankedScan":
        return cls(
            scan_id=d["scan_id"],
            rank_h=int(d["rank_H"]),
            rank_u=int(d["rank_U"]),
            r=int(d["R"]),
            mean_entropy=float(d["mean_entropy"]),
            mean_uncertainty=float(d["mean_uncertainty"]),
        )


def rank_scans(scores: Sequence[ScanScore]) -> List[RankedScan]:
    """Combine the two per-scan scores into one ordering.

    Each score is ranked separately with rank 1 for the highest value
    (the most diverse or least confident scan); ties take ascending
    scan_id, so ranks are a permutation of 1..m. The combined key
    R = rank_H + rank_U sorts ascending, ties broken by rank_H then
    scan_id. Only the order of the scores matters: any strictly
    increasing transform of one score column leaves the result unchanged.
    """
    if not scores:
        raise ValueError("rank_scans needs at least one score")
    ids = [s.scan_id for s in scores]
    if len(set(ids)) != len(ids):
        raise ValueError("duplicate scan_id in scores")
    by_h = sorted(scores, key=lambda s: (-s.mean_entropy, s.scan_id))
    by_u = sorted(scores, key=lambda s: (-s.mean_uncertainty, s.scan_id))
    rank_h = {s.scan_id: i + 1 for i, s in enumerate(by_h)}
    rank_u = {s.scan_id: i + 1 for i, s in enumerate(by_u)}
    ranked = [
        RankedScan(
            scan_id=s.scan_id,
            rank_h=rank_h[s.scan_id],
            rank_u=rank_u[s.scan_id],
            r=rank_h[s.scan_id] + rank_u[s.scan_id],
            mean_entropy=s.mean_entropy,
            mean_uncertainty=s.mean_uncertainty,
        )
        for s in scores
    ]
    ranked.sort(key=lambda r: (r.r, r.rank_h, r.scan_id))
    return ranked


@dataclass(frozen=True)
class SelectionConfig:
    """How many scans to pick and which ones compete.

    ``predicate`` can narrow the pool further (it sees the ScanEntry);
    TEST scans are never candidates no matter what.
    """

    n: int = DEFAULT_SELECTION_N
    statuses: Tuple[ScanStatus, ...] = DEFAULT_CANDIDATE_STATUSES
    predicate: Optional[Callable[[ScanEntry], bool]] = None

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("selection size n must be >= 1")
        if ScanStatus.TEST in self.statuses:
            raise ValueError("test scans are never selection candidates")


@dataclass(frozen=True)
class SelectionResult:
    iteration: int
    ranked: Tuple[RankedScan, ...]
    selected: Tuple[str, ...]

    def to_dict(self) -> dict:
        return {
            "iteration": self.iteration,
            "ranked": [r.to_dict() for r in self.ranked],
            "selected": list(self.selected),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SelectionResult":
        return cls(
            iteration=int(d["iteration"]),
            ranked=tuple(RankedScan.from_dict(r) for r in d["ranked"]),
            selected=tuple(d["selected"]),
        )


def candidate_scans(
    manifest: DatasetManifest, cfg: SelectionConfig
) -> List[ScanEntry]:
    out = []
    for entry in manifest.scans.values():
        if entry.status is ScanStatus.TEST:
            continue
        if entry.status not in cfg.statuses:
            continue
        if cfg.predicate is not None and not cfg.predicate(entry):
            continue
        out.append(entry)
    return out


def select_for_labeling(
    manifest: DatasetManifest,
    cfg: Optional[SelectionConfig] = None,
    at: Optional[float] = None,
    save: bool = True,
) -> SelectionResult:
    """Run one active-learning iteration over the manifest.

    Scores every candidate scan's prediction, ranks them, takes the first
    cfg.n (all of them if fewer), appends the result to al_iterations,
    and flips the selected scans to PENDING_ANNOTATION. The manifest file
    is rewritten in place when it has a bound path and ``save`` is true.
    """
    if cfg is None:
        cfg = SelectionConfig()
    candidates = candidate_scans(manifest, cfg)
    if not candidates:
        raise ValueError("no candidate scans to select from")

    missing = []
    for entry in candidates:
        if entry.prediction is None:
            missing.append(f"{entry.scan_id} (no prediction registered)")
        elif not manifest.resolve(entry.prediction).is_file():
            missing.append(f"{entry.scan_id} ({entry.prediction} not found)")
    if missing:
        raise ValueError(
            "selection needs a prediction for every candidate; missing: "
            + ", ".join(sorted(missing))
        )

    scores = [
        score_scan(manifest.load_scan_predictions(e.scan_id)) for e in candidates
    ]
    ranked = rank_scans(scores)
    selected = tuple(r.scan_id for r in ranked[: cfg.n])
    result = SelectionResult(
        iteration=manifest.next_iteration(),
        ranked=tuple(ranked),
        selected=selected,
    )
    manifest.al_iterations.append(result.to_dict())
    for sid in selected:
        manifest.set_status(sid, ScanStatus.PENDING_ANNOTATION, at=at)
    if save and manifest.path is not None:
        manifest.save()
    return result
