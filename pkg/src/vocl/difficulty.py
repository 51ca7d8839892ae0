"""Motion-difficulty scoring of trajectories and dataset partitioning.

A trajectory's difficulty is read off its frame-to-frame motion: the
per-axis maxima of translation and rotation-vector magnitudes over all six
degrees of freedom, min-max normalized against dataset statistics and
combined by a weighted average into a single score in [0, 1].  Scored
datasets are split into equal-count difficulty levels.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._kernels import motion_extrema
from .errors import TooFewSequences, TooShort
from .metrics import Trajectory


@dataclass(frozen=True)
class MotionProfile:
    """Per-axis |translation| and |rotation-vector| maxima, shape (3,) each."""

    max_trans: np.ndarray
    max_rot: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "max_trans", np.asarray(self.max_trans, dtype=np.float64).reshape(3))
        object.__setattr__(self, "max_rot", np.asarray(self.max_rot, dtype=np.float64).reshape(3))

    def components(self) -> np.ndarray:
        """The six maxima as one vector: translations first, then rotations."""
        return np.concatenate([self.max_trans, self.max_rot])


@dataclass(frozen=True)
class DifficultyScore:
    """A sequence's raw profile, normalized score, and assigned level.

    level is 0 until a partition assigns one of 1..n_levels.
    """

    sequence_id: str
    raw: MotionProfile
    normalized: float
    level: int = 0

    def __post_init__(self):
        if not 0.0 <= self.normalized <= 1.0:
            raise ValueError(f"normalized score {self.normalized} outside [0, 1]")


@dataclass(frozen=True)
class DatasetStats:
    """Componentwise min/max over a dataset plus combination weights.

    lo and hi are 6-vectors ordered like MotionProfile.components();
    weights are non-negative and sum to 1.
    """

    lo: np.ndarray
    hi: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        lo = np.asarray(self.lo, dtype=np.float64).reshape(6)
        hi = np.asarray(self.hi, dtype=np.float64).reshape(6)
        w = np.asarray(self.weights, dtype=np.float64).reshape(6)
        if np.any(lo > hi):
            raise ValueError("stats min exceeds max in some component")
        if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-12:
            raise ValueError("weights must be non-negative and sum to 1")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)
        object.__setattr__(self, "weights", w)

    @staticmethod
    def from_profiles(profiles, weights=None) -> "DatasetStats":
        """Collect componentwise extrema; uniform weights unless given."""
        if not profiles:
            raise TooFewSequences("no profiles to build stats from")
        comps = np.stack([p.components() for p in profiles])
        w = np.full(6, 1.0 / 6.0) if weights is None else weights
        return DatasetStats(comps.min(axis=0), comps.max(axis=0), w)


def motion_profile(traj: Trajectory) -> MotionProfile:
    """Scan consecutive relative poses for per-axis motion maxima."""
    if len(traj) < 2:
        raise TooShort(f"motion profile of {traj.sequence_id!r} needs >= 2 poses, got {len(traj)}")
    mt, mr = motion_extrema(traj.rotations(), traj.translations())
    return MotionProfile(mt, mr)


def difficulty_score(profile: MotionProfile, stats: DatasetStats) -> float:
    """Min-max normalize each component (clamped) and combine by weights.

    A component with zero dataset range normalizes to 0.
    """
    span = stats.hi - stats.lo
    safe = np.where(span > 0, span, 1.0)
    norm = np.clip((profile.components() - stats.lo) / safe, 0.0, 1.0)
    norm = np.where(span > 0, norm, 0.0)
    # divide by the actual weight sum so a profile at the dataset maximum
    # scores exactly 1.0 even when the weights carry rounding residue
    return float((stats.weights * norm).sum() / stats.weights.sum())


def partition_levels(scores, n_levels: int = 3, thresholds=None):
    """Assign difficulty levels 1..n_levels with equal-count groups.

    Default mode sorts by (score, sequence_id) and splits into contiguous
    groups whose sizes differ by at most 1 (earlier groups take the
    remainder); thresholds are the maximum scores of the first n_levels - 1
    groups.  Passing explicit `thresholds` instead assigns level g to scores
    <= thresholds[g-1], the last level catching the remainder; group sizes
    are then whatever the data gives.

    Returns (thresholds, assigned) where assigned carries the same
    DifficultyScore entries, input order preserved, with levels filled in.
    """
    scores = list(scores)
    if len(scores) < n_levels:
        raise TooFewSequences(f"need >= {n_levels} sequences, got {len(scores)}")

    if thresholds is not None:
        ths = [float(t) for t in thresholds]
        if len(ths) != n_levels - 1 or sorted(ths) != ths:
            raise ValueError(f"need {n_levels - 1} non-decreasing thresholds, got {ths}")
        assigned = []
        for s in scores:
            level = n_levels
            for g, th in enumerate(ths, start=1):
                if s.normalized <= th:
                    level = g
                    break
            assigned.append(DifficultyScore(s.sequence_id, s.raw, s.normalized, level))
        return tuple(ths), assigned

    order = sorted(range(len(scores)), key=lambda i: (scores[i].normalized, scores[i].sequence_id))
    base, extra = divmod(len(scores), n_levels)
    levels = [0] * len(scores)
    ths = []
    pos = 0
    for g in range(1, n_levels + 1):
        size = base + (1 if g <= extra else 0)
        chunk = order[pos : pos + size]
        for i in chunk:
            levels[i] = g
        if g < n_levels:
            ths.append(scores[chunk[-1]].normalized)
        pos += size
    assigned = [
        DifficultyScore(s.sequence_id, s.raw, s.normalized, levels[i])
        for i, s in enumerate(scores)
    ]
    return tuple(ths), assigned


def score_histogram(scores, n_bins: int = 20):
    """Histogram of normalized scores over [0, 1]; returns (edges, counts)."""
    values = [s.normalized for s in scores]
    counts, edges = np.histogram(values, bins=n_bins, range=(0.0, 1.0))
    return edges, counts
