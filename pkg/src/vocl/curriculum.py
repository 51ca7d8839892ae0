"""Hierarchical weighted loss and the curriculum schedulers.

The total training loss nests three supervised parts: flow, and a pose term
split into translation and rotation, each gated by a curriculum weight on
top of fixed base scales.  Three schedules drive those weights: a staged
filter that admits harder trajectories as validation stabilizes, a
self-paced exponential map from recent loss to weight, and (in the ddpg
module) a learned agent.  The baseline keeps every weight at 1.
"""

from __future__ import annotations

from dataclasses import dataclass

import math

import numpy as np

from ._kernels import pairwise_pose_loss
from .errors import (
    KeyMismatch,
    LengthMismatch,
    NegativeLoss,
    NonFiniteLoss,
    ShapeMismatch,
    TooShort,
    UnknownLevel,
)
from .metrics import Trajectory, umeyama_align


@dataclass(frozen=True)
class CurriculumWeights:
    """Gates for the three loss parts: flow, pose subtotal, rotation."""

    w_f: float
    w_p: float
    w_r: float

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.w_f, self.w_p, self.w_r)


UNIT_WEIGHTS = CurriculumWeights(1.0, 1.0, 1.0)


@dataclass(frozen=True)
class BaseScales:
    """Fixed multipliers balancing flow against pose supervision."""

    s_f: float = 0.1
    s_p: float = 10.0

    def __post_init__(self):
        if not (self.s_f > 0 and self.s_p > 0):
            raise ValueError(f"base scales must be positive, got {self.s_f}, {self.s_p}")


@dataclass(frozen=True)
class WeightBounds:
    """Curriculum weight range [w_0, w_F]."""

    w_0: float = 0.1
    w_F: float = 1.0

    def __post_init__(self):
        if not self.w_0 < self.w_F:
            raise ValueError(f"need w_0 < w_F, got {self.w_0} >= {self.w_F}")


@dataclass(frozen=True)
class LossBreakdown:
    """One step's loss parts and their weighted total."""

    flow: float
    translation: float
    rotation: float
    total: float

    def __post_init__(self):
        if min(self.flow, self.translation, self.rotation, self.total) < 0:
            raise NegativeLoss(f"loss parts must be non-negative: {self}")


def pose_supervision_loss(pred: Trajectory, gt: Trajectory, align: bool = False):
    """Pairwise relative-pose error over all ordered pose pairs.

    Every ordered pair (i, j), i != j, contributes the SE(3)-log norm of the
    discrepancy between predicted and ground-truth relative motion, split
    into its translational and rotational parts.  With align set, pred is
    first mapped through the Umeyama fit onto gt so global scale does not
    masquerade as pose error.

    Returns (translation_sum, rotation_sum).
    """
    if len(pred) != len(gt):
        raise LengthMismatch(f"pred has {len(pred)} poses, gt has {len(gt)}")
    if len(pred) < 2:
        raise TooShort(f"pose supervision needs >= 2 poses, got {len(pred)}")
    pq = pred.rotations()
    pt = pred.translations()
    if align:
        sim = umeyama_align(pred, gt)
        from ._kernels import se3_numpy as k

        pq = k.qnormalize(k.qmul(sim.rotation, pq))
        pt = sim.apply(pt)
    return pairwise_pose_loss(gt.rotations(), gt.translations(), pq, pt)


def flow_supervision_loss(pred_flows: dict, gt_flows: dict, masks: dict | None = None) -> float:
    """Mean per-vector L1 distance between keyed flow-field sets.

    Fields are arrays (..., 2); keys are (frame, offset) pairs.  A mask, when
    present for a key, is a boolean array over the field's spatial shape
    selecting the valid vectors.  The mean runs over all valid vectors of
    all keys pooled together.
    """
    if set(pred_flows) != set(gt_flows):
        only_p = sorted(set(pred_flows) - set(gt_flows))
        only_g = sorted(set(gt_flows) - set(pred_flows))
        raise KeyMismatch(f"flow keys differ: pred-only {only_p}, gt-only {only_g}")
    if not pred_flows:
        return 0.0
    total = 0.0
    count = 0
    for key in sorted(pred_flows):
        p = np.asarray(pred_flows[key], dtype=np.float64)
        g = np.asarray(gt_flows[key], dtype=np.float64)
        if p.shape != g.shape or p.shape[-1] != 2:
            raise ShapeMismatch(f"flow field {key}: pred {p.shape} vs gt {g.shape}")
        l1 = np.abs(p - g).sum(axis=-1)
        if masks is not None and key in masks:
            m = np.asarray(masks[key], dtype=bool)
            if m.shape != l1.shape:
                raise ShapeMismatch(f"mask {key}: {m.shape} does not match field {l1.shape}")
            total += float(l1[m].sum())
            count += int(m.sum())
        else:
            total += float(l1.sum())
            count += l1.size
    return total / count if count else 0.0


def hierarchical_total_loss(
    flow: float,
    translation: float,
    rotation: float,
    w: CurriculumWeights,
    s: BaseScales = BaseScales(),
) -> LossBreakdown:
    """total = w_f s_f flow + w_p s_p (translation + w_r rotation)."""
    total = w.w_f * s.s_f * flow + w.w_p * s.s_p * (translation + w.w_r * rotation)
    return LossBreakdown(flow, translation, rotation, total)


def baseline_total_loss(
    flow: float, translation: float, rotation: float, s: BaseScales = BaseScales()
) -> float:
    """Fixed-weight total: s_f flow + s_p (translation + rotation).

    Kept as its own arithmetic (not a call through the hierarchical form) so
    the two can cross-check each other.
    """
    if min(flow, translation, rotation) < 0:
        raise NegativeLoss("loss parts must be non-negative")
    return s.s_f * flow + s.s_p * (translation + rotation)


def self_paced_progress(loss: float, lam: float) -> float:
    """Progress signal exp(-lam * loss); 1 at zero loss, decaying with loss."""
    if loss < 0:
        raise NegativeLoss(f"loss {loss} is negative")
    if lam < 0:
        raise ValueError(f"decay rate must be >= 0, got {lam}")
    return math.exp(-lam * loss)


def self_paced_weights(phi: float, bounds: WeightBounds = WeightBounds()) -> CurriculumWeights:
    """Map progress in [0, 1] linearly onto [w_0, w_F], all parts alike."""
    if not 0.0 <= phi <= 1.0:
        raise ValueError(f"progress {phi} outside [0, 1]")
    w = bounds.w_0 + (bounds.w_F - bounds.w_0) * phi
    return CurriculumWeights(w, w, w)


@dataclass(frozen=True)
class PromotionRule:
    """When a staged schedule admits the next difficulty level.

    Promote once validation ATE has improved by less than min_rel_improvement
    (relative to the stage's best) for `patience` consecutive validations, or
    once the stage has consumed stage_budget steps, whichever fires first.
    A stage_budget of None disables the budget clause.
    """

    patience: int = 3
    min_rel_improvement: float = 0.01
    stage_budget: int | None = None

    def __post_init__(self):
        if self.patience < 1:
            raise ValueError(f"patience must be >= 1, got {self.patience}")


@dataclass
class SchedulerState:
    """Mutable bookkeeping shared by all scheduler modes."""

    step: int = 0
    budget: int = 1
    last_breakdown: LossBreakdown | None = None
    active_levels: tuple[int, ...] = (1, 2, 3)
    weights: CurriculumWeights = UNIT_WEIGHTS
    stage_started_step: int = 0
    stagnant_validations: int = 0
    stage_best_ate: float | None = None

    @property
    def progress(self) -> float:
        """Normalized training progress min(step / budget, 1)."""
        return min(self.step / self.budget, 1.0)


def staged_active_levels(
    state: SchedulerState, rule: PromotionRule, n_levels: int = 3
) -> tuple[int, ...]:
    """Level set after applying any promotion the state has earned.

    Cumulative prefixes only: {1}, then {1, 2}, then {1, 2, 3}; never
    shrinks.  An empty state yields the initial {1}.
    """
    levels = state.active_levels or (1,)
    if len(levels) >= n_levels:
        return levels
    budget_spent = (
        rule.stage_budget is not None
        and state.step - state.stage_started_step >= rule.stage_budget
    )
    if state.stagnant_validations >= rule.patience or budget_spent:
        return levels + (max(levels) + 1,)
    return levels


def staged_sample_filter(level_manifest: dict, active_levels, n_levels: int = 3) -> list:
    """Ids whose manifest level is active, in manifest order."""
    active = set(active_levels)
    known = set(range(1, n_levels + 1))
    for sid, level in level_manifest.items():
        if level not in known:
            raise UnknownLevel(f"sequence {sid!r} has level {level}, expected 1..{n_levels}")
    return [sid for sid, level in level_manifest.items() if level in active]


def early_stopping_check(history, patience: int) -> bool:
    """True when training should stop.

    history holds (auc, ate) per validation, oldest first.  A validation
    counts as improvement if its AUC strictly exceeds the best before it or
    its ATE strictly undercuts the best before it; the two metrics are
    tracked independently.  Stop after `patience` consecutive validations
    with neither.
    """
    if patience < 1:
        raise ValueError(f"patience must be >= 1, got {patience}")
    records = list(history)
    if not records:
        raise ValueError("early stopping needs at least one validation record")
    best_auc = -math.inf
    best_ate = math.inf
    run = 0
    for auc_value, ate_value in records:
        improved = auc_value > best_auc or ate_value < best_ate
        best_auc = max(best_auc, auc_value)
        best_ate = min(best_ate, ate_value)
        run = 0 if improved else run + 1
    return run >= patience


class Scheduler:
    """Base class: per-step weight/level policy plus validation hooks.

    The training loop drives it as
        weights, levels = sched.begin_step(step)
        ... compute LossBreakdown under `weights` ...
        sched.end_step(step, breakdown)
    and forwards every validation through on_validation.
    """

    mode = "baseline"

    def __init__(self, budget: int, n_levels: int = 3):
        if budget < 1:
            raise ValueError(f"budget must be >= 1, got {budget}")
        self.state = SchedulerState(budget=budget)
        self.n_levels = n_levels

    def begin_step(self, step: int):
        self.state.step = step
        self.state.weights = self._weights_for_step()
        return self.state.weights, self.state.active_levels

    def _weights_for_step(self) -> CurriculumWeights:
        return UNIT_WEIGHTS

    def end_step(self, step: int, breakdown: LossBreakdown):
        if not math.isfinite(breakdown.total):
            raise NonFiniteLoss(f"non-finite loss at step {step}", step=step)
        self.state.last_breakdown = breakdown

    def on_validation(self, step: int, val_ate: float, val_auc: float):
        pass


class BaselineScheduler(Scheduler):
    """All weights pinned at 1; every level active."""

    mode = "baseline"


class SelfPacedScheduler(Scheduler):
    """Weights follow exp(-lam * previous total loss), mapped to bounds.

    The first step has no previous loss and starts at w_0, the safe
    assumption while loss is unknown and presumably high.
    """

    mode = "self_paced"

    def __init__(self, budget: int, lam: float = 0.1, bounds: WeightBounds = WeightBounds()):
        super().__init__(budget)
        self.lam = lam
        self.bounds = bounds

    def _weights_for_step(self) -> CurriculumWeights:
        if self.state.last_breakdown is None:
            return CurriculumWeights(self.bounds.w_0, self.bounds.w_0, self.bounds.w_0)
        phi = self_paced_progress(self.state.last_breakdown.total, self.lam)
        return self_paced_weights(phi, self.bounds)


class StagedScheduler(Scheduler):
    """Unit weights over a growing pool of difficulty levels.

    Starts on level 1 only and promotes per its PromotionRule as validation
    ATE stagnates or the stage budget runs out; never demotes.
    """

    mode = "staged"

    def __init__(self, budget: int, rule: PromotionRule = PromotionRule(), n_levels: int = 3):
        super().__init__(budget, n_levels)
        self.rule = rule
        self.state.active_levels = (1,)

    def begin_step(self, step: int):
        self.state.step = step
        promoted = staged_active_levels(self.state, self.rule, self.n_levels)
        if promoted != self.state.active_levels:
            self.state.active_levels = promoted
            self.state.stage_started_step = step
            self.state.stagnant_validations = 0
            self.state.stage_best_ate = None
        self.state.weights = UNIT_WEIGHTS
        return self.state.weights, self.state.active_levels

    def on_validation(self, step: int, val_ate: float, val_auc: float):
        best = self.state.stage_best_ate
        if best is None:
            self.state.stage_best_ate = val_ate
            self.state.stagnant_validations = 0
            return
        rel = (best - val_ate) / best if best > 0 else 0.0
        if rel < self.rule.min_rel_improvement:
            self.state.stagnant_validations += 1
        else:
            self.state.stagnant_validations = 0
        self.state.stage_best_ate = min(best, val_ate)
