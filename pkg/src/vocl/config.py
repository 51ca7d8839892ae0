"""Run configuration: YAML loading, strict validation, stable hashing.

A config file is a flat YAML mapping.  Unknown keys are rejected and every
problem is collected before raising, so a bad file reports all of its
mistakes in one go rather than one per run attempt.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

import yaml

from .errors import ConfigError

MODES = ("baseline", "self_paced", "staged", "ddpg")


@dataclass(frozen=True)
class RunConfig:
    """Everything a training run needs; defaults give a small desk-scale run."""

    seed: int = 0
    mode: str = "baseline"
    budget: int = 1500
    n_sequences: int = 90
    seq_length: int = 40
    difficulty_targets: tuple | None = None
    lr: float = 2e-4
    grad_clip: float | None = None
    # self-paced rate; matched to this surrogate's loss scale, not the
    # module-level default which assumes O(1) losses
    lam: float = 0.004
    noise_base: float = 0.03
    hidden: int = 16
    bound_t: float = 0.75
    bound_r: float = 0.65
    val_cadence: int = 100
    patience: int = 3
    min_rel_improvement: float = 0.01
    # promotion fallback: without it the staged mode only advances on a
    # validation plateau, which noisy early curves can defer indefinitely
    stage_budget: int | None = 300
    update_every: int = 50
    batch_size: int = 64

    def validate(self):
        """Return a list of problem strings; empty means the config is usable."""
        problems = []

        def is_int(v):
            return isinstance(v, int) and not isinstance(v, bool)

        def is_num(v):
            return is_int(v) or isinstance(v, float)

        if not is_int(self.seed) or self.seed < 0:
            problems.append(f"seed must be a non-negative integer, got {self.seed!r}")
        if self.mode not in MODES:
            problems.append(f"mode must be one of {'/'.join(MODES)}, got {self.mode!r}")
        for name, lo in (
            ("budget", 1),
            ("n_sequences", 5),
            ("seq_length", 10),
            ("hidden", 1),
            ("val_cadence", 1),
            ("patience", 1),
            ("update_every", 1),
            ("batch_size", 1),
        ):
            v = getattr(self, name)
            if not is_int(v) or v < lo:
                problems.append(f"{name} must be an integer >= {lo}, got {v!r}")
        for name in ("lr", "bound_t", "bound_r"):
            v = getattr(self, name)
            if not is_num(v) or not v > 0:
                problems.append(f"{name} must be a positive number, got {v!r}")
        if self.grad_clip is not None and (
            not is_num(self.grad_clip) or not self.grad_clip > 0
        ):
            problems.append(
                f"grad_clip must be a positive number or null, got {self.grad_clip!r}"
            )
        for name in ("lam", "noise_base", "min_rel_improvement"):
            v = getattr(self, name)
            if not is_num(v) or v < 0:
                problems.append(f"{name} must be a non-negative number, got {v!r}")
        if self.stage_budget is not None and (
            not is_int(self.stage_budget) or self.stage_budget < 1
        ):
            problems.append(
                f"stage_budget must be null or an integer >= 1, got {self.stage_budget!r}"
            )
        if self.difficulty_targets is not None:
            targets = self.difficulty_targets
            if not isinstance(targets, (list, tuple)):
                problems.append("difficulty_targets must be null or a list of numbers")
            else:
                bad = [t for t in targets if not is_num(t) or not 0.0 <= t <= 1.0]
                if bad:
                    problems.append(
                        f"difficulty_targets entries must lie in [0, 1], got {bad!r}"
                    )
                if is_int(self.n_sequences) and len(targets) != self.n_sequences:
                    problems.append(
                        f"difficulty_targets has {len(targets)} entries but "
                        f"n_sequences is {self.n_sequences}"
                    )
        return problems

    def resolved(self):
        """Plain-type mapping of every field, suitable for dumping/hashing."""
        out = {}
        for field in dataclasses.fields(self):
            value = getattr(self, field.name)
            if isinstance(value, tuple):
                value = list(value)
            out[field.name] = value
        return out

    def config_hash(self):
        blob = json.dumps(self.resolved(), sort_keys=True)
        return hashlib.sha256(blob.encode()).hexdigest()[:12]

    def run_dir_name(self):
        return f"{self.config_hash()}-seed{self.seed}"

    def replace(self, **kwargs):
        return dataclasses.replace(self, **kwargs)


def config_from_mapping(mapping):
    """Build a RunConfig from a dict, reporting every problem at once."""
    if mapping is None:
        mapping = {}
    if not isinstance(mapping, dict):
        raise ConfigError(["configuration must be a mapping of option names to values"])
    known = {f.name for f in dataclasses.fields(RunConfig)}
    problems = [f"unknown option: {key!r}" for key in sorted(set(mapping) - known)]
    kwargs = {k: v for k, v in mapping.items() if k in known}
    if "difficulty_targets" in kwargs and isinstance(kwargs["difficulty_targets"], list):
        kwargs["difficulty_targets"] = tuple(kwargs["difficulty_targets"])
    try:
        cfg = RunConfig(**kwargs)
    except TypeError:
        raise ConfigError(problems or ["configuration could not be constructed"]) from None
    problems.extend(cfg.validate())
    if problems:
        raise ConfigError(problems)
    return cfg


def load_run_config(path):
    text = Path(path).read_text()
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError([f"could not parse YAML: {exc}"]) from None
    return config_from_mapping(data)


def dump_resolved_config(cfg, path):
    """Write the fully-resolved config next to a run's outputs."""
    path = Path(path)
    path.write_text(yaml.safe_dump(cfg.resolved(), sort_keys=True, default_flow_style=False))
    return path
