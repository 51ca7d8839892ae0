"""Curriculum learning for visual-odometry training.

Subpackages cover the pipeline end to end: pose algebra (`geometry`),
trajectory evaluation (`metrics`), motion-difficulty scoring (`difficulty`),
loss weighting and schedules (`curriculum`), the adaptive weight agent
(`ddpg`), a synthetic trainer for end-to-end checks (`surrogate`), and the
command-line front end (`cli`).
"""

__version__ = "0.1.0"

from ._kernels import BACKEND

__all__ = ["BACKEND", "__version__"]
