"""Hot-kernel backend selection.

The compiled extension is preferred when present; the numpy implementation
is the reference and the fallback.  Set VOCL_NO_EXT=1 to force the fallback
(parity tests and the benchmark use this).
"""

import os

from . import se3_numpy

if os.environ.get("VOCL_NO_EXT"):
    _impl = se3_numpy
    BACKEND = "numpy"
else:
    try:
        from . import _se3 as _impl

        BACKEND = "compiled"
    except ImportError:
        _impl = se3_numpy
        BACKEND = "numpy"

pairwise_pose_loss = _impl.pairwise_pose_loss
motion_extrema = _impl.motion_extrema
