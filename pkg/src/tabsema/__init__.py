"""Column type prediction for metadata-free tables.

Combines a hybrid neural network over micro tables with knowledge-base
property features, plus two ensemble schemes and a lookup-vote baseline.
"""

__version__ = "0.1.0"

from .kernels import BACKEND as KERNEL_BACKEND  # noqa: F401
