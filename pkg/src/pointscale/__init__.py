"""Coarse-to-fine point cloud generation.

Point clouds are tokenized into a multi-scale discrete representation
(nested farthest-point-sampling hierarchies plus residual vector
quantization against a shared codebook), and an autoregressive
transformer predicts whole scales one at a time, coarse to fine.

The two trainable stages are exposed as sklearn-style estimators:
:class:`~pointscale.msvq.MultiScaleTokenizer` (fit / transform /
inverse_transform) and :class:`~pointscale.transformer.NextScaleGenerator`
(fit / sample).
"""

__version__ = "0.1.0"

from . import autodiff  # noqa: F401  (pins BLAS threads at import)
from .errors import DataError, NumericError, PointScaleError

__all__ = ["DataError", "NumericError", "PointScaleError", "__version__"]
