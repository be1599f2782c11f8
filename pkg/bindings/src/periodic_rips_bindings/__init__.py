"""Array-interchange bindings over the periodic-rips toolchain.

Exposes ``featurize_unit``, ``load_session``, and ``predict`` for ML
pipelines. The core library is driven exclusively through its public
surfaces: the command-line tool and the documented container/CSV formats.
Returned arrays are contiguous row-major numpy arrays with declared
dtypes, so any framework can wrap them zero-copy.
"""

from .core import (
    BindingError,
    BoundSession,
    FeaturizedArrays,
    featurize_unit,
    load_session,
    predict,
    predict_many,
)

__version__ = "0.1.0"  # mirrors the core library

__all__ = [
    "BindingError",
    "BoundSession",
    "FeaturizedArrays",
    "featurize_unit",
    "load_session",
    "predict",
    "predict_many",
    "__version__",
]
