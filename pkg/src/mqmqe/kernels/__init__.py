"""Hot kernels with a compiled backend and a numpy fallback.

The compiled extension is used when it was built and importable; set
``MQMQE_PURE_PYTHON=1`` to force the fallback. ``BACKEND`` names the choice.
"""

from __future__ import annotations

import os

from . import _pykernels as python_backend

compiled_backend = None
if os.environ.get("MQMQE_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _ckernels as compiled_backend  # type: ignore[no-redef]
    except ImportError:
        compiled_backend = None

_impl = compiled_backend if compiled_backend is not None else python_backend
BACKEND = "cython" if compiled_backend is not None else "python"

fnv1a64 = _impl.fnv1a64
mix64 = _impl.mix64
key_hash = _impl.key_hash
hashed_embedding = _impl.hashed_embedding
embed_keys = _impl.embed_keys
rank_hinge = _impl.rank_hinge

__all__ = [
    "BACKEND",
    "compiled_backend",
    "python_backend",
    "fnv1a64",
    "mix64",
    "key_hash",
    "hashed_embedding",
    "embed_keys",
    "rank_hinge",
]
