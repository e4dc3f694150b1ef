"""Backend selection for the walk kernel.

The compiled extension is used when importable, unless the environment
variable ``DRONEMOB_PURE_PYTHON=1`` forces the numpy fallback.
"""

import os

from . import _walk_py

BACKEND = "python"
advance_walks = _walk_py.advance_walks

if os.environ.get("DRONEMOB_PURE_PYTHON", "") != "1":
    try:
        from . import _walk
    except ImportError:  # extension not built
        pass
    else:
        BACKEND = "compiled"
        advance_walks = _walk.advance_walks


def get_backend(name=None):
    """Return ``(name, advance_walks)`` for ``name`` in {None, 'python', 'compiled'}."""
    if name is None:
        return BACKEND, advance_walks
    if name == "python":
        return "python", _walk_py.advance_walks
    if name == "compiled":
        from . import _walk

        return "compiled", _walk.advance_walks
    raise ValueError(f"unknown backend {name!r}")
