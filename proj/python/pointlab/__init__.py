"""Marked temporal point process toolkit (thin wrapper over the C++ core)."""

try:
    from ._pointlab import *  # noqa: F401,F403  (installed package layout)
except ImportError:
    from _pointlab import *  # noqa: F401,F403  (build-tree layout for tests)
