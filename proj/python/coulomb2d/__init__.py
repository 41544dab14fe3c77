"""Two-dimensional Coulomb gas toolkit (C++ core)."""

from ._core import *  # noqa: F401,F403
from ._core import Error, cli

__all__ = [name for name in dir() if not name.startswith("_")]
