"""Numerical laboratory for the finite cosine kernel, its Dirac system and the
associated spaces of entire functions."""
from __future__ import annotations

__version__ = "0.1.0"
