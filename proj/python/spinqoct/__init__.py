"""Constrained pulse design for spin-qudit gates.

Thin wrapper over the compiled core: spin-system construction, Fourier
pulses with spectral penalties, Lindblad propagation, exact-gradient merit
evaluation, quasi-Newton pulse optimization and the five-method comparison
protocol.
"""

from ._core import *  # noqa: F401,F403

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "1.0.0"
