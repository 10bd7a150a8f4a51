"""Cokernel statistics of Haar-uniform band matrices over the p-adic integers.

The package samples masked matrices over Z/p^K from refinable counter-based
digit streams, extracts cokernel types through Smith-form valuations with
automatic precision escalation, computes exact and Monte Carlo moments of
the cokernel against finite abelian p-groups, and drives the experiments
that exhibit the bandwidth phase transition from the command line.
"""

from ._kernels import BACKEND

__all__ = ["BACKEND", "__version__"]
__version__ = "0.1.0"
