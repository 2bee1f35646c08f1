"""Stationary and dynamic frequency combs of the Lugiato-Lefever equation.

The package is split into

* :mod:`llecomb.model`: constant solutions, a priori bounds and the
  closed-form location of bifurcation points,
* :mod:`llecomb.spectral`: cosine-spectral Newton solver for the Neumann
  problem on ``[0, π]``,
* :mod:`llecomb.continuation`: pseudo-arclength continuation and branch
  switching,
* :mod:`llecomb.evolution`: Strang splitting for the time-dependent equation,
* :mod:`llecomb.cli`: the ``llecomb`` command-line tool.
"""

from ._backend import backend_name
from .model import (
    BifurcationCandidate,
    BoundsReport,
    ConstantState,
    KernelPair,
    Parameters,
    bounds_report,
    enumerate_bifpoints_bar,
    enumerate_bifpoints_hat,
    kernel_condition,
    kernel_vectors,
    trivial_bar,
    trivial_hat,
)

__version__ = "0.1.0"

__all__ = [
    "BifurcationCandidate",
    "BoundsReport",
    "ConstantState",
    "KernelPair",
    "Parameters",
    "backend_name",
    "bounds_report",
    "enumerate_bifpoints_bar",
    "enumerate_bifpoints_hat",
    "kernel_condition",
    "kernel_vectors",
    "trivial_bar",
    "trivial_hat",
]
