"""Damped wave equation in R^n: explicit Bessel-kernel solution formulas,
heat/wave decomposition, and tracking of the spatial maximizers of u(., t)."""

from . import hotspots, initdata, pde, quadrature, specfun, verify
from .initdata import Bump, BumpSum, ProblemSetup
from .specfun import Family, KernelId

__version__ = "0.1.0"

__all__ = [
    "hotspots",
    "initdata",
    "pde",
    "quadrature",
    "specfun",
    "verify",
    "Bump",
    "BumpSum",
    "ProblemSetup",
    "Family",
    "KernelId",
    "__version__",
]
