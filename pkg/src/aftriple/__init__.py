"""Finite-level computations for spectral triples on inductive limits of
matrix-valued function algebras (toy AF towers and the Jiang-Su tower)."""
from .dirac import CommutatorEstimate, DiracSpec, full_commutator_bound
from .gns import GnsOperator, GnsTower
from .matfun import LipschitzClass, PLMatrixFunction, random_lipschitz
from .paths import Affine, Constant, PathList
from .system import InductiveSystem, jiang_su_preset, reindex, toy_preset, validate_system

__version__ = "0.1.0"

__all__ = [
    "Affine", "CommutatorEstimate", "Constant", "DiracSpec", "GnsOperator", "GnsTower",
    "InductiveSystem", "LipschitzClass", "PLMatrixFunction", "PathList",
    "full_commutator_bound", "jiang_su_preset", "random_lipschitz", "reindex",
    "toy_preset", "validate_system",
]
