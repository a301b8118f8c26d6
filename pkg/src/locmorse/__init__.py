"""Local Morse homology of isolated critical points of planar scalar fields."""

__version__ = "0.1.0"

from .builtins import NAMES as BUILTIN_NAMES, builtin  # noqa: E402
from .complex import ChainComplex, HomologyResult, build_complex, homology, verify_d_squared  # noqa: E402
from .continuation import HomotopyFamily, chain_map, gamma, gamma_prime, verify_chain_map  # noqa: E402
from .critpoints import CriticalPoint, CriticalSet, ToleranceSet, find_critical_points, validate_isolation  # noqa: E402
from .field import Ball, Perturbation, ScalarField, lagrange_potential, perturb, polynomial_field  # noqa: E402
from .flow import FlowParams, Trajectory, integrate_flow  # noqa: E402
from .lagrange import LagrangeParams, locate_all, theorem_a_pipeline  # noqa: E402
from .moduli import ConnectionMatrix, count_connections  # noqa: E402
from .oracle import oracle_homology  # noqa: E402
from .pipeline import LocalHomology, local_homology  # noqa: E402

__all__ = [
    "BUILTIN_NAMES", "Ball", "ChainComplex", "ConnectionMatrix", "CriticalPoint", "CriticalSet",
    "FlowParams", "HomologyResult", "HomotopyFamily", "LagrangeParams", "LocalHomology", "Perturbation",
    "ScalarField", "ToleranceSet", "Trajectory", "build_complex", "builtin", "chain_map",
    "count_connections", "find_critical_points", "gamma", "gamma_prime", "homology", "integrate_flow",
    "lagrange_potential", "local_homology", "locate_all", "oracle_homology", "perturb", "polynomial_field",
    "theorem_a_pipeline", "validate_isolation", "verify_chain_map", "verify_d_squared",
]
