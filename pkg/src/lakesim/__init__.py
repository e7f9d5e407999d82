"""lakesim: vorticity/stream-function solver for lake-type flows.

Simulates the two-dimensional lake equations with varying bathymetry,
through-flow across the shore, bottom friction and interior sources, and
monitors the discrete counterparts of the a priori estimates (weighted
Gronwall balance, maximum principle, weak-form residuals) along the run.
"""

__version__ = "0.1.0"

from .geometry import (  # noqa: F401
    Domain,
    GeometryError,
    build_domain,
    cutoff_one_sigma,
    partition_boundary,
    shape_from_dict,
    signed_distance,
    trace_to_boundary,
)
from .elliptic import (  # noqa: F401
    CompatibilityError,
    SolverError,
    greens_kernel,
    reconstruct_velocity,
    solve_dirichlet_weighted,
    solve_neumann_weighted,
)
