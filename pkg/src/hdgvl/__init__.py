"""Hybridizable discontinuous Galerkin solver for the 2D vector Laplacian.

The problem ``curl rot u - grad div u = f`` on the unit square is solved in
the mixed form ``sigma = rot u``, ``phi = -div u``, ``curl sigma + grad phi = f``
with electric, magnetic or Dirichlet boundary conditions.
"""

from .errors import (AssemblyError, ConvergenceError, DegenerateElementError, HDGError,
                     NotSPDError, ParameterError)
from .hybridsystem import (assemble_global, build_local_operators, build_trace_dofmap,
                           energy_value, reconstruct_fields, solve_global, solve_problem)
from .localsolver import (StabilizationParams, assemble_local_system, condensed_element_system,
                          solve_local_source, solve_local_trace)
from .mesh import build_structured_mesh
from .options import BoundaryKind, ElementKind, HybridizationType
from .verify import compute_errors, eoc, manufactured_case

__version__ = "0.1.0"
