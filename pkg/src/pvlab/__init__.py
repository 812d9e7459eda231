"""pvlab: free-space pressure solves and integral pressure-velocity identity checks.

Subpackages by role:

- :mod:`pvlab.grid`, :mod:`pvlab.pvlf`: grids, fields, spectral calculus, file format
- :mod:`pvlab.synth`: compactly supported divergence-free test fields
- :mod:`pvlab.pressure`, :mod:`pvlab.meridional`: pressure from velocity
- :mod:`pvlab.quad`: plane, sphere and shell quadratures
- :mod:`pvlab.identities`: the identity checkers and their reports
- :mod:`pvlab.evolve`: periodic Navier-Stokes runs with windowed tracking
- :mod:`pvlab.cli`: the ``pvlab`` command
"""

from .grid import DomainError, FieldError, GridSpec, ScalarField, VectorField
from .identities import (
    IdentityReport,
    check_axisymmetric_decay,
    check_global,
    check_hyperplane,
    check_sign_sweep,
    check_sphere_formula,
    check_weak_form,
)
from .meridional import MeridionalField, MeridionalGrid, pressure_meridional
from .pressure import poisson_freespace, pressure_freespace, weak_form_residual
from .quad import PlaneSpec

__version__ = "0.1.0"

__all__ = [
    "DomainError",
    "FieldError",
    "GridSpec",
    "IdentityReport",
    "MeridionalField",
    "MeridionalGrid",
    "PlaneSpec",
    "ScalarField",
    "VectorField",
    "check_axisymmetric_decay",
    "check_global",
    "check_hyperplane",
    "check_sign_sweep",
    "check_sphere_formula",
    "check_weak_form",
    "poisson_freespace",
    "pressure_freespace",
    "pressure_meridional",
    "weak_form_residual",
]
