"""devpic: hybrid deviational-particle / PIC-DSMC kinetic plasma solver.

1d-in-x, 3d-in-velocity Vlasov-Poisson with BGK or Coulomb (Landau)
collisions. The hybrid solver evolves a grid Maxwellian plus signed
deviational particles; a full-particle PIC-DSMC solver serves as the
reference baseline.
"""

from .phase import (
    CellStore,
    EmptyCellError,
    MomentField,
    Population,
    SpatialGrid,
    cell_of,
    deposit_moments,
    signed_flux_moments,
)
from .fields import electric_energy, solve_poisson

__version__ = "0.1.0"

__all__ = [
    "CellStore",
    "EmptyCellError",
    "MomentField",
    "Population",
    "SpatialGrid",
    "cell_of",
    "deposit_moments",
    "signed_flux_moments",
    "electric_energy",
    "solve_poisson",
    "__version__",
]
