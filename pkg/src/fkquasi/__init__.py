"""Chain equilibria on Delone sets, computed by a contraction map that starts
from the anti-integrable limit."""
from .errors import *  # noqa: F401,F403
from .interaction import (IndexDomain, InteractionModel, TypeSpec, make_address_interaction,
                          make_interaction)
from .kernels import BACKEND
from .landscape import (CriticalAtlas, estimate_constants, find_critical_points,
                        local_inverse)
from .pointset import (PHI, SILVER, AddressTable, DeloneSet, address_map, build_cut_and_project,
                       build_periodic, radii)
from .potential import PatternPotential, make_bump_potential, make_periodic_potential
from .solver import (CodingConfiguration, EquilibriumReport, Mode, build_coding, solve,
                     thresholds, verify)

__version__ = "0.1.0"
