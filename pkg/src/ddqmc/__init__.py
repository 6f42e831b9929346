"""Stochastic steady-state solver for driven-dissipative spin-1/2 lattices.

Signed integer walkers sample the density operator of an anisotropic
exchange model with local spin loss; a dense reference solver verifies
every estimate on small systems.
"""

from .engine import (EngineParams, Population, PopulationExplosion, RunResult,
                     SimulationDied, TimeStepTooLarge, WalkerCell, WalkerEngine,
                     run, update_shift)
from .estimators import (MagnetizationX, MagnetizationY, MagnetizationZ,
                         RatioEstimate, SusceptibilityResult, blocking_error,
                         build_observables, chi_av_quadrature,
                         initiator_extrapolate, magnetization_z, measure,
                         ratio_error, ratio_estimate, susceptibility)
from .lattice import Lattice, ModelParams, build_lattice
from .liouvillian import (ConfigPair, Connection, ConnectionTable,
                          ImportanceScheme, connections, diagonal_element,
                          stability_bound)
from .samplers import binomial, multinomial, rng_stream, stochastic_round

__version__ = "0.1.0"

__all__ = [
    "EngineParams", "Population", "PopulationExplosion", "RunResult",
    "SimulationDied", "TimeStepTooLarge", "WalkerCell", "WalkerEngine",
    "run", "update_shift",
    "MagnetizationX", "MagnetizationY", "MagnetizationZ", "RatioEstimate",
    "SusceptibilityResult", "blocking_error", "build_observables",
    "chi_av_quadrature", "initiator_extrapolate", "magnetization_z",
    "measure", "ratio_error", "ratio_estimate", "susceptibility",
    "Lattice", "ModelParams", "build_lattice",
    "ConfigPair", "Connection", "ConnectionTable", "ImportanceScheme",
    "connections", "diagonal_element", "stability_bound",
    "binomial", "multinomial", "rng_stream", "stochastic_round",
    "__version__",
]
