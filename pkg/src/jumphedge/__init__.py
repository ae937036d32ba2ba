"""jumphedge: hitting-time discretization of jump-driven trading strategies.

Simulation and optimization toolkit for rebalancing rules that act when the
integrand exits a moving barrier interval: exact exit functionals of strictly
alpha-stable processes, Monte Carlo estimation of the tracking-error and
transaction-cost functionals, asymptotically optimal barrier solving, and
convergence-rate studies driven by a JSON-configured command line.
"""

from .stable import (
    Barriers,
    ExitFunctionals,
    StableLaw,
    mc_exit_functionals,
    mean_exit_time,
    mean_squared_integral,
    overshoot_density,
    overshoot_moment,
    sample_stable_increments,
)
from .streams import RngStream, derive_stream

__version__ = "0.1.0"
