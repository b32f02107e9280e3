"""Boundary driven gas toolkit: simulation of reservoir chains and the
absorbed Brownian gas on (0,1), deterministic dual-side evaluation of
the associated duality identities, and statistical certification suites.
"""

__version__ = "0.1.0"

from .core import (ContinuumConfiguration, DiscreteConfiguration, Estimate,
                   KernelValue, ReservoirParams, ValidationError,
                   make_discrete_config, restrict_interior, superpose)
from .dualities import (charlier, classical_duality, falling_factorial,
                        factorial_functional, interval_block,
                        orthogonal_duality, orthogonal_reservoir_duality,
                        reservoir_duality, site_block,
                        theta_factorial_functional)
from .chain import (ChainSpec, TransitionTable, chain_intensity,
                    dual_expectation_discrete, sample_gas_discrete,
                    simulate_reservoir, stationary_profile, transition_table,
                    verify_intensity_semigroup)
from .interval import (AbsorptionSplit, HeatKernelConfig, abs_density,
                       absorption_split, doob_intensity, dual_density,
                       gas_intensity, sample_abs_bm_marginal, sample_bdbg,
                       stationary_intensity, theta_dual_density)
from .estimators import (CheckReport, ck_check_gas, duality_check,
                         poissonity_check, run_mc, scaling_experiment)
from .rng import stream_generator, stream_generators

__all__ = [name for name in dir() if not name.startswith("_")]
