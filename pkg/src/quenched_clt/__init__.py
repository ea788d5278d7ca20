"""Quenched central limit laboratory for random compositions of interval maps."""
from .errors import (ConfigError, ContractError, DataError, DomainError, InsufficientRandomnessError,
                     ParameterError, PrecisionError, QuenchedError, UnsupportedError)
from .maps import Branch, Ensemble, MapSystem, OmegaSequence, cocycle_apply, horizon_cap, orbit
from .observables import Coboundary, Constant, Cosine, PiecewiseLinear, Projection, Sine, Stacked
from .selection import SelectionProcess, estimate_alpha, mixing_profile, sample_omega
from .quenched import (correlation_table, fiber_correlation, fluctuation_decay,
                       mean_quenched_variance, quenched_variance, sigma_path, v_truncated)
from .limit_variance import (DoubledEnsemble, classical_green_kubo_split, compare_routes,
                             green_kubo_doubled, positivity_check, sigma_sq_series)
from .rates import (BoundModel, PowerLaw, RateSpec, S_sum, fit_rate, main_rate, sandwich_audit)
from .clt import (EmpiricalDistribution, kolmogorov_distance, triangle_report, wasserstein_distance,
                  wbar_distribution)
from .config import ExperimentConfig, load_config, parse_config

__version__ = "0.1.0"
