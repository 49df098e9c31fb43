"""Coverage and rate of multi-antenna Poisson cellular networks with
residual transceiver impairments, pilot contamination and channel aging."""

from .analytic import (
    CoveragePoint,
    SirDecomposition,
    average_rate,
    coverage_sdma,
    coverage_upper_bound,
    decompose,
    interference_coefficient,
    laplace_estimation_error,
    laplace_interference,
    laplace_rx_distortion,
    laplace_tx_distortion,
)
from .channel import (
    ChannelStats,
    ImpairmentProfile,
    NetworkConfig,
    estimate_variances,
    jakes_delta,
    training_interference_variance,
)
from .config import ExperimentSpec, dump_config, load_config, parse_config
from .errors import ConfigError, DomainError, SingularChannelError
from .simulator import (
    CoverageEstimate,
    RateEstimate,
    estimate_coverage,
    estimate_rate,
    simulate_drops,
)

__version__ = "0.1.0"
