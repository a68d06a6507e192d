"""Multi-user beam-domain secret key generation for TDD massive MIMO."""

from .channel import (
    ChannelRealization,
    CovarianceSet,
    Scenario,
    ScenarioError,
    asymptotic_beam_channel,
    beam_overlap,
    beam_transform,
    dft_beam_matrix,
    estimate_covariances,
    random_scenario,
    steering_vector,
    synthesize_channel,
)
from .config import load_scenario
from .design import (
    DesignedMatrices,
    InfeasibleAllocation,
    allocate_nonoverlapping,
    brute_force_U_oracle,
    optimal_selection_U,
    select_rx_beams,
    select_tx_beams,
    verify_neutralization,
)
from .keyrate import (
    RateInputs,
    empirical_mi,
    key_rate_general,
    key_rate_orthogonal,
    key_rate_reused,
    leakage_ratio,
    unit_key_rate,
)
from .probing import PilotConfig, downlink_probe, make_pilots, uplink_probe

__version__ = "0.1.0"
