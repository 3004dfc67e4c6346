"""Matrix-product-state simulation of noisy random quantum circuits.

Bond-dimension truncation plays the role of hardware noise: every two-qubit
gate keeps a fraction ``f_n`` of the weight of its post-gate spectrum, and
the product of these fractions tracks the fidelity of the whole state.
"""

from .circuits import (
    Circuit,
    Gate,
    Grid,
    brick_1d,
    gate_matrix,
    grid_2d,
    named_gate,
    noisy_gate,
    parse_grid,
    with_noisy_gates,
)
from .errors import CapacityError, ConfigError, DimensionError, NumericError, ValidationError
from .grouped import GroupedMpsState, Grouping, parse_grouping
from .gte import GteSample, estimate_f_gte, gte_trial, sample_gte_tensor, scaling_collapse
from .metrics import (
    MetricsReport,
    cross_entropy,
    estimated_fidelity,
    exact_fidelity,
    fidelity_from_xeb,
    fidelity_lower_bound,
    find_d_star,
    porter_thomas_distance,
    xeb,
)
from .mps import FidelityLog, MpsState, TensorTrain
from .statevector import StateVector, simulate

__version__ = "0.1.0"
