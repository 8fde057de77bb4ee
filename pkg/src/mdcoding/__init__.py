"""Universal multiple-description coding of discrete sequences.

The encoder anneals three reconstructions of a source sequence (two side
descriptions and a central one) against a weighted sum of empirical
conditional entropies and distortions, then codes them losslessly into two
messages.  Either message alone decodes its side reconstruction; both together
decode the central one.
"""

from .annealer import (
    AnnealReport,
    AnnealSchedule,
    AnnealState,
    anneal,
    conditional_pmf,
    exhaustive_minimize,
    sample_states,
)
from .empirical_stats import (
    CountMatrix,
    JointCountMatrix,
    apply_substitution,
    build_counts,
    build_joint_counts,
    conditional_entropy,
    conditional_entropy_joint,
    entropy_functional,
    substitution_diff,
)
from .energy import (
    DistortionMeasure,
    EnergyBreakdown,
    LagrangianWeights,
    average_distortion,
    compute_energy,
    delta_bound,
    energy_delta,
)
from .estimator import MultipleDescriptionCoder
from .exceptions import (
    DecodeError,
    FragmentMismatchError,
    InstanceTooLargeError,
    InvalidCountsError,
    InvalidInputError,
    InvalidOrderError,
    MDCodingError,
)
from .experiments import ExperimentConfig, run_experiment, sweep
from .lossless import (
    Bitstream,
    decode_conditional,
    decode_sequence,
    encode_conditional,
    encode_sequence,
)
from .pipeline import (
    MDMessage,
    RateReport,
    md_decode_central,
    md_decode_side,
    md_encode,
    theorem0_check,
)
from .sources import MarkovSourceSpec, generate_markov, read_sequence, write_sequence

__version__ = "0.1.0"

__all__ = sorted(
    name for name, obj in globals().items()
    if not name.startswith("_") and not isinstance(obj, type(__import__("sys")))
)
