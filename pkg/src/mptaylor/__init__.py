"""Arbitrary-precision Taylor integration of quadratic ODE systems.

The pieces, bottom up: mp (fixed-precision values and contexts), systems
(quadratic right-hand sides, Lorenz built in), reduction (deterministic
chunked convolution sums, serial or across worker processes), taylor
(coefficient recurrence, Horner evaluation, stepping), cns (paired-run
trajectory verification and critical-time estimation), plus a CLI with
trajectory files, bit-exact checkpoints and a scaling benchmark.
"""

from .mp import (
    MPValue,
    PrecisionContext,
    RangeError,
    arith,
    bits_for_digits,
    decimal_digits,
    mp_bits_equal,
    mp_from_decimal,
    mp_to_decimal,
)
from .systems import (
    BilinearTerm,
    LorenzParams,
    QuadraticODESystem,
    builtin_system,
    lorenz_system,
    parse_system,
    rhs_eval,
)
from .reduction import (
    ProcessReducer,
    ReducePlan,
    SerialReducer,
    chunk_bounds,
    convolve,
    convolve_pair,
    make_reducer,
    partition,
)
from .taylor import (
    Jet,
    StepConfig,
    Trajectory,
    TrajectoryPoint,
    compute_jet,
    exact_time,
    horner_eval,
    integrate,
    step,
)
from .cns import (
    AGREEMENT_EXACT,
    CnsConfig,
    TcReport,
    agreement_digits,
    cns_run,
    default_verify_margins,
    diagram_tsv,
    estimate_tc,
    tc_diagram,
)
from .config import ConfigError, RunConfig, config_hash, parse_config, semantic_config
from .bench import BenchmarkRecord, bench_table, run_benchmark

__version__ = "0.1.0"

__all__ = [
    "AGREEMENT_EXACT",
    "BenchmarkRecord",
    "BilinearTerm",
    "CnsConfig",
    "ConfigError",
    "Jet",
    "LorenzParams",
    "MPValue",
    "PrecisionContext",
    "ProcessReducer",
    "QuadraticODESystem",
    "RangeError",
    "ReducePlan",
    "RunConfig",
    "SerialReducer",
    "StepConfig",
    "TcReport",
    "Trajectory",
    "TrajectoryPoint",
    "agreement_digits",
    "arith",
    "bench_table",
    "bits_for_digits",
    "builtin_system",
    "chunk_bounds",
    "compute_jet",
    "config_hash",
    "convolve",
    "convolve_pair",
    "cns_run",
    "decimal_digits",
    "default_verify_margins",
    "diagram_tsv",
    "estimate_tc",
    "exact_time",
    "horner_eval",
    "integrate",
    "lorenz_system",
    "make_reducer",
    "mp_bits_equal",
    "mp_from_decimal",
    "mp_to_decimal",
    "parse_config",
    "parse_system",
    "partition",
    "rhs_eval",
    "run_benchmark",
    "semantic_config",
    "step",
    "tc_diagram",
]
