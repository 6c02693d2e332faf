"""Mittag-Leffler decay certificates for fractional-order delay systems.

The package certifies decay of Caputo-derivative linear systems with
bounded time-varying delays along two routes (column sums of an
order-preserving system, or a pointwise matrix inequality), evaluates
the two-parameter Mittag-Leffler function on the real line, integrates
the systems directly for validation, and wraps it all in a CLI.
"""

__version__ = "0.1.0"

from .errors import (
    ConfigError,
    ExprEvalError,
    ExprSyntaxError,
    HalanayError,
    InfeasiblePointError,
    MlfDomainError,
    MlfOverflowError,
    SeriesCapError,
    StepSizeError,
    StructureError,
    VerdictNoneError,
)
from .expr import TimeExpr, parse
from .mlf import MlQuery, ml, mittag_leffler, mittag_leffler_deriv
from .halanay import (
    ConditionVerdict,
    HalanayCertificate,
    HalanayInput,
    ScanGrid,
    certify,
    classify_conditions,
    envelope,
    lambda_at,
)
from .positivity import (
    DelaySystem,
    PositivityVerdict,
    certify_positive,
    column_sums,
    initial_amplitude,
    split_initial,
    structure_check,
)
from .lmi import LmiInput, LmiReport, certify_lmi, lmi_block, max_eigen_sym
from .fdde import (
    EnvelopeCheck,
    SolverConfig,
    Trajectory,
    caputo_l1,
    check_envelope,
    lyapunov_check,
    solve,
    write_csv,
)
from .cli import RunConfig, config_to_dict, emit_plot_script, load_config, run

__all__ = [
    "__version__",
    "ConfigError",
    "ExprEvalError",
    "ExprSyntaxError",
    "HalanayError",
    "InfeasiblePointError",
    "MlfDomainError",
    "MlfOverflowError",
    "SeriesCapError",
    "StepSizeError",
    "StructureError",
    "VerdictNoneError",
    "TimeExpr",
    "parse",
    "MlQuery",
    "ml",
    "mittag_leffler",
    "mittag_leffler_deriv",
    "ConditionVerdict",
    "HalanayCertificate",
    "HalanayInput",
    "ScanGrid",
    "certify",
    "classify_conditions",
    "envelope",
    "lambda_at",
    "DelaySystem",
    "PositivityVerdict",
    "certify_positive",
    "column_sums",
    "initial_amplitude",
    "split_initial",
    "structure_check",
    "LmiInput",
    "LmiReport",
    "certify_lmi",
    "lmi_block",
    "max_eigen_sym",
    "EnvelopeCheck",
    "SolverConfig",
    "Trajectory",
    "caputo_l1",
    "check_envelope",
    "lyapunov_check",
    "solve",
    "write_csv",
    "RunConfig",
    "config_to_dict",
    "emit_plot_script",
    "load_config",
    "run",
]
