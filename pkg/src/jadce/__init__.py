"""Group-lasso solvers and benchmarks for joint activity detection and
channel estimation in IoT uplinks.

The received block of an uplink with sporadic device activity is modeled
as a complex linear mix of per-device signature sequences; recovering
which devices transmitted and their channel rows is a blockwise-sparse
least-squares problem.  This package provides the structured matrix-free
model, a reproducible instance generator, four solvers behind one
interface, detection/estimation metrics, and a benchmark CLI.
"""

__version__ = "0.1.0"

from .consensus import ConsensusFactor, precompute as consensus_precompute
from .errors import (
    ConfigError,
    DegenerateProblemError,
    DenseCapError,
    DimensionError,
    InstanceFileError,
    JadceError,
    UnsupportedVersionError,
)
from .instance import (
    GroupLassoProblem,
    InstanceConfig,
    JadceInstance,
    gamma_max_of,
    generate,
    load,
    save,
    to_problem,
)
from .metrics import DetectionResult, detect, kkt_residual, nmse, objective
from .model import MeasurementOperator, mat_pair, vec_pair
from .solvers import (
    CONVERGED,
    DEGENERATE,
    MAX_ITERATIONS,
    SOLVERS,
    SolveReport,
    SolverOptions,
    SolverState,
    TraceRow,
    admm_solve,
    aladin_solve,
    fista_solve,
    local_step,
    operator_sq_norm,
    prox_gradient_solve,
    soft_threshold,
    solve,
    write_trace_csv,
)
