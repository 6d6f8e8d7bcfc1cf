"""Iterative solvers for the structured group-lasso problem.

Four methods share one interface: two operator-splitting solvers that
alternate a per-device proximal step with a closed-form fusion-center
consensus solve (one with a momentum-like correction in its block update,
one without), plus accelerated and backtracking proximal-gradient
baselines.  All of them report per-iteration traces and a final stacked
iterate.

The consensus update is obtained by solving the coupling QP's KKT system
exactly, ``dlam = inv(I + A A^T / rho) (b - lam - A u)`` with ``u`` the
aggregated local messages; this reduces to the usual aggregated-message
form once the iterates satisfy the coupling identity and stays valid for
arbitrary warm starts.
"""

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from time import perf_counter

import numpy as np

from . import consensus, kernels
from .errors import ConfigError
from .metrics import kkt_residual_mat
from .model import mat_pair, vec_pair

CONVERGED = "converged"
MAX_ITERATIONS = "max_iterations"
DEGENERATE = "degenerate"

# Fixed device-chunk width for the threaded matmuls; independent of the
# thread count so that deterministic runs are bitwise reproducible.
CHUNK_BLOCKS = 256

TRACE_HEADER = "iter,objective,max_step,kkt_residual,elapsed_ms,parallel_ms,consensus_ms"


@dataclass
class SolverOptions:
    """Shared solver knobs.

    ``rho_scale`` fixes the splitting penalty as ``rho = rho_scale * gamma``.
    ``trace_every = 0`` records only the exit row.  ``deterministic`` forces
    the fixed-chunk pairwise-tree reduction so results are bitwise identical
    across thread counts.  ``x0``/``multiplier0`` warm-start the iteration
    (stacked real vectors of length 2MN and 2LM).
    """

    rho_scale: float = 0.8
    tol: float = 1e-5
    max_iterations: int = 20000
    trace_every: int = 1
    threads: int = 1
    deterministic: bool = False
    collect_states: bool = False
    momentum: float = 1.0
    momentum_guard: bool = True
    x0: np.ndarray | None = None
    multiplier0: np.ndarray | None = None

    def validate(self):
        if self.rho_scale <= 0:
            raise ConfigError(f"rho_scale must be positive, got {self.rho_scale}")
        if not 0.0 <= self.momentum <= 1.0:
            raise ConfigError(f"momentum must lie in [0, 1], got {self.momentum}")
        if self.tol <= 0:
            raise ConfigError(f"tol must be positive, got {self.tol}")
        if self.max_iterations < 1:
            raise ConfigError(f"max_iterations must be >= 1, got {self.max_iterations}")
        if self.trace_every < 0:
            raise ConfigError(f"trace_every must be >= 0, got {self.trace_every}")
        if self.threads < 1:
            raise ConfigError(f"threads must be >= 1, got {self.threads}")


@dataclass(frozen=True)
class TraceRow:
    iteration: int
    objective: float
    max_step: float
    kkt_residual: float
    elapsed_s: float
    parallel_s: float
    consensus_s: float


@dataclass(frozen=True)
class SolverState:
    """Snapshot of the splitting iteration (complex block form)."""

    iteration: int
    z: np.ndarray
    xi: np.ndarray
    multiplier: np.ndarray
    delta_multiplier: np.ndarray | None


@dataclass
class SolveReport:
    solver: str
    status: str
    iterations: int
    final_x: np.ndarray
    trace: list
    gamma: float
    rho: float | None
    n_blocks: int
    n_antennas: int
    wall_s: float
    parallel_s: np.ndarray = field(repr=False)
    consensus_s: np.ndarray = field(repr=False)
    states: list | None = None

    def final_mat(self):
        """Final iterate as a complex (N, M) block matrix."""
        return mat_pair(self.final_x, self.n_blocks, self.n_antennas)


# -- primitive operations -----------------------------------------------------


def soft_threshold(a, kappa):
    """Radial shrinkage, the proximal map of ``kappa * ||.||_2``.

    Returns the zero vector whenever ``||a|| <= kappa`` (including ``a = 0``)
    and ``(1 - kappa/||a||) * a`` otherwise.
    """
    if kappa < 0:
        raise ConfigError(f"shrinkage weight must be >= 0, got {kappa}")
    a = np.asarray(a, dtype=np.float64)
    nrm = float(np.linalg.norm(a))
    if nrm <= kappa:
        return np.zeros_like(a)
    return (1.0 - kappa / nrm) * a


def local_step(z_i, lam, i, gamma, rho, op):
    """One device's proximal update and its message to the fusion center.

    Returns ``(xi_i, w_i)`` where ``xi_i = shrink(z_i + A_i^T lam / rho)``
    with weight ``gamma/rho`` and ``w_i = A_i (z_i - xi_i)``.  The vector
    ``rho*(z_i - xi_i) + A_i^T lam`` is then a subgradient of
    ``gamma*||.||`` at ``xi_i`` by construction.
    """
    z_i = np.asarray(z_i, dtype=np.float64)
    at = op.block_rmatvec(i, lam)
    xi_i = soft_threshold(z_i + at / rho, gamma / rho)
    w_i = op.block_matvec(i, z_i - xi_i)
    return xi_i, w_i


def aladin_block_update(z_i, xi_i, at_dlam_i, rho):
    """Momentum-corrected block update ``2*xi - z + A_i^T dlam / rho``."""
    return 2.0 * xi_i - z_i + at_dlam_i / rho


def admm_block_update(z_i, xi_i, at_dlam_i, rho):
    """Plain block update ``xi + A_i^T dlam / rho``."""
    return xi_i + at_dlam_i / rho


def operator_sq_norm(q, tol=1e-6, max_iter=200):
    """Squared spectral norm of the stacked operator by power iteration.

    Runs on the L x L Gram matrix ``q q^H`` (same top eigenvalue as the
    2LM x 2LM real form); stops when the Rayleigh estimate changes by less
    than ``tol`` relatively or after ``max_iter`` rounds.
    """
    q = np.asarray(q, dtype=np.complex128)
    gram = q @ q.conj().T
    size = gram.shape[0]
    v = np.linspace(1.0, 2.0, size).astype(np.complex128)
    v /= np.linalg.norm(v)
    lam = 0.0
    for _ in range(max_iter):
        w = gram @ v
        lam_new = float(np.linalg.norm(w))
        if lam_new == 0.0:
            return 0.0
        v = w / lam_new
        if abs(lam_new - lam) <= tol * lam_new:
            return lam_new
        lam = lam_new
    return lam


# -- chunked matmul engine ----------------------------------------------------


def _tree_sum(parts):
    """Pairwise reduction in fixed index order (thread-count independent)."""
    parts = list(parts)
    while len(parts) > 1:
        merged = [parts[i] + parts[i + 1] for i in range(0, len(parts) - 1, 2)]
        if len(parts) % 2:
            merged.append(parts[-1])
        parts = merged
    return parts[0]


class _Engine:
    """Forward/adjoint products with fixed chunking and optional threads.

    In deterministic mode both products always run over the same fixed
    device chunks and the forward partial sums are combined by a pairwise
    tree, so the arithmetic never depends on the thread count.
    """

    def __init__(self, q, threads=1, deterministic=False, chunk=CHUNK_BLOCKS):
        self.q = q
        self.qh = np.ascontiguousarray(q.conj().T)
        n = q.shape[1]
        self.slices = [slice(s, min(s + chunk, n)) for s in range(0, n, chunk)]
        self.deterministic = deterministic
        self.pool = ThreadPoolExecutor(max_workers=threads) if threads > 1 else None

    def close(self):
        if self.pool is not None:
            self.pool.shutdown(wait=True)

    def _map(self, fn):
        if self.pool is None:
            return [fn(sl) for sl in self.slices]
        return list(self.pool.map(fn, self.slices))

    def forward(self, x_mat):
        """``sum_i q[:, i] x_mat[i]`` as an (L, M) matrix."""
        if not self.deterministic and self.pool is None:
            return self.q @ x_mat
        parts = self._map(lambda sl: self.q[:, sl] @ x_mat[sl])
        if self.deterministic:
            return _tree_sum(parts)
        acc = parts[0]
        for p in parts[1:]:
            acc += p
        return acc

    def adjoint(self, r_mat, out=None):
        """``q^H r_mat`` as an (N, M) matrix (row-partitioned, no reduction)."""
        if not self.deterministic and self.pool is None:
            if out is None:
                return self.qh @ r_mat
            np.matmul(self.qh, r_mat, out=out)
            return out
        if out is None:
            out = np.empty((self.qh.shape[0], r_mat.shape[1]), dtype=np.complex128)

        def work(sl):
            np.matmul(self.qh[sl], r_mat, out=out[sl])

        self._map(work)
        return out


# -- shared helpers -------------------------------------------------------------


def _init_blocks(opts, n, m):
    if opts.x0 is None:
        return np.zeros((n, m), dtype=np.complex128)
    return np.ascontiguousarray(mat_pair(opts.x0, n, m))


def _init_multiplier(opts, length, m):
    if opts.multiplier0 is None:
        return np.zeros((length, m), dtype=np.complex128)
    return np.ascontiguousarray(mat_pair(opts.multiplier0, length, m))


def _trace_metrics(engine, y_mat, x_mat, gamma, norms_buf):
    """Objective and KKT residual at ``x_mat`` (outside the phase timers)."""
    resid = engine.forward(x_mat) - y_mat
    kernels.block_norms(x_mat, norms_buf)
    obj = 0.5 * float(np.vdot(resid, resid).real) + gamma * float(norms_buf.sum())
    kkt = kkt_residual_mat(engine.adjoint(resid), x_mat, gamma, x_norms=norms_buf)
    return obj, kkt


def _should_trace(opts, k, terminal):
    if terminal:
        return True
    return opts.trace_every > 0 and k % opts.trace_every == 0


def _problem_dims(problem):
    op = problem.op
    return op, op.seq_length, op.n_blocks, op.m


# -- splitting solvers ----------------------------------------------------------


def _splitting_solve(problem, opts, theta, guard, name, consensus_apply=None):
    opts = opts or SolverOptions()
    opts.validate()
    op, L, N, M = _problem_dims(problem)
    gamma = float(problem.gamma)
    rho = opts.rho_scale * gamma
    inv_rho = 1.0 / rho
    kappa = gamma / rho
    y_mat = mat_pair(problem.b, L, M)

    if consensus_apply is None:
        factor = consensus.precompute(op.q, M, rho)
        consensus_apply = factor.apply_mat

    z = _init_blocks(opts, N, M)
    lam = _init_multiplier(opts, L, M)
    xi = np.empty_like(z)
    msg = np.empty_like(z)
    at_d = np.empty_like(z)
    norms_buf = np.empty(N, dtype=np.float64)
    prev_zero = np.zeros(N, dtype=bool)

    engine = _Engine(op.q, opts.threads, opts.deterministic)
    try:
        alpha = engine.adjoint(lam) if lam.any() else np.zeros_like(z)
        # Step norm of the eliminated auxiliary block: it starts at 0, so the
        # first check sees ||b - lam||/2; every consensus solve thereafter
        # pins that block to b - lam exactly, making its step identically 0.
        aux_gap = 0.5 * float(np.linalg.norm(y_mat - lam))
        par_t = np.zeros(opts.max_iterations)
        con_t = np.zeros(opts.max_iterations)
        trace = []
        states = [] if opts.collect_states else None
        status = MAX_ITERATIONS
        cum = 0.0
        dm = None
        k = 0
        for k in range(1, opts.max_iterations + 1):
            t0 = perf_counter()
            max_step = kernels.prox_step_dual(z, alpha, inv_rho, kappa, xi)
            if k == 1:
                # np.maximum propagates NaN from a non-finite start
                max_step = float(np.maximum(max_step, aux_gap))
            par = perf_counter() - t0
            con = 0.0

            if states is not None:
                states.append(
                    SolverState(
                        iteration=k,
                        z=z.copy(),
                        xi=xi.copy(),
                        multiplier=lam.copy(),
                        delta_multiplier=None if dm is None else dm.copy(),
                    )
                )

            blown = not math.isfinite(max_step)
            done = not blown and max_step <= opts.tol
            if done:
                # exit certificate: the step norm alone does not bound the
                # blockwise optimality residual, so confirm it before stopping
                t0 = perf_counter()
                resid = engine.forward(xi) - y_mat
                kernels.block_norms(xi, norms_buf)
                kkt_now = kkt_residual_mat(
                    engine.adjoint(resid), xi, gamma, x_norms=norms_buf
                )
                done = kkt_now <= 10.0 * opts.tol * max(1.0, gamma)
                par += perf_counter() - t0
            if not (done or blown):
                t0 = perf_counter()
                if theta > 0.0:
                    # message u_i = xi_i + theta*(xi_i - z_i); on blocks whose
                    # shrinkage output stayed pinned at zero the reflective
                    # term is an exactly undamped two-cycle, so the guard
                    # drops it there once a block has been zero twice running
                    np.subtract(xi, z, out=msg)
                    msg *= theta
                    if guard:
                        kernels.block_norms(xi, norms_buf)
                        zero_rows = norms_buf == 0.0
                        dropped = zero_rows & prev_zero
                        if dropped.any():
                            msg[dropped] = 0.0
                        np.copyto(prev_zero, zero_rows)
                    msg += xi
                else:
                    np.copyto(msg, xi)
                aggregated = engine.forward(msg)
                par += perf_counter() - t0

                t0 = perf_counter()
                dm = consensus_apply(y_mat - lam - aggregated)
                con = perf_counter() - t0

                t0 = perf_counter()
                engine.adjoint(dm, out=at_d)
                alpha += at_d
                at_d *= inv_rho
                msg += at_d
                z, msg = msg, z
                lam += dm
                par += perf_counter() - t0

            cum += par + con
            par_t[k - 1] = par
            con_t[k - 1] = con

            if _should_trace(opts, k, done or blown or k == opts.max_iterations):
                obj, kkt = _trace_metrics(engine, y_mat, xi, gamma, norms_buf)
                trace.append(
                    TraceRow(k, obj, max_step, kkt, cum, par, con)
                )
            if blown:
                status = DEGENERATE
                break
            if done:
                status = CONVERGED
                break
    finally:
        engine.close()

    return SolveReport(
        solver=name,
        status=status,
        iterations=k,
        final_x=vec_pair(xi),
        trace=trace,
        gamma=gamma,
        rho=rho,
        n_blocks=N,
        n_antennas=M,
        wall_s=cum,
        parallel_s=par_t[:k].copy(),
        consensus_s=con_t[:k].copy(),
        states=states,
    )


def aladin_solve(problem, options=None, *, _consensus_apply=None):
    """Splitting solver with the momentum-corrected block update.

    The block update is ``z_i <- xi_i + theta*(xi_i - z_i) + A_i^T dlam/rho``
    with ``theta = options.momentum`` (1 by default, the full correction).
    Because the reflective term is unaveraged, blocks pinned at zero by the
    shrinkage would cycle ``z_i <- -z_i`` forever once the consensus
    correction has converged; with ``momentum_guard`` (default) the term is
    dropped on blocks that have been zero for two consecutive iterations,
    which restores convergence of the step norms without touching the
    blocks that drive progress.  Terminates when every per-block step norm
    falls at or below ``tol``; the returned iterate is the last shrinkage
    output, which then satisfies the blockwise optimality conditions up to
    a residual of order ``rho * tol``.
    """
    opts = options or SolverOptions()
    return _splitting_solve(
        problem, opts, theta=opts.momentum, guard=opts.momentum_guard,
        name="aladin", consensus_apply=_consensus_apply,
    )


def admm_solve(problem, options=None, *, _consensus_apply=None):
    """Splitting solver without the momentum correction (and the matching
    half-size consensus move, both exactly as the coupling KKT system
    dictates)."""
    return _splitting_solve(
        problem, options, theta=0.0, guard=False, name="admm",
        consensus_apply=_consensus_apply,
    )


# -- proximal-gradient family ----------------------------------------------------


def _prox_family_report(name, status, k, x_mat, trace, gamma, N, M, cum, par_t, con_t):
    return SolveReport(
        solver=name,
        status=status,
        iterations=k,
        final_x=vec_pair(x_mat),
        trace=trace,
        gamma=gamma,
        rho=None,
        n_blocks=N,
        n_antennas=M,
        wall_s=cum,
        parallel_s=par_t[:k].copy(),
        consensus_s=con_t[:k].copy(),
        states=None,
    )


def _near_converged(disp, x_norm, tol):
    return disp <= tol * max(1.0, x_norm)


def fista_solve(problem, options=None):
    """Accelerated proximal gradient with a constant step.

    The step is ``1/||A||^2`` with the squared norm from
    :func:`operator_sq_norm`; blocks are shrunk with weight
    ``gamma/||A||^2`` and the iterate is extrapolated with the usual
    ``t``-sequence.  Converged when the relative prox displacement and the
    KKT residual both fall below ``tol`` (the latter scaled by
    ``max(1, gamma)``).
    """
    opts = options or SolverOptions()
    opts.validate()
    op, L, N, M = _problem_dims(problem)
    gamma = float(problem.gamma)
    y_mat = mat_pair(problem.b, L, M)

    lip = operator_sq_norm(op.q)
    engine = _Engine(op.q, opts.threads, opts.deterministic)
    try:
        x = _init_blocks(opts, N, M)
        if lip == 0.0:
            # zero operator: the shrinkage of a constant zero gradient step
            x[:] = 0.0
            return _prox_family_report(
                "fista", CONVERGED, 1, x, [], gamma, N, M, 0.0,
                np.zeros(1), np.zeros(1),
            )
        kappa = gamma / lip
        y_cur = x.copy()
        x_next = np.empty_like(x)
        p = np.empty_like(x)
        grad = np.empty_like(x)
        norms_buf = np.empty(N, dtype=np.float64)
        t_seq = 1.0
        par_t = np.zeros(opts.max_iterations)
        con_t = np.zeros(opts.max_iterations)
        trace = []
        status = MAX_ITERATIONS
        cum = 0.0
        k = 0
        for k in range(1, opts.max_iterations + 1):
            t0 = perf_counter()
            resid = engine.forward(y_cur) - y_mat
            engine.adjoint(resid, out=grad)
            np.multiply(grad, -1.0 / lip, out=p)
            p += y_cur
            max_step, disp_sq = kernels.prox_step_point(p, kappa, x, x_next)
            disp = math.sqrt(disp_sq)
            x_norm = float(np.linalg.norm(x))

            done = False
            blown = not math.isfinite(disp)
            if not blown and _near_converged(disp, x_norm, opts.tol):
                resid_n = engine.forward(x_next) - y_mat
                kernels.block_norms(x_next, norms_buf)
                kkt = kkt_residual_mat(
                    engine.adjoint(resid_n), x_next, gamma, x_norms=norms_buf
                )
                done = kkt <= opts.tol * max(1.0, gamma)

            t_new = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * t_seq * t_seq))
            beta = (t_seq - 1.0) / t_new
            np.subtract(x_next, x, out=p)
            np.multiply(p, beta, out=p)
            np.add(x_next, p, out=y_cur)
            x, x_next = x_next, x
            t_seq = t_new
            par = perf_counter() - t0
            cum += par
            par_t[k - 1] = par

            if _should_trace(opts, k, done or blown or k == opts.max_iterations):
                obj, kkt_tr = _trace_metrics(engine, y_mat, x, gamma, norms_buf)
                trace.append(TraceRow(k, obj, max_step, kkt_tr, cum, par, 0.0))
            if blown:
                status = DEGENERATE
                break
            if done:
                status = CONVERGED
                break
    finally:
        engine.close()
    return _prox_family_report(
        "fista", status, k, x, trace, gamma, N, M, cum, par_t, con_t
    )


def prox_gradient_solve(problem, options=None):
    """Proximal gradient with backtracking.

    The step is halved until the quadratic upper bound
    ``f(x+) <= f(x) + <grad, x+ - x> + ||x+ - x||^2 / (2t)`` holds, which
    makes the objective non-increasing; the accepted step is reused as the
    next trial.  Termination matches :func:`fista_solve`.
    """
    opts = options or SolverOptions()
    opts.validate()
    op, L, N, M = _problem_dims(problem)
    gamma = float(problem.gamma)
    y_mat = mat_pair(problem.b, L, M)

    engine = _Engine(op.q, opts.threads, opts.deterministic)
    try:
        x = _init_blocks(opts, N, M)
        x_next = np.empty_like(x)
        p = np.empty_like(x)
        grad = np.empty_like(x)
        diff = np.empty_like(x)
        norms_buf = np.empty(N, dtype=np.float64)
        resid = engine.forward(x) - y_mat
        f_cur = 0.5 * float(np.vdot(resid, resid).real)
        step = 1.0
        par_t = np.zeros(opts.max_iterations)
        con_t = np.zeros(opts.max_iterations)
        trace = []
        status = MAX_ITERATIONS
        cum = 0.0
        k = 0
        for k in range(1, opts.max_iterations + 1):
            t0 = perf_counter()
            engine.adjoint(resid, out=grad)
            blown = False
            while True:
                np.multiply(grad, -step, out=p)
                p += x
                max_step, disp_sq = kernels.prox_step_point(p, step * gamma, x, x_next)
                resid_n = engine.forward(x_next) - y_mat
                f_next = 0.5 * float(np.vdot(resid_n, resid_n).real)
                np.subtract(x_next, x, out=diff)
                bound = (
                    f_cur
                    + float(np.vdot(grad, diff).real)
                    + disp_sq / (2.0 * step)
                    + 1e-12 * max(1.0, abs(f_cur))
                )
                if f_next <= bound or not math.isfinite(f_next):
                    blown = not math.isfinite(f_next)
                    break
                step *= 0.5
                if step < 1e-20:
                    blown = True
                    break

            disp = math.sqrt(disp_sq)
            x_norm = float(np.linalg.norm(x))
            done = False
            if not blown and _near_converged(disp, x_norm, opts.tol):
                kernels.block_norms(x_next, norms_buf)
                kkt = kkt_residual_mat(
                    engine.adjoint(resid_n), x_next, gamma, x_norms=norms_buf
                )
                done = kkt <= opts.tol * max(1.0, gamma)

            x, x_next = x_next, x
            resid = resid_n
            f_cur = f_next
            par = perf_counter() - t0
            cum += par
            par_t[k - 1] = par

            if _should_trace(opts, k, done or blown or k == opts.max_iterations):
                kernels.block_norms(x, norms_buf)
                obj = f_cur + gamma * float(norms_buf.sum())
                kkt_tr = kkt_residual_mat(
                    engine.adjoint(resid), x, gamma, x_norms=norms_buf
                )
                trace.append(TraceRow(k, obj, max_step, kkt_tr, cum, par, 0.0))
            if blown:
                status = DEGENERATE
                break
            if done:
                status = CONVERGED
                break
    finally:
        engine.close()
    return _prox_family_report(
        "proxgrad", status, k, x, trace, gamma, N, M, cum, par_t, con_t
    )


SOLVERS = {
    "aladin": aladin_solve,
    "admm": admm_solve,
    "fista": fista_solve,
    "proxgrad": prox_gradient_solve,
}


def solve(problem, solver, options=None):
    """Dispatch to one of :data:`SOLVERS` by name."""
    try:
        fn = SOLVERS[solver]
    except KeyError:
        raise ConfigError(
            f"unknown solver {solver!r}; available: {sorted(SOLVERS)}"
        ) from None
    return fn(problem, options)


# -- trace export -----------------------------------------------------------------


def write_trace_csv(report, path, include_timings=True):
    """Write the iteration trace as CSV.

    Floats are rendered with ``repr`` (shortest round-trip decimals).  With
    ``include_timings=False`` the three timing columns are written as 0 so
    that deterministic runs produce byte-identical files.
    """
    lines = [TRACE_HEADER]
    for row in report.trace:
        if include_timings:
            timing = (
                f"{row.elapsed_s * 1e3!r},{row.parallel_s * 1e3!r},"
                f"{row.consensus_s * 1e3!r}"
            )
        else:
            timing = "0,0,0"
        lines.append(
            f"{row.iteration},{row.objective!r},{row.max_step!r},"
            f"{row.kkt_residual!r},{timing}"
        )
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
