"""Objective/optimality evaluation, activity detection, and error metrics."""

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DimensionError
from .model import mat_pair


def _row_norms(x_mat):
    return np.sqrt((x_mat.real * x_mat.real + x_mat.imag * x_mat.imag).sum(axis=1))


def objective(problem, x):
    """Group-lasso objective ``0.5*||Ax - b||^2 + gamma * sum_i ||x_i||``."""
    op = problem.op
    x_mat = mat_pair(x, op.n_blocks, op.m)
    return objective_mat(problem, x_mat)


def objective_mat(problem, x_mat):
    """Objective evaluated on the complex (N, M) block form of ``x``."""
    op = problem.op
    resid = op.forward_mat(x_mat) - mat_pair(problem.b, op.seq_length, op.m)
    return 0.5 * float(np.vdot(resid, resid).real) + problem.gamma * float(
        _row_norms(x_mat).sum()
    )


def kkt_residual(problem, x):
    """Largest blockwise violation of the group-lasso optimality conditions.

    For ``r_i = A_i^T (Ax - b)``: a nonzero block contributes
    ``||r_i + gamma * x_i / ||x_i||||`` and a zero block contributes
    ``max(||r_i|| - gamma, 0)``.
    """
    op = problem.op
    x_mat = mat_pair(x, op.n_blocks, op.m)
    resid = op.forward_mat(x_mat) - mat_pair(problem.b, op.seq_length, op.m)
    return kkt_residual_mat(op.adjoint_mat(resid), x_mat, problem.gamma)


def kkt_residual_mat(rb_mat, x_mat, gamma, x_norms=None):
    """Blockwise KKT residual from precomputed ``rb = A^T(Ax - b)`` blocks."""
    if rb_mat.shape != x_mat.shape:
        raise DimensionError(f"shape mismatch {rb_mat.shape} vs {x_mat.shape}")
    if x_norms is None:
        x_norms = _row_norms(x_mat)
    zero = x_norms == 0.0
    worst = 0.0
    if zero.any():
        slack = float((_row_norms(rb_mat[zero]) - gamma).max())
        worst = max(worst, slack, 0.0)
    if (~zero).any():
        scaled = rb_mat[~zero] + (gamma / x_norms[~zero])[:, None] * x_mat[~zero]
        worst = max(worst, float(_row_norms(scaled).max()))
    return worst


@dataclass(frozen=True)
class DetectionResult:
    """Active-set estimate and its error rates against the ground truth."""

    estimated_active: np.ndarray = field(repr=False)
    missed_detection_rate: float
    false_alarm_rate: float
    block_norms: np.ndarray = field(repr=False)


def detect(x, inst, threshold_fraction=0.1):
    """Declare device ``i`` active iff ``||x_i|| > threshold_fraction * max_j ||x_j||``.

    The threshold is relative, so the decision is invariant under positive
    rescaling of ``x``.  An all-zero ``x`` yields an empty estimate (missed
    rate 1 whenever any device was truly active).
    """
    if not 0 < threshold_fraction < 1:
        raise ConfigError(f"threshold_fraction must lie in (0, 1), got {threshold_fraction}")
    cfg = inst.config
    x_mat = mat_pair(x, cfg.n_devices, cfg.n_antennas)
    norms = _row_norms(x_mat)
    peak = norms.max(initial=0.0)
    estimated = np.flatnonzero(norms > threshold_fraction * peak) if peak > 0 else (
        np.empty(0, dtype=np.int64)
    )
    true_set = set(inst.active.tolist())
    est_set = set(estimated.tolist())
    n_active = len(true_set)
    n_inactive = cfg.n_devices - n_active
    missed = len(true_set - est_set) / n_active if n_active else 0.0
    false = len(est_set - true_set) / n_inactive if n_inactive else 0.0
    return DetectionResult(
        estimated_active=estimated.astype(np.int64),
        missed_detection_rate=float(missed),
        false_alarm_rate=float(false),
        block_norms=norms,
    )


def nmse(x, inst):
    """Normalized channel error ``||mat(x) - X_true||_F^2 / ||X_true||_F^2``.

    ``X_true`` is the effective (activity-masked) channel; returns 0 for an
    exact recovery and infinity when the truth is zero but ``x`` is not.
    """
    cfg = inst.config
    x_mat = mat_pair(x, cfg.n_devices, cfg.n_antennas)
    target = inst.effective_channel()
    denom = float(np.vdot(target, target).real)
    diff = x_mat - target
    num = float(np.vdot(diff, diff).real)
    if denom == 0.0:
        return 0.0 if num == 0.0 else np.inf
    return num / denom
