"""Pure-numpy implementations of the per-iteration block kernels.

Blocks live in complex form: an (n, m) complex array holds n device blocks
of m antenna coefficients each; Euclidean block norms match the stacked
real representation exactly.  These are the fallback for the compiled
extension and the reference its results are checked against.
"""

import numpy as np


def _row_norms(x):
    return np.sqrt((x.real * x.real + x.imag * x.imag).sum(axis=1))


def _shrink_factors(norms, kappa):
    # max(1 - kappa/||a||, 0) with the 0/0 guard at ||a|| = 0
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(norms <= kappa, 0.0, 1.0 - kappa / norms)


def prox_step_dual(z, at_lam, inv_rho, kappa, xi):
    """Fused local step: ``xi = shrink(z + inv_rho*at_lam, kappa)``.

    Returns the largest per-block step norm ``max_i ||xi_i - z_i||``.
    """
    np.multiply(at_lam, inv_rho, out=xi)
    xi += z
    xi *= _shrink_factors(_row_norms(xi), kappa)[:, None]
    d = xi - z
    step_sq = (d.real * d.real + d.imag * d.imag).sum(axis=1)
    return float(np.sqrt(step_sq.max()))


def prox_step_point(p, kappa, x_prev, xi):
    """Blockwise shrinkage of ``p``; displacement measured against ``x_prev``.

    Returns ``(max_i ||xi_i - x_prev_i||, ||xi - x_prev||_F^2)``.
    """
    np.copyto(xi, p)
    xi *= _shrink_factors(_row_norms(xi), kappa)[:, None]
    d = xi - x_prev
    step_sq = (d.real * d.real + d.imag * d.imag).sum(axis=1)
    return float(np.sqrt(step_sq.max())), float(step_sq.sum())


def block_norms(x, out):
    """Per-block Euclidean norms of an (n, m) complex block matrix."""
    np.sqrt((x.real * x.real + x.imag * x.imag).sum(axis=1), out=out)
