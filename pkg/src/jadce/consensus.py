"""Closed-form consensus operator for the splitting solvers.

Each iteration needs ``(I + A A^T / rho)^{-1} v`` for the stacked real
operator ``A`` built from the signature matrix ``q``.  Because the Gram
matrix ``q q^H`` is only L x L, that inverse collapses to a small dense
one: with ``G = q q^H``, the 2L x 2L real embedding of ``rho*I + G`` is
inverted once, and every application is a single (2L x 2L) @ (2L x M)
product for O(L^2 M) per call instead of O((LM)^3) ever.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import ConfigError, DimensionError


def _real_embedding(g, rho):
    """2L x 2L real matrix acting like ``rho*I + g`` on row-stacked blocks."""
    L = g.shape[0]
    b = np.zeros((2 * L, 2 * L))
    diag = rho * np.eye(L) + g.real
    b[0::2, 0::2] = diag
    b[1::2, 1::2] = diag
    b[0::2, 1::2] = -g.imag
    b[1::2, 0::2] = g.imag
    return b


@dataclass(frozen=True)
class ConsensusFactor:
    """Precomputed inverse for the consensus-step linear system.

    ``small_inverse`` is the dense inverse of the 2L x 2L real embedding of
    ``rho*I + q q^H``; ``apply`` realizes ``(I + A A^T / rho)^{-1}`` on
    stacked measurement vectors of length 2LM.
    """

    rho: float
    small_inverse: np.ndarray = field(repr=False)
    seq_length: int
    n_antennas: int

    def apply(self, v):
        """Apply the inverse to a stacked real measurement vector.

        The vector is viewed as a (2L, M) matrix (row ``2l`` holding the
        real parts of coherence row ``l``, row ``2l+1`` the imaginary
        parts), hit with the small inverse from the left, and scaled by
        ``rho``.
        """
        v = np.asarray(v, dtype=np.float64)
        L, M = self.seq_length, self.n_antennas
        if v.shape != (2 * L * M,):
            raise DimensionError(f"expected vector of length {2 * L * M}, got {v.shape}")
        w = self.rho * (self.small_inverse @ v.reshape(2 * L, M))
        return w.reshape(-1)

    def apply_mat(self, v_mat):
        """Complex-matrix variant of :meth:`apply` for (L, M) inputs."""
        L, M = self.seq_length, self.n_antennas
        if v_mat.shape != (L, M):
            raise DimensionError(f"expected ({L}, {M}) matrix, got {v_mat.shape}")
        packed = np.empty((2 * L, M))
        packed[0::2] = v_mat.real
        packed[1::2] = v_mat.imag
        w = self.rho * (self.small_inverse @ packed)
        return w[0::2] + 1j * w[1::2]


def precompute(q, m, rho):
    """Factorize the consensus system for signature matrix ``q``.

    Parameters
    ----------
    q : ndarray, shape (L, N)
        Complex signature matrix.
    m : int
        Antenna count (fixes the vector length 2LM that ``apply`` accepts).
    rho : float
        Penalty weight; must be positive, which also makes the system
        symmetric positive definite.

    Returns
    -------
    ConsensusFactor
    """
    if rho <= 0:
        raise ConfigError(f"penalty rho must be positive, got {rho}")
    q = np.asarray(q, dtype=np.complex128)
    gram = q @ q.conj().T
    b = _real_embedding(gram, rho)
    try:
        cho = scipy.linalg.cho_factor(b, lower=True, check_finite=False)
    except np.linalg.LinAlgError as exc:  # unreachable for rho > 0 and finite q
        raise ArithmeticError(f"consensus system not positive definite: {exc}") from exc
    inv = scipy.linalg.cho_solve(cho, np.eye(b.shape[0]), check_finite=False)
    inv = (inv + inv.T) / 2.0
    return ConsensusFactor(
        rho=float(rho), small_inverse=inv, seq_length=q.shape[0], n_antennas=int(m)
    )
