"""Matrix-free measurement operator for the stacked real group-lasso model.

A complex uplink model ``Y = Q X + noise`` with ``Q`` of shape (L, N) and
``X`` of shape (N, M) is rewritten over the reals: every row of a complex
matrix is stacked as ``[real part, imaginary part]`` (a length-2M segment),
rows are concatenated, and the resulting real operator acts block-wise on
length-2M device blocks.  The operator is never materialized; forward,
adjoint, and per-block products are computed through ``Q`` directly in
O(LMN) / O(LM) time.
"""

import numpy as np

from .errors import DenseCapError, DimensionError

DENSE_CAP_DEFAULT = 1_000_000


def vec_pair(z):
    """Stack a complex matrix row-wise into a real vector.

    Row ``j`` of ``z`` (length M) contributes the contiguous segment
    ``[Re(z[j]), Im(z[j])]`` of length 2M, so a (K, M) matrix maps to a
    vector of length 2KM.

    Parameters
    ----------
    z : ndarray, shape (K, M)
        Complex (or real) matrix.

    Returns
    -------
    ndarray, shape (2*K*M,)
        Real stacking of ``z``.
    """
    z = np.asarray(z)
    if z.ndim != 2:
        raise DimensionError(f"expected a 2-d matrix, got ndim={z.ndim}")
    out = np.empty((z.shape[0], 2, z.shape[1]), dtype=np.float64)
    out[:, 0, :] = z.real
    out[:, 1, :] = z.imag
    return out.reshape(-1)


def mat_pair(v, rows, cols):
    """Inverse of :func:`vec_pair`.

    Parameters
    ----------
    v : ndarray, shape (2*rows*cols,)
        Real vector produced by (or laid out like) :func:`vec_pair`.
    rows, cols : int
        Target complex shape.

    Returns
    -------
    ndarray, shape (rows, cols)
        Complex matrix with ``mat_pair(vec_pair(z), *z.shape) == z`` exactly.
    """
    v = np.asarray(v, dtype=np.float64)
    if v.ndim != 1 or v.size != 2 * rows * cols:
        raise DimensionError(
            f"vector of length {v.size} cannot be reshaped to a "
            f"{rows}x{cols} complex matrix (needs {2 * rows * cols})"
        )
    w = v.reshape(rows, 2, cols)
    return w[:, 0, :] + 1j * w[:, 1, :]


class MeasurementOperator:
    """Real block-structured operator defined by a complex signature matrix.

    Parameters
    ----------
    q : ndarray, shape (L, N)
        Complex signature matrix; one column per device.
    m : int
        Number of receive antennas (block size is 2m).

    Notes
    -----
    The equivalent dense matrix is
    ``kron(Re(q), [[I_m, 0], [0, I_m]]) + kron(Im(q), [[0, -I_m], [I_m, 0]])``
    of shape (2LM, 2MN); :meth:`to_dense` builds it for test-scale oracles
    only.  Instances are immutable and safe to share across threads.
    """

    def __init__(self, q, m):
        q = np.ascontiguousarray(q, dtype=np.complex128)
        if q.ndim != 2 or q.shape[0] < 1 or q.shape[1] < 1:
            raise DimensionError(f"signature matrix must be 2-d and nonempty, got shape {q.shape}")
        if int(m) < 1:
            raise DimensionError(f"antenna count must be >= 1, got {m}")
        self.q = q
        self.q.setflags(write=False)
        self.m = int(m)

    @property
    def seq_length(self):
        return self.q.shape[0]

    @property
    def n_blocks(self):
        return self.q.shape[1]

    @property
    def block_size(self):
        return 2 * self.m

    @property
    def shape(self):
        L, N = self.q.shape
        return (2 * L * self.m, 2 * self.m * N)

    # -- complex-matrix core (used by the solvers) ---------------------------

    def forward_mat(self, x_mat):
        """``q @ x_mat`` for a complex (N, M) block matrix."""
        return self.q @ x_mat

    def adjoint_mat(self, r_mat):
        """``q^H @ r_mat`` for a complex (L, M) measurement matrix."""
        return self.q.conj().T @ r_mat

    # -- real-vector interface ------------------------------------------------

    def matvec(self, x):
        """Apply the operator to a stacked block vector of length 2MN."""
        x_mat = mat_pair(x, self.n_blocks, self.m)
        return vec_pair(self.forward_mat(x_mat))

    def rmatvec(self, r):
        """Apply the adjoint to a stacked measurement vector of length 2LM."""
        r_mat = mat_pair(r, self.seq_length, self.m)
        return vec_pair(self.adjoint_mat(r_mat))

    def block_matvec(self, i, x_i):
        """Apply the i-th column block to a single length-2M device block."""
        self._check_block(i)
        x_i = np.asarray(x_i, dtype=np.float64)
        if x_i.shape != (2 * self.m,):
            raise DimensionError(f"device block must have length {2 * self.m}, got {x_i.shape}")
        c = x_i[: self.m] + 1j * x_i[self.m :]
        return vec_pair(np.outer(self.q[:, i], c))

    def block_rmatvec(self, i, r):
        """Adjoint of :meth:`block_matvec`: the i-th 2M-block of ``rmatvec(r)``."""
        self._check_block(i)
        r_mat = mat_pair(r, self.seq_length, self.m)
        row = self.q[:, i].conj() @ r_mat
        return np.concatenate([row.real, row.imag])

    def to_dense(self, max_entries=DENSE_CAP_DEFAULT):
        """Materialize the dense real matrix (test oracle only).

        Refuses with :class:`DenseCapError` when ``2LM * 2MN`` exceeds
        ``max_entries``; production-scale operators must never be expanded.
        """
        rows, cols = self.shape
        if rows * cols > max_entries:
            raise DenseCapError(
                f"dense expansion {rows}x{cols} has {rows * cols} entries, "
                f"over the cap of {max_entries}"
            )
        m = self.m
        eye = np.eye(m)
        blk_re = np.block([[eye, np.zeros((m, m))], [np.zeros((m, m)), eye]])
        blk_im = np.block([[np.zeros((m, m)), -eye], [eye, np.zeros((m, m))]])
        return np.kron(self.q.real, blk_re) + np.kron(self.q.imag, blk_im)

    def _check_block(self, i):
        if not 0 <= i < self.n_blocks:
            raise DimensionError(f"block index {i} out of range [0, {self.n_blocks})")


def block_view(x, n_blocks, m):
    """View a stacked block vector as an (n_blocks, 2m) array (no copy)."""
    x = np.asarray(x, dtype=np.float64)
    if x.size != 2 * m * n_blocks:
        raise DimensionError(
            f"vector of length {x.size} is not {n_blocks} blocks of size {2 * m}"
        )
    return x.reshape(n_blocks, 2 * m)
