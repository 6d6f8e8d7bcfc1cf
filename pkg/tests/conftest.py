import numpy as np
import pytest

from jadce import kernels
from jadce.instance import InstanceConfig, generate, to_problem


def brute_force_dense(q, m):
    """Entry-by-entry dense expansion of the stacked real operator.

    Independent of the library's kron-based builder: fills the (2LM, 2MN)
    matrix one (l, i) block at a time from the real/imaginary 2x2 pattern.
    """
    q = np.asarray(q)
    L, N = q.shape
    out = np.zeros((2 * L * m, 2 * m * N))
    for l in range(L):
        for i in range(N):
            re, im = q[l, i].real, q[l, i].imag
            r0, c0 = 2 * m * l, 2 * m * i
            for a in range(m):
                out[r0 + a, c0 + a] = re
                out[r0 + a, c0 + m + a] = -im
                out[r0 + m + a, c0 + a] = im
                out[r0 + m + a, c0 + m + a] = re
    return out


def small_problem(seed=0, n_devices=30, n_antennas=4, seq_length=8, n_active=3,
                  noise_var=0.01, gamma_scale=0.5):
    cfg = InstanceConfig(
        n_devices=n_devices, n_antennas=n_antennas, seq_length=seq_length,
        n_active=n_active, noise_var=noise_var, seed=seed,
    )
    inst = generate(cfg)
    return inst, to_problem(inst, gamma_scale=gamma_scale)


@pytest.fixture(params=kernels.available_backends())
def kernel_backend(request):
    previous = kernels.backend_name()
    kernels.set_backend(request.param)
    yield request.param
    kernels.set_backend(previous)
