import numpy as np
import pytest

from qnuis.model import StateModel


def random_traceless_hermitian(rng, n):
    a = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    h = (a + a.conj().T) / 2
    return h - np.trace(h) / n * np.eye(n)


def random_density(rng, n, mix=0.2):
    g = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    rho = g @ g.conj().T
    rho /= np.trace(rho).real
    return (1 - mix) * rho + mix * np.eye(n) / n


def random_linear_model(rng, dim_hilbert, dim_param, scale=0.5):
    """Affine full-rank family rho0 + sum_i theta_i D_i on a safe box."""
    rho0 = random_density(rng, dim_hilbert)
    dirs = []
    for _ in range(dim_param):
        h = random_traceless_hermitian(rng, dim_hilbert)
        dirs.append(h / np.linalg.norm(h))
    dirs = np.asarray(dirs)
    lam_min = np.linalg.eigvalsh(rho0).min()
    radius = scale * lam_min / dim_param

    def state_fn(theta):
        return rho0 + np.tensordot(theta, dirs, axes=1)

    def deriv_fn(theta, i):
        return dirs[i]

    return StateModel(
        dim_hilbert, dim_param, state_fn, deriv_fn,
        param_domain=tuple(((-radius, radius),) * dim_param),
        name="random-linear")


def random_point(rng, model, shrink=0.5):
    out = np.empty(model.dim_param)
    for i, (lo, hi) in enumerate(model.param_domain):
        finite = np.isfinite(lo) and np.isfinite(hi)
        mid = (lo + hi) / 2 if finite else 0.0
        span = (hi - lo) / 2 if finite else 1.0
        out[i] = mid + shrink * span * rng.uniform(-1, 1)
    return out


def random_povm(rng, n, m):
    mats = []
    for _ in range(m):
        g = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
        mats.append(g @ g.conj().T)
    total = sum(mats)
    w, v = np.linalg.eigh(total)
    inv_sqrt = (v / np.sqrt(w)) @ v.conj().T
    from qnuis.measurement import POVM
    return POVM(tuple(inv_sqrt @ e @ inv_sqrt for e in mats))


def random_weight(rng, k):
    g = rng.standard_normal((k, k))
    return g @ g.T + 0.1 * np.eye(k)


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
