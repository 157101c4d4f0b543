"""Pure numpy implementations of the hot kernels.

Used when the compiled extension is unavailable or explicitly disabled
via QNUIS_PURE_PYTHON=1. Signatures and semantics match
``qnuis._kernels._speedups`` exactly.
"""

import numpy as np


def sld_eig_scale(p, a):
    """Scale eigenbasis blocks by 2/(p_a + p_b).

    ``p`` are the state eigenvalues, ``a`` a stack (k, n, n) of derivative
    matrices already rotated into the state eigenbasis. Returns the stack of
    symmetric logarithmic derivatives in that basis.
    """
    p = np.asarray(p, dtype=float)
    denom = p[:, None] + p[None, :]
    return 2.0 * np.asarray(a, dtype=complex) / denom


def dcomm_eig_scale(p, a):
    """Commutation-operator weights -i (p_a - p_b)/(p_a + p_b) in the eigenbasis."""
    p = np.asarray(p, dtype=float)
    w = (p[:, None] - p[None, :]) / (p[:, None] + p[None, :])
    return -1j * w * np.asarray(a, dtype=complex)


def pair_gram(x, y, rho):
    """G[i, l] = tr[X_i rho Y_l] for operator stacks X (k,n,n), Y (m,n,n)."""
    x = np.asarray(x, dtype=complex)
    y = np.asarray(y, dtype=complex)
    rho = np.asarray(rho, dtype=complex)
    return np.einsum("iab,bc,lca->il", x, rho, y, optimize=True)


def cfim_from_table(p, d):
    """Classical Fisher matrix sum_x d_x d_x^T / p_x.

    ``p`` (m,) outcome probabilities, ``d`` (m, k) derivative table.
    Rows with p_x == 0 must already be removed by the caller.
    """
    p = np.asarray(p, dtype=float)
    d = np.asarray(d, dtype=float)
    return (d / p[:, None]).T @ d


def born_probs(effects, rho):
    """p_x = Re tr[rho Pi_x] for an effect stack (m, n, n)."""
    effects = np.asarray(effects, dtype=complex)
    rho = np.asarray(rho, dtype=complex)
    return np.real(np.einsum("ab,xba->x", rho, effects, optimize=True))
