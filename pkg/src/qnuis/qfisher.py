"""Logarithmic derivatives and quantum Fisher information matrices.

All solves go through the eigendecomposition of the state: for a full-rank
rho with spectrum {p_a} and derivative D rotated into the eigenbasis,

    SLD:  L_ab = 2 D_ab / (p_a + p_b)
    RLD:  L = rho^{-1} D
    commutation operator:  [D_rho(X)]_ab = -i (p_a - p_b)/(p_a + p_b) X_ab
"""

from dataclasses import dataclass

import numpy as np

from . import _kernels
from ._linalg import check_square, eigh_state, hermitize, inv_psd
from .errors import DimensionError, SingularQFIMError, SingularStateError
from .model import derivatives as model_derivatives
from .model import evaluate as model_evaluate

RESIDUAL_TOL = 1e-10
STATE_MIN_EIG = 1e-10


@dataclass(frozen=True)
class LogDerivativeSet:
    """SLD or RLD operators of a model at a point, with the state attached."""

    kind: str  # "sld" | "rld"
    operators: tuple
    point: np.ndarray
    rho: np.ndarray

    def __len__(self):
        return len(self.operators)


@dataclass(frozen=True)
class QFIM:
    """Fisher information matrix: real symmetric (sld/classical) or Hermitian (rld)."""

    kind: str  # "sld" | "rld" | "classical"
    entries: np.ndarray
    point: np.ndarray = None

    @property
    def dim(self):
        return self.entries.shape[0]

    def inverse(self):
        return inv_psd(self.entries, f"{self.kind} Fisher matrix")


def _state_eig(rho):
    p, v = eigh_state(rho)
    if p.min() < STATE_MIN_EIG:
        raise SingularStateError(
            f"state eigenvalue {p.min():.3e} below {STATE_MIN_EIG:g}; "
            "logarithmic derivatives are not unique for rank-deficient states"
        )
    return p, v


def sld(model, theta):
    """Symmetric logarithmic derivatives at theta."""
    theta = np.asarray(theta, dtype=float)
    rho = model_evaluate(model, theta)
    derivs = model_derivatives(model, theta)
    p, v = _state_eig(rho)
    rotated = np.asarray([v.conj().T @ m @ v for m in derivs])
    ls_eig = _kernels.sld_eig_scale(p, rotated)
    ops = tuple(hermitize(v @ l @ v.conj().T) for l in ls_eig)
    _check_residuals("sld", ops, rho, derivs)
    return LogDerivativeSet("sld", ops, theta, rho)


def rld(model, theta):
    """Right logarithmic derivatives L = rho^{-1} d rho at theta."""
    theta = np.asarray(theta, dtype=float)
    rho = model_evaluate(model, theta)
    derivs = model_derivatives(model, theta)
    p, v = _state_eig(rho)
    rho_inv = (v / p) @ v.conj().T
    ops = tuple(rho_inv @ m for m in derivs)
    _check_residuals("rld", ops, rho, derivs)
    return LogDerivativeSet("rld", ops, theta, rho)


def _check_residuals(kind, ops, rho, derivs):
    for i, (l, d) in enumerate(zip(ops, derivs)):
        if kind == "sld":
            res = d - 0.5 * (l @ rho + rho @ l)
        else:
            res = d - rho @ l
        if np.linalg.norm(res) > RESIDUAL_TOL:
            raise SingularStateError(
                f"{kind} defining equation residual {np.linalg.norm(res):.2e} "
                f"for parameter {i}"
            )


def fisher_matrix(lds, rho=None):
    """Quantum Fisher information matrix from a set of logarithmic derivatives."""
    if rho is None:
        rho = lds.rho
    rho = check_square(np.asarray(rho, dtype=complex), "rho")
    ops = np.asarray(lds.operators)
    if ops.shape[1:] != rho.shape:
        raise DimensionError(
            f"operators of shape {ops.shape[1:]} do not match state {rho.shape}"
        )
    if lds.kind == "sld":
        raw = _kernels.pair_gram(ops, ops, rho)
        j = 0.5 * (raw.real + raw.real.T)
        return QFIM("sld", j, lds.point)
    # J^R_ij = tr[L_i^dag rho L_j]
    j = np.asarray(_kernels.pair_gram(np.conj(ops).transpose(0, 2, 1), ops, rho))
    j = 0.5 * (j + j.conj().T)
    return QFIM("rld", j, lds.point)


def dual_operators(lds, qfim, check_tol=1e-8):
    """Dual basis L^i = sum_j (J^{-1})_{ji} L_j of the logarithmic derivatives.

    Verifies <L^i, L_j> = delta_ij in the inner product matching ``lds.kind``.
    """
    jinv = qfim.inverse() if isinstance(qfim, QFIM) else inv_psd(qfim, "QFIM")
    ops = np.asarray(lds.operators)
    duals = np.tensordot(jinv.T, ops, axes=1)  # duals[i] = sum_j jinv[j,i] ops[j]
    rho = lds.rho
    if lds.kind == "sld":
        pairing = np.real(_kernels.pair_gram(duals, ops, rho))
    else:
        pairing = np.array([
            [np.trace(rho @ ops[j] @ duals[i].conj().T) for j in range(len(ops))]
            for i in range(len(ops))
        ])
    if np.max(np.abs(pairing - np.eye(len(ops)))) > check_tol:
        raise SingularQFIMError("dual-basis pairing failed; QFIM inverse is inaccurate")
    return [hermitize(d) if lds.kind == "sld" else d for d in duals]


def commutation_operator(rho, x):
    """D_rho(X) solving rho X - X rho = i(rho D + D rho), for full-rank rho."""
    rho = check_square(np.asarray(rho, dtype=complex), "rho")
    x = check_square(np.asarray(x, dtype=complex), "X")
    if x.shape != rho.shape:
        raise DimensionError("X and rho dimensions differ")
    p, v = _state_eig(rho)
    x_eig = v.conj().T @ x @ v
    d_eig = _kernels.dcomm_eig_scale(p, x_eig)
    d = v @ d_eig @ v.conj().T
    res = rho @ x - x @ rho - 1j * (rho @ d + d @ rho)
    if np.linalg.norm(res) > RESIDUAL_TOL:
        raise SingularStateError(
            f"commutation-operator residual {np.linalg.norm(res):.2e}"
        )
    return hermitize(d) if np.linalg.norm(x - x.conj().T) < 1e-12 else d


def z_matrix(operators, rho):
    """Z[i, j] = tr[X_i rho X_j]; Hermitian for Hermitian operator tuples."""
    rho = check_square(np.asarray(rho, dtype=complex), "rho")
    ops = np.asarray(operators, dtype=complex)
    if ops.ndim != 3 or ops.shape[1:] != rho.shape:
        raise DimensionError(
            f"operator stack shape {ops.shape} does not match state {rho.shape}"
        )
    z = np.asarray(_kernels.pair_gram(ops, ops, rho))
    return 0.5 * (z + z.conj().T)


# -- convenience wrappers --------------------------------------------------------

def sld_qfim(model, theta):
    """SLD quantum Fisher information matrix at theta."""
    lds = sld(model, theta)
    return fisher_matrix(lds)


def rld_qfim(model, theta):
    """RLD quantum Fisher information matrix at theta."""
    lds = rld(model, theta)
    return fisher_matrix(lds)
