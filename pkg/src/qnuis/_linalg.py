"""Small dense linear-algebra helpers shared across modules.

Everything here assumes desk-scale matrices (dimension <= a few dozen),
so eigendecomposition-based formulas are preferred over iterative solvers.
"""

import numpy as np

from .errors import DimensionError, SingularQFIMError

COND_CAP = 1e12


def hermitize(a):
    """Return the Hermitian part (A + A^dag)/2."""
    return 0.5 * (a + a.conj().T)


def herm_deviation(a):
    """Max absolute entry of A - A^dag."""
    return float(np.max(np.abs(a - a.conj().T))) if a.size else 0.0


def min_eig_herm(a):
    """Smallest eigenvalue of a Hermitian matrix."""
    return float(np.linalg.eigvalsh(hermitize(np.asarray(a))).min())


def eigh_state(rho):
    """Eigendecomposition of a density matrix, eigenvalues ascending."""
    return np.linalg.eigh(hermitize(np.asarray(rho, dtype=complex)))


def inv_psd(a, label="matrix", cond_cap=COND_CAP):
    """Invert a positive-definite (Hermitian) matrix via eigendecomposition.

    Raises SingularQFIMError when the condition number exceeds ``cond_cap``
    or an eigenvalue is not strictly positive.
    """
    a = np.asarray(a)
    w, v = np.linalg.eigh(hermitize(a))
    if w.min() <= 0.0 or w.max() / w.min() > cond_cap:
        raise SingularQFIMError(
            f"{label} is singular or ill-conditioned "
            f"(eigenvalues in [{w.min():.3e}, {w.max():.3e}])"
        )
    inv = (v / w) @ v.conj().T
    if np.isrealobj(a):
        return inv.real
    return inv


def sqrtm_psd(a, label="matrix"):
    """Principal square root of a positive-semidefinite Hermitian matrix."""
    w, v = np.linalg.eigh(hermitize(np.asarray(a)))
    if w.min() < -1e-12 * max(1.0, abs(w.max())):
        raise SingularQFIMError(f"{label} is not positive semidefinite")
    root = (v * np.sqrt(np.clip(w, 0.0, None))) @ v.conj().T
    if np.isrealobj(a):
        return root.real
    return root


def invsqrtm_pd(a, label="matrix"):
    """Inverse square root of a positive-definite Hermitian matrix."""
    w, v = np.linalg.eigh(hermitize(np.asarray(a)))
    if w.min() <= 0.0:
        raise SingularQFIMError(f"{label} is not positive definite")
    out = (v / np.sqrt(w)) @ v.conj().T
    if np.isrealobj(a):
        return out.real
    return out


def nuclear_norm(a):
    """Sum of singular values."""
    a = np.atleast_2d(np.asarray(a))
    return float(np.linalg.svd(a, compute_uv=False).sum())


def vec_gram(mats):
    """Real Gram matrix of vectorized matrices under the Frobenius product."""
    stack = np.asarray([np.ravel(m) for m in mats])
    return np.real(stack @ stack.conj().T)


def sym_inner(rho, x, y):
    """Symmetric (SLD) inner product <X, Y> = Re tr[rho X Y] for Hermitian X, Y."""
    return float(np.real(np.trace(rho @ x @ y)))


def right_inner(rho, x, y):
    """Right (RLD) inner product <X, Y> = tr[rho Y X^dag]."""
    return complex(np.trace(rho @ y @ x.conj().T))


def check_square(a, name="matrix"):
    a = np.asarray(a)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionError(f"{name} must be square, got shape {a.shape}")
    return a
