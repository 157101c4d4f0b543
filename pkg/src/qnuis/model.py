"""Parametric families of density matrices.

A :class:`StateModel` is a differentiable map from a real parameter vector
to a full-rank density matrix. Interest parameters always come first;
the split is carried by :class:`Partition`. The built-in zoo covers the
standard benchmark families used throughout the test suite.
"""

from dataclasses import dataclass

import numpy as np

from ._linalg import herm_deviation, hermitize, vec_gram
from .errors import ConfigError, DomainError, ModelError, RegularityError

HERM_TOL = 1e-12
TRACE_TOL = 1e-12
DERIV_TRACE_TOL = 1e-10
MIN_EIG = 1e-10
REGULARITY_TOL = 1e-8
DEFAULT_FD_STEP = 1e-5

SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)
PAULIS = (SIGMA_X, SIGMA_Y, SIGMA_Z)


@dataclass(frozen=True)
class Partition:
    """Split of parameter indices into interest (first d_I) and nuisance blocks."""

    d_interest: int
    d_total: int

    def __post_init__(self):
        if not (1 <= self.d_interest <= self.d_total):
            raise ConfigError(
                f"need 1 <= d_interest <= d_total, got ({self.d_interest}, {self.d_total})"
            )

    @property
    def d_nuisance(self):
        return self.d_total - self.d_interest

    @property
    def interest(self):
        return slice(0, self.d_interest)

    @property
    def nuisance(self):
        return slice(self.d_interest, self.d_total)


@dataclass(frozen=True)
class WeightMatrix:
    """Validated real symmetric positive (semi)definite weight matrix."""

    entries: np.ndarray
    semidefinite: bool = False

    def __post_init__(self):
        w = np.asarray(self.entries, dtype=float)
        object.__setattr__(self, "entries", w)
        if w.ndim != 2 or w.shape[0] != w.shape[1]:
            raise ConfigError(f"weight matrix must be square, got shape {w.shape}")
        if np.max(np.abs(w - w.T)) > HERM_TOL:
            raise ConfigError("weight matrix is not symmetric")
        lo = np.linalg.eigvalsh(w).min()
        if self.semidefinite:
            if lo < -HERM_TOL:
                raise ConfigError("weight matrix is not positive semidefinite")
        elif lo <= 0.0:
            raise ConfigError("weight matrix is not positive definite")

    @property
    def dim(self):
        return self.entries.shape[0]

    @classmethod
    def identity(cls, k):
        return cls(np.eye(k))


def as_weight(w, k):
    """Coerce ``w`` (WeightMatrix, array, or None for identity) to a k x k array."""
    if w is None:
        return np.eye(k)
    if isinstance(w, WeightMatrix):
        w = w.entries
    else:
        w = WeightMatrix(np.asarray(w, dtype=float)).entries
    if w.shape != (k, k):
        raise ConfigError(f"weight matrix shape {w.shape} does not match block size {k}")
    return w


@dataclass(frozen=True)
class StateModel:
    """Differentiable family theta -> rho of full-rank density matrices.

    ``deriv_fn(theta, i)`` returns the i-th partial derivative; when absent,
    central finite differences with step ``fd_step`` are used. ``param_domain``
    is a list of open intervals, one per coordinate; constraints that are not
    boxes (e.g. the Bloch ball) are enforced through the positivity check at
    evaluation time.
    """

    dim_hilbert: int
    dim_param: int
    state_fn: callable
    deriv_fn: callable = None
    fd_step: float = DEFAULT_FD_STEP
    param_domain: tuple = None
    labels: tuple = None
    name: str = "custom"

    def __post_init__(self):
        if self.dim_hilbert < 2 or self.dim_param < 1:
            raise ConfigError("need dim_hilbert >= 2 and dim_param >= 1")
        if self.fd_step <= 0:
            raise ConfigError("fd_step must be positive")
        dom = self.param_domain
        if dom is None:
            dom = tuple((-np.inf, np.inf) for _ in range(self.dim_param))
        dom = tuple((float(lo), float(hi)) for lo, hi in dom)
        if len(dom) != self.dim_param or any(lo >= hi for lo, hi in dom):
            raise ConfigError("param_domain must hold one nonempty open interval per coordinate")
        object.__setattr__(self, "param_domain", dom)
        labels = self.labels
        if labels is None:
            labels = tuple(f"theta{i + 1}" for i in range(self.dim_param))
        object.__setattr__(self, "labels", tuple(labels))

    def contains(self, theta):
        theta = np.asarray(theta, dtype=float)
        if theta.shape != (self.dim_param,):
            return False
        return all(lo < t < hi for t, (lo, hi) in zip(theta, self.param_domain))


def _check_point(model, theta):
    theta = np.asarray(theta, dtype=float)
    if theta.shape != (model.dim_param,):
        raise DomainError(
            f"point has shape {theta.shape}, model expects ({model.dim_param},)"
        )
    if not model.contains(theta):
        raise DomainError(f"point {theta.tolist()} outside the model domain")
    return theta


def evaluate(model, theta):
    """Return rho(theta), validating Hermiticity, unit trace, and positivity."""
    theta = _check_point(model, theta)
    rho = np.asarray(model.state_fn(theta), dtype=complex)
    if rho.shape != (model.dim_hilbert, model.dim_hilbert):
        raise ModelError(f"state_fn returned shape {rho.shape}")
    if herm_deviation(rho) > HERM_TOL:
        raise ModelError("state is not Hermitian within tolerance")
    if abs(np.trace(rho).real - 1.0) > TRACE_TOL or abs(np.trace(rho).imag) > TRACE_TOL:
        raise ModelError("state trace differs from 1")
    rho = hermitize(rho)
    if np.linalg.eigvalsh(rho).min() < MIN_EIG:
        raise ModelError(
            f"state is not full rank (min eigenvalue < {MIN_EIG:g}); "
            "only strictly positive models are supported"
        )
    return rho


def derivatives(model, theta, check_regularity=True):
    """List of d Hermitian, traceless derivative matrices at theta.

    Uses the analytic callback when provided, otherwise central differences.
    """
    theta = _check_point(model, theta)
    d = model.dim_param
    if model.deriv_fn is not None:
        mats = [np.asarray(model.deriv_fn(theta, i), dtype=complex) for i in range(d)]
    else:
        h = model.fd_step
        mats = []
        for i in range(d):
            step = np.zeros(d)
            step[i] = h
            if not (model.contains(theta + step) and model.contains(theta - step)):
                raise DomainError(
                    f"finite-difference stencil leaves the domain along coordinate {i}"
                )
            plus = np.asarray(model.state_fn(theta + step), dtype=complex)
            minus = np.asarray(model.state_fn(theta - step), dtype=complex)
            mats.append((plus - minus) / (2.0 * h))
    out = []
    for i, m in enumerate(mats):
        if herm_deviation(m) > HERM_TOL:
            raise ModelError(f"derivative {i} is not Hermitian within tolerance")
        m = hermitize(m)
        if abs(np.trace(m)) > DERIV_TRACE_TOL:
            raise ModelError(f"derivative {i} is not traceless within tolerance")
        out.append(m)
    if check_regularity:
        gram = vec_gram(out)
        smin = np.linalg.svd(gram, compute_uv=False).min()
        if smin <= REGULARITY_TOL:
            raise RegularityError(
                f"derivative Gram matrix nearly singular (sigma_min = {smin:.3e})"
            )
    return out


def reparametrize(model, theta_of_xi, jacobian_of_xi, param_domain=None,
                  labels=None, name=None):
    """New model for xi -> rho(theta(xi)).

    ``jacobian_of_xi(xi)`` must return the matrix [d theta_i / d xi_alpha]
    with row index i (old coordinate) and column index alpha (new coordinate).
    """
    base_derivs = lambda th: derivatives(model, th, check_regularity=False)

    def state_fn(xi):
        return model.state_fn(np.asarray(theta_of_xi(xi), dtype=float))

    def deriv_fn(xi, alpha):
        theta = np.asarray(theta_of_xi(xi), dtype=float)
        jac = np.asarray(jacobian_of_xi(xi), dtype=float)
        mats = base_derivs(theta)
        return sum(jac[i, alpha] * mats[i] for i in range(model.dim_param))

    return StateModel(
        dim_hilbert=model.dim_hilbert,
        dim_param=model.dim_param,
        state_fn=state_fn,
        deriv_fn=deriv_fn,
        fd_step=model.fd_step,
        param_domain=param_domain,
        labels=labels,
        name=name or (model.name + "-reparam"),
    )


# -- model zoo -----------------------------------------------------------------

def _qubit_clock():
    def state_fn(theta):
        t, g = theta
        off = np.exp(-g * t) * np.exp(1j * t)
        return 0.5 * np.array([[1.0, off], [np.conj(off), 1.0]])

    def deriv_fn(theta, i):
        t, g = theta
        off = np.exp((-g + 1j) * t)
        factor = (-g + 1j) if i == 0 else -t
        d01 = 0.5 * factor * off
        return np.array([[0.0, d01], [np.conj(d01), 0.0]])

    return StateModel(2, 2, state_fn, deriv_fn,
                      param_domain=((1e-9, np.inf), (1e-9, np.inf)),
                      labels=("t", "gamma"), name="qubit-clock")


def _qubit_clock_orthogonal():
    # same family with the mixedness p = (1 + exp(-gamma t))/2 as nuisance,
    # which is orthogonal to t
    def state_fn(theta):
        t, p = theta
        off = (2.0 * p - 1.0) * np.exp(1j * t)
        return 0.5 * np.array([[1.0, off], [np.conj(off), 1.0]])

    def deriv_fn(theta, i):
        t, p = theta
        if i == 0:
            d01 = 0.5j * (2.0 * p - 1.0) * np.exp(1j * t)
        else:
            d01 = np.exp(1j * t)
        return np.array([[0.0, d01], [np.conj(d01), 0.0]])

    return StateModel(2, 2, state_fn, deriv_fn,
                      param_domain=((-np.inf, np.inf), (0.5 + 1e-9, 1.0 - 1e-9)),
                      labels=("t", "p"), name="qubit-clock-orthogonal")


def _bloch_qubit():
    def state_fn(theta):
        rho = 0.5 * np.eye(2, dtype=complex)
        for th, sigma in zip(theta, PAULIS):
            rho = rho + 0.5 * th * sigma
        return rho

    def deriv_fn(theta, i):
        return 0.5 * PAULIS[i]

    return StateModel(2, 3, state_fn, deriv_fn,
                      param_domain=tuple(((-1.0, 1.0),) * 3),
                      labels=("theta1", "theta2", "theta3"), name="bloch-qubit")


def gell_mann_basis(n):
    """Orthonormal traceless Hermitian basis of the n x n operators.

    Generalized Gell-Mann construction, normalized to tr[H_i H_j] = delta_ij.
    """
    basis = []
    for j in range(n):
        for k in range(j + 1, n):
            sym = np.zeros((n, n), dtype=complex)
            sym[j, k] = sym[k, j] = 1.0 / np.sqrt(2.0)
            basis.append(sym)
            asym = np.zeros((n, n), dtype=complex)
            asym[j, k] = -1j / np.sqrt(2.0)
            asym[k, j] = 1j / np.sqrt(2.0)
            basis.append(asym)
    for l in range(1, n):
        diag = np.zeros(n)
        diag[:l] = 1.0
        diag[l] = -l
        diag = diag / np.sqrt(l * (l + 1))
        basis.append(np.diag(diag).astype(complex))
    return basis


def _qudit_observable(config):
    if "basis" in config:
        basis = [np.asarray(h, dtype=complex) for h in config["basis"]]
        n = basis[0].shape[0]
        for i, h in enumerate(basis):
            if herm_deviation(h) > HERM_TOL or abs(np.trace(h)) > 1e-10:
                raise ConfigError(f"basis element {i} is not traceless Hermitian")
        gram = np.array([[np.trace(a @ b).real for b in basis] for a in basis])
        if np.max(np.abs(gram - np.eye(len(basis)))) > 1e-10:
            raise ConfigError("basis is not orthonormal under the Frobenius product")
    else:
        n = int(config.get("d_H", 2))
        if n < 2:
            raise ConfigError("qudit-observable needs d_H >= 2")
        basis = gell_mann_basis(n)
    d = len(basis)
    stack = np.asarray(basis)

    def state_fn(theta):
        return np.eye(n, dtype=complex) / n + np.tensordot(theta, stack, axes=1)

    def deriv_fn(theta, i):
        return stack[i]

    bound = 1.0  # box hull; true positivity region enforced at evaluation
    return StateModel(n, d, state_fn, deriv_fn,
                      param_domain=tuple(((-bound, bound),) * d),
                      name="qudit-observable")


def _quantum_exponential(config):
    if "F" not in config:
        raise ConfigError("quantum-exponential needs a list of commuting Hermitian F_i")
    fs = [np.asarray(f, dtype=complex) for f in config["F"]]
    n = fs[0].shape[0]
    for i, f in enumerate(fs):
        if f.shape != (n, n) or herm_deviation(f) > HERM_TOL:
            raise ConfigError(f"F[{i}] is not Hermitian of consistent dimension")
    for i in range(len(fs)):
        for j in range(i + 1, len(fs)):
            if np.max(np.abs(fs[i] @ fs[j] - fs[j] @ fs[i])) > 1e-10:
                raise ConfigError(f"F[{i}] and F[{j}] do not commute")
    rho0 = np.asarray(config.get("rho0", np.eye(n) / n), dtype=complex)
    if herm_deviation(rho0) > HERM_TOL or abs(np.trace(rho0) - 1) > 1e-10:
        raise ConfigError("rho0 must be a density matrix")
    if np.linalg.eigvalsh(hermitize(rho0)).min() < MIN_EIG:
        raise ConfigError("rho0 must be full rank")
    d = len(fs)
    fstack = np.asarray(fs)

    def _pieces(theta):
        m = np.tensordot(theta, fstack, axes=1)
        w, v = np.linalg.eigh(hermitize(m))
        exp_half = (v * np.exp(0.5 * w)) @ v.conj().T
        z = np.trace(rho0 @ (v * np.exp(w)) @ v.conj().T).real
        return exp_half, z

    def state_fn(theta):
        exp_half, z = _pieces(theta)
        return exp_half @ rho0 @ exp_half / z

    def deriv_fn(theta, i):
        # d rho = (F_i - dpsi_i) rho/2 + rho (F_i - dpsi_i)/2 with
        # dpsi_i = tr[rho F_i], valid because the F_i commute
        rho = state_fn(theta)
        centered = fstack[i] - np.trace(rho @ fstack[i]).real * np.eye(n)
        return 0.5 * (centered @ rho + rho @ centered)

    return StateModel(n, d, state_fn, deriv_fn,
                      param_domain=tuple(((-3.0, 3.0),) * d),
                      name="quantum-exponential")


def _dice():
    def state_fn(theta):
        t1, t2 = theta
        return np.diag([t1, t2, 1.0 - t1 - t2]).astype(complex)

    def deriv_fn(theta, i):
        if i == 0:
            return np.diag([1.0, 0.0, -1.0]).astype(complex)
        return np.diag([0.0, 1.0, -1.0]).astype(complex)

    return StateModel(3, 2, state_fn, deriv_fn,
                      param_domain=((0.0, 1.0), (0.0, 1.0)),
                      labels=("theta1", "theta2"), name="dice")


ZOO_NAMES = ("qubit-clock", "qubit-clock-orthogonal", "bloch-qubit",
             "qudit-observable", "quantum-exponential", "dice")


def zoo_build(name, config=None):
    """Construct a named built-in model with analytic derivatives."""
    config = dict(config or {})
    if name == "qubit-clock":
        return _qubit_clock()
    if name == "qubit-clock-orthogonal":
        return _qubit_clock_orthogonal()
    if name == "bloch-qubit":
        return _bloch_qubit()
    if name == "qudit-observable":
        return _qudit_observable(config)
    if name == "quantum-exponential":
        return _quantum_exponential(config)
    if name == "dice":
        return _dice()
    raise ConfigError(f"unknown zoo model {name!r}; choose from {ZOO_NAMES}")
