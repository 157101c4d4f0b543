"""Finite-outcome classical statistical models.

Standalone functionality for probability-vector families, and the oracle
layer for distributions induced by measuring a quantum model with a POVM.
"""

import csv
import io
from dataclasses import dataclass

import numpy as np

from . import _kernels
from ._linalg import inv_psd
from .errors import (ConfigError, ConvergenceError, DomainError,
                     RegularityError)
from .model import as_weight

PROB_SUM_TOL = 1e-12
PINV_CUTOFF = 1e-10


@dataclass(frozen=True)
class ClassicalModel:
    """Family theta -> probability vector over m outcomes.

    ``deriv_fn(theta)`` returns the m x d matrix of partial derivatives;
    central differences with ``fd_step`` are used when it is absent.
    """

    n_outcomes: int
    dim_param: int
    prob_fn: callable
    deriv_fn: callable = None
    fd_step: float = 1e-5
    param_domain: tuple = None
    name: str = "custom"

    def __post_init__(self):
        dom = self.param_domain
        if dom is None:
            dom = tuple((-np.inf, np.inf) for _ in range(self.dim_param))
        dom = tuple((float(lo), float(hi)) for lo, hi in dom)
        if len(dom) != self.dim_param:
            raise ConfigError("param_domain must hold one interval per coordinate")
        object.__setattr__(self, "param_domain", dom)

    def contains(self, theta):
        theta = np.asarray(theta, dtype=float)
        if theta.shape != (self.dim_param,):
            return False
        return all(lo < t < hi for t, (lo, hi) in zip(theta, self.param_domain))


def _check_point(model, theta):
    theta = np.asarray(theta, dtype=float)
    if not model.contains(theta):
        raise DomainError(f"point {theta.tolist()} outside the model domain")
    return theta


def probabilities(model, theta):
    theta = _check_point(model, theta)
    p = np.asarray(model.prob_fn(theta), dtype=float)
    if p.shape != (model.n_outcomes,):
        raise DomainError(f"prob_fn returned shape {p.shape}")
    if p.min() <= 0.0:
        raise DomainError("probabilities must be strictly positive")
    if abs(p.sum() - 1.0) > PROB_SUM_TOL:
        raise DomainError("probabilities do not sum to 1")
    return p


def prob_derivatives(model, theta):
    """m x d table of partial derivatives of the outcome probabilities."""
    theta = _check_point(model, theta)
    if model.deriv_fn is not None:
        d = np.asarray(model.deriv_fn(theta), dtype=float)
        if d.shape != (model.n_outcomes, model.dim_param):
            raise DomainError(f"deriv_fn returned shape {d.shape}")
        return d
    h = model.fd_step
    cols = []
    for i in range(model.dim_param):
        step = np.zeros(model.dim_param)
        step[i] = h
        cols.append((np.asarray(model.prob_fn(theta + step), dtype=float)
                     - np.asarray(model.prob_fn(theta - step), dtype=float)) / (2 * h))
    return np.stack(cols, axis=1)


def score(model, theta):
    """Score table u[x, i] = d_i log p_theta(x); each column has zero mean."""
    p = probabilities(model, theta)
    return prob_derivatives(model, theta) / p[:, None]


def fisher_matrix(model, theta):
    """Classical Fisher information matrix E[u u^T]."""
    p = probabilities(model, theta)
    dp = prob_derivatives(model, theta)
    j = _kernels.cfim_from_table(p, dp)
    j = 0.5 * (j + j.T)
    smin = np.linalg.eigvalsh(j).min()
    if smin <= 0.0:
        raise RegularityError(f"classical Fisher matrix singular (min eig {smin:.3e})")
    return j


def effective_score(model, theta, partition, m_matrix=None):
    """Interest scores with M-weighted nuisance scores projected out.

    u_i(x|M) = u_i(x) - sum_j M[i, j] u_{nuisance j}(x). With M = None the
    optimal M* = J_IN J_NN^{-1} is used, whose Gram matrix is the partial
    Fisher information.
    """
    u = score(model, theta)
    di = partition.d_interest
    if partition.d_nuisance == 0:
        return u[:, :di]
    if m_matrix is None:
        p = probabilities(model, theta)
        j = np.asarray(_kernels.cfim_from_table(p, prob_derivatives(model, theta)))
        j = 0.5 * (j + j.T)
        jnn = j[partition.nuisance, partition.nuisance]
        # generalized inverse (cutoff relative to the full matrix scale)
        # tolerates linearly dependent or vanishing nuisance scores
        w, v = np.linalg.eigh(jnn)
        cut = PINV_CUTOFF * max(float(np.abs(j).max()), 1.0)
        winv = np.where(np.abs(w) > cut, 1.0 / np.where(np.abs(w) > cut, w, 1.0), 0.0)
        jnn_inv = (v * winv) @ v.T
        m_matrix = j[partition.interest, partition.nuisance] @ jnn_inv
    m_matrix = np.asarray(m_matrix, dtype=float)
    if m_matrix.shape != (di, partition.d_nuisance):
        raise DomainError(
            f"M must be {di} x {partition.d_nuisance}, got {m_matrix.shape}"
        )
    return u[:, :di] - u[:, partition.nuisance] @ m_matrix.T


def mle(model, counts, theta0, max_iter=200, grad_tol=1e-9):
    """Maximum likelihood fit to outcome counts by damped Newton ascent.

    Uses Fisher scoring with a backtracking line search that never accepts a
    likelihood decrease. Raises ConvergenceError when the gradient norm stays
    above ``grad_tol`` after ``max_iter`` iterations.
    """
    counts = np.asarray(counts, dtype=float)
    if counts.shape != (model.n_outcomes,) or counts.min() < 0:
        raise ConfigError("counts must be a nonnegative vector, one entry per outcome")
    n = counts.sum()
    if n <= 0:
        raise ConfigError("counts are all zero")
    theta = np.asarray(theta0, dtype=float).copy()
    if not model.contains(theta):
        raise DomainError("MLE starting point outside the domain")

    def loglike(th):
        return float(counts @ np.log(probabilities(model, th)))

    def clip_into(th):
        lo = np.array([b[0] for b in model.param_domain])
        hi = np.array([b[1] for b in model.param_domain])
        span = np.where(np.isfinite(hi - lo), hi - lo, 1.0)
        eps = 1e-9 * span
        return np.clip(th, lo + eps, hi - eps)

    ll = loglike(theta)
    for _ in range(max_iter):
        p = probabilities(model, theta)
        u = prob_derivatives(model, theta) / p[:, None]
        grad = u.T @ counts
        if np.linalg.norm(grad) < grad_tol * max(1.0, n):
            return theta
        fisher = _kernels.cfim_from_table(p, prob_derivatives(model, theta))
        try:
            step = inv_psd(0.5 * (fisher + fisher.T), "Fisher matrix") @ grad / n
        except Exception:
            step = grad / (n * max(1.0, np.linalg.norm(grad)))
        scale = 1.0
        for _ in range(40):
            cand = clip_into(theta + scale * step)
            try:
                cand_ll = loglike(cand)
            except DomainError:
                scale *= 0.5
                continue
            if cand_ll >= ll - 1e-12:
                break
            scale *= 0.5
        else:
            raise ConvergenceError("line search failed; likelihood may be degenerate")
        if np.allclose(cand, theta) and cand_ll <= ll + 1e-15:
            raise ConvergenceError("MLE stalled, possibly at the domain boundary")
        theta, ll = cand, cand_ll
    raise ConvergenceError(f"MLE did not converge in {max_iter} iterations")


def cr_bounds(model, theta, partition, weight=None):
    """Nuisance-known and nuisance-unknown CR bounds plus the information loss.

    Returns a dict with the weighted traces Tr[W (J_II)^{-1}] (nuisance
    known), Tr[W J^{I,I}] (nuisance unknown), and their difference.
    """
    w = as_weight(weight, partition.d_interest)
    j = fisher_matrix(model, theta)
    jii = j[partition.interest, partition.interest]
    known = float(np.trace(w @ inv_psd(jii, "interest Fisher block")))
    jinv = inv_psd(j, "Fisher matrix")
    unknown = float(np.trace(w @ jinv[partition.interest, partition.interest]))
    return {
        "nuisance_known": known,
        "nuisance_unknown": unknown,
        "information_loss": unknown - known,
    }


def dice_model():
    """Three-outcome die with p = (theta1, theta2, 1 - theta1 - theta2)."""

    def prob_fn(theta):
        return np.array([theta[0], theta[1], 1.0 - theta[0] - theta[1]])

    def deriv_fn(theta):
        return np.array([[1.0, 0.0], [0.0, 1.0], [-1.0, -1.0]])

    return ClassicalModel(3, 2, prob_fn, deriv_fn,
                          param_domain=((0.0, 1.0), (0.0, 1.0)), name="dice")


def induced_model(quantum_model, povm, name=None):
    """Classical model of the outcome distribution of a POVM on a quantum family."""
    from .measurement import born_distribution  # deferred, avoids cycle
    from .model import derivatives as qderivatives
    from .model import evaluate as qevaluate

    effects = np.asarray(povm.effects)

    def prob_fn(theta):
        return born_distribution(qevaluate(quantum_model, theta), povm)

    def deriv_fn(theta):
        mats = qderivatives(quantum_model, theta, check_regularity=False)
        return np.stack(
            [np.real(np.einsum("ab,xba->x", m, effects)) for m in mats], axis=1
        )

    return ClassicalModel(
        n_outcomes=len(povm.effects),
        dim_param=quantum_model.dim_param,
        prob_fn=prob_fn,
        deriv_fn=deriv_fn,
        param_domain=quantum_model.param_domain,
        name=name or f"{quantum_model.name}+povm",
    )


def read_counts_csv(stream):
    """Parse ``label,count`` rows; returns (labels, counts array)."""
    if isinstance(stream, str):
        stream = io.StringIO(stream)
    labels, counts = [], []
    for row in csv.reader(stream):
        if not row or row[0].startswith("#"):
            continue
        if len(row) != 2:
            raise ConfigError(f"expected 'label,count' rows, got {row!r}")
        labels.append(row[0])
        counts.append(float(row[1]))
    if not labels:
        raise ConfigError("no count rows found")
    return labels, np.asarray(counts)
