"""Cramer-Rao-type scalar precision bounds.

SLD and RLD bounds come from Schur complements of the respective Fisher
matrices. The Holevo bound is a convex minimization over constrained
Hermitian operator tuples; the search space is reduced to the minimal
commutation-invariant extension of the logarithmic-derivative span, where
the constraints are absorbed by a dual-operator particular solution and the
remaining coefficients are unconstrained.
"""

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.optimize

from . import _kernels
from ._linalg import inv_psd, invsqrtm_pd, nuclear_norm, sqrtm_psd
from .errors import (InfeasibleError, ModelShapeError, OptimizerError,
                     RankError, SingularQFIMError)
from .model import Partition, as_weight, derivatives
from .nuisance import partial_fisher
from .qfisher import (commutation_operator, dual_operators, fisher_matrix,
                      rld, sld)

OPT_TOL = 1e-6
CLOSED_FORM_TOL = 1e-4
DINV_ORBIT_TOL = 1e-9
EPS_SCHEDULE = tuple(np.geomspace(1e-3, 1e-8, 6))
N_RANDOM_STARTS = 8


@dataclass(frozen=True)
class FunctionSpec:
    """Vector-valued function of the parameters to estimate.

    ``jacobian_fn(theta)`` returns the K x d matrix G of partial derivatives,
    which must have full row rank at the evaluation point.
    """

    k_outputs: int
    g_fn: callable
    jacobian_fn: callable

    def jacobian(self, theta, d):
        g = np.asarray(self.jacobian_fn(np.asarray(theta, dtype=float)), dtype=float)
        if g.shape != (self.k_outputs, d):
            raise RankError(f"jacobian has shape {g.shape}, expected ({self.k_outputs}, {d})")
        if self.k_outputs > d:
            raise RankError("the function cannot have more outputs than parameters")
        if np.linalg.matrix_rank(g, tol=1e-12) < self.k_outputs:
            raise RankError("function Jacobian does not have full row rank")
        return g


@dataclass
class BoundReport:
    """Named bound values at a point, with optimizer/conditioning diagnostics."""

    values: dict
    weight: np.ndarray
    partition: Partition
    point: np.ndarray
    diagnostics: dict = field(default_factory=dict)


def sld_cr(model, theta, partition, weight=None):
    """SLD Cramer-Rao bound Tr[W (J^S(I|N))^{-1}] for the interest block."""
    w = as_weight(weight, partition.d_interest)
    part = partial_fisher(fisher_matrix(sld(model, theta)), partition)
    return float(np.trace(w @ part.inverse()))


def rld_cr(model, theta, partition, weight=None):
    """RLD Cramer-Rao bound with the absolute-imaginary-part term."""
    w = as_weight(weight, partition.d_interest)
    part = partial_fisher(fisher_matrix(rld(model, theta)), partition)
    inv = part.inverse()
    wh = sqrtm_psd(w)
    return float(np.trace(w @ inv.real) + nuclear_norm(wh @ inv.imag @ wh))


def _min_dinvariant_basis(rho, lds_ops, cap):
    """Orthonormal basis of the minimal commutation-invariant span of the SLDs.

    Gram-Schmidt under the symmetric inner product; the first vectors span the
    logarithmic derivatives themselves, the remainder the free directions.
    """

    def sym_ip(a, b):
        return float(np.real(np.trace(rho @ a @ b)))

    basis = []

    def add(candidate):
        v = candidate.copy()
        for b in basis:
            v = v - sym_ip(b, v) * b
        norm = np.sqrt(max(sym_ip(v, v), 0.0))
        if norm < DINV_ORBIT_TOL:
            return False
        basis.append(v / norm)
        return True

    for op in lds_ops:
        add(op)
    n_span = len(basis)
    frontier = list(basis)
    while frontier and len(basis) < cap:
        nxt = []
        for b in frontier:
            image = commutation_operator(rho, b)
            if add(image):
                nxt.append(basis[-1])
        frontier = nxt
    return basis, n_span


def _holevo_objective_factory(z00, u, q, w):
    """Smoothed objective and gradient over the free coefficient matrix a.

    Z(a) = Z00 + U a^T + a conj(U)^T + a Q a^T; the nonsmooth nuclear-norm
    term uses sqrt(mu^2 + eps^2) on the eigenvalues of i W^{1/2} Im Z W^{1/2}.
    """
    k, m = u.shape
    wh = sqrtm_psd(w)

    def z_of(a):
        return z00 + u @ a.T + a @ u.conj().T + a @ q @ a.T

    def exact(a):
        z = z_of(a)
        kmat = wh @ z.imag @ wh
        return float(np.trace(w @ z.real) + nuclear_norm(kmat))

    def smoothed(avec, eps):
        a = avec.reshape(k, m)
        z = z_of(a)
        h = 1j * (wh @ z.imag @ wh)
        mu, vecs = np.linalg.eigh(h)
        val = float(np.trace(w @ z.real) + np.sum(np.sqrt(mu**2 + eps**2)))
        s = (vecs * (mu / np.sqrt(mu**2 + eps**2))) @ vecs.conj().T
        s_tilde = wh @ s @ wh
        alpha = u + a @ q
        grad = 2.0 * w @ alpha.real - 2.0 * s_tilde.imag @ alpha.imag
        return val, grad.ravel()

    return z_of, exact, smoothed


def _holevo_minimize(rho, x0_ops, free_basis, w, seed=0, threads=None):
    """Run the annealed multi-start minimization; returns (value, diagnostics)."""
    k = len(x0_ops)
    x0 = np.asarray(x0_ops)
    z00 = np.asarray(_kernels.pair_gram(x0, x0, rho))
    z00 = 0.5 * (z00 + z00.conj().T)
    if not free_basis:
        _, exact, _ = _holevo_objective_factory(
            z00, np.zeros((k, 0)), np.zeros((0, 0)), w)
        value = exact(np.zeros((k, 0)))
        return value, {"n_free": 0, "n_starts": 1, "start_spread": 0.0,
                       "iterations": 0}
    fmats = np.asarray(free_basis)
    u = np.asarray(_kernels.pair_gram(x0, fmats, rho))
    q = np.asarray(_kernels.pair_gram(fmats, fmats, rho))
    q = 0.5 * (q + q.conj().T)
    m = len(free_basis)
    _, exact, smoothed = _holevo_objective_factory(z00, u, q, w)

    rng = np.random.default_rng(seed)
    scale = np.sqrt(max(np.trace(w @ z00.real).real / k, 1e-3))
    starts = [np.zeros(k * m)]
    starts += [scale * rng.standard_normal(k * m) for _ in range(N_RANDOM_STARTS)]

    def run_start(a0):
        a = a0.copy()
        iters = 0
        for eps in EPS_SCHEDULE:
            res = scipy.optimize.minimize(
                smoothed, a, args=(eps,), jac=True, method="L-BFGS-B",
                options={"maxiter": 500, "ftol": 1e-14, "gtol": 1e-12})
            a = res.x
            iters += int(res.nit)
        return exact(a.reshape(k, m)), iters

    if threads is None:
        threads = _default_threads()
    results = []
    if threads > 1 and len(starts) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(run_start, starts))
    else:
        results = [run_start(a0) for a0 in starts]
    values = np.array([r[0] for r in results])
    if not np.all(np.isfinite(values)):
        raise OptimizerError("Holevo minimization diverged on all starts")
    best = int(np.argmin(values))
    diag = {
        "n_free": m,
        "n_starts": len(starts),
        "start_spread": float(values.max() - values.min()),
        "iterations": int(results[best][1]),
    }
    return float(values[best]), diag


def _default_threads():
    env = os.environ.get("QNUIS_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def holevo_numeric(model, theta, partition_or_function, weight=None, seed=0,
                   threads=None, return_diagnostics=False):
    """Holevo bound by numerical minimization over constrained Hermitian tuples.

    ``partition_or_function`` selects either the interest-block form (the
    constraint targets are Kronecker deltas against all parameter directions)
    or the vector-valued-function form (targets are the function Jacobian).
    """
    theta = np.asarray(theta, dtype=float)
    lds = sld(model, theta)
    rho = lds.rho
    qfim = fisher_matrix(lds)
    duals = dual_operators(lds, qfim)
    d = model.dim_param

    if isinstance(partition_or_function, FunctionSpec):
        g = partition_or_function.jacobian(theta, d)
        k = partition_or_function.k_outputs
        x0_ops = [sum(g[r, i] * duals[i] for i in range(d)) for r in range(k)]
        targets = g
    else:
        part = partition_or_function
        if part.d_total != d:
            raise InfeasibleError(
                f"partition dimension {part.d_total} does not match model ({d})")
        k = part.d_interest
        x0_ops = [duals[i] for i in range(k)]
        targets = np.eye(d)[:k]
    w = as_weight(weight, k)

    # sanity: the particular solution satisfies the linear constraints
    # tr[d_j rho X_i] = target_ij
    dmats = np.asarray(derivatives(model, theta, check_regularity=False))
    got = np.real(np.einsum("iab,jba->ij", np.asarray(x0_ops), dmats))
    if np.max(np.abs(got - targets)) > 1e-7:
        raise InfeasibleError("constraint residual of the particular solution too large")

    cap = model.dim_hilbert**2 - 1
    basis, n_span = _min_dinvariant_basis(rho, lds.operators, cap)
    free_basis = basis[n_span:]
    value, diag = _holevo_minimize(rho, x0_ops, free_basis, w,
                                   seed=seed, threads=threads)
    diag["orbit_dim"] = len(basis)
    if return_diagnostics:
        return value, diag
    return value


def holevo_qubit_closed(model, theta, weight=None):
    """Closed-form Holevo bound for two-parameter qubit models.

    Two branches, selected by the sign of a gap functional built from the SLD
    and RLD inverse Fisher matrices. Use
    :func:`holevo_qubit_closed_with_branch` to also get the branch taken.
    """
    value, _ = holevo_qubit_closed_with_branch(model, theta, weight)
    return value


def holevo_qubit_closed_with_branch(model, theta, weight=None):
    """Two-branch closed form from the SLD and RLD inverse Fisher matrices.

    With D = Tr[W((J^S)^{-1} - Re(J^R)^{-1})] >= 0 and T the trace norm of
    the weighted imaginary part of (J^R)^{-1}: the bound equals the RLD bound
    when T >= 2D and C^S + T^2/(4D) otherwise. The two branches agree on the
    boundary T = 2D, reduce to the RLD/SLD bounds in the commutation-invariant
    and asymptotically classical limits, and always dominate both.
    """
    if model.dim_hilbert != 2 or model.dim_param != 2:
        raise ModelShapeError(
            "the closed form applies to two-parameter qubit models only")
    w = as_weight(weight, 2)
    js_inv = inv_psd(fisher_matrix(sld(model, theta)).entries, "SLD QFIM")
    jr_inv = inv_psd(fisher_matrix(rld(model, theta)).entries, "RLD QFIM")
    wh = sqrtm_psd(w)
    gap = float(np.trace(w @ (js_inv - jr_inv.real)))
    imag_term = nuclear_norm(wh @ jr_inv.imag @ wh)
    if gap < -1e-10:
        raise SingularQFIMError(
            "Re (J^R)^{-1} exceeds (J^S)^{-1}; the model data are inconsistent")
    gap = max(gap, 0.0)
    c_sld = float(np.trace(w @ js_inv))
    if imag_term >= 2.0 * gap:
        value = float(np.trace(w @ jr_inv.real)) + imag_term
        branch = "rld"
    else:
        value = c_sld + 0.25 * imag_term**2 / gap
        branch = "interpolated"
    return value, branch


def nagaoka_gm(model, theta, partition, weight=None):
    """Nagaoka / Gill-Massar bound from the partial SLD Fisher matrix.

    (Tr[(W^{-1/2} J W^{-1/2})^{-1/2}])^2 / (d_H - 1) with J the partial SLD
    Fisher information of the interest block.
    """
    w = as_weight(weight, partition.d_interest)
    part = partial_fisher(fisher_matrix(sld(model, theta)), partition)
    wis = invsqrtm_pd(w, "weight matrix")
    inner = wis @ part.entries @ wis
    val = float(np.trace(invsqrtm_pd(inner, "weighted partial Fisher")))
    return val**2 / (model.dim_hilbert - 1)


def function_bounds(model, theta, fn, weight=None, kind="sld"):
    """SLD/RLD bound for estimating a vector-valued function of the parameters."""
    theta = np.asarray(theta, dtype=float)
    g = fn.jacobian(theta, model.dim_param)
    w = as_weight(weight, fn.k_outputs)
    if kind == "sld":
        jinv = inv_psd(fisher_matrix(sld(model, theta)).entries, "SLD QFIM")
        return float(np.trace(w @ g @ jinv @ g.T))
    if kind == "rld":
        jinv = inv_psd(fisher_matrix(rld(model, theta)).entries, "RLD QFIM")
        wh = sqrtm_psd(w)
        core = g @ jinv @ g.T
        return float(np.trace(w @ core.real) + nuclear_norm(wh @ core.imag @ wh))
    raise SingularQFIMError(f"unknown bound kind {kind!r}")


def generalized_cr(model, theta, bias_matrix, bias_vector, weight=None):
    """Biased-estimator bound Tr[W (B (J^S)^{-1} B^T + b b^T)]."""
    d = model.dim_param
    b_mat = np.asarray(bias_matrix, dtype=float)
    b_vec = np.asarray(bias_vector, dtype=float)
    if b_mat.shape != (d, d) or b_vec.shape != (d,):
        raise SingularQFIMError(
            f"bias matrix/vector shapes {b_mat.shape}, {b_vec.shape} do not match d={d}")
    w = as_weight(weight, d)
    jinv = inv_psd(fisher_matrix(sld(model, theta)).entries, "SLD QFIM")
    return float(np.trace(w @ (b_mat @ jinv @ b_mat.T + np.outer(b_vec, b_vec))))


KNOWN_BOUNDS = ("sld", "rld", "holevo", "nagaoka")


def bound_report(model, theta, partition, weight=None, bounds=KNOWN_BOUNDS,
                 seed=0, threads=None):
    """Evaluate the requested bounds and record ordering flags and diagnostics."""
    theta = np.asarray(theta, dtype=float)
    w = as_weight(weight, partition.d_interest)
    values, diagnostics = {}, {}
    for name in bounds:
        if name == "sld":
            values["sld"] = sld_cr(model, theta, partition, w)
        elif name == "rld":
            values["rld"] = rld_cr(model, theta, partition, w)
        elif name == "holevo":
            values["holevo"], hdiag = holevo_numeric(
                model, theta, partition, w, seed=seed, threads=threads,
                return_diagnostics=True)
            diagnostics.update({f"holevo_{k}": v for k, v in hdiag.items()})
            if model.dim_hilbert == 2 and model.dim_param == 2 and \
                    partition.d_interest == 2:
                closed, branch = holevo_qubit_closed_with_branch(model, theta, w)
                diagnostics["holevo_closed_gap"] = abs(closed - values["holevo"])
                diagnostics["holevo_closed_branch"] = branch
        elif name == "nagaoka":
            values["nagaoka"] = nagaoka_gm(model, theta, partition, w)
        else:
            raise SingularQFIMError(f"unknown bound name {name!r}")
    flags = {}
    if "sld" in values and "holevo" in values:
        flags["sld_le_holevo"] = values["sld"] <= values["holevo"] + OPT_TOL
        flags["holevo_le_2sld"] = values["holevo"] <= 2 * values["sld"] + OPT_TOL
    if "rld" in values and "holevo" in values:
        flags["rld_le_holevo"] = values["rld"] <= values["holevo"] + OPT_TOL
    diagnostics["ordering_flags"] = flags
    return BoundReport(values=values, weight=w, partition=partition,
                       point=theta, diagnostics=diagnostics)
