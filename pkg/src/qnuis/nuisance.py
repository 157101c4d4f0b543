"""Partition-dependent machinery.

Partial Fisher information (Schur complements), effective logarithmic
derivatives, local orthogonalizing reparametrizations, the global
orthogonalization ODE for a single interest parameter, and information loss.
"""

from dataclasses import dataclass

import numpy as np

from ._linalg import COND_CAP, inv_psd
from .errors import ConsistencyError, DomainError, SingularQFIMError, StepError
from .model import Partition
from .qfisher import fisher_matrix, rld, sld

SCHUR_CHECK_TOL = 1e-9
LOSS_FLOOR = -1e-9
ODE_TOL = 1e-6


@dataclass(frozen=True)
class PartialFisher:
    """Fisher information for the interest block with nuisance parameters unknown."""

    kind: str
    entries: np.ndarray
    point: np.ndarray
    partition: object

    def inverse(self):
        return inv_psd(self.entries, f"partial {self.kind} Fisher matrix")


@dataclass(frozen=True)
class OrthoTransform:
    """Local orthogonalizing reparametrization around a reference point.

    ``jacobian`` is T with T[alpha, i] = d theta_i / d xi_alpha, block upper
    triangular with an identity interest block; the transformed Fisher matrix
    is T J T^T.
    """

    jacobian: np.ndarray
    new_point: np.ndarray
    reference_point: np.ndarray


def partial_fisher(qfim, partition):
    """Schur complement J_II - J_IN J_NN^{-1} J_NI of a QFIM.

    Cross-checked against the inverse-of-the-inverse-block identity.
    """
    j = qfim.entries
    if partition.d_total != j.shape[0]:
        raise SingularQFIMError(
            f"partition expects dimension {partition.d_total}, QFIM has {j.shape[0]}"
        )
    if partition.d_nuisance == 0:
        return PartialFisher(qfim.kind, j.copy(), qfim.point, partition)
    jii = j[partition.interest, partition.interest]
    jin = j[partition.interest, partition.nuisance]
    jnn = j[partition.nuisance, partition.nuisance]
    jnn_inv = inv_psd(jnn, "nuisance Fisher block")
    schur = jii - jin @ jnn_inv @ jin.conj().T
    schur = 0.5 * (schur + schur.conj().T)
    full_inv = inv_psd(j, "QFIM")
    alt = inv_psd(full_inv[partition.interest, partition.interest],
                  "interest block of the inverse QFIM")
    if np.max(np.abs(schur - alt)) > SCHUR_CHECK_TOL * max(1.0, np.max(np.abs(schur))):
        raise ConsistencyError(
            "Schur complement and inverse-block routes for the partial Fisher disagree"
        )
    return PartialFisher(qfim.kind, schur, qfim.point, partition)


def _effective(lds, partition, check_tol=1e-8):
    ops = np.asarray(lds.operators)
    qfim = fisher_matrix(lds)
    if partition.d_nuisance == 0:
        return list(lds.operators), partial_fisher(qfim, partition)
    j = qfim.entries
    jin = j[partition.interest, partition.nuisance]
    jnn_inv = inv_psd(j[partition.nuisance, partition.nuisance], "nuisance Fisher block")
    coeff = jin @ jnn_inv  # d_I x d_N
    if lds.kind == "rld":
        # sesquilinear product: the orthogonal projection conjugates the
        # coefficients, which also makes the Gram equal the Schur complement
        coeff = coeff.conj()
    nuis = ops[partition.nuisance]
    eff = [ops[i] - np.tensordot(coeff[i], nuis, axes=1)
           for i in range(partition.d_interest)]
    part = partial_fisher(qfim, partition)
    # Gram of the effective operators must reproduce the Schur complement
    rho = lds.rho
    if lds.kind == "sld":
        gram = np.real(np.asarray(
            [[np.trace(rho @ a @ b) for b in eff] for a in eff]))
        gram = 0.5 * (gram + gram.T)
    else:
        gram = np.asarray(
            [[np.trace(a.conj().T @ rho @ b) for b in eff] for a in eff])
        gram = 0.5 * (gram + gram.conj().T)
    if np.max(np.abs(gram - part.entries)) > SCHUR_CHECK_TOL * max(1.0, np.max(np.abs(gram))):
        raise ConsistencyError(
            f"effective {lds.kind} Gram matrix does not match the partial Fisher matrix"
        )
    # and each effective operator is orthogonal to every nuisance direction
    for i, a in enumerate(eff):
        for ln in nuis:
            if lds.kind == "sld":
                ip = abs(np.real(np.trace(rho @ a @ ln)))
            else:
                ip = abs(np.trace(ln.conj().T @ rho @ a))
            if ip > check_tol * max(1.0, np.max(np.abs(part.entries))):
                raise ConsistencyError(
                    f"effective operator {i} not orthogonal to the nuisance span"
                )
    return eff, part


def effective_slds(model, theta, partition):
    """Interest SLDs projected orthogonal to the nuisance SLD span."""
    eff, _ = _effective(sld(model, theta), partition)
    return eff


def effective_rlds(model, theta, partition):
    """Interest RLDs projected orthogonal to the nuisance RLD span."""
    eff, _ = _effective(rld(model, theta), partition)
    return eff


def partial_sld_fisher(model, theta, partition):
    """Partial SLD Fisher information J^S(I|N) at theta."""
    return partial_fisher(fisher_matrix(sld(model, theta)), partition)


def local_orthogonalize(qfim, partition, theta, theta0=None):
    """Nuisance reparametrization making the blocks orthogonal at theta0.

    xi_I = theta_I, xi_N = theta_N + J_NN(theta0)^{-1} J_NI(theta0)(theta_I -
    theta_I0), with ``qfim`` evaluated at theta0. Returns the transform with
    its Jacobian; the transformed matrix T J T^T has a vanishing
    interest-nuisance block at theta0. Real-symmetric kinds only.
    """
    if qfim.kind == "rld":
        raise DomainError(
            "local orthogonalization is defined for the real-symmetric kinds "
            "(sld, classical); a real reparametrization cannot zero a complex block"
        )
    theta = np.asarray(theta, dtype=float)
    theta0 = theta.copy() if theta0 is None else np.asarray(theta0, dtype=float)
    d, di = partition.d_total, partition.d_interest
    j = np.real(qfim.entries)
    if partition.d_nuisance == 0:
        return OrthoTransform(np.eye(d), theta.copy(), theta0)
    jnn_inv = inv_psd(j[partition.nuisance, partition.nuisance], "nuisance Fisher block")
    coeff = jnn_inv @ j[partition.nuisance, partition.interest]  # d_N x d_I
    xi = theta.copy()
    xi[partition.nuisance] = theta[partition.nuisance] + coeff @ (
        theta[:di] - theta0[:di])
    t = np.eye(d)
    t[partition.interest, partition.nuisance] = -coeff.T
    transformed = t @ j @ t.T
    off = np.max(np.abs(transformed[partition.interest, partition.nuisance]))
    if off > 1e-9 * max(1.0, np.max(np.abs(j))):
        raise ConsistencyError(
            f"transformed interest-nuisance block {off:.2e} did not vanish"
        )
    return OrthoTransform(t, xi, theta0)


def global_orthogonalize_ode(model, theta_start, xi1_grid, substeps=4,
                             ode_tol=ODE_TOL, cond_cap=COND_CAP):
    """Trajectory theta(xi_1) making a scalar interest parameter orthogonal.

    Integrates d theta_N / d xi_1 = -J^S_NN^{-1} J^S_N1 with fixed-step RK4
    (``substeps`` internal steps per grid interval). The gauge holds the
    nuisance coordinates at their start values on the reference slice.
    Returns (trajectory, residuals): trajectory[k] is theta at xi1_grid[k],
    residuals[k] the largest transformed interest-nuisance Fisher entry.
    """
    theta_start = np.asarray(theta_start, dtype=float)
    xi1_grid = np.asarray(xi1_grid, dtype=float)
    if xi1_grid.ndim != 1 or len(xi1_grid) < 2:
        raise DomainError("xi1_grid must contain at least two points")
    if abs(theta_start[0] - xi1_grid[0]) > 1e-12:
        raise DomainError("theta_start[0] must equal the first grid value")
    d = model.dim_param

    def rhs(theta):
        if not model.contains(theta):
            raise StepError(f"trajectory left the domain at {theta.tolist()}")
        try:
            j = fisher_matrix(sld(model, theta)).entries
        except Exception as exc:
            raise StepError(f"Fisher evaluation failed along the trajectory: {exc}")
        jnn = j[1:, 1:]
        w = np.linalg.eigvalsh(jnn)
        if w.min() <= 0 or w.max() / w.min() > cond_cap:
            raise StepError("nuisance Fisher block became ill-conditioned")
        vel = np.empty(d)
        vel[0] = 1.0
        vel[1:] = -np.linalg.solve(jnn, j[1:, 0])
        return vel, j

    trajectory = [theta_start.copy()]
    residuals = []

    def ortho_residual(theta):
        vel, j = rhs(theta)
        # first row of the transformed Fisher matrix beyond the interest block
        row = j[0] + vel[1:] @ j[1:]
        res = float(np.max(np.abs(row[1:]))) if d > 1 else 0.0
        if res > ode_tol:
            raise ConsistencyError(
                f"orthogonality residual {res:.2e} exceeds {ode_tol:g}"
            )
        return res

    residuals.append(ortho_residual(theta_start))
    theta = theta_start.copy()
    for k in range(len(xi1_grid) - 1):
        h_total = xi1_grid[k + 1] - xi1_grid[k]
        h = h_total / substeps
        for _ in range(substeps):
            k1, _ = rhs(theta)
            k2, _ = rhs(theta + 0.5 * h * k1)
            k3, _ = rhs(theta + 0.5 * h * k2)
            k4, _ = rhs(theta + h * k3)
            theta = theta + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        theta[0] = xi1_grid[k + 1]  # interest coordinate is the flow variable
        trajectory.append(theta.copy())
        residuals.append(ortho_residual(theta))
    return np.asarray(trajectory), np.asarray(residuals)


def information_loss(model, theta, partition, weight=None, bound_kind="sld"):
    """Bound difference between the full model and the nuisance-known submodel.

    For ``bound_kind="sld"`` this is Tr[W (J^S(I|N))^{-1}] - Tr[W (J^S_II)^{-1}];
    for ``bound_kind="holevo"`` the corresponding difference of Holevo bounds.
    Tiny negative values (> -1e-9) are clamped to zero.
    """
    from .bounds import holevo_numeric, holevo_qubit_closed, sld_cr
    from .model import as_weight

    w = as_weight(weight, partition.d_interest)
    theta = np.asarray(theta, dtype=float)
    if bound_kind == "sld":
        full = sld_cr(model, theta, partition, w)
        qfim = fisher_matrix(sld(model, theta))
        jii = qfim.entries[partition.interest, partition.interest]
        sub = float(np.trace(w @ inv_psd(jii, "interest Fisher block")))
    elif bound_kind == "holevo":
        full = holevo_numeric(model, theta, partition, w)
        sub_model = _fixed_nuisance_submodel(model, theta, partition)
        sub_theta = theta[partition.interest]
        if sub_model.dim_hilbert == 2 and sub_model.dim_param == 2:
            sub = holevo_qubit_closed(sub_model, sub_theta, w)
        else:
            sub = holevo_numeric(
                sub_model, sub_theta,
                Partition(partition.d_interest, partition.d_interest), w)
    else:
        raise DomainError(f"unknown bound_kind {bound_kind!r}")
    delta = full - sub
    if delta < LOSS_FLOOR:
        raise ConsistencyError(
            f"information loss {delta:.3e} is negative beyond tolerance"
        )
    return max(delta, 0.0)


def _fixed_nuisance_submodel(model, theta, partition):
    """Interest-only model with the nuisance coordinates frozen at theta_N."""
    from .model import StateModel

    theta = np.asarray(theta, dtype=float)
    di = partition.d_interest
    frozen = theta[partition.nuisance].copy()

    def embed(theta_i):
        return np.concatenate([np.asarray(theta_i, dtype=float), frozen])

    deriv = None
    if model.deriv_fn is not None:
        deriv = lambda th, i: model.deriv_fn(embed(th), i)
    return StateModel(
        dim_hilbert=model.dim_hilbert,
        dim_param=di,
        state_fn=lambda th: model.state_fn(embed(th)),
        deriv_fn=deriv,
        fd_step=model.fd_step,
        param_domain=model.param_domain[:di],
        labels=model.labels[:di],
        name=model.name + "-submodel",
    )
