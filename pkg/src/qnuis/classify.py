"""Model-class detection at a point or on sampled grids.

Four nested classes are tested through operator residuals: invariance of the
(effective) SLD span under the commutation operator, vanishing mean
commutators, globally commuting SLDs, and full classicality. All predicates
work on the effective SLDs when a partition is given, so the flags do not
depend on how the nuisance parameters are parametrized.
"""

from dataclasses import dataclass, field

import numpy as np

from ._linalg import inv_psd
from .errors import ConsistencyError, DomainError
from .nuisance import _effective
from .qfisher import commutation_operator, fisher_matrix, rld, sld

CLASS_TOL = 1e-7


@dataclass
class ClassificationReport:
    """Flags with residual magnitudes; ``scope`` records how much was tested."""

    flags: dict
    residuals: dict
    scope: str
    points: list = field(default_factory=list)

    def __post_init__(self):
        if self.flags.get("classical") and not (
                self.flags.get("d_invariant", True)
                and self.flags.get("asymptotically_classical", True)):
            raise ConsistencyError(
                "a classical model must be D-invariant and asymptotically classical"
            )


def _interest_slds(model, theta, partition):
    lds = sld(model, theta)
    if partition is None or partition.d_nuisance == 0:
        return list(lds.operators), list(lds.operators), lds.rho
    eff, _ = _effective(lds, partition)
    return eff, list(lds.operators), lds.rho


def _sym_gram(rho, ops):
    g = np.array([[np.real(np.trace(rho @ a @ b)) for b in ops] for a in ops])
    return 0.5 * (g + g.T)


def is_d_invariant(model, theta, partition=None, class_tol=CLASS_TOL):
    """Commutation-operator images of the interest directions stay tangent.

    The effective interest operators are mapped through the commutation
    operator and projected onto the span of all logarithmic derivatives; the
    flag is true when every projection residual vanishes. (Projecting onto
    the full span, not the effective block alone, is what matches the
    bound-coincidence characterization: a tomographically complete family is
    invariant for every interest block even though the commutator images mix
    interest and nuisance directions.) Returns (flag, worst residual).
    """
    ops, full, rho = _interest_slds(model, theta, partition)
    gram = _sym_gram(rho, full)
    gram_inv = inv_psd(gram, "SLD span Gram matrix")
    worst = 0.0
    for l in ops:
        image = commutation_operator(rho, l)
        overlaps = np.array([np.real(np.trace(rho @ b @ image)) for b in full])
        proj = np.tensordot(gram_inv @ overlaps, np.asarray(full), axes=1)
        resid = image - proj
        num = np.sqrt(max(np.real(np.trace(rho @ resid @ resid)), 0.0))
        den = max(np.sqrt(np.real(np.trace(rho @ image @ image))), 1.0)
        worst = max(worst, num / den)
    return worst < class_tol, worst


def is_asymptotically_classical(model, theta, partition=None, class_tol=CLASS_TOL):
    """Mean commutators tr(rho [L_i, L_j]) all vanish.

    Cross-checked against the imaginary part of the Z-matrix of the dual
    effective operators; disagreement raises ConsistencyError.
    """
    ops, _, rho = _interest_slds(model, theta, partition)
    scale = max(1.0, max(np.linalg.norm(o) for o in ops) ** 2)
    worst = 0.0
    for i in range(len(ops)):
        for j in range(i + 1, len(ops)):
            val = abs(np.trace(rho @ (ops[i] @ ops[j] - ops[j] @ ops[i])))
            worst = max(worst, val / scale)
    flag = worst < class_tol

    # second route: Im Z of the dual (effective) operators
    gram = _sym_gram(rho, ops)
    duals = np.tensordot(inv_psd(gram, "Gram"), np.asarray(ops), axes=1)
    z = np.array([[np.trace(rho @ a @ b) for b in duals] for a in duals]).T
    zim = np.max(np.abs(z.imag)) / max(1.0, np.max(np.abs(z)))
    flag2 = zim < class_tol
    if flag != flag2:
        raise ConsistencyError(
            f"commutator ({worst:.2e}) and Im-Z ({zim:.2e}) routes disagree "
            "on asymptotic classicality"
        )
    return flag, worst


def is_quasi_classical(model, theta_grid, partition=None, class_tol=CLASS_TOL):
    """All pairwise (effective) SLD commutators vanish across the sampled grid.

    This is a necessary-condition check on finitely many points; the scope is
    recorded as "sampled-grid" and no global claim is made.
    """
    theta_grid = [np.asarray(t, dtype=float) for t in theta_grid]
    if len(theta_grid) < 2:
        raise DomainError("quasi-classicality needs a grid of at least 2 points")
    all_ops = []
    for t in theta_grid:
        ops, _, _ = _interest_slds(model, t, partition)
        all_ops.append(ops)
    scale = max(1.0, max(np.linalg.norm(o) for ops in all_ops for o in ops) ** 2)
    worst = 0.0
    for a in range(len(all_ops)):
        for b in range(a, len(all_ops)):
            for la in all_ops[a]:
                for lb in all_ops[b]:
                    worst = max(worst, np.linalg.norm(la @ lb - lb @ la) / scale)
    return worst < class_tol, worst


def is_classical(model, theta, class_tol=CLASS_TOL):
    """SLD and RLD Fisher matrices coincide at theta.

    Cross-checked against simultaneous diagonalizability of the state and all
    its derivatives (vanishing pairwise commutators).
    """
    theta = np.asarray(theta, dtype=float)
    js = fisher_matrix(sld(model, theta)).entries
    jr = fisher_matrix(rld(model, theta)).entries
    scale = max(1.0, np.max(np.abs(js)))
    gap = np.max(np.abs(js - jr)) / scale
    flag = gap < class_tol

    from .model import derivatives, evaluate
    rho = evaluate(model, theta)
    mats = [rho] + list(derivatives(model, theta, check_regularity=False))
    mscale = max(1.0, max(np.linalg.norm(m) for m in mats) ** 2)
    comm = max(
        np.linalg.norm(a @ b - b @ a) / mscale
        for i, a in enumerate(mats) for b in mats[i + 1:]
    )
    flag2 = comm < max(class_tol, 1e-9)
    if flag != flag2:
        raise ConsistencyError(
            f"Fisher-gap ({gap:.2e}) and commuting-family ({comm:.2e}) routes "
            "disagree on classicality"
        )
    return flag, gap


def classification_report(model, theta, partition=None, theta_grid=None,
                          class_tol=CLASS_TOL):
    """Evaluate all predicates at a point (and a grid, for quasi-classicality)."""
    theta = np.asarray(theta, dtype=float)
    flags, residuals = {}, {}
    flags["d_invariant"], residuals["d_invariant"] = is_d_invariant(
        model, theta, partition, class_tol)
    flags["asymptotically_classical"], residuals["asymptotically_classical"] = \
        is_asymptotically_classical(model, theta, partition, class_tol)
    flags["classical"], residuals["classical"] = is_classical(model, theta, class_tol)
    scope = "at-point"
    points = [theta.tolist()]
    if theta_grid is not None:
        flags["quasi_classical"], residuals["quasi_classical"] = is_quasi_classical(
            model, theta_grid, partition, class_tol)
        scope = "sampled-grid"
        points = [np.asarray(t).tolist() for t in theta_grid]
    return ClassificationReport(flags=flags, residuals=residuals,
                                scope=scope, points=points)
