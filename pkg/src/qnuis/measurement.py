"""POVMs, induced classical models, optimal measurements, and simulation.

The Monte-Carlo driver supports the repetitive strategy (fixed POVM, locally
unbiased or maximum-likelihood post-processing) and the two-step adaptive
strategy (informationally complete first stage, tentative estimate, then the
optimal scalar-interest measurement on the remaining copies). Trials own
counter-based RNG streams keyed by (seed, trial), so results are reproducible
and independent of scheduling.
"""

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import _kernels, classical
from ._linalg import hermitize, inv_psd, min_eig_herm
from .errors import (ConfigError, ConsistencyError, InvalidPOVMError,
                     RankError, SingularOutcomeError)
from .model import PAULIS, Partition, derivatives, evaluate
from .qfisher import dual_operators, fisher_matrix, sld

PSD_TOL = -1e-10
COMPLETENESS_TOL = 1e-10
PROB_FLOOR = 1e-12
EIG_MERGE_GAP = 1e-10
LU_CHECK_TOL = 1e-8


@dataclass(frozen=True)
class POVM:
    """Finite positive operator-valued measure."""

    effects: tuple
    labels: tuple = None

    def __post_init__(self):
        effects = tuple(np.asarray(e, dtype=complex) for e in self.effects)
        if not effects:
            raise InvalidPOVMError("a POVM needs at least one effect")
        n = effects[0].shape[0]
        total = np.zeros((n, n), dtype=complex)
        for i, e in enumerate(effects):
            if e.shape != (n, n):
                raise InvalidPOVMError(f"effect {i} has inconsistent shape {e.shape}")
            if min_eig_herm(e) < PSD_TOL:
                raise InvalidPOVMError(f"effect {i} is not positive semidefinite")
            total = total + e
        if np.max(np.abs(total - np.eye(n))) > COMPLETENESS_TOL:
            raise InvalidPOVMError("effects do not sum to the identity")
        object.__setattr__(self, "effects", effects)
        labels = self.labels or tuple(str(i) for i in range(len(effects)))
        object.__setattr__(self, "labels", tuple(labels))

    @property
    def n_outcomes(self):
        return len(self.effects)

    @property
    def dim(self):
        return self.effects[0].shape[0]


@dataclass
class SimulationResult:
    """Empirical interest-block MSE of a simulated estimation strategy."""

    strategy: str
    n_copies: int
    n_trials: int
    seed: int
    empirical_mse: np.ndarray
    scaled_mse: np.ndarray
    bound_value: float
    bias_estimate: np.ndarray
    estimates: np.ndarray = None
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.n_trials < 2:
            raise ConfigError("n_trials must be at least 2")
        if min_eig_herm(np.atleast_2d(self.empirical_mse)) < -1e-12:
            raise ConsistencyError("empirical MSE matrix is not PSD")

    def to_payload(self):
        payload = {
            "strategy": self.strategy,
            "n_copies": self.n_copies,
            "n_trials": self.n_trials,
            "seed": self.seed,
            "empirical_mse": np.atleast_2d(self.empirical_mse).tolist(),
            "scaled_mse": np.atleast_2d(self.scaled_mse).tolist(),
            "scaled_mse_trace": float(np.trace(np.atleast_2d(self.scaled_mse))),
            "bound_value": self.bound_value,
            "bias_estimate": np.atleast_1d(self.bias_estimate).tolist(),
        }
        payload.update(self.diagnostics)
        return payload

    def to_json(self):
        return json.dumps(self.to_payload(), sort_keys=True)

    def to_csv(self, per_trial=False):
        if per_trial:
            if self.estimates is None:
                raise ConfigError("per-trial estimates were not recorded")
            header = "trial," + ",".join(
                f"theta{i + 1}" for i in range(self.estimates.shape[1]))
            rows = [f"{t},{','.join(repr(float(v)) for v in row)}"
                    for t, row in enumerate(self.estimates)]
            return "\n".join([header] + rows) + "\n"
        header = "strategy,n_copies,n_trials,seed,scaled_mse_trace,bound_value"
        row = (f"{self.strategy},{self.n_copies},{self.n_trials},{self.seed},"
               f"{float(np.trace(np.atleast_2d(self.scaled_mse)))!r},"
               f"{self.bound_value!r}")
        return "\n".join([header, row]) + "\n"


def born_distribution(rho, povm):
    """Outcome probabilities tr[rho Pi_x]; validated nonnegative, summing to 1."""
    rho = np.asarray(rho, dtype=complex)
    if rho.shape != (povm.dim, povm.dim):
        raise InvalidPOVMError(
            f"state dimension {rho.shape[0]} != POVM dimension {povm.dim}")
    p = np.asarray(_kernels.born_probs(np.asarray(povm.effects), rho))
    if p.min() < -1e-12:
        raise InvalidPOVMError(f"negative outcome probability {p.min():.2e}")
    if abs(p.sum() - 1.0) > 1e-10:
        raise InvalidPOVMError("outcome probabilities do not sum to 1")
    return np.clip(p, 0.0, None)


def classical_fisher_of_povm(model, theta, povm, prob_floor=PROB_FLOOR):
    """Fisher information of the outcome distribution of a POVM.

    Outcomes below ``prob_floor`` are dropped when they carry no derivative
    weight and rejected otherwise. The result is checked against the SLD
    matrix bound J[Pi] <= J^S.
    """
    theta = np.asarray(theta, dtype=float)
    rho = evaluate(model, theta)
    mats = derivatives(model, theta, check_regularity=False)
    p = born_distribution(rho, povm)
    effects = np.asarray(povm.effects)
    dp = np.stack(
        [np.real(np.einsum("ab,xba->x", m, effects)) for m in mats], axis=1)
    keep = p > prob_floor
    if not np.all(keep):
        bad = np.abs(dp[~keep]).max() if (~keep).any() else 0.0
        if bad > prob_floor:
            raise SingularOutcomeError(
                "an outcome below the probability floor carries derivative weight")
    j = _kernels.cfim_from_table(p[keep], dp[keep])
    j = 0.5 * (np.asarray(j) + np.asarray(j).T)
    js = fisher_matrix(sld(model, theta)).entries
    if np.linalg.eigvalsh(js - j).min() < -1e-8:
        raise ConsistencyError("measurement Fisher matrix exceeds the SLD matrix")
    from .qfisher import QFIM
    return QFIM("classical", j, theta)


def _merge_spectral_projectors(op, gap=EIG_MERGE_GAP):
    """Spectral PVM of a Hermitian operator, merging near-degenerate eigenspaces."""
    w, v = np.linalg.eigh(hermitize(op))
    groups = []
    start = 0
    for i in range(1, len(w) + 1):
        if i == len(w) or w[i] - w[i - 1] > gap:
            groups.append((start, i))
            start = i
    projectors, values = [], []
    for a, b in groups:
        block = v[:, a:b]
        projectors.append(block @ block.conj().T)
        values.append(float(np.mean(w[a:b])))
    return projectors, values


def optimal_pvm_scalar(model, theta, partition):
    """Optimal projection measurement and estimator for a scalar interest parameter.

    The PVM diagonalizes the dual operator of the first coordinate; the
    estimator adds the dual eigenvalue to theta_1, which is locally unbiased
    with single-copy variance equal to the scalar interest bound. Local
    unbiasedness is verified by finite differences in every parameter
    direction before returning.
    """
    if partition.d_interest != 1:
        raise ConfigError("optimal_pvm_scalar requires a scalar interest block")
    theta = np.asarray(theta, dtype=float)
    lds = sld(model, theta)
    qfim = fisher_matrix(lds)
    duals = dual_operators(lds, qfim)
    dual1 = duals[0]
    projectors, values = _merge_spectral_projectors(dual1)
    povm = POVM(tuple(projectors))
    estimates = np.array([theta[0] + lam for lam in values])
    variance = float(qfim.inverse()[0, 0])

    # verify the two locally unbiased conditions numerically
    h = model.fd_step
    p0 = born_distribution(lds.rho, povm)
    mean0 = float(estimates @ p0)
    if abs(mean0 - theta[0]) > LU_CHECK_TOL:
        raise ConsistencyError(f"estimator mean off by {mean0 - theta[0]:.2e}")
    for j in range(model.dim_param):
        step = np.zeros(model.dim_param)
        step[j] = h
        pp = born_distribution(evaluate(model, theta + step), povm)
        pm = born_distribution(evaluate(model, theta - step), povm)
        slope = float(estimates @ (pp - pm)) / (2 * h)
        target = 1.0 if j == 0 else 0.0
        if abs(slope - target) > max(LU_CHECK_TOL, 50 * h**2):
            raise ConsistencyError(
                f"local unbiasedness failed in direction {j}: slope {slope:.6f}")
    single_copy_var = float(((estimates - theta[0]) ** 2) @ p0)
    if abs(single_copy_var - variance) > 1e-8 * max(1.0, variance):
        raise ConsistencyError("single-copy variance does not match the bound")
    return povm, estimates


def _pinv_cut(a, scale):
    """Symmetric pseudo-inverse with an absolute eigenvalue cutoff.

    The cutoff is relative to ``scale`` (the norm of the full Fisher matrix),
    not to the block itself: a nuisance block that is exactly zero for the
    measurement at hand must invert to zero, not to 1/rounding-noise.
    """
    a = 0.5 * (np.asarray(a, dtype=float) + np.asarray(a, dtype=float).T)
    w, v = np.linalg.eigh(a)
    cut = classical.PINV_CUTOFF * max(scale, 1.0)
    winv = np.where(np.abs(w) > cut, 1.0 / np.where(np.abs(w) > cut, w, 1.0), 0.0)
    return (v * winv) @ v.T


def partial_measurement_fisher(model, theta, povm, partition):
    """Generalized-inverse Schur complement of the measurement Fisher matrix.

    Returns (partial, m_star): the interest-block information with the
    nuisance scores projected out, and the optimal projection coefficients.
    Tolerates linearly dependent (or vanishing) nuisance scores.
    """
    induced = classical.induced_model(model, povm)
    p = classical.probabilities(induced, theta)
    dp = classical.prob_derivatives(induced, theta)
    j = np.asarray(_kernels.cfim_from_table(p, dp))
    j = 0.5 * (j + j.T)
    if partition.d_nuisance == 0:
        return j, np.zeros((partition.d_interest, 0))
    scale = float(np.abs(j).max())
    jnn_inv = _pinv_cut(j[partition.nuisance, partition.nuisance], scale)
    m_star = j[partition.interest, partition.nuisance] @ jnn_inv
    part = j[partition.interest, partition.interest] - \
        j[partition.interest, partition.nuisance] @ jnn_inv @ \
        j[partition.nuisance, partition.interest]
    return 0.5 * (part + part.T), m_star


def locally_unbiased_estimator(model, theta, povm, partition):
    """Outcome table of locally unbiased estimates for the interest block.

    theta_hat_i(x) = theta_i + sum_j ((J(I|N)[Pi])^{-1})_{ji} u_j(x|M*), with
    the effective scores of the induced classical model and a generalized
    inverse on the nuisance block when its scores are dependent.
    """
    theta = np.asarray(theta, dtype=float)
    induced = classical.induced_model(model, povm)
    p = classical.probabilities(induced, theta)
    if p.min() <= PROB_FLOOR:
        raise SingularOutcomeError("an outcome probability is below the floor")
    u = classical.score(induced, theta)
    di = partition.d_interest
    part, m_star = partial_measurement_fisher(model, theta, povm, partition)
    if partition.d_nuisance:
        ueff = u[:, :di] - u[:, partition.nuisance] @ m_star.T
    else:
        ueff = u[:, :di]
    if np.linalg.matrix_rank(part, tol=1e-12) < di:
        raise RankError("partial measurement Fisher matrix is rank deficient")
    part_inv = inv_psd(part, "partial measurement Fisher matrix")
    table = theta[:di][None, :] + ueff @ part_inv.T

    # both locally unbiased conditions, checked analytically from the tables
    dp = classical.prob_derivatives(induced, theta)
    mean = p @ table
    if np.max(np.abs(mean - theta[:di])) > LU_CHECK_TOL:
        raise ConsistencyError("estimator mean is biased")
    slope = dp.T @ (table - theta[:di][None, :])  # d x d_I
    target = np.zeros((model.dim_param, di))
    target[:di, :] = np.eye(di)
    if np.max(np.abs(slope - target)) > LU_CHECK_TOL:
        raise ConsistencyError("estimator derivative condition failed")
    return table


def pauli_six_outcome():
    """Six-outcome qubit POVM mixing the three Pauli bases with weight 1/3."""
    effects = []
    for sigma in PAULIS:
        effects.append((np.eye(2) + sigma) / 6.0)
        effects.append((np.eye(2) - sigma) / 6.0)
    return POVM(tuple(effects))


def random_basis_ic_povm(dim, n_bases=None, seed=12345):
    """Informationally complete POVM from several random orthonormal bases.

    Deterministic for a fixed seed; used as the default first stage for
    qudits.
    """
    n_bases = n_bases or (dim + 1)
    rng = np.random.default_rng(np.random.Philox(key=np.array(
        [seed, 0x9E3779B97F4A7C15], dtype=np.uint64)))
    effects = []
    for _ in range(n_bases):
        g = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
        qmat, _ = np.linalg.qr(g)
        for col in range(dim):
            v = qmat[:, col:col + 1]
            effects.append((v @ v.conj().T) / n_bases)
    return POVM(tuple(effects))


def default_ic_povm(dim):
    return pauli_six_outcome() if dim == 2 else random_basis_ic_povm(dim)


def _trial_rng(seed, trial):
    return np.random.default_rng(
        np.random.Philox(key=np.array([seed, trial], dtype=np.uint64)))


FIRST_STAGE_EXPONENT = 2.0 / 3.0


def simulate(model, theta_true, strategy, povm=None, n_copies=10000,
             n_trials=200, seed=0, partition=None, estimator="lu",
             threads=None, first_stage_exponent=FIRST_STAGE_EXPONENT,
             keep_estimates=False):
    """Monte-Carlo estimate of the interest-block MSE of a strategy.

    ``strategy`` is "repetitive" (fixed ``povm``; locally unbiased or "mle"
    post-processing) or "two-step" (informationally complete first stage of
    ceil(n^first_stage_exponent) copies, maximum-likelihood tentative
    estimate, optimal scalar-interest PVM on the rest, estimates combined by
    Fisher weight). Trials use independent counter-based RNG streams.
    """
    theta_true = np.asarray(theta_true, dtype=float)
    if partition is None:
        partition = Partition(1, model.dim_param)
    if n_trials < 2:
        raise ConfigError("need at least 2 trials")
    if n_copies < 10:
        raise ConfigError("need at least 10 copies")
    if strategy not in ("repetitive", "two-step"):
        raise ConfigError(f"unknown strategy {strategy!r}")
    if strategy == "two-step" and partition.d_interest != 1:
        raise ConfigError("the two-step strategy estimates a scalar interest block")
    if threads is None:
        threads = _max_threads()
    di = partition.d_interest

    if strategy == "repetitive":
        if povm is None:
            raise ConfigError("the repetitive strategy needs a POVM")
        estimates, bound = _run_repetitive(
            model, theta_true, povm, partition, n_copies, n_trials, seed,
            estimator, threads)
    else:
        estimates, bound = _run_two_step(
            model, theta_true, povm, partition, n_copies, n_trials, seed,
            threads, first_stage_exponent)

    err = estimates - theta_true[:di][None, :]
    mse = err.T @ err / n_trials
    return SimulationResult(
        strategy=strategy,
        n_copies=n_copies,
        n_trials=n_trials,
        seed=seed,
        empirical_mse=mse,
        scaled_mse=n_copies * mse,
        bound_value=bound,
        bias_estimate=err.mean(axis=0),
        estimates=estimates if keep_estimates else None,
    )


def _max_threads():
    import os
    env = os.environ.get("QNUIS_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def _parallel_trials(worker, n_trials, threads):
    out = [None] * n_trials
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            for t, val in zip(range(n_trials), pool.map(worker, range(n_trials))):
                out[t] = val
    else:
        for t in range(n_trials):
            out[t] = worker(t)
    return np.asarray(out)


def _run_repetitive(model, theta_true, povm, partition, n_copies, n_trials,
                    seed, estimator, threads):
    rho = evaluate(model, theta_true)
    p = born_distribution(rho, povm)
    di = partition.d_interest
    part, _ = partial_measurement_fisher(model, theta_true, povm, partition)
    bound = float(np.trace(inv_psd(part, "partial measurement Fisher matrix")))

    if estimator == "lu":
        table = locally_unbiased_estimator(model, theta_true, povm, partition)

        def worker(trial):
            counts = _trial_rng(seed, trial).multinomial(n_copies, p)
            return (counts @ table) / n_copies

    elif estimator == "mle":
        induced = classical.induced_model(model, povm)

        def worker(trial):
            counts = _trial_rng(seed, trial).multinomial(n_copies, p)
            fit = classical.mle(induced, counts, theta_true)
            return fit[:di]

    else:
        raise ConfigError(f"unknown estimator {estimator!r}")
    return _parallel_trials(worker, n_trials, threads), bound


def _run_two_step(model, theta_true, first_povm, partition, n_copies,
                  n_trials, seed, threads, exponent):
    rho = evaluate(model, theta_true)
    first = first_povm or default_ic_povm(model.dim_hilbert)
    p1 = born_distribution(rho, first)
    induced = classical.induced_model(model, first)
    n1 = int(np.ceil(n_copies**exponent))
    n2 = n_copies - n1
    if n2 <= 0:
        raise ConfigError("first stage consumed every copy; lower the exponent")
    qfim_true = fisher_matrix(sld(model, theta_true))
    bound = float(qfim_true.inverse()[0, 0])

    def stage_two(point):
        povm2, table2 = optimal_pvm_scalar(model, point, partition)
        part, _ = partial_measurement_fisher(model, point, first, partition)
        var1 = float(inv_psd(part, "stage-1 partial Fisher")[0, 0])
        var2 = float(fisher_matrix(sld(model, point)).inverse()[0, 0])
        return povm2, table2, var1, var2

    def worker(trial):
        rng = _trial_rng(seed, trial)
        counts1 = rng.multinomial(n1, p1)
        try:
            tentative = classical.mle(induced, counts1, theta_true)
            povm2, table2, var1, var2 = stage_two(tentative)
        except Exception:
            # ill-behaved tentative estimate; fall back to the reference point
            tentative = theta_true.copy()
            povm2, table2, var1, var2 = stage_two(tentative)
        p2 = born_distribution(rho, povm2)
        counts2 = rng.multinomial(n2, p2)
        est2 = float(counts2 @ table2) / n2
        # Fisher-weighted combination of the two stages
        w1 = n1 / var1
        w2 = n2 / var2
        return [(w1 * tentative[0] + w2 * est2) / (w1 + w2)]

    return _parallel_trials(worker, n_trials, threads), bound


def pvm_theta_independence_check(model, theta_grid, partition, tol=1e-8):
    """Whether the optimal scalar-interest PVM is the same across the grid.

    True iff the projector sets coincide after greedy matching (Frobenius
    distance below ``tol``) and the interest row of the SLD Fisher matrix is
    orthogonal to the nuisance block at every grid point, in which case the
    repetitive strategy attains the scalar bound.
    """
    theta_grid = [np.asarray(t, dtype=float) for t in theta_grid]
    if len(theta_grid) < 2:
        raise ConfigError("need at least two grid points")
    reference = None
    for theta in theta_grid:
        povm, _ = optimal_pvm_scalar(model, theta, partition)
        projs = [np.asarray(e) for e in povm.effects]
        if reference is None:
            reference = projs
        else:
            if len(projs) != len(reference) or not _match_projectors(
                    reference, projs, tol):
                return False
        if partition.d_nuisance:
            j = fisher_matrix(sld(model, theta)).entries
            if np.max(np.abs(j[0, partition.nuisance])) > max(
                    tol, 1e-8 * np.max(np.abs(j))):
                return False
    return True


def _match_projectors(ref, projs, tol):
    remaining = list(projs)
    for r in ref:
        dists = [np.linalg.norm(r - q) for q in remaining]
        best = int(np.argmin(dists))
        if dists[best] > tol:
            return False
        remaining.pop(best)
    return True
