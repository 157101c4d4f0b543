import numpy as np
import pytest

from qnuis import classical
from qnuis.errors import ConfigError, ConvergenceError, RegularityError
from qnuis.measurement import POVM, classical_fisher_of_povm
from qnuis.model import Partition, zoo_build

DICE_POINT = np.array([0.2, 0.3])


def test_dice_scores():
    model = classical.dice_model()
    u = classical.score(model, DICE_POINT)
    assert np.allclose(u[:, 0], [5.0, 0.0, -2.0], atol=1e-12)
    assert np.allclose(u[:, 1], [0.0, 1 / 0.3, -2.0], atol=1e-12)
    p = classical.probabilities(model, DICE_POINT)
    assert np.abs(p @ u).max() < 1e-10  # centered


def test_uniform_shift_model_scores_centered():
    # three outcomes with a mean-shift parametrization around the uniform die
    def prob_fn(theta):
        return np.array([1 / 3 + theta[0], 1 / 3 - 2 * theta[0], 1 / 3 + theta[0]])

    model = classical.ClassicalModel(3, 1, prob_fn,
                                     lambda th: np.array([[1.0], [-2.0], [1.0]]),
                                     param_domain=((-0.15, 0.15),))
    u = classical.score(model, np.array([0.05]))
    p = classical.probabilities(model, np.array([0.05]))
    assert abs(p @ u[:, 0]) < 1e-12


def test_povm_induced_scores_match_trace_formula():
    qmodel = zoo_build("qubit-clock")
    theta = np.array([1.0, 0.1])
    povm = POVM((np.array([[0.5, 0.5], [0.5, 0.5]]),
                 np.array([[0.5, -0.5], [-0.5, 0.5]])))
    induced = classical.induced_model(qmodel, povm)
    u = classical.score(induced, theta)
    from qnuis.model import derivatives, evaluate
    rho = evaluate(qmodel, theta)
    mats = derivatives(qmodel, theta)
    p = classical.probabilities(induced, theta)
    for x, eff in enumerate(povm.effects):
        for i in range(2):
            want = np.trace(mats[i] @ eff).real / p[x]
            assert abs(u[x, i] - want) < 1e-12


def test_dice_fisher_matrix_and_inverse():
    model = classical.dice_model()
    j = classical.fisher_matrix(model, DICE_POINT)
    t1, t2 = DICE_POINT
    t3 = 1 - t1 - t2
    expected = np.array([[t2 * (1 - t2), t1 * t2],
                         [t1 * t2, t1 * (1 - t1)]]) / (t1 * t2 * t3)
    assert np.abs(j - expected).max() < 1e-10
    inv = np.linalg.inv(j)
    expected_inv = np.array([[t1 * (1 - t1), -t1 * t2],
                             [-t1 * t2, t2 * (1 - t2)]])
    assert np.abs(inv - expected_inv).max() < 1e-10


def test_degenerate_model_raises_regularity():
    def prob_fn(theta):
        return np.array([0.5, 0.5])

    model = classical.ClassicalModel(2, 1, prob_fn,
                                     lambda th: np.zeros((2, 1)),
                                     param_domain=((-1.0, 1.0),))
    with pytest.raises(RegularityError):
        classical.fisher_matrix(model, np.array([0.0]))


def test_effective_score_zero_projection_is_plain_interest():
    model = classical.dice_model()
    part = Partition(1, 2)
    u = classical.score(model, DICE_POINT)
    eff = classical.effective_score(model, DICE_POINT, part,
                                    np.zeros((1, 1)))
    assert np.allclose(eff[:, 0], u[:, 0])


def test_effective_score_optimal_gram_is_partial_fisher():
    model = classical.dice_model()
    part = Partition(1, 2)
    eff = classical.effective_score(model, DICE_POINT, part)
    p = classical.probabilities(model, DICE_POINT)
    gram = float(p @ eff[:, 0] ** 2)
    assert abs(gram - 6.25) < 1e-10


def test_effective_score_minimization_property(rng):
    model = classical.dice_model()
    part = Partition(1, 2)
    p = classical.probabilities(model, DICE_POINT)
    j = classical.fisher_matrix(model, DICE_POINT)
    m_star = j[0, 1] / j[1, 1]
    best = float(p @ classical.effective_score(model, DICE_POINT, part)[:, 0] ** 2)
    for _ in range(20):
        m = m_star + rng.standard_normal()
        gram = float(p @ classical.effective_score(
            model, DICE_POINT, part, np.array([[m]]))[:, 0] ** 2)
        assert gram >= best - 1e-9


def test_mle_multinomial_closed_form():
    model = classical.dice_model()
    counts = np.array([20.0, 30.0, 50.0])
    fit = classical.mle(model, counts, np.array([0.3, 0.35]))
    assert np.abs(fit - [0.2, 0.3]).max() < 1e-9


def test_mle_orthogonalized_parametrization_decouples():
    # reparametrize so the interest coordinate separates: theta2 = (1-xi1)*xi2
    def prob_fn(xi):
        t1 = xi[0]
        t2 = (1 - xi[0]) * xi[1]
        return np.array([t1, t2, 1 - t1 - t2])

    def deriv_fn(xi):
        return np.array([[1.0, 0.0],
                         [-xi[1], 1 - xi[0]],
                         [xi[1] - 1.0, -(1 - xi[0])]])

    model = classical.ClassicalModel(3, 2, prob_fn, deriv_fn,
                                     param_domain=((0.0, 1.0), (0.0, 1.0)))
    counts = np.array([20.0, 30.0, 50.0])
    fit = classical.mle(model, counts, np.array([0.4, 0.4]))
    assert abs(fit[0] - 0.2) < 1e-9  # same interest estimate as the plain fit
    # the likelihood in xi1 decouples: the MLE equals the count frequency
    assert abs(fit[1] - 30.0 / 80.0) < 1e-9


def test_mle_boundary_sample_fails_cleanly():
    model = classical.dice_model()
    with pytest.raises(ConvergenceError):
        classical.mle(model, np.array([100.0, 0.0, 0.0]), np.array([0.4, 0.3]),
                      max_iter=60)


def test_mle_rejects_bad_counts():
    model = classical.dice_model()
    with pytest.raises(ConfigError):
        classical.mle(model, np.array([1.0, -2.0, 3.0]), DICE_POINT)


def test_cr_bounds_dice_values():
    model = classical.dice_model()
    out = classical.cr_bounds(model, DICE_POINT, Partition(1, 2))
    assert abs(out["nuisance_known"] - 1.0 / 7.0) < 1e-9
    assert abs(out["nuisance_unknown"] - 0.16) < 1e-9
    assert abs(out["information_loss"] - 0.012 / 0.7) < 1e-9


def test_cr_bounds_orthogonal_parametrization_coincide():
    def prob_fn(xi):
        t1 = xi[0]
        t2 = (1 - xi[0]) * xi[1]
        return np.array([t1, t2, 1 - t1 - t2])

    def deriv_fn(xi):
        return np.array([[1.0, 0.0],
                         [-xi[1], 1 - xi[0]],
                         [xi[1] - 1.0, -(1 - xi[0])]])

    model = classical.ClassicalModel(3, 2, prob_fn, deriv_fn,
                                     param_domain=((0.0, 1.0), (0.0, 1.0)))
    xi = np.array([0.2, 0.3 / 0.8])
    out = classical.cr_bounds(model, xi, Partition(1, 2))
    assert abs(out["nuisance_known"] - out["nuisance_unknown"]) < 1e-12
    assert abs(out["nuisance_known"] - 0.16) < 1e-10


def test_cr_bounds_full_partition():
    model = classical.dice_model()
    out = classical.cr_bounds(model, DICE_POINT, Partition(2, 2))
    j = classical.fisher_matrix(model, DICE_POINT)
    want = np.trace(np.linalg.inv(j))
    assert abs(out["nuisance_known"] - want) < 1e-10
    assert abs(out["nuisance_unknown"] - want) < 1e-10


def test_induced_fisher_matches_measurement_route():
    # two independent code paths for the measurement Fisher information
    from qnuis.measurement import pauli_six_outcome
    qmodel = zoo_build("bloch-qubit")
    theta = np.array([0.2, 0.1, -0.3])
    povm = pauli_six_outcome()
    induced = classical.induced_model(qmodel, povm)
    j1 = classical.fisher_matrix(induced, theta)
    j2 = classical_fisher_of_povm(qmodel, theta, povm).entries
    assert np.abs(j1 - j2).max() < 1e-12


def test_locally_unbiased_survives_nuisance_reparametrization():
    # the estimator table keeps both conditions in a new nuisance coordinate
    from qnuis.measurement import locally_unbiased_estimator, pauli_six_outcome
    qmodel = zoo_build("qubit-clock")
    theta = np.array([1.0, 0.1])
    part = Partition(1, 2)
    povm = pauli_six_outcome()
    table = locally_unbiased_estimator(qmodel, theta, povm, part)

    from qnuis.model import reparametrize
    scale = 1.7
    new = reparametrize(
        qmodel,
        lambda xi: np.array([xi[0], scale * xi[1] + 0.1 * xi[0]]),
        lambda xi: np.array([[1.0, 0.0], [0.1, scale]]))
    xi = np.array([theta[0], (theta[1] - 0.1 * theta[0]) / scale])
    induced = classical.induced_model(new, povm)
    p = classical.probabilities(induced, xi)
    dp = classical.prob_derivatives(induced, xi)
    mean = p @ table
    assert abs(mean[0] - theta[0]) < 1e-8
    slope = dp.T @ (table[:, 0] - theta[0])
    assert abs(slope[0] - 1.0) < 1e-7
    assert abs(slope[1]) < 1e-7


def test_read_counts_csv():
    labels, counts = classical.read_counts_csv("a,3\nb,5\n")
    assert labels == ["a", "b"]
    assert np.allclose(counts, [3.0, 5.0])
    with pytest.raises(ConfigError):
        classical.read_counts_csv("")


def test_mle_monte_carlo_dice_rate():
    # n * MSE of the interest MLE approaches the nuisance-unknown bound
    model = classical.dice_model()
    rng = np.random.default_rng(5)
    n, trials = 10000, 2000
    p = classical.probabilities(model, DICE_POINT)
    errs = np.empty(trials)
    for t in range(trials):
        counts = rng.multinomial(n, p)
        fit = counts[:2] / n  # closed-form multinomial MLE
        errs[t] = fit[0] - DICE_POINT[0]
    scaled = n * np.mean(errs**2)
    assert abs(scaled - 0.16) / 0.16 < 0.05
