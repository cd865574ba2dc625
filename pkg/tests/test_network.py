"""
Tests for the contrast-based network meta-analysis model
"""
import numpy as np
import pytest

from exactmeta.errors import DegenerateReplicate, InputError
from exactmeta.network import (
    ArmRecord, ContrastStudy, NetworkModel, basis_contrast, build_V, ci_contrast,
    compound_symmetry, constrained_residuals, contrast_matrix, contrast_transform,
    contrasts_from_arms, deviance_net, fit_constrained_net, fit_ml_net,
    log_det_V, p_value_contrast, pivot_equations, pivot_jacobians, pivot_net, weight_net
)
from exactmeta.univariate import (
    UnivariateData, fit_ml, fit_ml_constrained, p_value_mu, pivot_tau2_star, weight_mu
)


@pytest.fixture
def two_arm_network():
    """A network with one comparison, equivalent to a univariate meta-analysis"""
    y = np.array([0.2, -0.5, 0.9, 0.1, 0.6])
    sigma2 = np.array([0.10, 0.25, 0.15, 0.30, 0.20])
    model = NetworkModel(y, np.ones((5, 1)), [[[s]] for s in sigma2])
    return model, UnivariateData(y, sigma2)


def test_two_arm_contrast():
    """Test y and S for a two-arm study with 5/10 events on both arms"""
    arms = [ArmRecord("s1", 0, 5.0, 10.0), ArmRecord("s1", 1, 5.0, 10.0)]

    # Call the function
    studies = contrasts_from_arms(arms)

    # Verify results
    assert studies[0].treatments == (1,)
    assert studies[0].y[0] == pytest.approx(0.0)
    assert studies[0].S[0, 0] == pytest.approx(0.8)


def test_three_arm_shared_reference_variance():
    """Test contrasts of a three-arm study share the reference variance off the diagonal"""
    arms = [ArmRecord("s1", 2, 10.0, 40.0), ArmRecord("s1", 0, 5.0, 10.0), ArmRecord("s1", 1, 8.0, 20.0)]

    study = contrasts_from_arms(arms)[0]

    assert study.treatments == (1, 2)
    assert study.S[0, 1] == pytest.approx(0.4)
    assert study.S[1, 0] == pytest.approx(0.4)
    assert study.S[0, 0] == pytest.approx(1 / 8 + 1 / 12 + 0.4)
    assert study.y[1] == pytest.approx(np.log(10 / 30))


def test_zero_cell_correction_applies_to_real_arms():
    """Test 0.5/1 is added to each arm of a study with a zero count"""
    arms = [ArmRecord("s1", 0, 0.0, 20.0), ArmRecord("s1", 1, 4.0, 20.0)]

    study = contrasts_from_arms(arms)[0]

    assert study.y[0] == pytest.approx(np.log(4.5 / 16.5) - np.log(0.5 / 20.5))
    assert study.S[0, 0] == pytest.approx(1 / 4.5 + 1 / 16.5 + 1 / 0.5 + 1 / 20.5)


def test_missing_reference_requires_augmentation():
    """Test a study without the reference arm fails unless augmented"""
    arms = [ArmRecord("s1", 1, 6.0, 30.0), ArmRecord("s1", 2, 9.0, 30.0)]

    with pytest.raises(InputError, match="lacks the reference arm"):
        contrasts_from_arms(arms)

    study = contrasts_from_arms(arms, augment=True)[0]
    pseudo_log_odds = np.log(0.001 / 0.009)
    pseudo_var = 1 / 0.001 + 1 / 0.009
    assert study.treatments == (1, 2)
    assert study.y[0] == pytest.approx(np.log(6 / 24) - pseudo_log_odds)
    assert study.S[0, 1] == pytest.approx(pseudo_var)


def test_single_arm_study_rejected():
    """Test a study needs two arms"""
    with pytest.raises(InputError, match="single arm"):
        contrasts_from_arms([ArmRecord("s1", 0, 3.0, 10.0)])


def test_contrast_study_validation():
    """Test mismatched shapes and non-positive-definite S"""
    with pytest.raises(InputError):
        ContrastStudy("s1", (1, 2), np.zeros(2), np.eye(3))
    with pytest.raises(InputError):
        ContrastStudy("s1", (1,), np.zeros(1), -np.eye(1))
    with pytest.raises(InputError):
        ContrastStudy("s1", (0,), np.zeros(1), np.eye(1))


def test_compound_symmetry():
    """Test P(0.5) has unit diagonal and 0.5 elsewhere"""
    P = compound_symmetry(3)

    assert np.allclose(np.diag(P), 1.0)
    assert P[0, 2] == 0.5


def test_build_v_blocks(network_model):
    """Test V(tau2) = tau2 Q + S and the blockwise log determinant"""
    tau2 = 0.09

    V = build_V(network_model, tau2)

    assert np.allclose(V, tau2 * network_model.Q + network_model.S)
    assert log_det_V(network_model, tau2) == pytest.approx(np.linalg.slogdet(V)[1], abs=1e-10)
    with pytest.raises(InputError):
        build_V(network_model, -0.1)


def test_deviance_matches_dense_evaluation(network_model):
    """Test the Cholesky deviance against a dense inverse"""
    beta = np.array([0.3, 0.5, 0.9])
    V = build_V(network_model, 0.1)
    r = network_model.y - network_model.X @ beta

    expected = np.linalg.slogdet(V)[1] + r @ np.linalg.solve(V, r)

    assert deviance_net(network_model, beta, 0.1) == pytest.approx(expected, abs=1e-9)


def test_disconnected_network_rejected():
    """Test a treatment that never appears makes the design rank deficient"""
    studies = [
        ContrastStudy("s1", (1,), [0.2], [[0.1]]),
        ContrastStudy("s2", (1, 2), [0.3, 0.5], [[0.2, 0.1], [0.1, 0.3]]),
    ]

    with pytest.raises(InputError, match="Disconnected network"):
        NetworkModel.from_studies(studies, p=3)


def test_fit_reduces_to_univariate(two_arm_network):
    """Test a single-comparison network reproduces the univariate fits"""
    model, data = two_arm_network

    # Call the function
    net = fit_ml_net(model)
    constrained = fit_constrained_net(model, 0.1)

    # Verify results
    uni = fit_ml(data)
    assert net.tau2 == pytest.approx(uni.tau2, abs=1e-10)
    assert net.beta[0] == pytest.approx(uni.mu, abs=1e-10)
    assert net.deviance == pytest.approx(uni.deviance, abs=1e-10)
    assert constrained.tau2 == pytest.approx(fit_ml_constrained(data, 0.1).tau2, abs=1e-10)


def test_pivot_reduces_to_univariate(two_arm_network):
    """Test tau2* and the weight agree with the univariate closed forms"""
    model, data = two_arm_network
    U = 0.3 * np.array([1.0, -1.0, 1.0, -1.0, 1.0])
    tau2_c = 0.2

    omega, tau2_star = pivot_net(U, model, 0.1, np.zeros(0), tau2_c)

    assert omega.size == 0
    assert tau2_star == pytest.approx(pivot_tau2_star(U, data, tau2_c), abs=1e-10)
    assert tau2_star > 0
    w = weight_net(U, model, 0.1, np.zeros(0), tau2_c, omega, tau2_star)
    assert w == pytest.approx(weight_mu(U, data, tau2_c, tau2_star), rel=1e-6)


def test_p_value_reduces_to_univariate(two_arm_network):
    """Test the network p-value for a single comparison matches the univariate one"""
    model, data = two_arm_network

    net = p_value_contrast(model, [1.0], 0.5, B=100, seed=4)
    uni = p_value_mu(data, 0.5, B=100, seed=4)

    assert net.p == pytest.approx(uni.p, abs=1e-6)
    assert net.t_obs == pytest.approx(uni.t_obs, abs=1e-8)
    assert net.n_degenerate == uni.n_degenerate


def test_contrast_matrix_is_full_rank():
    """Test the first row is c and the matrix is invertible"""
    c = np.array([1.0, -1.0, 0.0])

    A = contrast_matrix(c)

    assert np.array_equal(A[0], c)
    assert np.linalg.matrix_rank(A) == 3
    with pytest.raises(InputError):
        contrast_matrix(np.zeros(3))


def test_contrast_transform_estimates(network_model):
    """Test the first transformed coefficient is c'beta_hat"""
    c = np.array([0.0, 1.0, -1.0])
    fit = fit_ml_net(network_model)

    transformed = fit_ml_net(contrast_transform(network_model, c))

    assert transformed.beta[0] == pytest.approx(c @ fit.beta, abs=1e-8)
    assert transformed.tau2 == pytest.approx(fit.tau2, abs=1e-10)
    assert transformed.deviance == pytest.approx(fit.deviance, abs=1e-8)


def test_constrained_fit_at_the_estimate(network_model):
    """Test constraining beta_1 at its MLE returns the unconstrained fit"""
    fit = fit_ml_net(network_model)

    constrained = fit_constrained_net(network_model, fit.beta[0])

    assert np.allclose(constrained.omega, fit.beta[1:], atol=1e-8)
    assert constrained.tau2 == pytest.approx(fit.tau2, abs=1e-8)
    assert constrained.deviance == pytest.approx(fit.deviance, abs=1e-8)


def test_constrained_fit_plug_back(network_model):
    """Test the constrained score equations at the constrained estimate"""
    beta10 = 0.0
    fit = fit_constrained_net(network_model, beta10)

    residual = constrained_residuals(network_model, beta10, fit.omega, fit.tau2)

    assert np.allclose(residual[:-1], 0.0, atol=1e-8)
    if fit.tau2 > 0:
        assert abs(residual[-1]) < 1e-6
    else:
        assert residual[-1] >= 0


def test_pivot_plug_back(network_model):
    """Test accepted pivot solutions zero the pivot equations"""
    fit = fit_constrained_net(network_model, 0.3)
    gen = np.random.default_rng(8)
    for _ in range(5):
        u = gen.standard_normal(network_model.N)
        omega, tau2 = pivot_net(u, network_model, 0.3, fit.omega, fit.tau2)
        G = pivot_equations(u, network_model, 0.3, omega, tau2, fit.omega, fit.tau2)
        assert np.allclose(G[:-1], 0.0, atol=1e-8)
        if tau2 > 0:
            assert abs(G[-1]) < 1e-6


def test_pivot_zero_draw_is_degenerate(network_model):
    """Test u = 0 has no heterogeneity root"""
    fit = fit_constrained_net(network_model, 0.3)

    with pytest.raises(DegenerateReplicate):
        pivot_net(np.zeros(network_model.N), network_model, 0.3, fit.omega, fit.tau2)


def test_pivot_rejects_wrong_draw_length(network_model):
    """Test u must have one entry per contrast"""
    fit = fit_constrained_net(network_model, 0.3)

    with pytest.raises(InputError):
        pivot_net(np.ones(3), network_model, 0.3, fit.omega, fit.tau2)


def test_analytic_blocks_match_finite_differences(network_model):
    """Test the closed-form omega columns of the denominator Jacobian"""
    fit = fit_constrained_net(network_model, 0.3)
    u = np.random.default_rng(5).standard_normal(network_model.N)
    omega, tau2 = pivot_net(u, network_model, 0.3, fit.omega, fit.tau2)

    numerator, denominator = pivot_jacobians(u, network_model, 0.3, fit.omega, fit.tau2, omega, tau2)

    h = 1e-5
    for j in range(omega.size):
        step = np.zeros(omega.size)
        step[j] = h
        column = (pivot_equations(u, network_model, 0.3, omega + step, tau2, fit.omega, fit.tau2)
                  - pivot_equations(u, network_model, 0.3, omega - step, tau2, fit.omega, fit.tau2)) / (2 * h)
        assert np.allclose(denominator[:, j], column, rtol=1e-5, atol=1e-6)
        assert np.allclose(numerator[:, j], -column, rtol=1e-5, atol=1e-6)


def test_p_value_at_mle_is_one(network_model):
    """Test p = 1 at the unconstrained estimate of a basic parameter"""
    fit = fit_ml_net(network_model)

    result = p_value_contrast(network_model, basis_contrast(3, 1), fit.beta[0], B=40, seed=1)

    assert result.p == 1.0


def test_relabel_equivariance(network_model):
    """Test swapping two non-reference treatments swaps their p-values"""
    order = [1, 0, 2]
    relabeled = network_model.with_design(network_model.X[:, order])

    original = p_value_contrast(network_model, basis_contrast(3, 1), 0.5, B=40, seed=2)
    swapped = p_value_contrast(relabeled, basis_contrast(3, 2), 0.5, B=40, seed=2)

    assert swapped.p == pytest.approx(original.p, abs=1e-12)
    assert swapped.t_obs == pytest.approx(original.t_obs, abs=1e-10)


def test_contrast_length_checked(network_model):
    """Test c must have p entries"""
    with pytest.raises(InputError):
        p_value_contrast(network_model, [1.0, 0.0], 0.0, B=10, seed=1)


@pytest.mark.slow
def test_ci_contrast_brackets_estimate(network_model):
    """Test the Monte Carlo interval contains the estimate of beta_1"""
    fit = fit_ml_net(network_model)

    interval = ci_contrast(network_model, basis_contrast(3, 1), B=100, seed=1)

    assert interval.lower < fit.beta[0] < interval.upper


def test_contrast_transform_consistency(network_model):
    """Test testing c on the model equals testing e_1 on the transformed model"""
    c = np.array([0.0, 1.0, -1.0])
    transformed = contrast_transform(network_model, c)

    direct = p_value_contrast(network_model, c, 0.1, B=40, seed=6)
    via_basis = p_value_contrast(transformed, basis_contrast(3, 1), 0.1, B=40, seed=6)

    assert direct.p == pytest.approx(via_basis.p, abs=1e-12)


def test_constrained_heterogeneity_grows_away_from_estimate(network_model):
    """Test tau2_c does not decrease as beta10 moves away from beta_hat_1"""
    fit = fit_ml_net(network_model)

    tau2 = [fit_constrained_net(network_model, fit.beta[0] + d).tau2 for d in (0.0, 0.25, 0.5, 0.75, 1.0)]

    assert all(b >= a - 1e-10 for a, b in zip(tau2, tau2[1:]))


def test_augmentation_is_insensitive_to_pseudo_arm_size(monkeypatch, nma_csv_path):
    """Test halving the pseudo-arm size barely moves the fitted effects"""
    from exactmeta import ingest, network

    base = fit_ml_net(ingest.read_network(nma_csv_path, augment=True))
    monkeypatch.setattr(network, "PSEUDO_N", 0.005)
    halved = fit_ml_net(ingest.read_network(nma_csv_path, augment=True))

    assert np.allclose(base.beta, halved.beta, atol=1e-3)


def test_weight_step_halving(network_model):
    """Test the weight is stable when the finite-difference step is halved"""
    fit = fit_constrained_net(network_model, 0.3)
    gen = np.random.default_rng(12)
    checked = 0
    for _ in range(10):
        u = gen.standard_normal(network_model.N)
        try:
            omega, tau2 = pivot_net(u, network_model, 0.3, fit.omega, fit.tau2)
        except DegenerateReplicate:
            continue
        w = weight_net(u, network_model, 0.3, fit.omega, fit.tau2, omega, tau2)
        w_half = weight_net(u, network_model, 0.3, fit.omega, fit.tau2, omega, tau2, step=5e-6)
        assert w == pytest.approx(w_half, rel=0.01)
        checked += 1

    assert checked > 0
