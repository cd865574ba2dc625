"""
Univariate random-effects meta-analysis.

Model: y_i = mu + eps_i + e_i with eps_i ~ N(0, tau2) and e_i ~ N(0, sigma2_i),
sigma2_i known. Provides ML fitting, the closed-form pivot and weight for the
mean mu, the pivot for tau2, and Monte Carlo confidence intervals for both.
"""
import logging
from dataclasses import dataclass

import numpy as np
from scipy import optimize, stats

from exactmeta import config
from exactmeta.errors import DegenerateReplicate, FitError, InputError
from exactmeta.mc_core import (
    ConfidenceInterval, FullFit, NuisanceFit, PivotModel, PValueResult,
    conditional_p_value, invert_to_interval, with_endpoint_diagnostics
)

logger = logging.getLogger(__name__)

ROOT_XTOL = 1e-14


@dataclass(frozen=True)
class UnivariateData:
    """Per-study effect estimates y and known within-study variances sigma2"""
    y: np.ndarray
    sigma2: np.ndarray

    def __post_init__(self):
        y = np.asarray(self.y, dtype=float).ravel()
        sigma2 = np.asarray(self.sigma2, dtype=float).ravel()
        if y.shape != sigma2.shape:
            raise InputError(f"y has {y.size} values but sigma2 has {sigma2.size}")
        if y.size < 2:
            raise InputError(f"At least 2 studies are required, got {y.size}")
        if not np.all(np.isfinite(y)):
            raise InputError("Effect estimates must be finite")
        if not np.all(np.isfinite(sigma2)) or np.any(sigma2 <= 0):
            raise InputError("Within-study variances must be positive and finite")
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "sigma2", sigma2)

    @property
    def k(self) -> int:
        return self.y.size

    def with_y(self, y) -> "UnivariateData":
        """Same studies, new effect estimates."""
        return UnivariateData(y, self.sigma2)

    @classmethod
    def from_counts(cls, events_t, n_t, events_c, n_c) -> "UnivariateData":
        """Log odds ratios and their variances from 2x2 tables."""
        y, sigma2 = log_odds_ratios(events_t, n_t, events_c, n_c)
        return cls(y, sigma2)


def log_odds_ratios(events_t, n_t, events_c, n_c):
    """
    Log odds ratio (treatment vs control) and its variance per study.

    0.5 is added to all four cells of any table that contains a zero cell.

    Returns:
        Tuple[np.ndarray, np.ndarray]: (log odds ratios, variances)
    """
    a = np.asarray(events_t, dtype=float)
    b = np.asarray(n_t, dtype=float) - a
    c = np.asarray(events_c, dtype=float)
    d = np.asarray(n_c, dtype=float) - c
    if np.any(a < 0) or np.any(b < 0) or np.any(c < 0) or np.any(d < 0):
        raise InputError("Event counts must lie between 0 and the arm size")
    zero = (a == 0) | (b == 0) | (c == 0) | (d == 0)
    a, b, c, d = (np.where(zero, cell + 0.5, cell) for cell in (a, b, c, d))
    return np.log(a * d / (b * c)), 1 / a + 1 / b + 1 / c + 1 / d


@dataclass(frozen=True)
class UniFit:
    """Maximum likelihood fit of the univariate model"""
    mu: float
    tau2: float
    deviance: float
    converged: bool
    iterations: int


def deviance(data: UnivariateData, mu: float, tau2: float) -> float:
    """-2 log-likelihood up to a constant: sum log(v) + sum (y - mu)^2 / v."""
    if tau2 < 0:
        raise InputError(f"tau2 must be nonnegative, got {tau2}")
    v = tau2 + data.sigma2
    return float(np.sum(np.log(v)) + np.sum((data.y - mu) ** 2 / v))


def weighted_mean(data: UnivariateData, tau2: float) -> float:
    """GLS estimate of mu for a given tau2."""
    w = 1.0 / (tau2 + data.sigma2)
    return float(np.sum(w * data.y) / np.sum(w))


def score_tau2(data: UnivariateData, mu: float, tau2: float) -> float:
    """Log-likelihood score in tau2 at fixed mu (up to a factor 1/2)."""
    v = tau2 + data.sigma2
    return float(np.sum((data.y - mu) ** 2 / v ** 2) - np.sum(1.0 / v))


def fit_ml_constrained(data: UnivariateData, mu0: float) -> UniFit:
    """
    ML estimate of tau2 under H0: mu = mu0.

    The root of the score is bracketed on [0, max (y_i - mu0)^2], where the
    score is negative; tau2 is 0 when the score at 0 is not positive.
    """
    r2 = (data.y - mu0) ** 2
    if score_tau2(data, mu0, 0.0) <= 0:
        return UniFit(mu=float(mu0), tau2=0.0, deviance=deviance(data, mu0, 0.0),
                      converged=True, iterations=0)
    tau2, info = optimize.brentq(
        lambda t: score_tau2(data, mu0, t), 0.0, float(np.max(r2)),
        xtol=ROOT_XTOL, full_output=True, disp=False
    )
    return UniFit(mu=float(mu0), tau2=float(tau2), deviance=deviance(data, mu0, tau2),
                  converged=bool(info.converged), iterations=int(info.iterations))


def _profile_score(data: UnivariateData, tau2: float) -> float:
    return score_tau2(data, weighted_mean(data, tau2), tau2)


def fit_ml(data: UnivariateData, max_iter: int = 500) -> UniFit:
    """
    Unconstrained ML fit of (mu, tau2).

    Solves the joint stationarity condition of the GLS-mean / variance-score
    iteration directly: tau2 is the root of the score with mu profiled out.

    Returns:
        UniFit: converged=False with the best iterate if no bracket was found
    """
    if _profile_score(data, 0.0) <= 0:
        mu = weighted_mean(data, 0.0)
        return UniFit(mu=mu, tau2=0.0, deviance=deviance(data, mu, 0.0),
                      converged=True, iterations=0)

    hi = float(np.max((data.y - weighted_mean(data, 0.0)) ** 2))
    for _ in range(max_iter):
        if _profile_score(data, hi) < 0:
            break
        hi *= 4.0
    else:
        mu = weighted_mean(data, hi)
        logger.warning(f"Profile score still positive at tau2={hi}")
        return UniFit(mu=mu, tau2=hi, deviance=deviance(data, mu, hi),
                      converged=False, iterations=max_iter)

    tau2, info = optimize.brentq(
        lambda t: _profile_score(data, t), 0.0, hi,
        xtol=ROOT_XTOL, maxiter=max_iter, full_output=True, disp=False
    )
    mu = weighted_mean(data, tau2)
    return UniFit(mu=mu, tau2=float(tau2), deviance=deviance(data, mu, tau2),
                  converged=bool(info.converged), iterations=int(info.iterations))


def pivot_tau2_star(U: np.ndarray, data: UnivariateData, tau2_hat_c: float,
                    clamp: bool = True) -> float:
    """
    Closed-form root in tau2 of
        G(U, tau2, tau2_hat_c) = sum 1/v - sum (tau2 + sigma2) u^2 / v^2,
    with v = tau2_hat_c + sigma2. Negative roots are clamped to 0 unless
    clamp=False.
    """
    u2 = np.asarray(U, dtype=float) ** 2
    if u2.shape != data.sigma2.shape:
        raise InputError(f"U has length {u2.size}, expected {data.k}")
    v = tau2_hat_c + data.sigma2
    denominator = np.sum(u2 / v ** 2)
    if denominator == 0:
        raise InputError("All components of U are zero")
    tau2 = float(np.sum((tau2_hat_c + data.sigma2 * (1.0 - u2)) / v ** 2) / denominator)
    return max(tau2, 0.0) if clamp else tau2


def pivot_residual(U: np.ndarray, data: UnivariateData, tau2: float, tau2_hat_c: float) -> float:
    """G(U, tau2, tau2_hat_c) for checking pivot solutions."""
    u2 = np.asarray(U, dtype=float) ** 2
    v = tau2_hat_c + data.sigma2
    return float(np.sum(1.0 / v) - np.sum((tau2 + data.sigma2) * u2 / v ** 2))


def weight_mu(U: np.ndarray, data: UnivariateData, tau2_hat_c: float, tau2_star: float) -> float:
    """|d tau2_hat / d tau2|^-1 at tau2_star by the implicit function theorem."""
    u2 = np.asarray(U, dtype=float) ** 2
    v = tau2_hat_c + data.sigma2
    numerator = np.abs(np.sum((2.0 * (tau2_star + data.sigma2) * u2 - v) / v ** 3))
    return float(numerator / np.sum(u2 / v ** 2))


class UnivariateMeanModel(PivotModel):
    """Pivot contract for H0: mu = mu0 with nuisance tau2"""

    def __init__(self, data: UnivariateData):
        self._data = data

    @property
    def draw_dimension(self) -> int:
        return self._data.k

    def constrained_fit(self, data, phi0) -> NuisanceFit:
        fit = fit_ml_constrained(data, float(phi0))
        return NuisanceFit(nuisance=fit.tau2, deviance=fit.deviance, converged=fit.converged)

    def unconstrained_fit(self, data) -> FullFit:
        fit = fit_ml(data)
        return FullFit(estimate=fit.mu, nuisance=fit.tau2, deviance=fit.deviance,
                       converged=fit.converged)

    def solve_pivot(self, U, phi0, psi_c):
        try:
            return pivot_tau2_star(U, self._data, psi_c)
        except InputError as e:
            raise DegenerateReplicate(str(e)) from e

    def synth_data(self, U, phi0, psi):
        return self._data.with_y(float(phi0) + U * np.sqrt(psi + self._data.sigma2))

    def weight(self, U, phi0, psi_c, psi_star) -> float:
        return weight_mu(U, self._data, psi_c, psi_star)


class UnivariateHeterogeneityModel(PivotModel):
    """Pivot contract for H0: tau2 = tau0 with nuisance mu (unit weights)"""

    def __init__(self, data: UnivariateData):
        self._data = data

    @property
    def draw_dimension(self) -> int:
        return self._data.k

    def constrained_fit(self, data, phi0) -> NuisanceFit:
        tau0 = float(phi0)
        mu = weighted_mean(data, tau0)
        return NuisanceFit(nuisance=mu, deviance=deviance(data, mu, tau0), converged=True)

    def unconstrained_fit(self, data) -> FullFit:
        fit = fit_ml(data)
        return FullFit(estimate=fit.tau2, nuisance=fit.mu, deviance=fit.deviance,
                       converged=fit.converged)

    def solve_pivot(self, U, phi0, psi_c):
        return mu_star(U, self._data, float(phi0), psi_c)

    def synth_data(self, U, phi0, psi):
        return self._data.with_y(psi + U * np.sqrt(float(phi0) + self._data.sigma2))

    def weight(self, U, phi0, psi_c, psi_star) -> float:
        return 1.0


def mu_star(U: np.ndarray, data: UnivariateData, tau0: float, mu_hat: float) -> float:
    """Mean pivot for the tau2 test: the synthetic GLS mean reproduces mu_hat."""
    v0 = tau0 + data.sigma2
    return float(mu_hat - np.sum(np.asarray(U) / np.sqrt(v0)) / np.sum(1.0 / v0))


def p_value_mu(data: UnivariateData, mu0: float, B: int = config.DEFAULT_B, seed: int = 0,
               workers: int | None = None) -> PValueResult:
    """Monte Carlo conditional p-value of H0: mu = mu0."""
    return conditional_p_value(UnivariateMeanModel(data), data, mu0, B, seed, workers=workers)


def p_value_tau2(data: UnivariateData, tau0: float, B: int = config.DEFAULT_B, seed: int = 0,
                 workers: int | None = None) -> PValueResult:
    """Monte Carlo conditional p-value of H0: tau2 = tau0."""
    if tau0 < 0:
        raise InputError(f"tau0 must be nonnegative, got {tau0}")
    return conditional_p_value(UnivariateHeterogeneityModel(data), data, tau0, B, seed,
                               workers=workers)


def ci_mu(data: UnivariateData, alpha: float = config.DEFAULT_ALPHA, B: int = config.DEFAULT_B,
          seed: int = 0, tol: float | None = None, max_expand: int = config.DEFAULT_MAX_EXPAND,
          diagnostics: bool = True, workers: int | None = None) -> ConfidenceInterval:
    """
    Monte Carlo confidence interval for mu by inverting the conditional LRT.

    Every candidate mu0 reuses the same B draws (seed), so the p-value is a
    stable function of mu0.
    """
    model = UnivariateMeanModel(data)
    full = model.unconstrained_fit(data)
    if not full.converged:
        raise FitError("Unconstrained fit did not converge")

    def p_result(mu0):
        return conditional_p_value(model, data, mu0, B, seed, workers=workers, unconstrained=full)

    se = np.sqrt(1.0 / np.sum(1.0 / (full.nuisance + data.sigma2)))
    half_width = stats.norm.ppf(1 - alpha / 2) * se
    interval = invert_to_interval(lambda mu0: p_result(mu0).p, full.estimate, alpha,
                                  tol=tol, max_expand=max_expand, half_width=half_width)
    return with_endpoint_diagnostics(interval, p_result) if diagnostics else interval


def ci_tau2(data: UnivariateData, alpha: float = config.DEFAULT_ALPHA, B: int = config.DEFAULT_B,
            seed: int = 0, tol: float | None = None, max_expand: int = config.DEFAULT_MAX_EXPAND,
            diagnostics: bool = True, workers: int | None = None) -> ConfidenceInterval:
    """Monte Carlo confidence interval for tau2; the lower limit stops at 0."""
    model = UnivariateHeterogeneityModel(data)
    full = model.unconstrained_fit(data)
    if not full.converged:
        raise FitError("Unconstrained fit did not converge")

    def p_result(tau0):
        return conditional_p_value(model, data, tau0, B, seed, workers=workers, unconstrained=full)

    # Wald half-width from the expected information of tau2
    se = np.sqrt(2.0 / np.sum(1.0 / (full.estimate + data.sigma2) ** 2))
    half_width = stats.norm.ppf(1 - alpha / 2) * se
    interval = invert_to_interval(lambda tau0: p_result(tau0).p, full.estimate, alpha,
                                  tol=tol, max_expand=max_expand, half_width=half_width,
                                  lower_bound=0.0)
    return with_endpoint_diagnostics(interval, p_result) if diagnostics else interval
