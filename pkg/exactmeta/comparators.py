"""
Standard methods used as benchmarks: DerSimonian-Laird, REML Wald,
Knapp-Hartung and asymptotic likelihood-ratio intervals for the univariate
and network models, and the REML fit behind the approximate bivariate region.
"""
import logging
from dataclasses import dataclass, asdict
from typing import List, Optional

import numpy as np
from scipy import optimize, stats

from exactmeta import config
from exactmeta.bivariate import DTAData, covariance, deviance_bivar, moment_start, RHO_BOUND
from exactmeta.errors import FitError, InputError
from exactmeta.mc_core import invert_to_interval
from exactmeta.network import (
    NetworkModel, basis_contrast, contrast_transform, fit_constrained_net, fit_ml_net,
    fit_reml_net
)
from exactmeta.univariate import (
    UnivariateData, deviance, fit_ml, fit_ml_constrained, weighted_mean
)

logger = logging.getLogger(__name__)

METHODS = ("DL", "REML", "KNHA", "LR", "ACR")


@dataclass(frozen=True)
class MethodResult:
    """Point estimate and interval from one benchmark method"""
    method: str
    estimate: float
    lower: float
    upper: float
    tau2: float
    coordinate: Optional[str] = None

    def __post_init__(self):
        if self.method not in METHODS:
            raise InputError(f"Unknown method tag {self.method}")
        if not self.lower <= self.estimate <= self.upper:
            raise InputError(f"{self.method}: estimate {self.estimate} outside ({self.lower}, {self.upper})")

    @property
    def length(self) -> float:
        return self.upper - self.lower

    def contains(self, value: float) -> bool:
        return self.lower <= value <= self.upper

    def to_dict(self):
        return asdict(self)


def _z(alpha: float) -> float:
    if not 0.0 < alpha < 1.0:
        raise InputError(f"alpha must lie in (0, 1), got {alpha}")
    return float(stats.norm.ppf(1 - alpha / 2))


def dl_tau2(data: UnivariateData) -> float:
    """DerSimonian-Laird moment estimate of tau2."""
    w = 1.0 / data.sigma2
    y_bar = np.sum(w * data.y) / np.sum(w)
    q = np.sum(w * (data.y - y_bar) ** 2)
    return float(max(0.0, (q - (data.k - 1)) / (np.sum(w) - np.sum(w ** 2) / np.sum(w))))


def _wald(method: str, data: UnivariateData, tau2: float, alpha: float) -> MethodResult:
    mu = weighted_mean(data, tau2)
    se = np.sqrt(1.0 / np.sum(1.0 / (tau2 + data.sigma2)))
    half = _z(alpha) * se
    return MethodResult(method=method, estimate=mu, lower=mu - half, upper=mu + half, tau2=tau2)


def dl_interval(data: UnivariateData, alpha: float = config.DEFAULT_ALPHA) -> MethodResult:
    """Wald interval at the DerSimonian-Laird tau2."""
    return _wald("DL", data, dl_tau2(data), alpha)


def reml_objective(data: UnivariateData, tau2: float) -> float:
    """Profiled deviance plus log(sum 1/(tau2 + sigma2))."""
    mu = weighted_mean(data, tau2)
    return deviance(data, mu, tau2) + float(np.log(np.sum(1.0 / (tau2 + data.sigma2))))


def reml_tau2(data: UnivariateData) -> float:
    """REML estimate of tau2 by bounded Brent search (golden section with parabolic steps) on [0, tau_max]."""
    mu0 = weighted_mean(data, 0.0)
    upper = 10.0 * max(float(np.max((data.y - mu0) ** 2)), 1e-12)
    res = optimize.minimize_scalar(lambda t: reml_objective(data, t), bounds=(0.0, upper),
                                   method="bounded", options={"xatol": 1e-10})
    if not res.success:
        raise FitError("REML search did not converge")
    if reml_objective(data, 0.0) <= res.fun:
        return 0.0
    return float(res.x)


def reml_interval_uni(data: UnivariateData, alpha: float = config.DEFAULT_ALPHA) -> MethodResult:
    return _wald("REML", data, reml_tau2(data), alpha)


def knha_interval(data: UnivariateData, alpha: float = config.DEFAULT_ALPHA) -> MethodResult:
    """
    Knapp-Hartung interval at the REML tau2: mu_hat +/- t_{k-1} sqrt(q / sum w)
    with q = sum w (y - mu_hat)^2 / (k - 1), no truncation of q.
    """
    _z(alpha)
    tau2 = reml_tau2(data)
    w = 1.0 / (tau2 + data.sigma2)
    mu = float(np.sum(w * data.y) / np.sum(w))
    q = np.sum(w * (data.y - mu) ** 2) / (data.k - 1)
    half = stats.t.ppf(1 - alpha / 2, data.k - 1) * np.sqrt(q / np.sum(w))
    return MethodResult(method="KNHA", estimate=mu, lower=mu - half, upper=mu + half, tau2=tau2)


def lr_interval_uni(data: UnivariateData, alpha: float = config.DEFAULT_ALPHA) -> MethodResult:
    """Asymptotic LR interval: {mu0 : T(mu0) <= chi-square(1) upper-alpha point}."""
    z = _z(alpha)
    full = fit_ml(data)
    if not full.converged:
        raise FitError("Unconstrained fit did not converge")

    def p_fn(mu0):
        t = max(0.0, fit_ml_constrained(data, mu0).deviance - full.deviance)
        return float(stats.chi2.sf(t, 1))

    half_width = z * np.sqrt(1.0 / np.sum(1.0 / (full.tau2 + data.sigma2)))
    interval = invert_to_interval(p_fn, full.mu, alpha, half_width=half_width,
                                  tol=1e-8 * half_width)
    return MethodResult(method="LR", estimate=full.mu, lower=interval.lower,
                        upper=interval.upper, tau2=full.tau2)


def reml_wald_net(model: NetworkModel, alpha: float = config.DEFAULT_ALPHA) -> List[MethodResult]:
    """Wald intervals for every coordinate of beta from the REML fit."""
    z = _z(alpha)
    fit = fit_reml_net(model)
    results = []
    for j in range(model.p):
        half = z * np.sqrt(fit.cov_beta[j, j])
        results.append(MethodResult(method="REML", estimate=float(fit.beta[j]),
                                    lower=float(fit.beta[j] - half), upper=float(fit.beta[j] + half),
                                    tau2=fit.tau2, coordinate=model.labels[j + 1]))
    return results


def reml_wald_contrast(model: NetworkModel, c, alpha: float = config.DEFAULT_ALPHA) -> MethodResult:
    """Wald interval for c'beta from the REML fit."""
    c = np.asarray(c, dtype=float)
    fit = fit_reml_net(model)
    estimate = float(c @ fit.beta)
    half = _z(alpha) * np.sqrt(float(c @ fit.cov_beta @ c))
    return MethodResult(method="REML", estimate=estimate, lower=estimate - half,
                        upper=estimate + half, tau2=fit.tau2)


def lr_interval_net(model: NetworkModel, c, alpha: float = config.DEFAULT_ALPHA) -> MethodResult:
    """Asymptotic LR interval for c'beta against chi-square(1)."""
    z = _z(alpha)
    transformed = contrast_transform(model, c)
    full = fit_ml_net(transformed)
    if not full.converged:
        raise FitError("Unconstrained network fit did not converge")

    def p_fn(eta0):
        t = max(0.0, fit_constrained_net(transformed, eta0).deviance - full.deviance)
        return float(stats.chi2.sf(t, 1))

    half_width = z * np.sqrt(full.cov_beta[0, 0])
    estimate = float(full.beta[0])
    interval = invert_to_interval(p_fn, estimate, alpha, half_width=half_width,
                                  tol=1e-8 * half_width)
    return MethodResult(method="LR", estimate=estimate, lower=interval.lower,
                        upper=interval.upper, tau2=full.tau2)


def lr_intervals_net(model: NetworkModel, alpha: float = config.DEFAULT_ALPHA) -> List[MethodResult]:
    """LR interval for every coordinate of beta."""
    results = []
    for j in range(model.p):
        result = lr_interval_net(model, basis_contrast(model.p, j + 1), alpha)
        results.append(MethodResult(method="LR", estimate=result.estimate, lower=result.lower,
                                    upper=result.upper, tau2=result.tau2,
                                    coordinate=model.labels[j + 1]))
    return results


@dataclass(frozen=True)
class ReitsmaFit:
    """REML fit of the bivariate model"""
    mu: np.ndarray
    psi: np.ndarray
    cov_mu: np.ndarray
    converged: bool


def _reml_bivar_objective(data: DTAData, psi) -> float:
    V = covariance(data, psi)
    V_inv = np.linalg.inv(V)
    information = V_inv.sum(axis=0)
    mu = np.linalg.solve(information, np.einsum("kij,kj->i", V_inv, data.y))
    return deviance_bivar(data, mu, psi) + float(np.linalg.slogdet(information)[1])


def reitsma_reml(data: DTAData) -> ReitsmaFit:
    """Bivariate REML fit: psi by bounded quasi-Newton, mu by GLS, cov_mu = (sum V_i^-1)^-1."""
    res = optimize.minimize(lambda x: _reml_bivar_objective(data, x), moment_start(data),
                            method="L-BFGS-B",
                            bounds=[(0.0, None), (0.0, None), (-RHO_BOUND, RHO_BOUND)])
    if not res.success:
        logger.warning(f"Bivariate REML search reported: {res.message}")
    psi = res.x
    V_inv = np.linalg.inv(covariance(data, psi))
    cov_mu = np.linalg.inv(V_inv.sum(axis=0))
    mu = cov_mu @ np.einsum("kij,kj->i", V_inv, data.y)
    return ReitsmaFit(mu=mu, psi=psi, cov_mu=cov_mu, converged=bool(res.success))


def acr_contains(data: DTAData, mu_true, alpha: float = config.DEFAULT_ALPHA) -> bool:
    """Whether the approximate elliptical region covers mu_true."""
    fit = reitsma_reml(data)
    d = np.asarray(mu_true, dtype=float) - fit.mu
    return bool(d @ np.linalg.solve(fit.cov_mu, d) <= stats.chi2.ppf(1 - alpha, 2))
