"""
Monte Carlo conditioning engine.

Computes p-values of likelihood-ratio tests conditionally on the constrained
maximum likelihood estimate of the nuisance parameters, for any model that
implements the PivotModel contract, and inverts those tests into confidence
intervals by bisection.

The LRT statistic is T = (constrained minimum deviance) - (unconstrained
minimum deviance) >= 0, so small p-values correspond to extreme data.
"""
import concurrent.futures
import logging
from abc import ABC, abstractmethod
from dataclasses import dataclass, asdict
from typing import Any, Callable, Optional, Tuple

import numpy as np
from scipy import optimize

from exactmeta import config, rng
from exactmeta.errors import (
    BracketError, DegenerateReplicate, FitError, InputError, NumericalError, PivotError
)

logger = logging.getLogger(__name__)

# Relative slack when comparing simulated and observed statistics, so that the
# p-value at the unconstrained MLE is exactly 1 despite optimizer round-off.
TIE_TOL = 1e-9


@dataclass(frozen=True)
class NuisanceFit:
    """Constrained fit under H0: nuisance estimate and minimized deviance"""
    nuisance: Any
    deviance: float
    converged: bool


@dataclass(frozen=True)
class FullFit:
    """Unconstrained fit: (phi_hat, psi_hat) and minimized deviance"""
    estimate: Any
    nuisance: Any
    deviance: float
    converged: bool


class PivotModel(ABC):
    """
    Contract consumed by conditional_p_value.

    A model is built from the structure of one observed dataset (study count,
    within-study variances, design) and is immutable afterwards. `data` passed
    to the methods is either the observed data or a synthetic dataset produced
    by synth_data.
    """

    @property
    @abstractmethod
    def draw_dimension(self) -> int:
        """Length of the standard normal vector U per replicate."""

    @abstractmethod
    def constrained_fit(self, data, phi0) -> NuisanceFit:
        """Nuisance MLE and deviance under H0: phi = phi0."""

    @abstractmethod
    def unconstrained_fit(self, data) -> FullFit:
        """Joint MLE and deviance."""

    @abstractmethod
    def solve_pivot(self, U: np.ndarray, phi0, psi_c):
        """
        Nuisance value psi*(U) whose synthetic data reproduce psi_c.

        Raises DegenerateReplicate when the pivot equation has no usable solution.
        """

    @abstractmethod
    def synth_data(self, U: np.ndarray, phi0, psi):
        """Synthetic dataset H(U, phi0, psi)."""

    @abstractmethod
    def weight(self, U: np.ndarray, phi0, psi_c, psi_star) -> float:
        """Importance weight w(U) >= 0 (pi(psi) = 1)."""

    def lrt_stat(self, data, phi0, constrained: Optional[NuisanceFit] = None,
                 unconstrained: Optional[FullFit] = None) -> float:
        """T = constrained minus unconstrained minimum deviance, floored at 0."""
        if constrained is None:
            constrained = self.constrained_fit(data, phi0)
        if unconstrained is None:
            unconstrained = self.unconstrained_fit(data)
        return max(0.0, constrained.deviance - unconstrained.deviance)


@dataclass(frozen=True)
class PValueResult:
    """Weighted Monte Carlo p-value with diagnostics"""
    p: float
    B: int
    ess: float
    mc_se: float
    n_degenerate: int
    t_obs: float = 0.0

    def to_dict(self):
        return asdict(self)


@dataclass(frozen=True)
class ConfidenceInterval:
    """Interval obtained by inverting a test"""
    lower: float
    upper: float
    alpha: float
    point_estimate: float
    converged: bool
    # Monte Carlo diagnostics at the returned endpoints, when available
    lower_p: Optional[float] = None
    upper_p: Optional[float] = None
    ess: Optional[float] = None
    mc_se: Optional[float] = None
    n_degenerate: Optional[int] = None

    @property
    def length(self) -> float:
        return self.upper - self.lower

    def contains(self, value: float) -> bool:
        return self.lower <= value <= self.upper

    def to_dict(self):
        return asdict(self)


def _evaluate_replicate(model: PivotModel, U: np.ndarray, phi0, psi_c) -> Tuple[float, float]:
    """Simulated statistic and weight for one draw; (nan, nan) when degenerate."""
    try:
        psi_star = model.solve_pivot(U, phi0, psi_c)
        w = float(model.weight(U, phi0, psi_c, psi_star))
        if not np.isfinite(w) or w <= 0.0:
            raise DegenerateReplicate(f"weight {w}")
        t_star = model.lrt_stat(model.synth_data(U, phi0, psi_star), phi0)
    except (NumericalError, ValueError, np.linalg.LinAlgError, FloatingPointError) as e:
        # solver ValueErrors (scipy, InputError from synthetic data) count as degenerate
        logger.debug(f"Degenerate replicate: {type(e).__name__}: {e}")
        return np.nan, np.nan
    return t_star, w


def conditional_p_value(model: PivotModel, data, phi0, B: int, seed: int,
                        workers: Optional[int] = None,
                        unconstrained: Optional[FullFit] = None) -> PValueResult:
    """
    Monte Carlo conditional p-value of the LRT of H0: phi = phi0.

    Args:
        model: PivotModel built for `data`
        data: Observed data
        phi0: Null value of the parameter of interest
        B: Number of Monte Carlo replicates
        seed: Master seed; replicate b always uses substream b
        workers: Thread count (default: EXACTMETA_THREADS)
        unconstrained: Unconstrained fit of `data`, reused across null values

    Returns:
        PValueResult: p = sum I{T* >= T} w / sum w over non-degenerate replicates
    """
    if B < 1:
        raise InputError(f"B must be positive, got {B}")

    fit_c = model.constrained_fit(data, phi0)
    if not fit_c.converged:
        raise FitError(f"Constrained fit did not converge at phi0={phi0}")
    t_obs = model.lrt_stat(data, phi0, constrained=fit_c, unconstrained=unconstrained)

    U = rng.draw_matrix(seed, B, model.draw_dimension)
    workers = config.thread_count() if workers is None else workers

    def run(b):
        return _evaluate_replicate(model, U[b], phi0, fit_c.nuisance)

    if workers > 1:
        with concurrent.futures.ThreadPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(run, range(B)))
        results = np.array(outcomes, dtype=float).reshape(B, 2)
    else:
        results = np.array([run(b) for b in range(B)], dtype=float).reshape(B, 2)

    t_star, w = results[:, 0], results[:, 1]
    ok = np.isfinite(w)
    n_degenerate = int(B - ok.sum())
    if n_degenerate == B:
        raise PivotError("pivot solving failed")
    if n_degenerate:
        logger.warning(f"{n_degenerate} of {B} replicates degenerate at phi0={phi0}")

    w = w[ok]
    exceed = t_star[ok] >= t_obs - TIE_TOL * (1.0 + t_obs)
    total = np.sum(w)
    p = float(np.clip(np.sum(w[exceed]) / total, 0.0, 1.0))
    ess = float(total ** 2 / np.sum(w ** 2))
    mc_se = float(np.sqrt(p * (1.0 - p) / ess))

    logger.debug(f"p={p:.4f} ess={ess:.1f} T={t_obs:.4f} at phi0={phi0}")
    return PValueResult(p=p, B=B, ess=ess, mc_se=mc_se, n_degenerate=n_degenerate, t_obs=t_obs)


def _bisect(f: Callable[[float], float], lo: float, hi: float, tol: float,
            max_iter: int = 200) -> Tuple[float, bool]:
    if not tol > 0:
        raise InputError(f"tol must be positive, got {tol}")
    try:
        root, info = optimize.bisect(
            f, lo, hi, xtol=tol, maxiter=max_iter, full_output=True, disp=False
        )
    except ValueError as e:
        raise BracketError(f"same-sign bracket on [{lo}, {hi}]") from e
    return float(root), bool(info.converged)


def bisect(f: Callable[[float], float], lo: float, hi: float, tol: float,
           max_iter: int = 200) -> float:
    """
    Root of f on [lo, hi] by bisection.

    Args:
        f: Function whose sign differs at lo and hi
        lo, hi: Bracket ends
        tol: Width of the final bracket

    Returns:
        float: A point within tol of a sign change of f
    """
    return _bisect(f, lo, hi, tol, max_iter)[0]


def _memoize(p_fn: Callable[[float], float]) -> Callable[[float], float]:
    cache = {}

    def cached(x):
        x = float(x)
        if x not in cache:
            cache[x] = float(p_fn(x))
        return cache[x]
    return cached


def _endpoint(p_fn, start, direction, alpha, half_width, tol, max_expand, bound):
    inner = start
    step = half_width
    for _ in range(max_expand + 1):
        outer = start + direction * step
        if bound is not None and direction * (outer - bound) >= 0:
            if p_fn(bound) > alpha:
                return bound, True
            outer = bound
        if p_fn(outer) <= alpha:
            return _bisect(lambda x: p_fn(x) - alpha, inner, outer, tol)
        inner = outer
        step *= 2.0
    raise BracketError("endpoint bracket failed")


def invert_to_interval(p_fn: Callable[[float], float], point_estimate: float, alpha: float,
                       tol: Optional[float] = None, max_expand: int = config.DEFAULT_MAX_EXPAND,
                       half_width: float = 1.0, lower_bound: Optional[float] = None,
                       upper_bound: Optional[float] = None) -> ConfidenceInterval:
    """
    Confidence interval {phi : p(phi) > alpha} by bracketing and bisection.

    Brackets start at the Wald interval point_estimate +/- half_width and double
    the half-width up to max_expand times. p_fn must use common random numbers
    (the same seed for every candidate) so that it is a stable function.

    Args:
        p_fn: p-value as a function of the null value
        point_estimate: Unconstrained MLE, where p > alpha
        alpha: 1 - nominal level
        tol: Parameter-axis tolerance (default 1e-4 x half_width)
        max_expand: Maximum number of bracket doublings per side
        half_width: Wald half-width used for the initial brackets
        lower_bound, upper_bound: Parameter-space limits; an endpoint stops there
            when p is still above alpha

    Returns:
        ConfidenceInterval
    """
    if not 0.0 < alpha < 1.0:
        raise InputError(f"alpha must lie in (0, 1), got {alpha}")
    if not half_width > 0 or not np.isfinite(half_width):
        half_width = 1.0
    tol = config.DEFAULT_TOL_FRACTION * half_width if tol is None else tol

    p_fn = _memoize(p_fn)
    p_hat = p_fn(point_estimate)
    if p_hat <= alpha:
        raise BracketError(f"p-value at the point estimate ({p_hat}) does not exceed alpha")

    lower, lower_ok = _endpoint(p_fn, point_estimate, -1.0, alpha, half_width, tol,
                                max_expand, lower_bound)
    upper, upper_ok = _endpoint(p_fn, point_estimate, 1.0, alpha, half_width, tol,
                                max_expand, upper_bound)
    logger.info(f"Interval ({lower:.6g}, {upper:.6g}) around {point_estimate:.6g} at alpha={alpha}")
    return ConfidenceInterval(
        lower=lower,
        upper=upper,
        alpha=alpha,
        point_estimate=float(point_estimate),
        converged=lower_ok and upper_ok
    )


def with_endpoint_diagnostics(interval: ConfidenceInterval,
                              p_result: Callable[[float], PValueResult]) -> ConfidenceInterval:
    """Re-evaluate the p-value at both endpoints and attach its diagnostics."""
    lo = p_result(interval.lower)
    hi = p_result(interval.upper)
    return ConfidenceInterval(
        lower=interval.lower,
        upper=interval.upper,
        alpha=interval.alpha,
        point_estimate=interval.point_estimate,
        converged=interval.converged,
        lower_p=lo.p,
        upper_p=hi.p,
        ess=min(lo.ess, hi.ess),
        mc_se=max(lo.mc_se, hi.mc_se),
        n_degenerate=max(lo.n_degenerate, hi.n_degenerate)
    )
