"""
Bivariate random-effects meta-analysis of diagnostic test accuracy.

Each study reports y_i = (logit sensitivity, logit specificity) with known
within-study covariance C_i = diag(sA2_i, sB2_i). Between-study covariance is
Sigma(psi) with psi = (sigmaA2, sigmaB2, rho), so V_i(psi) = Sigma(psi) + C_i.

The nuisance fits, the pivot and the weight are solved numerically; the
confidence region for mu = (muA, muB) is built radially around the MLE.
"""
import logging
from dataclasses import dataclass, field
from typing import Iterable, List, Optional

import numpy as np
from scipy import optimize, stats
from scipy.ndimage import uniform_filter1d
from scipy.special import expit

from exactmeta import config, rng
from exactmeta.errors import BracketError, DegenerateReplicate, FitError, InputError
from exactmeta.mc_core import (
    FullFit, NuisanceFit, PivotModel, PValueResult, conditional_p_value, invert_to_interval
)

logger = logging.getLogger(__name__)

RHO_BOUND = 0.999
RESIDUAL_TOL = 1e-6
N_RESTARTS = 5
JITTER_SEED = 20140601
FD_STEP = 1e-4

_LOWER = np.array([0.0, 0.0, -RHO_BOUND])
_UPPER = np.array([np.inf, np.inf, RHO_BOUND])
_LSQ_OPTIONS = dict(method="trf", xtol=1e-14, ftol=1e-14, gtol=1e-14, max_nfev=2000)


@dataclass(frozen=True)
class DTAStudy:
    """One diagnostic accuracy study on the logit scale"""
    yA: float
    yB: float
    sA2: float
    sB2: float

    def __post_init__(self):
        if not (self.sA2 > 0 and self.sB2 > 0):
            raise InputError(f"Within-study variances must be positive, got ({self.sA2}, {self.sB2})")


@dataclass(frozen=True)
class DTAData:
    """Stacked studies: y and s2 are (k, 2) arrays"""
    y: np.ndarray
    s2: np.ndarray

    def __post_init__(self):
        y = np.asarray(self.y, dtype=float)
        s2 = np.asarray(self.s2, dtype=float)
        if y.ndim != 2 or y.shape[1] != 2 or s2.shape != y.shape:
            raise InputError(f"Expected (k, 2) arrays, got {y.shape} and {s2.shape}")
        if y.shape[0] < 2:
            raise InputError(f"At least 2 studies are required, got {y.shape[0]}")
        if not np.all(np.isfinite(y)):
            raise InputError("Logit estimates must be finite")
        if not np.all(np.isfinite(s2)) or np.any(s2 <= 0):
            raise InputError("Within-study variances must be positive and finite")
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "s2", s2)

    @property
    def k(self) -> int:
        return self.y.shape[0]

    @classmethod
    def from_studies(cls, studies: Iterable[DTAStudy]) -> "DTAData":
        studies = list(studies)
        return cls(
            np.array([[s.yA, s.yB] for s in studies], dtype=float).reshape(-1, 2),
            np.array([[s.sA2, s.sB2] for s in studies], dtype=float).reshape(-1, 2)
        )

    @classmethod
    def from_counts(cls, tp, fp, fn, tn) -> "DTAData":
        """
        Logit sensitivity and specificity from 2x2 tables.

        0.5 is added to all four cells of any table with a zero cell.
        """
        cells = [np.asarray(c, dtype=float) for c in (tp, fp, fn, tn)]
        if any(np.any(c < 0) for c in cells):
            raise InputError("Cell counts must be nonnegative")
        zero = np.zeros_like(cells[0], dtype=bool)
        for c in cells:
            zero |= c == 0
        tp, fp, fn, tn = (np.where(zero, c + 0.5, c) for c in cells)
        y = np.column_stack([np.log(tp / fn), np.log(tn / fp)])
        s2 = np.column_stack([1 / tp + 1 / fn, 1 / tn + 1 / fp])
        return cls(y, s2)

    def swapped(self) -> "DTAData":
        """Same studies with the A and B components exchanged."""
        return DTAData(self.y[:, ::-1], self.s2[:, ::-1])

    def synthetic(self, mu0, psi, u: np.ndarray) -> "DTAData":
        """y_i = mu0 + T_i(psi) u_i with T_i the lower Cholesky factor of V_i(psi)."""
        T = np.linalg.cholesky(covariance(self, psi))
        y = np.asarray(mu0, dtype=float) + np.einsum("kij,kj->ki", T, np.asarray(u).reshape(-1, 2))
        return DTAData(y, self.s2)


@dataclass(frozen=True)
class BivarParams:
    """(muA, muB, sigmaA2, sigmaB2, rho)"""
    muA: float
    muB: float
    sigmaA2: float
    sigmaB2: float
    rho: float

    def __post_init__(self):
        if self.sigmaA2 < 0 or self.sigmaB2 < 0:
            raise InputError("Between-study variances must be nonnegative")
        if not -1.0 < self.rho < 1.0:
            raise InputError(f"rho must lie in (-1, 1), got {self.rho}")

    @property
    def mu(self) -> np.ndarray:
        return np.array([self.muA, self.muB])

    @property
    def psi(self) -> np.ndarray:
        return np.array([self.sigmaA2, self.sigmaB2, self.rho])


@dataclass(frozen=True)
class BivarFit:
    """Fit of the bivariate model (constrained fits carry mu = mu0)"""
    mu: np.ndarray
    psi: np.ndarray
    deviance: float
    converged: bool
    iterations: int
    score_residual: float
    boundary: bool = False

    @property
    def params(self) -> BivarParams:
        return BivarParams(*(float(v) for v in self.mu), *(float(v) for v in self.psi))


@dataclass(frozen=True)
class ConfidenceRegion:
    """Star-shaped region around center, one radius per polar angle"""
    center: np.ndarray
    angles: np.ndarray
    radii_raw: np.ndarray
    radii_smoothed: np.ndarray
    alpha: float
    partial: bool = False
    method: str = "mc"
    failed_angles: List[int] = field(default_factory=list)

    @property
    def boundary(self) -> np.ndarray:
        """(M, 2) points center + radii_smoothed * (cos t, sin t)."""
        direction = np.column_stack([np.cos(self.angles), np.sin(self.angles)])
        return np.asarray(self.center) + self.radii_smoothed[:, None] * direction

    def to_dict(self):
        return {
            "method": self.method,
            "center": [float(c) for c in self.center],
            "alpha": self.alpha,
            "partial": self.partial,
            "angles": self.angles.tolist(),
            "radii_raw": self.radii_raw.tolist(),
            "radii_smoothed": self.radii_smoothed.tolist(),
            "boundary": self.boundary.tolist(),
        }


def sigma_matrix(psi) -> np.ndarray:
    a, b, rho = psi
    c = rho * np.sqrt(a * b)
    return np.array([[a, c], [c, b]])


def covariance(data: DTAData, psi) -> np.ndarray:
    """V_i(psi) = Sigma(psi) + C_i stacked as (k, 2, 2)."""
    V = np.zeros((data.k, 2, 2))
    V[:, 0, 0] = data.s2[:, 0]
    V[:, 1, 1] = data.s2[:, 1]
    return V + sigma_matrix(psi)


def _inverse(V: np.ndarray):
    """Batched inverse and determinant of 2x2 matrices."""
    det = V[:, 0, 0] * V[:, 1, 1] - V[:, 0, 1] * V[:, 1, 0]
    if np.any(det <= 0) or np.any(V[:, 0, 0] <= 0):
        raise FitError("V_i is not positive definite")
    inv = np.empty_like(V)
    inv[:, 0, 0] = V[:, 1, 1] / det
    inv[:, 1, 1] = V[:, 0, 0] / det
    inv[:, 0, 1] = -V[:, 0, 1] / det
    inv[:, 1, 0] = -V[:, 1, 0] / det
    return inv, det


def deviance_bivar(data: DTAData, mu, psi) -> float:
    """sum log|V_i| + sum (y_i - mu)' V_i^-1 (y_i - mu)."""
    inv, det = _inverse(covariance(data, psi))
    r = data.y - np.asarray(mu, dtype=float)
    return float(np.sum(np.log(det)) + np.einsum("ki,kij,kj->", r, inv, r))


def gls_mean(data: DTAData, psi) -> np.ndarray:
    inv, _ = _inverse(covariance(data, psi))
    return np.linalg.solve(inv.sum(axis=0), np.einsum("kij,kj->i", inv, data.y))


def mean_covariance(data: DTAData, psi) -> np.ndarray:
    """Covariance of the GLS mean, (sum V_i^-1)^-1."""
    inv, _ = _inverse(covariance(data, psi))
    return np.linalg.inv(inv.sum(axis=0))


def score_residuals(Vinv: np.ndarray, r: np.ndarray) -> np.ndarray:
    """
    sum tr(V_i^-1 J_m) - sum r_i' V_i^-1 J_m V_i^-1 r_i for the three
    derivative patterns J_m of Sigma (A variance, B variance, covariance).
    """
    a = np.einsum("kij,kj->ki", Vinv, r)
    return np.array([
        np.sum(Vinv[:, 0, 0] - a[:, 0] ** 2),
        np.sum(Vinv[:, 1, 1] - a[:, 1] ** 2),
        2.0 * np.sum(Vinv[:, 0, 1] - a[:, 0] * a[:, 1]),
    ])


def _at_bound(psi, eps: float = 1e-8) -> bool:
    return bool(psi[0] <= eps or psi[1] <= eps or abs(psi[2]) >= RHO_BOUND - eps)


def _feasible(psi) -> bool:
    return bool(psi[0] >= 0 and psi[1] >= 0 and abs(psi[2]) <= RHO_BOUND)


def moment_start(data: DTAData, mu=None) -> np.ndarray:
    """Method-of-moments style starting point for psi."""
    y = data.y
    center = y.mean(axis=0) if mu is None else np.asarray(mu, dtype=float)
    spread = np.mean((y - center) ** 2, axis=0) - data.s2.mean(axis=0)
    a, b = np.maximum(spread, 0.05)
    rho = 0.0
    if data.k >= 3:
        with np.errstate(invalid="ignore", divide="ignore"):
            c = np.corrcoef(y[:, 0], y[:, 1])[0, 1]
        if np.isfinite(c):
            rho = float(np.clip(c, -0.9, 0.9))
    return np.array([a, b, rho])


def _jittered(base: np.ndarray, n: int) -> List[np.ndarray]:
    gen = rng.philox(JITTER_SEED)
    scale = np.exp(gen.normal(0.0, 0.7, size=(n, 2)))
    shift = gen.normal(0.0, 0.3, size=n)
    starts = []
    for j in range(n):
        a, b = np.maximum(base[:2], 0.05) * scale[j]
        starts.append(np.array([a, b, np.clip(base[2] + shift[j], -0.9, 0.9)]))
    return starts


def _clip(psi) -> np.ndarray:
    return np.clip(np.asarray(psi, dtype=float), _LOWER, _UPPER)


def _solve_equations(resid, starts) -> tuple:
    """Best least-squares solution of the three equations over the starts."""
    best_x, best_norm = None, np.inf
    for x0 in starts:
        try:
            sol = optimize.least_squares(resid, _clip(x0), bounds=(_LOWER, _UPPER), **_LSQ_OPTIONS)
        except (FitError, np.linalg.LinAlgError, ValueError) as e:
            logger.debug(f"Least squares failed from {x0}: {e}")
            continue
        norm = float(np.linalg.norm(sol.fun))
        if norm < best_norm:
            best_x, best_norm = sol.x, norm
        if norm < RESIDUAL_TOL:
            break
    return best_x, best_norm


def fit_constrained_bivar(data: DTAData, mu0, start=None) -> BivarFit:
    """
    Constrained ML estimate of psi under H0: mu = mu0.

    Minimizes the squared residuals of the three score equations over
    [0, inf)^2 x [-0.999, 0.999] with bounded trust-region least squares
    (scipy.optimize.least_squares), used instead of a Nelder-Mead simplex on the
    summed squares.
    When no interior root exists the deviance is minimized directly (L-BFGS-B)
    and the fit is reported as a boundary fit.

    Args:
        data: Observed or synthetic data
        mu0: Null mean pair
        start: Warm start for psi (tried before the jittered restarts)

    Returns:
        BivarFit: converged=False if neither an interior root nor a boundary
            minimum was found
    """
    mu0 = np.asarray(mu0, dtype=float).reshape(2)
    r = data.y - mu0

    def resid(x):
        inv, _ = _inverse(covariance(data, x))
        return score_residuals(inv, r)

    base = moment_start(data, mu0)
    starts = ([np.asarray(start, dtype=float)] if start is not None else [])
    starts += [base] + _jittered(base, N_RESTARTS - 1)
    psi, norm = _solve_equations(resid, starts)
    if psi is not None and norm < RESIDUAL_TOL:
        return BivarFit(mu=mu0, psi=psi, deviance=deviance_bivar(data, mu0, psi),
                        converged=True, iterations=len(starts), score_residual=norm,
                        boundary=_at_bound(psi))

    x0 = _clip(psi if psi is not None else base)
    res = optimize.minimize(lambda x: deviance_bivar(data, mu0, x), x0, method="L-BFGS-B",
                            bounds=list(zip(_LOWER, [None, None, RHO_BOUND])))
    psi = res.x
    boundary = _at_bound(psi)
    norm = float(np.linalg.norm(resid(psi)))
    if not boundary:
        logger.debug(f"Constrained bivariate fit failed at mu0={mu0}: residual {norm:.3g}")
    return BivarFit(mu=mu0, psi=psi, deviance=deviance_bivar(data, mu0, psi),
                    converged=boundary, iterations=int(res.nit), score_residual=norm,
                    boundary=boundary)


def fit_ml_bivar(data: DTAData, max_iter: int = 200, mu_tol: float = 1e-10,
                 psi_tol: float = 1e-8) -> BivarFit:
    """Unconstrained ML fit alternating the GLS mean and the constrained solve."""
    psi = moment_start(data)
    mu = gls_mean(data, psi)
    fit = None
    converged = False
    iteration = 0
    for iteration in range(1, max_iter + 1):
        fit = fit_constrained_bivar(data, mu, start=psi)
        mu_new = gls_mean(data, fit.psi)
        mu_step = np.max(np.abs(mu_new - mu))
        psi_step = np.max(np.abs(fit.psi - psi))
        mu, psi = mu_new, fit.psi
        if mu_step < mu_tol and psi_step < psi_tol:
            converged = True
            break
    if not converged:
        logger.warning(f"Bivariate ML alternation stopped after {max_iter} iterations")
    if fit.boundary:
        logger.info(f"Bivariate ML fit on the parameter boundary: psi={psi}")
    return BivarFit(mu=mu, psi=psi, deviance=deviance_bivar(data, mu, psi),
                    converged=converged and fit.converged, iterations=iteration,
                    score_residual=fit.score_residual, boundary=fit.boundary)


def pivot_residuals(U: np.ndarray, data: DTAData, psi, psi_hat_c) -> np.ndarray:
    """Score equations at psi_hat_c with data quadratic forms replaced by T_i(psi) u_i."""
    u = np.asarray(U, dtype=float).reshape(data.k, 2)
    inv_hat, _ = _inverse(covariance(data, psi_hat_c))
    T = np.linalg.cholesky(covariance(data, psi))
    return score_residuals(inv_hat, np.einsum("kij,kj->ki", T, u))


def pivot_psi_star(U: np.ndarray, data: DTAData, mu0, psi_hat_c) -> np.ndarray:
    """
    psi*(U): nuisance value whose synthetic data mu0 + T_i(psi) u_i satisfy the
    constrained score equations at psi_hat_c.

    Raises:
        DegenerateReplicate: interior minimizer with residual >= 1e-6
    """
    if np.asarray(U).size != 2 * data.k:
        raise InputError(f"U has length {np.asarray(U).size}, expected {2 * data.k}")
    psi_hat_c = np.asarray(psi_hat_c, dtype=float)
    inv_hat, _ = _inverse(covariance(data, psi_hat_c))
    u = np.asarray(U, dtype=float).reshape(data.k, 2)

    def resid(x):
        T = np.linalg.cholesky(covariance(data, x))
        return score_residuals(inv_hat, np.einsum("kij,kj->ki", T, u))

    starts = [psi_hat_c] + _jittered(psi_hat_c, N_RESTARTS - 1)
    psi, norm = _solve_equations(resid, starts)
    if psi is None:
        raise DegenerateReplicate("pivot optimizer failed")
    if norm < RESIDUAL_TOL or _at_bound(psi):
        return psi
    raise DegenerateReplicate(f"pivot residual {norm:.3g}")


def weight_jacobian(U: np.ndarray, data: DTAData, mu0, psi_hat_c, psi_star,
                    step: float = FD_STEP) -> np.ndarray:
    """
    d psi_hat / d psi at psi_star for psi -> constrained fit of mu0 + T(psi) u,
    by central differences (one-sided where the step leaves the parameter space).
    """
    u = np.asarray(U, dtype=float).reshape(data.k, 2)
    psi_star = np.asarray(psi_star, dtype=float)
    start = np.asarray(psi_hat_c, dtype=float)

    def refit(psi):
        fit = fit_constrained_bivar(data.synthetic(mu0, psi, u), mu0, start=start)
        if not fit.converged:
            raise DegenerateReplicate("refit for the weight did not converge")
        return fit.psi

    J = np.empty((3, 3))
    for j in range(3):
        h = step * max(1.0, abs(psi_star[j]))
        up, down = psi_star.copy(), psi_star.copy()
        up[j] += h
        down[j] -= h
        if not _feasible(up):
            up = psi_star.copy()
        if not _feasible(down):
            down = psi_star.copy()
        J[:, j] = (refit(up) - refit(down)) / (up[j] - down[j])
    return J


def weight_bivar(U: np.ndarray, data: DTAData, mu0, psi_hat_c, psi_star,
                 step: float = FD_STEP) -> float:
    """|det(d psi_hat / d psi')|^-1 at psi_star."""
    det = np.linalg.det(weight_jacobian(U, data, mu0, psi_hat_c, psi_star, step))
    if not np.isfinite(det) or abs(det) < 1e-12:
        raise DegenerateReplicate("singular Jacobian")
    return float(1.0 / abs(det))


class BivariateMeanModel(PivotModel):
    """Pivot contract for H0: (muA, muB) = mu0 with nuisance psi"""

    def __init__(self, data: DTAData):
        self._data = data

    @property
    def draw_dimension(self) -> int:
        return 2 * self._data.k

    def constrained_fit(self, data, phi0) -> NuisanceFit:
        fit = fit_constrained_bivar(data, phi0)
        return NuisanceFit(nuisance=fit.psi, deviance=fit.deviance, converged=fit.converged)

    def unconstrained_fit(self, data) -> FullFit:
        fit = fit_ml_bivar(data)
        return FullFit(estimate=fit.mu, nuisance=fit.psi, deviance=fit.deviance,
                       converged=fit.converged)

    def solve_pivot(self, U, phi0, psi_c):
        return pivot_psi_star(U, self._data, phi0, psi_c)

    def synth_data(self, U, phi0, psi):
        return self._data.synthetic(phi0, psi, U)

    def weight(self, U, phi0, psi_c, psi_star) -> float:
        return weight_bivar(U, self._data, phi0, psi_c, psi_star)


def p_value_bivar(data: DTAData, mu0, B: int = config.DEFAULT_B, seed: int = 0,
                  workers: Optional[int] = None,
                  unconstrained: Optional[FullFit] = None) -> PValueResult:
    """Monte Carlo conditional p-value of H0: (muA, muB) = mu0."""
    if data.k < 3:
        logger.warning(f"Only {data.k} studies for 3 nuisance parameters")
    mu0 = np.asarray(mu0, dtype=float).reshape(2)
    return conditional_p_value(BivariateMeanModel(data), data, mu0, B, seed,
                               workers=workers, unconstrained=unconstrained)


def smooth_radii(radii: np.ndarray, window: int = config.SMOOTHING_WINDOW) -> np.ndarray:
    """Circular moving average; NaN radii are skipped within each window."""
    radii = np.asarray(radii, dtype=float)
    ok = np.isfinite(radii)
    total = uniform_filter1d(np.where(ok, radii, 0.0), size=window, mode="wrap")
    count = uniform_filter1d(ok.astype(float), size=window, mode="wrap")
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(count > 1e-12, total / np.where(count > 1e-12, count, 1.0), np.nan)


def confidence_region(data: DTAData, alpha: float = config.DEFAULT_ALPHA,
                      M: int = config.DEFAULT_REGION_POINTS, B: int = config.DEFAULT_B,
                      seed: int = 0, tol: Optional[float] = None,
                      max_expand: int = config.DEFAULT_MAX_EXPAND,
                      workers: Optional[int] = None) -> ConfidenceRegion:
    """
    Monte Carlo confidence region for (muA, muB).

    For each of M equally spaced angles the radius solves p(center + r d) = alpha
    by bracketing and bisection. All evaluations share the same B draws.
    Angles whose radius cannot be bracketed get NaN and the region is partial.
    """
    if M < 8:
        raise InputError(f"M must be at least 8, got {M}")
    if not 0.0 < alpha < 1.0:
        raise InputError(f"alpha must lie in (0, 1), got {alpha}")
    model = BivariateMeanModel(data)
    full = model.unconstrained_fit(data)
    if not full.converged:
        raise FitError("Unconstrained bivariate fit did not converge")
    center = np.asarray(full.estimate, dtype=float)
    cov = mean_covariance(data, full.nuisance)
    scale = np.sqrt(stats.chi2.ppf(1 - alpha, 2))

    cache = {}

    def p_at(point):
        key = (float(point[0]), float(point[1]))
        if key not in cache:
            cache[key] = p_value_bivar(data, point, B, seed, workers=workers,
                                       unconstrained=full).p
        return cache[key]

    angles = 2.0 * np.pi * np.arange(M) / M
    radii = np.full(M, np.nan)
    failed = []
    for m, t in enumerate(angles):
        d = np.array([np.cos(t), np.sin(t)])
        half_width = scale * np.sqrt(d @ cov @ d)
        try:
            interval = invert_to_interval(lambda r: p_at(center + r * d), 0.0, alpha, tol=tol,
                                          max_expand=max_expand, half_width=half_width,
                                          lower_bound=0.0)
            radii[m] = interval.upper
        except BracketError as e:
            logger.warning(f"No radius at angle {t:.4f}: {e}")
            failed.append(m)
        logger.debug(f"Angle {m + 1}/{M}: r={radii[m]:.6g}")

    if failed:
        logger.warning(f"Region partial: {len(failed)} of {M} angles failed")
    return ConfidenceRegion(center=center, angles=angles, radii_raw=radii,
                            radii_smoothed=smooth_radii(radii), alpha=alpha,
                            partial=bool(failed), failed_angles=failed)


def approx_region(data: DTAData, alpha: float = config.DEFAULT_ALPHA,
                  M: int = config.DEFAULT_REGION_POINTS) -> ConfidenceRegion:
    """
    Approximate elliptical region from the REML fit:
        muA = muA_hat + c sA cos t,  muB = muB_hat + c sB cos(t + arccos rho),
    c^2 the chi-square(2) upper-alpha point.
    """
    from exactmeta.comparators import reitsma_reml  # Import here to avoid circular imports
    reml = reitsma_reml(data)
    points = ellipse_points(reml.mu, reml.cov_mu, alpha, M)
    offset = points - reml.mu
    angles = np.mod(np.arctan2(offset[:, 1], offset[:, 0]), 2.0 * np.pi)
    radii = np.hypot(offset[:, 0], offset[:, 1])
    return ConfidenceRegion(center=np.asarray(reml.mu), angles=angles, radii_raw=radii,
                            radii_smoothed=radii.copy(), alpha=alpha, method="acr")


def ellipse_points(center, cov_mu, alpha: float, M: int) -> np.ndarray:
    s = np.sqrt(np.diag(cov_mu))
    rho = float(np.clip(cov_mu[0, 1] / (s[0] * s[1]), -1.0, 1.0))
    c = np.sqrt(stats.chi2.ppf(1 - alpha, 2))
    t = 2.0 * np.pi * np.arange(M) / M
    return np.column_stack([
        center[0] + c * s[0] * np.cos(t),
        center[1] + c * s[1] * np.cos(t + np.arccos(rho)),
    ])


def transform_to_roc(points) -> np.ndarray:
    """(muA, muB) -> (sensitivity, false-positive rate) = (expit(muA), 1 - expit(muB))."""
    if isinstance(points, ConfidenceRegion):
        points = points.boundary
    points = np.atleast_2d(np.asarray(points, dtype=float))
    return np.column_stack([expit(points[:, 0]), 1.0 - expit(points[:, 1])])


def sroc_points(fit: BivarFit, grid) -> np.ndarray:
    """
    Regression line E[muA | muB] = muA_hat + rho (sigmaA / sigmaB)(muB - muB_hat)
    over a grid of muB, in ROC space.
    """
    sigma_a2, sigma_b2, rho = fit.psi
    if sigma_b2 <= 0:
        raise InputError("SROC line is undefined when sigmaB2 = 0")
    grid = np.asarray(grid, dtype=float)
    slope = rho * np.sqrt(sigma_a2 / sigma_b2)
    mu_a = fit.mu[0] + slope * (grid - fit.mu[1])
    return transform_to_roc(np.column_stack([mu_a, grid]))
