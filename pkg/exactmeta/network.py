"""
Contrast-based network meta-analysis.

Model: y = X beta + Z u + eps with V(tau2) = tau2 Q + S, where Q is
block-diagonal with compound-symmetry blocks P(0.5) (unit diagonal, 0.5
off-diagonal) and S holds the within-study covariance blocks. beta are the
effects of treatments 1..p against the reference treatment 0.

Any linear combination c'beta is tested by reparametrizing the design so
that it becomes the first coefficient; the remaining coefficients omega and
tau2 are the nuisance parameters of the Monte Carlo test.
"""
import copy
import logging
from collections import OrderedDict
from dataclasses import dataclass
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np
from scipy import linalg, optimize, stats

from exactmeta import config
from exactmeta.errors import DegenerateReplicate, FitError, InputError
from exactmeta.mc_core import (
    ConfidenceInterval, FullFit, NuisanceFit, PivotModel, PValueResult,
    conditional_p_value, invert_to_interval, with_endpoint_diagnostics
)

logger = logging.getLogger(__name__)

# Reference pseudo-arm added to studies that lack the reference treatment
PSEUDO_EVENTS = 0.001
PSEUDO_N = 0.01

TAU_MAX_FACTOR = 10.0
TAU_MAX_GROWTH = 3
ROOT_XTOL = 1e-14
FD_STEP = 1e-5


@dataclass(frozen=True)
class ArmRecord:
    """One arm of one study"""
    study_id: str
    treatment: int
    events: float
    n: float

    def __post_init__(self):
        if self.n <= 0:
            raise InputError(f"Study {self.study_id}: arm size must be positive, got {self.n}")
        if not 0 <= self.events <= self.n:
            raise InputError(f"Study {self.study_id}: events must lie in [0, n], got {self.events}")
        if self.treatment < 0:
            raise InputError(f"Study {self.study_id}: treatment ids must be nonnegative")


@dataclass(frozen=True)
class ContrastStudy:
    """Log odds ratio contrasts of treatments against the reference"""
    study_id: str
    treatments: Tuple[int, ...]
    y: np.ndarray
    S: np.ndarray

    def __post_init__(self):
        y = np.atleast_1d(np.asarray(self.y, dtype=float))
        S = np.atleast_2d(np.asarray(self.S, dtype=float))
        treatments = tuple(int(t) for t in self.treatments)
        if len(treatments) < 1:
            raise InputError(f"Study {self.study_id}: at least one contrast is required")
        if len(set(treatments)) != len(treatments):
            raise InputError(f"Study {self.study_id}: treatment ids must be distinct")
        if any(t < 1 for t in treatments):
            raise InputError(f"Study {self.study_id}: contrast treatments must be non-reference ids")
        if y.shape != (len(treatments),) or S.shape != (len(treatments), len(treatments)):
            raise InputError(f"Study {self.study_id}: y and S do not match {len(treatments)} contrasts")
        if not np.all(np.isfinite(y)) or not np.allclose(S, S.T):
            raise InputError(f"Study {self.study_id}: contrasts must be finite and S symmetric")
        try:
            np.linalg.cholesky(S)
        except np.linalg.LinAlgError as e:
            raise InputError(f"Study {self.study_id}: S is not positive definite") from e
        object.__setattr__(self, "treatments", treatments)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "S", S)

    @property
    def size(self) -> int:
        return len(self.treatments)


def _log_odds(events, n):
    events, n = np.asarray(events, dtype=float), np.asarray(n, dtype=float)
    return np.log(events / (n - events)), 1.0 / events + 1.0 / (n - events)


def contrasts_from_arms(arms: Iterable[ArmRecord], augment: bool = False,
                        reference: int = 0) -> List[ContrastStudy]:
    """
    Log odds ratio contrasts versus the reference arm, per study.

    Args:
        arms: Arm records; studies keep their order of first appearance
        augment: Give studies without the reference arm a pseudo-arm with
            0.001 events in 0.01 patients
        reference: Reference treatment id

    Returns:
        List[ContrastStudy]: y_r = log odds(arm r) - log odds(reference); S has
            the arm variances on the diagonal plus the shared reference variance
    """
    by_study = OrderedDict()
    for arm in arms:
        by_study.setdefault(arm.study_id, []).append(arm)

    studies = []
    for study_id, study_arms in by_study.items():
        if len(study_arms) < 2:
            raise InputError(f"Study {study_id} has a single arm")
        treatments = [a.treatment for a in study_arms]
        if len(set(treatments)) != len(treatments):
            raise InputError(f"Study {study_id} lists a treatment twice")

        events = np.array([a.events for a in study_arms], dtype=float)
        n = np.array([a.n for a in study_arms], dtype=float)
        if np.any(events == 0) or np.any(events == n):
            events, n = events + 0.5, n + 1.0

        if reference in treatments:
            ref = treatments.index(reference)
            ref_lo, ref_var = _log_odds(events[ref], n[ref])
            others = [i for i in range(len(treatments)) if i != ref]
        elif augment:
            logger.info(f"Study {study_id}: adding reference pseudo-arm")
            ref_lo, ref_var = _log_odds(PSEUDO_EVENTS, PSEUDO_N)
            others = list(range(len(treatments)))
        else:
            raise InputError(f"Study {study_id} lacks the reference arm and augmentation is off")

        others.sort(key=lambda i: treatments[i])
        lo, var = _log_odds(events[others], n[others])
        studies.append(ContrastStudy(
            study_id=str(study_id),
            treatments=tuple(treatments[i] for i in others),
            y=lo - ref_lo,
            S=np.diag(var) + ref_var
        ))
    return studies


def compound_symmetry(size: int, rho: float = 0.5) -> np.ndarray:
    """P(rho): unit diagonal, rho elsewhere."""
    return np.full((size, size), rho) + (1.0 - rho) * np.eye(size)


class NetworkModel:
    """Stacked contrast data with design X and block structure"""

    def __init__(self, y, X, S_blocks: Sequence[np.ndarray], study_ids: Sequence[str] = None,
                 labels: Sequence[str] = None, check_rank: bool = True):
        self.y = np.asarray(y, dtype=float)
        self.X = np.atleast_2d(np.asarray(X, dtype=float))
        self.S_blocks = [np.atleast_2d(np.asarray(s, dtype=float)) for s in S_blocks]
        self.sizes = tuple(s.shape[0] for s in self.S_blocks)
        self.study_ids = list(study_ids) if study_ids is not None else [str(i + 1) for i in range(self.k)]
        self.labels = list(labels) if labels is not None else [str(j) for j in range(self.p + 1)]
        if self.y.shape != (self.N,) or self.X.shape[0] != self.N:
            raise InputError(f"Stacked data have {self.y.size} contrasts, blocks give {self.N}")
        if check_rank and np.linalg.matrix_rank(self.X) < self.p:
            raise InputError("Disconnected network: design matrix is rank deficient")
        self.S = linalg.block_diag(*self.S_blocks)
        self.Q = linalg.block_diag(*[compound_symmetry(size) for size in self.sizes])

    @property
    def N(self) -> int:
        return sum(self.sizes)

    @property
    def k(self) -> int:
        return len(self.sizes)

    @property
    def p(self) -> int:
        return self.X.shape[1]

    @classmethod
    def from_studies(cls, studies: Sequence[ContrastStudy], p: Optional[int] = None,
                     labels: Sequence[str] = None) -> "NetworkModel":
        studies = list(studies)
        if not studies:
            raise InputError("No studies")
        p = max(max(s.treatments) for s in studies) if p is None else p
        rows = []
        for study in studies:
            for t in study.treatments:
                if t > p:
                    raise InputError(f"Treatment id {t} exceeds the number of treatments {p}")
                row = np.zeros(p)
                row[t - 1] = 1.0
                rows.append(row)
        return cls(np.concatenate([s.y for s in studies]), np.array(rows),
                   [s.S for s in studies], [s.study_id for s in studies], labels)

    def with_y(self, y) -> "NetworkModel":
        """Same design and covariances, new contrasts."""
        other = copy.copy(self)
        other.y = np.asarray(y, dtype=float)
        return other

    def with_design(self, X) -> "NetworkModel":
        other = copy.copy(self)
        other.X = np.asarray(X, dtype=float)
        return other


@dataclass(frozen=True)
class NetFit:
    """Fit of beta and tau2; cov_beta is (X'V^-1 X)^-1 at tau2"""
    beta: np.ndarray
    tau2: float
    deviance: float
    converged: bool
    cov_beta: np.ndarray
    iterations: int = 0


@dataclass(frozen=True)
class ConstrainedNetFit:
    """Fit under H0: beta_1 = beta10"""
    omega: np.ndarray
    tau2: float
    deviance: float
    converged: bool


def build_V(model: NetworkModel, tau2: float) -> np.ndarray:
    """V(tau2) = tau2 Q + S."""
    if tau2 < 0:
        raise InputError(f"tau2 must be nonnegative, got {tau2}")
    return tau2 * model.Q + model.S


def _blocks(model: NetworkModel, tau2: float) -> List[np.ndarray]:
    return [tau2 * compound_symmetry(s.shape[0]) + s for s in model.S_blocks]


def cholesky_V(model: NetworkModel, tau2: float) -> np.ndarray:
    """Lower Cholesky factor A(tau2) of V(tau2), computed blockwise."""
    try:
        return linalg.block_diag(*[np.linalg.cholesky(b) for b in _blocks(model, tau2)])
    except np.linalg.LinAlgError as e:
        raise FitError(f"V is not positive definite at tau2={tau2}") from e


def inverse_V(model: NetworkModel, tau2: float) -> np.ndarray:
    try:
        inverses = [linalg.cho_solve(linalg.cho_factor(b, lower=True), np.eye(b.shape[0]))
                    for b in _blocks(model, tau2)]
    except np.linalg.LinAlgError as e:
        raise FitError(f"V is not positive definite at tau2={tau2}") from e
    return linalg.block_diag(*inverses)


def log_det_V(model: NetworkModel, tau2: float) -> float:
    return float(2.0 * np.sum(np.log(np.diag(cholesky_V(model, tau2)))))


def deviance_net(model: NetworkModel, beta, tau2: float) -> float:
    """log|V| + r'V^-1 r with r = y - X beta."""
    if tau2 < 0:
        raise InputError(f"tau2 must be nonnegative, got {tau2}")
    L = cholesky_V(model, tau2)
    z = linalg.solve_triangular(L, model.y - model.X @ np.asarray(beta, dtype=float), lower=True)
    return float(2.0 * np.sum(np.log(np.diag(L))) + z @ z)


def _gls(V_inv: np.ndarray, W: np.ndarray, y: np.ndarray) -> np.ndarray:
    if W.shape[1] == 0:
        return np.zeros(0)
    return np.linalg.solve(W.T @ V_inv @ W, W.T @ V_inv @ y)


def _variance_score(model: NetworkModel, y: np.ndarray, W: np.ndarray, tau2: float):
    """r'V^-1 Q V^-1 r - tr(V^-1 Q) with coefficients of W profiled by GLS."""
    V_inv = inverse_V(model, tau2)
    coef = _gls(V_inv, W, y)
    a = V_inv @ (y - W @ coef)
    return float(a @ model.Q @ a - np.sum(V_inv * model.Q)), coef


def _fit_variance(model: NetworkModel, y: np.ndarray, W: np.ndarray):
    """
    Root in tau2 of the profiled score on [0, tau_max]; 0 when the score at 0
    is not positive.

    Returns:
        Tuple[float, np.ndarray, bool, int]: tau2, coefficients, converged, iterations
    """
    score0, coef0 = _variance_score(model, y, W, 0.0)
    if score0 <= 0:
        return 0.0, coef0, True, 0

    hi = TAU_MAX_FACTOR * max(float(np.max((y - W @ coef0) ** 2)), 1e-12)
    for _ in range(TAU_MAX_GROWTH + 1):
        if _variance_score(model, y, W, hi)[0] < 0:
            break
        hi *= 4.0
    else:
        logger.warning(f"Variance score still positive at tau2={hi}")
        return hi, _variance_score(model, y, W, hi)[1], False, 0

    tau2, info = optimize.brentq(lambda t: _variance_score(model, y, W, t)[0], 0.0, hi,
                                 xtol=ROOT_XTOL, full_output=True, disp=False)
    return float(tau2), _variance_score(model, y, W, tau2)[1], bool(info.converged), int(info.iterations)


def _cov_beta(model: NetworkModel, tau2: float) -> np.ndarray:
    V_inv = inverse_V(model, tau2)
    return np.linalg.inv(model.X.T @ V_inv @ model.X)


def fit_ml_net(model: NetworkModel) -> NetFit:
    """ML fit: beta by GLS at each tau2, tau2 from the profiled score."""
    tau2, beta, converged, iterations = _fit_variance(model, model.y, model.X)
    return NetFit(beta=beta, tau2=tau2, deviance=deviance_net(model, beta, tau2),
                  converged=converged, cov_beta=_cov_beta(model, tau2), iterations=iterations)


def _reml_objective(model: NetworkModel, tau2: float) -> float:
    V_inv = inverse_V(model, tau2)
    information = model.X.T @ V_inv @ model.X
    beta = np.linalg.solve(information, model.X.T @ V_inv @ model.y)
    r = model.y - model.X @ beta
    return float(log_det_V(model, tau2) + np.linalg.slogdet(information)[1] + r @ V_inv @ r)


def tau_max(model: NetworkModel) -> float:
    """Upper end of the tau2 search: 10 x the largest squared fixed-effect residual."""
    V_inv = inverse_V(model, 0.0)
    r = model.y - model.X @ _gls(V_inv, model.X, model.y)
    return TAU_MAX_FACTOR * max(float(np.max(r ** 2)), 1e-12)


def fit_reml_net(model: NetworkModel) -> NetFit:
    """
    REML fit: profiled ML objective plus log|X'V^-1 X|, minimized over [0, tau_max].

    The 1-D search is bounded Brent (golden-section steps with parabolic
    interpolation) rather than plain golden section; tau2 = 0 is compared
    separately.
    """
    upper = tau_max(model)
    res = optimize.minimize_scalar(lambda t: _reml_objective(model, t), bounds=(0.0, upper),
                                   method="bounded", options={"xatol": 1e-10})
    tau2 = float(res.x)
    if _reml_objective(model, 0.0) <= res.fun:
        tau2 = 0.0
    V_inv = inverse_V(model, tau2)
    beta = _gls(V_inv, model.X, model.y)
    return NetFit(beta=beta, tau2=tau2, deviance=deviance_net(model, beta, tau2),
                  converged=bool(res.success), cov_beta=_cov_beta(model, tau2),
                  iterations=int(res.nfev))


def contrast_matrix(c) -> np.ndarray:
    """
    Full-rank A with first row c' and standard basis rows for every coordinate
    except argmax |c_j|.
    """
    c = np.asarray(c, dtype=float).ravel()
    if not np.any(c != 0) or not np.all(np.isfinite(c)):
        raise InputError("Contrast vector must be finite and nonzero")
    pivot = int(np.argmax(np.abs(c)))
    rows = [c] + [np.eye(c.size)[j] for j in range(c.size) if j != pivot]
    return np.array(rows)


def contrast_transform(model: NetworkModel, c) -> NetworkModel:
    """Model with design X A^-1, whose first coefficient is c'beta."""
    c = np.asarray(c, dtype=float).ravel()
    if c.size != model.p:
        raise InputError(f"Contrast has length {c.size}, expected {model.p}")
    A = contrast_matrix(c)
    return model.with_design(model.X @ np.linalg.inv(A))


def _split(model: NetworkModel):
    return model.X[:, 0], model.X[:, 1:]


def fit_constrained_net(model: NetworkModel, beta10: float) -> ConstrainedNetFit:
    """
    ML fit of (omega, tau2) under H0: beta_1 = beta10, where X = (W1, W2) and
    omega are the coefficients of W2.
    """
    W1, W2 = _split(model)
    y0 = model.y - W1 * beta10
    tau2, omega, converged, _ = _fit_variance(model, y0, W2)
    r = y0 - W2 @ omega
    L = cholesky_V(model, tau2)
    z = linalg.solve_triangular(L, r, lower=True)
    return ConstrainedNetFit(omega=omega, tau2=tau2,
                             deviance=float(2.0 * np.sum(np.log(np.diag(L))) + z @ z),
                             converged=converged)


def constrained_residuals(model: NetworkModel, beta10: float, omega, tau2: float) -> np.ndarray:
    """Both constrained score equations at (omega, tau2), for plug-back checks."""
    W1, W2 = _split(model)
    V_inv = inverse_V(model, tau2)
    r = model.y - W1 * beta10 - W2 @ np.asarray(omega, dtype=float)
    a = V_inv @ r
    return np.concatenate([W2.T @ a, [np.sum(V_inv * model.Q) - a @ model.Q @ a]])


class _PivotSystem:
    """Quantities at (beta10, tau2_hat_c) shared by the pivot and its weight"""

    def __init__(self, model: NetworkModel, tau2_hat_c: float):
        self.model = model
        _, self.W2 = _split(model)
        self.V_inv = inverse_V(model, tau2_hat_c)
        self.info = self.W2.T @ self.V_inv @ self.W2
        self.H = (np.linalg.solve(self.info, self.W2.T @ self.V_inv)
                  if self.W2.shape[1] else np.zeros((0, model.N)))
        self.B = np.eye(model.N) - self.W2 @ self.H
        self.M = self.V_inv @ model.Q @ self.V_inv
        self.lhs = float(np.sum(self.V_inv * model.Q))

    def rhs(self, u: np.ndarray, tau2: float) -> float:
        e = self.B @ (cholesky_V(self.model, tau2) @ u)
        return float(e @ self.M @ e)


def pivot_net(u: np.ndarray, model: NetworkModel, beta10: float, omega_hat_c,
              tau2_hat_c: float):
    """
    (omega*, tau2*) whose synthetic data W1 beta10 + W2 omega + A(tau2) u
    reproduce the constrained fit (omega_hat_c, tau2_hat_c).

    Returns:
        Tuple[np.ndarray, float]: (omega*, tau2*); tau2* = 0 when the quadratic
            form already exceeds tr(V^-1 Q) at 0

    Raises:
        DegenerateReplicate: no sign change within the tau2 search range
    """
    u = np.asarray(u, dtype=float)
    if u.shape != (model.N,):
        raise InputError(f"u has length {u.size}, expected {model.N}")
    system = _PivotSystem(model, tau2_hat_c)

    def gap(t):
        return system.rhs(u, t) - system.lhs

    if gap(0.0) >= 0:
        tau2 = 0.0
    else:
        hi = TAU_MAX_FACTOR * max(tau2_hat_c, float(np.max(np.diag(model.S))), 1e-12)
        for _ in range(TAU_MAX_GROWTH + 1):
            if gap(hi) > 0:
                break
            hi *= 4.0
        else:
            raise DegenerateReplicate(f"no tau2 root below {hi}")
        tau2 = float(optimize.brentq(gap, 0.0, hi, xtol=ROOT_XTOL))

    omega = np.asarray(omega_hat_c, dtype=float) - system.H @ (cholesky_V(model, tau2) @ u)
    return omega, tau2


def pivot_equations(u, model: NetworkModel, beta10: float, omega, tau2: float,
                    omega_hat_c, tau2_hat_c: float) -> np.ndarray:
    """
    G = (G1, G2): the constrained score equations at (omega_hat_c, tau2_hat_c)
    for the synthetic data generated from (omega, tau2) and u.
    """
    _, W2 = _split(model)
    V_inv = inverse_V(model, tau2_hat_c)
    e = W2 @ (np.asarray(omega, dtype=float) - np.asarray(omega_hat_c, dtype=float)) \
        + cholesky_V(model, tau2) @ np.asarray(u, dtype=float)
    a = V_inv @ e
    return np.concatenate([W2.T @ a, [np.sum(V_inv * model.Q) - a @ model.Q @ a]])


def pivot_jacobians(u, model: NetworkModel, beta10: float, omega_hat_c, tau2_hat_c: float,
                    omega_star, tau2_star: float, step: float = FD_STEP):
    """
    Numerator (d/d omega_hat_c, d/d tau2_hat_c) and denominator
    (d/d omega, d/d tau2) Jacobians of G at the pivot solution. The omega
    blocks are closed form; the tau2 columns are central differences.
    """
    _, W2 = _split(model)
    u = np.asarray(u, dtype=float)
    omega_star = np.asarray(omega_star, dtype=float)
    omega_hat_c = np.asarray(omega_hat_c, dtype=float)
    V_inv = inverse_V(model, tau2_hat_c)
    e = W2 @ (omega_star - omega_hat_c) + cholesky_V(model, tau2_star) @ u
    M = V_inv @ model.Q @ V_inv

    d_omega = np.vstack([W2.T @ V_inv @ W2, -2.0 * (W2.T @ M @ e)[None, :]])

    def G(omega, tau2, tau2_c):
        return pivot_equations(u, model, beta10, omega, tau2, omega_hat_c, tau2_c)

    h = step * max(1.0, tau2_star)
    d_tau2 = (G(omega_star, tau2_star + h, tau2_hat_c) - G(omega_star, tau2_star - h, tau2_hat_c)) / (2 * h)
    h_c = step * max(1.0, tau2_hat_c)
    d_tau2_c = (G(omega_star, tau2_star, tau2_hat_c + h_c) - G(omega_star, tau2_star, tau2_hat_c - h_c)) / (2 * h_c)

    numerator = np.column_stack([-d_omega, d_tau2_c])
    denominator = np.column_stack([d_omega, d_tau2])
    return numerator, denominator


def weight_net(u, model: NetworkModel, beta10: float, omega_hat_c, tau2_hat_c: float,
               omega_star, tau2_star: float, step: float = FD_STEP) -> float:
    """|det(dG/d(omega_hat_c, tau2_hat_c)) / det(dG/d(omega, tau2))|."""
    numerator, denominator = pivot_jacobians(u, model, beta10, omega_hat_c, tau2_hat_c,
                                             omega_star, tau2_star, step)
    det_d = np.linalg.det(denominator)
    if not np.isfinite(det_d) or abs(det_d) < 1e-300:
        raise DegenerateReplicate("singular pivot Jacobian")
    return float(abs(np.linalg.det(numerator) / det_d))


class NetworkContrastModel(PivotModel):
    """Pivot contract for H0: beta_1 = beta10 in a (transformed) network model"""

    def __init__(self, model: NetworkModel):
        self._model = model

    @property
    def draw_dimension(self) -> int:
        return self._model.N

    def constrained_fit(self, data, phi0) -> NuisanceFit:
        fit = fit_constrained_net(data, float(phi0))
        return NuisanceFit(nuisance=(fit.omega, fit.tau2), deviance=fit.deviance,
                           converged=fit.converged)

    def unconstrained_fit(self, data) -> FullFit:
        fit = fit_ml_net(data)
        return FullFit(estimate=float(fit.beta[0]), nuisance=(fit.beta[1:], fit.tau2),
                       deviance=fit.deviance, converged=fit.converged)

    def solve_pivot(self, U, phi0, psi_c):
        omega_hat_c, tau2_hat_c = psi_c
        return pivot_net(U, self._model, float(phi0), omega_hat_c, tau2_hat_c)

    def synth_data(self, U, phi0, psi):
        omega, tau2 = psi
        W1, W2 = _split(self._model)
        y = W1 * float(phi0) + W2 @ omega + cholesky_V(self._model, tau2) @ U
        return self._model.with_y(y)

    def weight(self, U, phi0, psi_c, psi_star) -> float:
        omega_hat_c, tau2_hat_c = psi_c
        omega_star, tau2_star = psi_star
        return weight_net(U, self._model, float(phi0), omega_hat_c, tau2_hat_c,
                          omega_star, tau2_star)


def p_value_contrast(model: NetworkModel, c, eta0: float, B: int = config.DEFAULT_B,
                     seed: int = 0, workers: Optional[int] = None) -> PValueResult:
    """Monte Carlo conditional p-value of H0: c'beta = eta0."""
    transformed = contrast_transform(model, c)
    return conditional_p_value(NetworkContrastModel(transformed), transformed, eta0, B, seed,
                               workers=workers)


def ci_contrast(model: NetworkModel, c, alpha: float = config.DEFAULT_ALPHA,
                B: int = config.DEFAULT_B, seed: int = 0, tol: Optional[float] = None,
                max_expand: int = config.DEFAULT_MAX_EXPAND, diagnostics: bool = True,
                workers: Optional[int] = None) -> ConfidenceInterval:
    """Monte Carlo confidence interval for c'beta."""
    transformed = contrast_transform(model, c)
    pivot_model = NetworkContrastModel(transformed)
    fit = fit_ml_net(transformed)
    if not fit.converged:
        raise FitError("Unconstrained network fit did not converge")
    full = FullFit(estimate=float(fit.beta[0]), nuisance=(fit.beta[1:], fit.tau2),
                   deviance=fit.deviance, converged=True)

    def p_result(eta0):
        return conditional_p_value(pivot_model, transformed, eta0, B, seed, workers=workers,
                                   unconstrained=full)

    half_width = stats.norm.ppf(1 - alpha / 2) * np.sqrt(fit.cov_beta[0, 0])
    interval = invert_to_interval(lambda eta0: p_result(eta0).p, full.estimate, alpha,
                                  tol=tol, max_expand=max_expand, half_width=half_width)
    return with_endpoint_diagnostics(interval, p_result) if diagnostics else interval


def basis_contrast(p: int, treatment: int) -> np.ndarray:
    """c selecting beta_treatment (treatment in 1..p)."""
    c = np.zeros(p)
    c[treatment - 1] = 1.0
    return c
