"""
Coverage experiments for the univariate, bivariate and network methods.

Each replication regenerates its dataset from (generator, truth, seed) alone,
so replications can run on threads or on Celery workers and the aggregated
report is identical either way.
"""
import concurrent.futures
import itertools
import logging
import time
from dataclasses import dataclass, field, asdict
from typing import Any, Dict, List, Optional

import numpy as np
import pandas as pd
from scipy.special import expit, logit

from exactmeta import config, rng
from exactmeta.bivariate import DTAData, p_value_bivar
from exactmeta.comparators import (
    acr_contains, dl_interval, knha_interval, lr_interval_uni, lr_intervals_net,
    reml_interval_uni, reml_wald_net
)
from exactmeta.errors import ExactMetaError, InputError
from exactmeta.network import (
    ArmRecord, NetworkModel, basis_contrast, compound_symmetry, contrasts_from_arms,
    p_value_contrast
)
from exactmeta.univariate import UnivariateData, ci_mu

logger = logging.getLogger(__name__)

UNI_MU = -0.8
DTA_MU = (1.0, -1.0)
NMA_MU = (0.4, 0.7, 1.0)
NMA_TREATMENTS = ["A", "B", "C", "D"]
BASELINE_RISK = (0.095, 0.65)
ARM_SIZE = (20, 200)
WITHIN_VARIANCE = (0.009, 0.6)

# Trial designs of the four-treatment network: design -> number of trials
NETWORK_DESIGNS = {
    8: {"AB": 1, "AC": 3, "AD": 1, "CD": 1, "ACD": 1, "BCD": 1},
    12: {"AB": 2, "AC": 4, "AD": 2, "BD": 1, "CD": 1, "ACD": 1, "BCD": 1},
    16: {"AB": 2, "AC": 6, "AD": 3, "BC": 1, "BD": 1, "CD": 1, "ACD": 1, "BCD": 1},
}

PRESETS = {
    "table1": {
        "generator": "uni",
        "grid": {"k": [3, 5, 7, 9], "tau2": [0.10, 0.20]},
        "methods": ["mc", "knha", "lr", "reml", "dl"],
        "R": 2000,
    },
    "table2": {
        "generator": "dta",
        "grid": {"tau2": [0.5, 0.75, 1.0], "rho": [0.0, 0.4, 0.8], "k": [8, 12, 16]},
        "methods": ["mc", "acr"],
        "R": 1000,
    },
    "table3": {
        "generator": "nma",
        "grid": {"k": [8, 12, 16], "tau": [0.2, 0.3, 0.4]},
        "methods": ["lr", "reml", "mc"],
        "R": 2000,
    },
}


@dataclass(frozen=True)
class SimReplicate:
    """One generated dataset with the truth it was generated from"""
    tag: str
    truth: Dict[str, Any]
    seed: int
    latent: np.ndarray
    data: Any


def _arm_sizes(gen: np.random.Generator, size) -> np.ndarray:
    return gen.integers(ARM_SIZE[0], ARM_SIZE[1] + 1, size=size)


def gen_univariate(k: int, tau2: float, seed: int, mu: float = UNI_MU) -> SimReplicate:
    """
    Two-arm binary-outcome trials with log odds ratios theta_i ~ N(mu, tau2).

    Control risks are uniform on [0.095, 0.65]; both arms of a trial share one
    size drawn uniformly from 20..200.
    """
    if k < 2:
        raise InputError(f"k must be at least 2, got {k}")
    gen = rng.philox(seed)
    theta = mu + np.sqrt(tau2) * gen.standard_normal(k)
    p0 = gen.uniform(*BASELINE_RISK, size=k)
    n = _arm_sizes(gen, k)
    p1 = p0 * np.exp(theta) / (1.0 - p0 + p0 * np.exp(theta))
    events_c = gen.binomial(n, p0)
    events_t = gen.binomial(n, p1)
    data = UnivariateData.from_counts(events_t, n, events_c, n)
    return SimReplicate(tag="uni", truth={"mu": mu, "tau2": tau2}, seed=seed, latent=theta, data=data)


def _within_variances(gen: np.random.Generator, size: int) -> np.ndarray:
    """0.25 x chi-square(1) draws redrawn until they fall in [0.009, 0.6]."""
    out = np.empty(size)
    missing = np.arange(size)
    while missing.size:
        draw = 0.25 * gen.chisquare(1, size=missing.size)
        ok = (draw >= WITHIN_VARIANCE[0]) & (draw <= WITHIN_VARIANCE[1])
        out[missing[ok]] = draw[ok]
        missing = missing[~ok]
    return out


def gen_bivariate(k: int, tau2: float, rho: float, seed: int, mu=DTA_MU) -> SimReplicate:
    """Bivariate logit pairs with Sigma = tau2 [[1, rho], [rho, 1]] and truncated within-variances."""
    gen = rng.philox(seed)
    s2 = _within_variances(gen, 2 * k).reshape(k, 2)
    sigma = tau2 * np.array([[1.0, rho], [rho, 1.0]])
    latent = gen.multivariate_normal(np.asarray(mu, dtype=float), sigma, size=k, method="cholesky")
    y = latent + np.sqrt(s2) * gen.standard_normal((k, 2))
    return SimReplicate(tag="dta", truth={"muA": mu[0], "muB": mu[1], "tau2": tau2, "rho": rho},
                        seed=seed, latent=latent, data=DTAData(y, s2))


def network_designs(k: int) -> List[str]:
    if k not in NETWORK_DESIGNS:
        raise InputError(f"No network design for k={k}; choose from {sorted(NETWORK_DESIGNS)}")
    return [design for design, count in NETWORK_DESIGNS[k].items() for _ in range(count)]


def gen_network(k: int, tau: float, seed: int, mu=NMA_MU) -> SimReplicate:
    """
    Four-treatment network (A is the reference) with trial effects
    theta_i ~ N(mu, tau^2 P(0.5)); studies lacking A get the reference pseudo-arm.
    """
    gen = rng.philox(seed)
    designs = network_designs(k)
    mu = np.asarray(mu, dtype=float)
    theta = gen.multivariate_normal(mu, tau ** 2 * compound_symmetry(len(mu)), size=k,
                                    method="cholesky")
    arms = []
    for i, design in enumerate(designs):
        p0 = gen.uniform(*BASELINE_RISK)
        n = int(_arm_sizes(gen, 1)[0])
        for name in design:
            t = NMA_TREATMENTS.index(name)
            p = p0 if t == 0 else float(expit(logit(p0) + theta[i, t - 1]))
            arms.append(ArmRecord(study_id=f"{i + 1}-{design}", treatment=t,
                                  events=float(gen.binomial(n, p)), n=float(n)))
    studies = contrasts_from_arms(arms, augment=True)
    model = NetworkModel.from_studies(studies, p=len(mu), labels=NMA_TREATMENTS)
    truth = {"mu": mu.tolist(), "tau": tau}
    return SimReplicate(tag="nma", truth=truth, seed=seed, latent=theta, data=model)


@dataclass(frozen=True)
class ExperimentConfig:
    """One grid cell of a coverage experiment"""
    experiment: str
    cell: Dict[str, float]
    methods: List[str]
    R: int
    B: int
    seed: int = 0
    alpha: float = config.DEFAULT_ALPHA

    def __post_init__(self):
        if self.experiment not in PRESETS:
            raise InputError(f"Unknown experiment {self.experiment!r}; choose from {sorted(PRESETS)}")
        if self.R < 1 or self.B < 1:
            raise InputError("R and B must be positive")
        unknown = set(self.methods) - set(PRESETS[self.experiment]["methods"])
        if unknown:
            raise InputError(f"Methods {sorted(unknown)} do not apply to {self.experiment}")

    @property
    def generator(self) -> str:
        return PRESETS[self.experiment]["generator"]

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, values: Dict[str, Any]) -> "ExperimentConfig":
        return cls(**values)


@dataclass
class ExperimentReport:
    """Coverage table rows for one cell"""
    experiment: str
    cell: Dict[str, float]
    R: int
    B: int
    seed: int
    rows: List[Dict[str, Any]] = field(default_factory=list)
    wall_time: float = 0.0

    def to_dict(self) -> Dict[str, Any]:
        # wall time is logged, never serialized
        return {"experiment": self.experiment, "cell": self.cell, "R": self.R, "B": self.B,
                "seed": self.seed, "rows": self.rows}

    def to_frame(self) -> pd.DataFrame:
        df = pd.DataFrame(self.rows)
        for key, value in self.cell.items():
            df.insert(0, key, value)
        df.insert(0, "experiment", self.experiment)
        return df


def parse_cell(experiment: str, text: str) -> Dict[str, float]:
    """'k=3,tau2=0.10' -> {'k': 3, 'tau2': 0.1}; keys must match the experiment grid."""
    if experiment not in PRESETS:
        raise InputError(f"Unknown experiment {experiment!r}")
    keys = set(PRESETS[experiment]["grid"])
    cell = {}
    for part in text.split(","):
        if "=" not in part:
            raise InputError(f"Malformed cell entry {part!r}; expected key=value")
        key, value = (s.strip() for s in part.split("=", 1))
        if key not in keys:
            raise InputError(f"Unknown cell key {key!r} for {experiment}; expected {sorted(keys)}")
        try:
            cell[key] = int(value) if key == "k" else float(value)
        except ValueError as e:
            raise InputError(f"Cell value for {key} is not a number: {value!r}") from e
    if set(cell) != keys:
        raise InputError(f"Cell must set {sorted(keys)}, got {sorted(cell)}")
    return cell


def grid_cells(experiment: str) -> List[Dict[str, float]]:
    grid = PRESETS[experiment]["grid"]
    keys = list(grid)
    return [dict(zip(keys, values)) for values in itertools.product(*(grid[k] for k in keys))]


def generate(cfg: ExperimentConfig, seed: int) -> SimReplicate:
    cell = cfg.cell
    if cfg.generator == "uni":
        return gen_univariate(int(cell["k"]), cell["tau2"], seed)
    if cfg.generator == "dta":
        return gen_bivariate(int(cell["k"]), cell["tau2"], cell["rho"], seed)
    return gen_network(int(cell["k"]), cell["tau"], seed)


# a failure in one replication excludes that replication, never the run
REPLICATE_ERRORS = (ExactMetaError, ValueError, np.linalg.LinAlgError, FloatingPointError)


def _error_text(error: Exception) -> str:
    return str(error) if isinstance(error, ExactMetaError) else f"{type(error).__name__}: {error}"


def _outcome(method, covered=None, length=None, coordinate=None, error=None):
    # plain Python types; outcomes travel through the Celery JSON serializer
    return {"method": method, "coordinate": coordinate,
            "covered": None if covered is None else bool(covered),
            "length": None if length is None else float(length), "error": error}


def _uni_outcomes(cfg: ExperimentConfig, rep: SimReplicate, mc_seed: int) -> List[Dict]:
    truth = rep.truth["mu"]
    comparators = {"dl": dl_interval, "reml": reml_interval_uni, "knha": knha_interval,
                   "lr": lr_interval_uni}
    outcomes = []
    for method in cfg.methods:
        try:
            if method == "mc":
                interval = ci_mu(rep.data, cfg.alpha, cfg.B, mc_seed, diagnostics=False, workers=1)
            else:
                interval = comparators[method](rep.data, cfg.alpha)
            outcomes.append(_outcome(method, interval.contains(truth), interval.length))
        except REPLICATE_ERRORS as e:
            outcomes.append(_outcome(method, error=_error_text(e)))
    return outcomes


def _dta_outcomes(cfg: ExperimentConfig, rep: SimReplicate, mc_seed: int) -> List[Dict]:
    truth = (rep.truth["muA"], rep.truth["muB"])
    outcomes = []
    for method in cfg.methods:
        try:
            if method == "mc":
                covered = p_value_bivar(rep.data, truth, cfg.B, mc_seed, workers=1).p > cfg.alpha
            else:
                covered = acr_contains(rep.data, truth, cfg.alpha)
            outcomes.append(_outcome(method, bool(covered)))
        except REPLICATE_ERRORS as e:
            outcomes.append(_outcome(method, error=_error_text(e)))
    return outcomes


def _nma_outcomes(cfg: ExperimentConfig, rep: SimReplicate, mc_seed: int) -> List[Dict]:
    model = rep.data
    truth = rep.truth["mu"]
    labels = model.labels[1:]
    outcomes = []
    for method in cfg.methods:
        try:
            if method == "mc":
                for j, label in enumerate(labels):
                    p = p_value_contrast(model, basis_contrast(model.p, j + 1), truth[j],
                                         cfg.B, mc_seed, workers=1).p
                    outcomes.append(_outcome(method, bool(p > cfg.alpha), coordinate=label))
                continue
            results = reml_wald_net(model, cfg.alpha) if method == "reml" else lr_intervals_net(model, cfg.alpha)
            for j, result in enumerate(results):
                outcomes.append(_outcome(method, result.contains(truth[j]), result.length,
                                         coordinate=labels[j]))
        except REPLICATE_ERRORS as e:
            for label in labels:
                outcomes.append(_outcome(method, coordinate=label, error=_error_text(e)))
    return outcomes


def run_replicate(cfg: ExperimentConfig, index: int) -> List[Dict[str, Any]]:
    """
    Generate replication `index` and evaluate every method on it.

    Returns:
        List[Dict]: one outcome per method (and coordinate for networks);
            failures carry an error message instead of a coverage indicator
    """
    replicate_seed = rng.substream_seed(cfg.seed, index)
    mc_seed = rng.substream_seed(replicate_seed, 0)
    rep = generate(cfg, replicate_seed)
    handler = {"uni": _uni_outcomes, "dta": _dta_outcomes, "nma": _nma_outcomes}[cfg.generator]
    outcomes = handler(cfg, rep, mc_seed)
    for outcome in outcomes:
        if outcome["error"]:
            logger.warning(f"Replicate {index} excluded for {outcome['method']}: {outcome['error']}")
    return outcomes


def aggregate(cfg: ExperimentConfig, outcomes: List[List[Dict[str, Any]]]) -> ExperimentReport:
    """Coverage (%) with its Monte Carlo SE and average length per method and coordinate."""
    groups = {}
    for replicate in outcomes:
        for outcome in replicate:
            groups.setdefault((outcome["method"], outcome["coordinate"]), []).append(outcome)

    rows = []
    for method in cfg.methods:
        for (name, coordinate), items in groups.items():
            if name != method:
                continue
            ok = [o for o in items if o["error"] is None]
            coverage = float(np.mean([o["covered"] for o in ok])) if ok else float("nan")
            lengths = [o["length"] for o in ok if o["length"] is not None]
            rows.append({
                "method": method,
                "coordinate": coordinate,
                "coverage": 100.0 * coverage,
                "mc_se": 100.0 * float(np.sqrt(coverage * (1.0 - coverage) / len(ok))) if ok else float("nan"),
                "avg_length": float(np.mean(lengths)) if lengths else None,
                "n_ok": len(ok),
                "n_failed": len(items) - len(ok),
            })
    return ExperimentReport(experiment=cfg.experiment, cell=dict(cfg.cell), R=cfg.R, B=cfg.B,
                            seed=cfg.seed, rows=rows)


def _run_local(cfg: ExperimentConfig, workers: int) -> List[List[Dict[str, Any]]]:
    if workers > 1:
        with concurrent.futures.ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(lambda i: run_replicate(cfg, i), range(cfg.R)))
    return [run_replicate(cfg, i) for i in range(cfg.R)]


def _run_celery(cfg: ExperimentConfig) -> List[List[Dict[str, Any]]]:
    from exactmeta.tasks import run_replicate_task  # Import here to avoid circular imports
    payload = cfg.to_dict()
    results = [run_replicate_task.apply_async(args=[payload, i], queue="simulate")
               for i in range(cfg.R)]
    return [result.get() for result in results]


def run_coverage(cfg: ExperimentConfig, backend: str = "local",
                 workers: Optional[int] = None) -> ExperimentReport:
    """
    Run R replications of one cell and aggregate them.

    Args:
        cfg: Experiment cell configuration
        backend: 'local' (thread pool) or 'celery' (one task per replication)
        workers: Thread count for the local backend (default: EXACTMETA_THREADS)

    Returns:
        ExperimentReport
    """
    start = time.perf_counter()
    logger.info(f"Running {cfg.experiment} cell {cfg.cell}: R={cfg.R}, B={cfg.B}, backend={backend}")
    if backend == "local":
        outcomes = _run_local(cfg, config.thread_count() if workers is None else workers)
    elif backend == "celery":
        outcomes = _run_celery(cfg)
    else:
        raise InputError(f"Unknown backend {backend!r}")
    report = aggregate(cfg, outcomes)
    report.wall_time = time.perf_counter() - start
    logger.info(f"Cell {cfg.cell} finished in {report.wall_time:.1f}s")
    return report


def run_experiment(experiment: str, cell: Optional[str] = None, R: Optional[int] = None,
                   B: Optional[int] = None, seed: int = 0, alpha: float = config.DEFAULT_ALPHA,
                   methods: Optional[List[str]] = None, backend: str = "local",
                   workers: Optional[int] = None) -> List[ExperimentReport]:
    """Run one cell (when `cell` is given) or the whole grid of a preset."""
    if experiment not in PRESETS:
        raise InputError(f"Unknown experiment {experiment!r}; choose from {sorted(PRESETS)}")
    preset = PRESETS[experiment]
    cells = [parse_cell(experiment, cell)] if cell else grid_cells(experiment)
    reports = []
    for values in cells:
        cfg = ExperimentConfig(
            experiment=experiment,
            cell=values,
            methods=list(methods or preset["methods"]),
            R=R or preset["R"],
            B=B or config.SIMULATION_B[experiment],
            seed=seed,
            alpha=alpha
        )
        reports.append(run_coverage(cfg, backend=backend, workers=workers))
    return reports
