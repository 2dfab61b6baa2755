"""First-stage nuisance learners and the cross-fitting machinery.

The conditional CDF is learned one binary classification problem per grid
location; the conditional mean gets the analogous regression learner.
Three interchangeable learner families: penalized logistic regression
(with a ridge-linear mean), boosted trees (with a squared-loss boosted
mean), and arm-constant baselines.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.special import expit

from ._parallel import run_indexed
from .boosting import BoostConfig, Forest, fit_forest
from .dataset import ExperimentDataset, LocationGrid
from .errors import ConfigError, EstimationError, ValidationError

__all__ = [
    "CLIP_EPS",
    "LogisticConfig",
    "LogisticModel",
    "fit_logistic",
    "fit_boosted_stumps",
    "fit_constant_rate",
    "LearnerFactory",
    "make_learner_factory",
    "FoldPlan",
    "make_fold_plan",
    "CrossFitPredictions",
    "cross_fit",
]

CLIP_EPS = 1e-6

# seed-derivation tags so distinct purposes never share a stream
_FOLD_TAG = 11
_FIT_TAG = 12


def clip_probs(p: np.ndarray) -> np.ndarray:
    return np.clip(p, CLIP_EPS, 1.0 - CLIP_EPS)


# ---------------------------------------------------------------------------
# probability learners


@dataclass(frozen=True)
class LogisticConfig:
    max_iter: int = 100
    tol: float = 1e-8
    l2: float = 1e-6

    def __post_init__(self):
        if self.max_iter < 1:
            raise EstimationError("max_iter must be >= 1")
        if self.tol <= 0:
            raise EstimationError("tol must be > 0")
        if self.l2 < 0:
            raise EstimationError("l2 must be >= 0")


@dataclass(frozen=True)
class LogisticModel:
    """IRLS-fitted logistic regression; coef[0] is the intercept."""

    coef: np.ndarray
    converged: bool
    n_iter: int
    constant: float | None = None

    def predict(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if self.constant is not None:
            return np.full(x.shape[0], self.constant)
        return clip_probs(expit(x @ self.coef[1:] + self.coef[0]))


def fit_logistic(features, labels, config: LogisticConfig | None = None) -> LogisticModel:
    """L2-penalized logistic regression by IRLS with step halving.

    The intercept is unpenalized. All-identical labels short-circuit to a
    constant predictor at the clipped label mean, so separation on a
    degenerate problem can never occur.
    """
    cfg = config or LogisticConfig()
    x = np.asarray(features, dtype=np.float64)
    t = np.asarray(labels, dtype=np.float64)
    if x.ndim != 2 or t.ndim != 1 or x.shape[0] != t.shape[0] or x.shape[0] < 1:
        raise EstimationError(f"bad training shapes x{x.shape}, labels{t.shape}")
    if ((t != 0.0) & (t != 1.0)).any():
        raise EstimationError("labels must be 0/1")

    if t.min() == t.max():
        const = float(np.clip(t.mean(), CLIP_EPS, 1.0 - CLIP_EPS))
        return LogisticModel(
            coef=np.zeros(x.shape[1] + 1), converged=True, n_iter=0, constant=const
        )

    xd = np.column_stack([np.ones(x.shape[0]), x])
    pen = np.ones(xd.shape[1])
    pen[0] = 0.0

    def objective(b):
        z = xd @ b
        return float(np.logaddexp(0.0, z).sum() - t @ z + 0.5 * cfg.l2 * (pen * b * b).sum())

    beta = np.zeros(xd.shape[1])
    obj = objective(beta)
    converged = False
    it = 0
    for it in range(1, cfg.max_iter + 1):
        z = xd @ beta
        prob = expit(z)
        grad = xd.T @ (prob - t) + cfg.l2 * pen * beta
        w = prob * (1.0 - prob)
        hess = (xd * w[:, None]).T @ xd + cfg.l2 * np.diag(pen)
        try:
            step = np.linalg.solve(hess, grad)
        except np.linalg.LinAlgError:
            break
        # halve until the penalized objective stops increasing
        scale = 1.0
        accepted = False
        for _ in range(30):
            cand = beta - scale * step
            cand_obj = objective(cand)
            if cand_obj <= obj + 1e-12:
                accepted = True
                break
            scale /= 2.0
        if not accepted:
            break
        delta = float(np.max(np.abs(beta - cand)))
        beta = cand
        obj = cand_obj
        if delta < cfg.tol:
            converged = True
            break
    return LogisticModel(coef=beta, converged=converged, n_iter=it)


@dataclass(frozen=True)
class BoostedProbModel:
    forest: Forest | None
    constant: float | None = None

    @property
    def converged(self) -> bool:
        return True

    def predict(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if self.constant is not None:
            return np.full(x.shape[0], self.constant)
        return clip_probs(self.forest.predict_proba(x))


def fit_boosted_stumps(features, labels, config: BoostConfig | None = None) -> BoostedProbModel:
    """Boosted depth-limited trees on logistic loss.

    Degenerate labels yield an exact constant at the clipped label mean;
    rounds=0 yields the base rate.
    """
    cfg = config or BoostConfig()
    if cfg.loss != "logistic":
        raise EstimationError("probability learner requires the logistic loss")
    t = np.asarray(labels, dtype=np.float64)
    if t.size and t.min() == t.max():
        const = float(np.clip(t.mean(), CLIP_EPS, 1.0 - CLIP_EPS))
        return BoostedProbModel(forest=None, constant=const)
    return BoostedProbModel(forest=fit_forest(features, t, cfg))


@dataclass(frozen=True)
class ConstantProbModel:
    constant: float

    @property
    def converged(self) -> bool:
        return True

    def predict(self, x) -> np.ndarray:
        return np.full(np.asarray(x).shape[0], self.constant)


def fit_constant_rate(features, labels) -> ConstantProbModel:
    t = np.asarray(labels, dtype=np.float64)
    if t.size < 1:
        raise EstimationError("need at least one training sample")
    return ConstantProbModel(float(np.clip(t.mean(), CLIP_EPS, 1.0 - CLIP_EPS)))


# ---------------------------------------------------------------------------
# conditional-mean learners


@dataclass(frozen=True)
class LinearMeanModel:
    coef: np.ndarray

    def predict(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        return x @ self.coef[1:] + self.coef[0]


def fit_linear_mean(features, targets, l2: float = 1e-6) -> LinearMeanModel:
    """Ridge regression with an unpenalized intercept."""
    x = np.asarray(features, dtype=np.float64)
    t = np.asarray(targets, dtype=np.float64)
    if x.shape[0] != t.shape[0] or x.shape[0] < 1:
        raise EstimationError(f"bad training shapes x{x.shape}, targets{t.shape}")
    xd = np.column_stack([np.ones(x.shape[0]), x])
    pen = np.ones(xd.shape[1])
    pen[0] = 0.0
    gram = xd.T @ xd + l2 * np.diag(pen)
    try:
        coef = np.linalg.solve(gram, xd.T @ t)
    except np.linalg.LinAlgError:
        coef, *_ = np.linalg.lstsq(gram, xd.T @ t, rcond=None)
    return LinearMeanModel(coef=coef)


@dataclass(frozen=True)
class BoostedMeanModel:
    forest: Forest

    def predict(self, x) -> np.ndarray:
        return self.forest.predict_mean(np.asarray(x, dtype=np.float64))


def fit_boosted_mean(features, targets, config: BoostConfig | None = None) -> BoostedMeanModel:
    cfg = config or BoostConfig(loss="squared")
    if cfg.loss != "squared":
        raise EstimationError("mean learner requires the squared loss")
    return BoostedMeanModel(forest=fit_forest(features, targets, cfg))


@dataclass(frozen=True)
class ConstantMeanModel:
    constant: float

    def predict(self, x) -> np.ndarray:
        return np.full(np.asarray(x).shape[0], self.constant)


def fit_constant_mean(features, targets) -> ConstantMeanModel:
    t = np.asarray(targets, dtype=np.float64)
    if t.size < 1:
        raise EstimationError("need at least one training sample")
    return ConstantMeanModel(float(t.mean()))


# ---------------------------------------------------------------------------
# learner factory


@dataclass(frozen=True)
class LearnerFactory:
    """Pairs a probability fitter with its mean-regression analogue."""

    name: str
    fit_probability: Callable[..., object]
    fit_mean: Callable[..., object]


_BOOST_KEYS = ("rounds", "learning_rate", "max_depth", "min_leaf", "l2", "max_bins")
_LOGISTIC_KEYS = ("max_iter", "tol", "l2")


def make_learner_factory(name: str, **options) -> LearnerFactory:
    """Build the named learner pair; options are its hyperparameters.

    The seed argument the fitters accept is part of the interface for
    stochastic learners; all three built-in families are deterministic
    and ignore it.
    """
    if name == "logistic":
        bad = set(options) - set(_LOGISTIC_KEYS)
        if bad:
            raise ConfigError(f"unknown logistic option(s): {sorted(bad)}")
        cfg = LogisticConfig(**options)
        ridge = options.get("l2", 1e-6)
        return LearnerFactory(
            name=name,
            fit_probability=lambda x, t, seed=None: fit_logistic(x, t, cfg),
            fit_mean=lambda x, t, seed=None: fit_linear_mean(x, t, l2=ridge),
        )
    if name == "boosted_stumps":
        bad = set(options) - set(_BOOST_KEYS)
        if bad:
            raise ConfigError(f"unknown boosted_stumps option(s): {sorted(bad)}")
        prob_cfg = BoostConfig(loss="logistic", **options)
        mean_cfg = BoostConfig(loss="squared", **options)
        return LearnerFactory(
            name=name,
            fit_probability=lambda x, t, seed=None: fit_boosted_stumps(x, t, prob_cfg),
            fit_mean=lambda x, t, seed=None: fit_boosted_mean(x, t, mean_cfg),
        )
    if name == "constant":
        if options:
            raise ConfigError(f"constant learner takes no options, got {sorted(options)}")
        return LearnerFactory(
            name=name,
            fit_probability=lambda x, t, seed=None: fit_constant_rate(x, t),
            fit_mean=lambda x, t, seed=None: fit_constant_mean(x, t),
        )
    raise ConfigError(
        f"unknown learner {name!r}; choose logistic, boosted_stumps, or constant"
    )


# ---------------------------------------------------------------------------
# cross-fitting


@dataclass(frozen=True)
class FoldPlan:
    """Unit-to-fold assignment, stratified by arm so no fold starves one."""

    k: int
    assignment: np.ndarray

    def __post_init__(self):
        if self.k < 2:
            raise EstimationError("cross-fitting needs at least 2 folds")
        if self.assignment.ndim != 1:
            raise EstimationError("fold assignment must be one vector")
        a = self.assignment
        if a.size and (a.min() < 0 or a.max() >= self.k):
            raise EstimationError("fold ids must lie in [0, k)")
        a.flags.writeable = False


def make_fold_plan(dataset: ExperimentDataset, k: int = 3, seed: int = 0) -> FoldPlan:
    """Seeded stratified assignment; per-arm fold sizes differ by <= 1."""
    if k < 2:
        raise EstimationError("cross-fitting needs at least 2 folds")
    if seed < 0:
        raise ValidationError("seed must be a nonnegative integer")
    rng = np.random.default_rng(np.random.SeedSequence([_FOLD_TAG, int(seed), int(k)]))
    assignment = np.empty(dataset.n, dtype=np.int8)
    for arm in (0, 1):
        idx = np.flatnonzero(dataset.d == arm)
        perm = rng.permutation(idx.size)
        assignment[idx[perm]] = np.arange(idx.size, dtype=np.int8) % k
    return FoldPlan(k=k, assignment=assignment)


@dataclass(frozen=True)
class CrossFitPredictions:
    """Out-of-fold nuisance predictions for every unit.

    f_cond[d, j, i] estimates F_{Y(d)|X}(y_j | X_i); mu_cond[d, i]
    estimates E[Y(d) | X_i]. NaN marks a missing prediction (cross_fit
    never produces one, but hand-built objects may).
    """

    grid: LocationGrid
    f_cond: np.ndarray
    mu_cond: np.ndarray
    learner_name: str = "unspecified"
    fold_plan: FoldPlan | None = None
    nonconverged: int = 0

    def __post_init__(self):
        n = self.mu_cond.shape[-1]
        if self.f_cond.shape != (2, len(self.grid), n):
            raise EstimationError(
                f"f_cond shape {self.f_cond.shape} does not match (2, {len(self.grid)}, {n})"
            )
        if self.mu_cond.shape != (2, n):
            raise EstimationError(f"mu_cond shape {self.mu_cond.shape} is not (2, {n})")
        with np.errstate(invalid="ignore"):
            out_of_range = (self.f_cond < 0.0) | (self.f_cond > 1.0)
        if out_of_range.any():
            raise EstimationError("CDF nuisance predictions must lie in [0, 1]")
        if not np.isfinite(self.mu_cond[~np.isnan(self.mu_cond)]).all():
            raise EstimationError("mean nuisance predictions must be finite")
        self.f_cond.flags.writeable = False
        self.mu_cond.flags.writeable = False

    @property
    def n(self) -> int:
        return self.mu_cond.shape[1]


def _fit_seed(seed: int, d: int, fold: int, slot: int) -> int:
    ss = np.random.SeedSequence([_FIT_TAG, int(seed), d, fold, slot])
    return int(ss.generate_state(1, np.uint64)[0])


def _prob_task(factory, locations, f_cond, flags, x_tr, y_tr, x_te, test,
               d, fold, j, slot_id, seed):
    def task():
        labels = (y_tr <= locations[j]).astype(np.float64)
        model = factory.fit_probability(x_tr, labels, seed=_fit_seed(seed, d, fold, j))
        f_cond[d, j, test] = model.predict(x_te)
        flags[slot_id] = getattr(model, "converged", True)

    return task


def _mean_task(factory, f_count, mu_cond, flags, x_tr, y_tr, x_te, test,
               d, fold, slot_id, seed):
    def task():
        model = factory.fit_mean(x_tr, y_tr, seed=_fit_seed(seed, d, fold, f_count))
        mu_cond[d, test] = model.predict(x_te)
        flags[slot_id] = getattr(model, "converged", True)

    return task


def cross_fit(
    dataset: ExperimentDataset,
    grid: LocationGrid,
    learner_factory: LearnerFactory,
    fold_plan: FoldPlan,
    seed: int = 0,
) -> CrossFitPredictions:
    """Fit one model per (arm, location, fold) and predict out-of-fold.

    Every unit in fold k gets predictions from models trained outside
    fold k, for BOTH arms: the adjustment terms need F-hat at every
    unit's covariates. Fits are independent and run on the shared thread
    pool; each writes a disjoint slice, so thread count never changes
    the result.
    """
    if fold_plan.assignment.shape[0] != dataset.n:
        raise EstimationError("fold plan does not cover the dataset")
    n = dataset.n
    m = len(grid)
    locations = grid.locations.astype(np.float64)
    f_cond = np.full((2, m, n), np.nan)
    mu_cond = np.full((2, n), np.nan)
    flags: list[bool] = [True] * (2 * fold_plan.k * (m + 1))
    tasks = []

    slot = 0
    for d in (0, 1):
        for fold in range(fold_plan.k):
            in_fold = fold_plan.assignment == fold
            train = np.flatnonzero(~in_fold & (dataset.d == d))
            test = np.flatnonzero(in_fold)
            if train.size == 0:
                arm = "treated" if d == 1 else "control"
                raise EstimationError(
                    f"fold {fold}: no {arm}-arm units available for training"
                )
            x_tr = dataset.x[train]
            y_tr = dataset.y[train]
            x_te = dataset.x[test]
            for j in range(m):
                tasks.append(_prob_task(
                    learner_factory, locations, f_cond, flags,
                    x_tr, y_tr, x_te, test, d, fold, j, slot, seed,
                ))
                slot += 1
            tasks.append(_mean_task(
                learner_factory, m, mu_cond, flags,
                x_tr, y_tr, x_te, test, d, fold, slot, seed,
            ))
            slot += 1

    run_indexed(tasks)

    if np.isnan(f_cond).any() or np.isnan(mu_cond).any():
        raise EstimationError("cross-fitting left units without predictions")
    return CrossFitPredictions(
        grid=grid,
        f_cond=np.clip(f_cond, CLIP_EPS, 1.0 - CLIP_EPS),
        mu_cond=mu_cond,
        learner_name=learner_factory.name,
        fold_plan=fold_plan,
        nonconverged=sum(1 for ok in flags if not ok),
    )
