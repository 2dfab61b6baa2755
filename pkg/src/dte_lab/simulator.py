"""Synthetic streaming-experiment generator with closed-form truth.

Outcomes are viewing minutes over K episodes of L minutes each, mixing a
point mass at zero (non-engagement), atoms at episode boundaries
(finishing an episode exactly), and uniform densities within episodes.
The zero mass is logistic in a discrete engagement tier (and optionally
gender); boundary and within-episode masses are defined conditional on
engagement, per arm and gender, so total mass is 1 for every covariate
cell by construction. Covariates are the tier, a gender flag, and pure
Gaussian noise columns. All marginal quantities reduce to exact finite
sums over the tier-by-gender cells.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, replace

import numpy as np
from scipy.special import expit

from ._parallel import run_indexed
from .dataset import EffectCurve, ExperimentDataset, LocationGrid
from .errors import ValidationError

__all__ = [
    "DgpSpec",
    "default_spec",
    "gender_interacted_spec",
    "grid_aligned_spec",
    "generate",
    "true_cdf",
    "true_conditional_cdf",
    "true_mean",
    "true_effects",
    "save_spec",
    "load_spec",
]

_SIM_TAG = 31
GENERATION_CHUNK = 65536

_MassTable = tuple[tuple[tuple[float, ...], ...], ...]  # [arm][gender][episode]


@dataclass(frozen=True)
class DgpSpec:
    """Parameters of the synthetic experiment.

    boundary_mass[d][g][k] is the probability (conditional on engaging)
    of stopping exactly at the end of episode k+1; segment_mass[d][g][k]
    the engaged probability of stopping inside episode k+1, uniformly.
    For each (arm, gender) the engaged masses must sum to 1.
    """

    episodes: int = 3
    episode_minutes: int = 1
    tiers: int = 5
    noise_covariates: int = 2
    rho: float = 0.1
    zero_intercept: tuple[float, float] = (0.4, 0.1)
    zero_slope: tuple[float, float] = (-1.1, -1.1)
    zero_gender: tuple[float, float] = (0.0, 0.0)
    boundary_mass: _MassTable = ()
    segment_mass: _MassTable = ()

    def __post_init__(self):
        if self.episodes < 1 or self.episode_minutes < 1:
            raise ValidationError("episodes and episode_minutes must be >= 1")
        if self.tiers < 1:
            raise ValidationError("tiers must be >= 1")
        if self.noise_covariates < 0:
            raise ValidationError("noise_covariates must be >= 0")
        if not 0.0 < self.rho < 1.0:
            raise ValidationError(f"rho must lie in (0,1), got {self.rho}")
        for name in ("zero_intercept", "zero_slope", "zero_gender"):
            if len(getattr(self, name)) != 2:
                raise ValidationError(f"{name} needs one value per arm")
        for table, name in ((self.boundary_mass, "boundary_mass"),
                            (self.segment_mass, "segment_mass")):
            if len(table) != 2 or any(len(per_arm) != 2 for per_arm in table):
                raise ValidationError(f"{name} must be indexed [arm][gender][episode]")
            for per_arm in table:
                for per_gender in per_arm:
                    if len(per_gender) != self.episodes:
                        raise ValidationError(f"{name} needs one entry per episode")
                    if any(v < 0 for v in per_gender):
                        raise ValidationError(f"{name} entries must be nonnegative")
        for d in (0, 1):
            for g in (0, 1):
                total = sum(self.boundary_mass[d][g]) + sum(self.segment_mass[d][g])
                if abs(total - 1.0) > 1e-9:
                    raise ValidationError(
                        f"engaged masses for arm {d}, gender {g} sum to {total!r}, not 1"
                    )

    @property
    def max_minutes(self) -> int:
        return self.episodes * self.episode_minutes

    @property
    def covariate_names(self) -> tuple[str, ...]:
        return ("tier", "gender") + tuple(
            f"noise{i + 1}" for i in range(self.noise_covariates)
        )


def _both_genders(control, treated):
    return ((tuple(control), tuple(control)), (tuple(treated), tuple(treated)))


def default_spec() -> DgpSpec:
    """Mild positive treatment effect: less non-engagement, more finishing."""
    return DgpSpec(
        boundary_mass=_both_genders((0.12, 0.08, 0.05), (0.14, 0.10, 0.06)),
        segment_mass=_both_genders((0.45, 0.20, 0.10), (0.40, 0.20, 0.10)),
    )


def gender_interacted_spec() -> DgpSpec:
    """Opposite-signed effects by gender: treatment lowers the zero mass
    for gender 0 and raises it for gender 1."""
    return DgpSpec(
        zero_intercept=(0.3, -0.5),
        zero_gender=(0.0, 2.4),
        boundary_mass=_both_genders((0.12, 0.08, 0.05), (0.12, 0.08, 0.05)),
        segment_mass=_both_genders((0.45, 0.20, 0.10), (0.45, 0.20, 0.10)),
    )


def grid_aligned_spec() -> DgpSpec:
    """All outcome mass on episode boundaries (and zero); supports exact
    grid-sum identities."""
    return DgpSpec(
        boundary_mass=_both_genders((0.55, 0.30, 0.15), (0.45, 0.35, 0.20)),
        segment_mass=_both_genders((0.0, 0.0, 0.0), (0.0, 0.0, 0.0)),
    )


def _zero_mass(spec: DgpSpec, d, tier, gender):
    zi = np.asarray(spec.zero_intercept)
    zs = np.asarray(spec.zero_slope)
    zg = np.asarray(spec.zero_gender)
    centered = np.asarray(tier, dtype=np.float64) - (spec.tiers - 1) / 2.0
    g = np.asarray(gender, dtype=np.float64) - 0.5
    return expit(zi[d] + zs[d] * centered + zg[d] * g)


def _engaged_cdf(spec: DgpSpec, d: int, g: int, y):
    """CDF of the engaged outcome for one (arm, gender): atoms at episode
    ends plus uniform within-episode segments."""
    y = np.asarray(y, dtype=np.float64)
    big_l = float(spec.episode_minutes)
    c = np.zeros(y.shape)
    for k in range(spec.episodes):
        c = c + spec.boundary_mass[d][g][k] * (y >= (k + 1) * big_l)
        c = c + spec.segment_mass[d][g][k] * np.clip((y - k * big_l) / big_l, 0.0, 1.0)
    return c


def true_conditional_cdf(spec: DgpSpec, d: int, y, tier, gender):
    """F_{Y(d)|X}(y | tier, gender), exact. Noise covariates are irrelevant."""
    pi0 = _zero_mass(spec, d, tier, gender)
    y = np.asarray(y, dtype=np.float64)
    out = pi0 * (y >= 0.0) + (1.0 - pi0) * _engaged_cdf(spec, d, int(gender), y)
    return out


def true_cdf(spec: DgpSpec, d: int, y, gender: int | None = None):
    """Marginal F_{Y(d)}(y) as an exact average over covariate cells.

    Pass gender to get the gender-conditional marginal (tiers averaged).
    """
    y_arr = np.atleast_1d(np.asarray(y, dtype=np.float64))
    genders = (0, 1) if gender is None else (int(gender),)
    total = np.zeros(y_arr.shape)
    for g in genders:
        engaged = _engaged_cdf(spec, d, g, y_arr)
        for tier in range(spec.tiers):
            pi0 = float(_zero_mass(spec, d, tier, g))
            total += (pi0 + (1.0 - pi0) * engaged) * (y_arr >= 0.0)
    total /= spec.tiers * len(genders)
    return total if np.ndim(y) else float(total[0])


def _engaged_mean(spec: DgpSpec, d: int, g: int) -> float:
    big_l = float(spec.episode_minutes)
    m = 0.0
    for k in range(spec.episodes):
        m += spec.boundary_mass[d][g][k] * (k + 1) * big_l
        m += spec.segment_mass[d][g][k] * (k + 0.5) * big_l
    return m


def true_mean(spec: DgpSpec, d: int, gender: int | None = None) -> float:
    """Closed-form E[Y(d)], optionally conditional on gender."""
    genders = (0, 1) if gender is None else (int(gender),)
    total = 0.0
    for g in genders:
        m = _engaged_mean(spec, d, g)
        for tier in range(spec.tiers):
            pi0 = float(_zero_mass(spec, d, tier, g))
            total += (1.0 - pi0) * m
    return total / (spec.tiers * len(genders))


def true_effects(
    spec: DgpSpec, grid: LocationGrid, span: int | None = None, gender: int | None = None
):
    """Ground-truth DTE and PTE curves on the grid, plus the true ATE."""
    span = grid.step_h if span is None else int(span)
    if span <= 0 or span % grid.step_h != 0:
        raise ValidationError(f"span must be a positive multiple of {grid.step_h}")
    s = span // grid.step_h
    if s > grid.count_j:
        raise ValidationError(f"span {span} exceeds the grid range {grid.top}")
    locs = grid.locations.astype(np.float64)
    delta = true_cdf(spec, 1, locs, gender) - true_cdf(spec, 0, locs, gender)
    dte_curve = EffectCurve(
        grid=grid, effect_kind="DTE", locations=grid.locations.copy(), point=delta
    )
    pte_curve = EffectCurve(
        grid=grid,
        effect_kind="PTE",
        locations=grid.locations[: len(grid) - s].copy(),
        point=delta[s:] - delta[:-s],
        span=span,
        atom_at_zero=float(delta[0]),
    )
    true_ate = true_mean(spec, 1, gender) - true_mean(spec, 0, gender)
    return dte_curve, pte_curve, true_ate


# ---------------------------------------------------------------------------
# generation


def _component_cumulative(spec: DgpSpec) -> np.ndarray:
    """(2, 2, 2K) cumulative engaged-component probabilities per (arm, gender):
    episode-end atoms first, then within-episode segments."""
    k = spec.episodes
    cum = np.empty((2, 2, 2 * k))
    for d in (0, 1):
        for g in (0, 1):
            probs = np.concatenate([spec.boundary_mass[d][g], spec.segment_mass[d][g]])
            cum[d, g] = np.cumsum(probs)
    return cum


def _fill_chunk(spec, cum, d_out, y_out, x_out, start, stop, seed, chunk_idx):
    rng = np.random.default_rng(
        np.random.SeedSequence([_SIM_TAG, int(seed), int(chunk_idx)])
    )
    m = stop - start
    d = (rng.random(m) < spec.rho).astype(np.int8)
    tier = rng.integers(0, spec.tiers, m)
    gender = rng.integers(0, 2, m)
    noise = rng.standard_normal((m, spec.noise_covariates))
    u_zero = rng.random(m)
    u_comp = rng.random(m)
    u_pos = rng.random(m)

    engaged = u_zero >= _zero_mass(spec, d, tier, gender)
    comp = (u_comp[:, None] > cum[d, gender]).sum(axis=1)
    comp = np.minimum(comp, 2 * spec.episodes - 1)
    big_l = float(spec.episode_minutes)
    k = spec.episodes
    at_boundary = (comp + 1.0) * big_l
    in_segment = (comp - k + u_pos) * big_l
    y = np.where(comp < k, at_boundary, in_segment)
    y = np.where(engaged, y, 0.0)

    d_out[start:stop] = d
    y_out[start:stop] = y
    x_out[start:stop, 0] = tier
    x_out[start:stop, 1] = gender
    if spec.noise_covariates:
        x_out[start:stop, 2:] = noise


def generate(spec: DgpSpec, n: int, seed: int = 0) -> ExperimentDataset:
    """Draw n i.i.d. units; deterministic per seed.

    Generation is chunked in fixed blocks whose streams depend only on
    (seed, chunk index), so parallel and serial generation are identical.
    """
    if n < 1:
        raise ValidationError(f"n must be >= 1, got {n}")
    if seed < 0:
        raise ValidationError("seed must be a nonnegative integer")
    cum = _component_cumulative(spec)
    d = np.empty(n, dtype=np.int8)
    y = np.empty(n, dtype=np.float64)
    x = np.empty((n, 2 + spec.noise_covariates), dtype=np.float64)

    tasks = []
    for chunk_idx, start in enumerate(range(0, n, GENERATION_CHUNK)):
        stop = min(start + GENERATION_CHUNK, n)
        tasks.append(
            lambda spec=spec, cum=cum, start=start, stop=stop, ci=chunk_idx:
            _fill_chunk(spec, cum, d, y, x, start, stop, seed, ci)
        )
    run_indexed(tasks)

    for a in (d, y, x):
        a.flags.writeable = False
    return ExperimentDataset(
        d=d, y=y, x=x, rho=spec.rho, covariate_names=spec.covariate_names
    )


# ---------------------------------------------------------------------------
# serialization


def save_spec(spec: DgpSpec, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(asdict(spec), fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_spec(path) -> DgpSpec:
    with open(path, encoding="utf-8") as fh:
        raw = json.load(fh)
    if not isinstance(raw, dict):
        raise ValidationError(f"{path}: expected a JSON object")
    known = {f for f in DgpSpec.__dataclass_fields__}
    bad = set(raw) - known
    if bad:
        raise ValidationError(f"{path}: unknown spec field(s) {sorted(bad)}")

    def tuplify(v):
        return tuple(tuplify(e) for e in v) if isinstance(v, list) else v

    try:
        return DgpSpec(**{k: tuplify(v) for k, v in raw.items()})
    except (TypeError, ValidationError) as e:
        raise ValidationError(f"{path}: {e}") from None


def spec_variant(base: DgpSpec, **changes) -> DgpSpec:
    """Convenience wrapper over dataclasses.replace with validation."""
    return replace(base, **changes)
