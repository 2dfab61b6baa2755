"""Tests for the synthetic generator against its own closed-form truth."""
import dataclasses

import numpy as np
import pytest
from scipy.special import expit

from dte_lab.dataset import LocationGrid
from dte_lab.errors import ValidationError
from dte_lab.estimators import empirical_cdf_pair
from dte_lab.simulator import (
    DgpSpec,
    default_spec,
    gender_interacted_spec,
    generate,
    grid_aligned_spec,
    load_spec,
    save_spec,
    true_cdf,
    true_conditional_cdf,
    true_effects,
    true_mean,
)


def _single_cell_spec(**overrides):
    """tiers=1, no gender effect: one covariate cell per gender with equal
    masses, so marginal truths are hand-computable."""
    base = dict(
        tiers=1,
        zero_intercept=(0.0, 0.0),
        zero_slope=(0.0, 0.0),
        zero_gender=(0.0, 0.0),
        boundary_mass=(((0.2, 0.0, 0.3),) * 2, ((0.2, 0.0, 0.3),) * 2),
        segment_mass=(((0.1, 0.4, 0.0),) * 2, ((0.1, 0.4, 0.0),) * 2),
    )
    base.update(overrides)
    return DgpSpec(**base)


GRID = LocationGrid(1, 3)


class TestSpecValidation:
    def test_masses_must_sum_to_one(self):
        bad = (((0.5, 0.2, 0.2),) * 2,) * 2  # 0.9 + 0.2 = 1.1
        good = (((0.1, 0.1, 0.0),) * 2,) * 2
        with pytest.raises(ValidationError, match="sum to"):
            DgpSpec(boundary_mass=bad, segment_mass=good)

    def test_sum_tolerance_is_tight(self):
        # off by 2e-9 fails, off by 5e-10 passes
        with pytest.raises(ValidationError):
            DgpSpec(
                boundary_mass=(((0.5 + 2e-9, 0.2, 0.1),) * 2,) * 2,
                segment_mass=(((0.1, 0.1, 0.0),) * 2,) * 2,
            )
        DgpSpec(
            boundary_mass=(((0.5 + 5e-10, 0.2, 0.1),) * 2,) * 2,
            segment_mass=(((0.1, 0.1, 0.0),) * 2,) * 2,
        )

    def test_negative_mass_rejected(self):
        with pytest.raises(ValidationError, match="nonnegative"):
            DgpSpec(
                boundary_mass=(((1.1, -0.1, 0.0),) * 2,) * 2,
                segment_mass=(((0.0, 0.0, 0.0),) * 2,) * 2,
            )

    def test_episode_count_must_match(self):
        with pytest.raises(ValidationError, match="per episode"):
            DgpSpec(
                episodes=2,
                boundary_mass=(((0.5, 0.2, 0.3),) * 2,) * 2,
                segment_mass=(((0.0, 0.0, 0.0),) * 2,) * 2,
            )

    def test_rho_bounds(self):
        with pytest.raises(ValidationError, match="rho"):
            _single_cell_spec(rho=1.0)

    def test_invalid_arm_tuple_length(self):
        with pytest.raises(ValidationError, match="per arm"):
            _single_cell_spec(zero_intercept=(0.0,))


class TestTrueCdf:
    def test_zero_location_equals_average_zero_mass(self):
        spec = default_spec()
        # control: intercept 0.4, slope -1.1 over centered tiers -2..2
        pi0 = expit(0.4 + 1.1 * np.array([2, 1, 0, -1, -2], dtype=float))
        assert true_cdf(spec, 0, 0.0) == pytest.approx(pi0.mean(), abs=1e-12)

    def test_hand_mixture_sum_at_one_minute(self):
        # single cell: pi0 = expit(0) = 0.5, C(1) = beta_1 + w_1 = 0.3
        spec = _single_cell_spec()
        assert true_cdf(spec, 0, 1.0) == pytest.approx(0.5 + 0.5 * 0.3, abs=1e-12)
        # mid-segment: C(1.5) = beta_1 + w_1 + 0.5 * w_2 = 0.5
        assert true_cdf(spec, 0, 1.5) == pytest.approx(0.5 + 0.5 * 0.5, abs=1e-12)

    def test_one_at_and_beyond_support_top(self):
        spec = default_spec()
        assert true_cdf(spec, 0, 3.0) == pytest.approx(1.0, abs=1e-12)
        assert true_cdf(spec, 1, 17.2) == pytest.approx(1.0, abs=1e-12)

    def test_zero_below_support(self):
        assert true_cdf(default_spec(), 0, -0.5) == 0.0

    def test_monotone_in_location(self):
        spec = default_spec()
        ys = np.linspace(-0.5, 3.5, 400)
        for d in (0, 1):
            vals = true_cdf(spec, d, ys)
            assert np.all(np.diff(vals) >= -1e-15)

    def test_conditional_cdf_uses_the_cell(self):
        spec = default_spec()
        # highest tier engages most: smaller zero mass than lowest tier
        lo = true_conditional_cdf(spec, 0, 0.0, tier=0, gender=0)
        hi = true_conditional_cdf(spec, 0, 0.0, tier=spec.tiers - 1, gender=0)
        assert hi < lo

    def test_marginal_averages_conditionals(self):
        spec = gender_interacted_spec()
        y = 1.25
        cells = [
            true_conditional_cdf(spec, 1, y, tier=t, gender=g)
            for t in range(spec.tiers)
            for g in (0, 1)
        ]
        assert true_cdf(spec, 1, y) == pytest.approx(np.mean(cells), abs=1e-12)


class TestTrueMoments:
    def test_single_cell_mean_by_hand(self):
        # engaged mean = .2*1 + .3*3 + .1*.5 + .4*1.5 = 1.75; pi0 = 0.5
        spec = _single_cell_spec()
        assert true_mean(spec, 0) == pytest.approx(0.5 * 1.75, abs=1e-12)

    def test_treatment_invariant_spec_has_zero_effects(self):
        masses_b = (((0.2, 0.0, 0.3),) * 2,) * 2
        masses_s = (((0.1, 0.4, 0.0),) * 2,) * 2
        spec = DgpSpec(
            zero_intercept=(0.25, 0.25),
            zero_slope=(-0.8, -0.8),
            boundary_mass=masses_b,
            segment_mass=masses_s,
        )
        dte, pte, ate = true_effects(spec, GRID)
        assert np.all(dte.point == 0.0)
        assert np.all(pte.point == 0.0)
        assert ate == 0.0

    def test_pure_zero_mass_shift(self):
        # identical engaged distribution, zero mass 0.5 -> 0.4:
        # DTE(y) = -0.1 * (1 - C(y)) for y below the top
        spec = _single_cell_spec(
            zero_intercept=(0.0, float(np.log(0.4 / 0.6)))
        )
        dte, _, _ = true_effects(spec, GRID)
        # engaged CDF at 0,1,2,3: 0, .2+.1, .2+.1+.4, 1
        c_vals = np.array([0.0, 0.3, 0.7, 1.0])
        np.testing.assert_allclose(dte.point, -0.1 * (1.0 - c_vals), atol=1e-12)

    def test_grid_aligned_ate_equals_negative_grid_sum(self):
        dte, _, ate = true_effects(grid_aligned_spec(), GRID)
        assert ate == pytest.approx(-GRID.step_h * dte.point[:-1].sum(), abs=1e-12)

    def test_default_spec_frozen_truth_values(self):
        # regression freeze of the shipped scenario
        dte, pte, ate = true_effects(default_spec(), GRID)
        np.testing.assert_allclose(
            dte.point, [-0.04807355, -0.03518911, -0.01205019, 0.0], atol=1e-7
        )
        assert ate == pytest.approx(0.08938318, abs=1e-7)
        assert pte.atom_at_zero == pytest.approx(dte.point[0], abs=1e-15)

    def test_gender_interacted_signs_differ(self):
        spec = gender_interacted_spec()
        dte0, _, ate0 = true_effects(spec, GRID, gender=0)
        dte1, _, ate1 = true_effects(spec, GRID, gender=1)
        assert dte0.point[0] < 0 < dte1.point[0]
        assert ate0 > 0 > ate1

    def test_effects_are_bounded_and_telescoping(self):
        spec = default_spec()
        dte, pte, _ = true_effects(spec, GRID, span=1)
        assert np.all(np.abs(dte.point) <= 1.0)
        assert np.all(np.abs(pte.point) <= 1.0)
        # consecutive PTEs sum back to DTE differences
        total = pte.point.sum()
        assert total == pytest.approx(dte.point[-1] - dte.point[0], abs=1e-12)

    def test_bad_span_rejected(self):
        with pytest.raises(ValidationError, match="multiple"):
            true_effects(default_spec(), LocationGrid(2, 3), span=3)
        with pytest.raises(ValidationError, match="exceeds"):
            true_effects(default_spec(), GRID, span=5)


class TestGenerate:
    def test_deterministic_by_seed(self):
        spec = default_spec()
        a = generate(spec, 3000, seed=11)
        b = generate(spec, 3000, seed=11)
        c = generate(spec, 3000, seed=12)
        assert np.array_equal(a.y, b.y) and np.array_equal(a.d, b.d)
        assert np.array_equal(a.x, b.x)
        assert not np.array_equal(a.y, c.y)

    def test_thread_count_does_not_change_output(self, monkeypatch):
        spec = default_spec()
        monkeypatch.setenv("DTE_LAB_THREADS", "1")
        serial = generate(spec, 150000, seed=3)
        monkeypatch.setenv("DTE_LAB_THREADS", "4")
        threaded = generate(spec, 150000, seed=3)
        assert np.array_equal(serial.y, threaded.y)
        assert np.array_equal(serial.x, threaded.x)

    def test_full_chunks_are_stable_across_sizes(self):
        # a complete chunk draws the same rows no matter how many chunks follow
        from dte_lab.simulator import GENERATION_CHUNK

        spec = default_spec()
        small = generate(spec, GENERATION_CHUNK, seed=9)
        large = generate(spec, GENERATION_CHUNK + 1234, seed=9)
        assert np.array_equal(small.y, large.y[:GENERATION_CHUNK])
        assert np.array_equal(small.x, large.x[:GENERATION_CHUNK])

    def test_all_zero_when_zero_mass_is_one(self):
        spec = _single_cell_spec(zero_intercept=(50.0, 50.0))
        ds = generate(spec, 5000, seed=0)
        assert np.all(ds.y == 0.0)

    def test_two_point_support(self):
        # engaged mass entirely on the first episode boundary
        spec = _single_cell_spec(
            boundary_mass=(((1.0, 0.0, 0.0),) * 2,) * 2,
            segment_mass=(((0.0, 0.0, 0.0),) * 2,) * 2,
        )
        ds = generate(spec, 5000, seed=1)
        assert set(np.unique(ds.y)) <= {0.0, 1.0}
        # engaged share approximates 1 - pi0 = 0.5
        assert abs((ds.y == 1.0).mean() - 0.5) < 0.03

    def test_outcomes_stay_in_support(self):
        spec = default_spec()
        ds = generate(spec, 50000, seed=4)
        assert ds.y.min() >= 0.0
        assert ds.y.max() <= spec.max_minutes

    def test_covariate_layout(self):
        spec = default_spec()
        ds = generate(spec, 2000, seed=0)
        assert ds.covariate_names == ("tier", "gender", "noise1", "noise2")
        tiers = ds.covariate("tier")
        assert set(np.unique(tiers)) <= set(range(spec.tiers))
        assert set(np.unique(ds.covariate("gender"))) <= {0.0, 1.0}

    def test_assignment_share_matches_rho(self):
        ds = generate(default_spec(), 4_300_000, seed=7)
        expected = 0.1 * 4_300_000
        sd = np.sqrt(4_300_000 * 0.1 * 0.9)
        assert abs(ds.n1 - expected) < 3 * sd

    def test_empirical_cdf_near_truth(self):
        spec = default_spec()
        ds = generate(spec, 100000, seed=2)
        pair = empirical_cdf_pair(ds, GRID)
        locs = GRID.locations.astype(float)
        assert np.abs(pair.f1 - true_cdf(spec, 1, locs)).max() < 0.01
        assert np.abs(pair.f0 - true_cdf(spec, 0, locs)).max() < 0.01

    def test_sup_error_within_doubled_dkw_band(self):
        # the doubled 95% band should hold in nearly every replication
        spec = default_spec()
        locs = GRID.locations.astype(float)
        truth = {d: true_cdf(spec, d, locs) for d in (0, 1)}
        hits = 0
        reps = 30
        for r in range(reps):
            ds = generate(spec, 5000, seed=500 + r)
            pair = empirical_cdf_pair(ds, GRID)
            ok = True
            for err, n_d in (
                (np.abs(pair.f1 - truth[1]).max(), ds.n1),
                (np.abs(pair.f0 - truth[0]).max(), ds.n0),
            ):
                ok = ok and err < 2.0 * np.sqrt(np.log(2 / 0.05) / (2 * n_d))
            hits += ok
        assert hits >= int(0.95 * reps)

    def test_rejects_bad_n(self):
        with pytest.raises(ValidationError, match="n must be"):
            generate(default_spec(), 0)


class TestSerialization:
    def test_round_trip(self, tmp_path):
        spec = gender_interacted_spec()
        path = tmp_path / "spec.json"
        save_spec(spec, path)
        assert load_spec(path) == spec

    def test_unknown_field_rejected(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text('{"bogus": 1}', encoding="utf-8")
        with pytest.raises(ValidationError, match="bogus"):
            load_spec(path)

    def test_invalid_masses_rejected_on_load(self, tmp_path):
        import dataclasses as dc
        import json

        raw = json.loads(json.dumps(dc.asdict(default_spec())))
        raw["boundary_mass"][0][0][0] = 0.9  # breaks the sum
        path = tmp_path / "bad.json"
        path.write_text(json.dumps(raw), encoding="utf-8")
        with pytest.raises(ValidationError, match="sum to"):
            load_spec(path)

    def test_replace_revalidates(self):
        spec = default_spec()
        with pytest.raises(ValidationError):
            dataclasses.replace(spec, rho=2.0)
