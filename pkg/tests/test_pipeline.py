"""Pipeline assembly: layouts, refit/frozen agreement, bundle contents."""
import numpy as np
import pytest

from dte_lab.dataset import LocationGrid
from dte_lab.errors import ConfigError
from dte_lab.inference import BootstrapConfig
from dte_lab.pipeline import (
    EstimateSettings,
    build_pipeline,
    run_estimate,
    statistic_layout,
)
from dte_lab.simulator import default_spec, generate

GRID = LocationGrid(1, 3)


@pytest.fixture(scope="module")
def dataset():
    return generate(default_spec(), 3000, seed=8)


def fast_settings(**kw):
    base = dict(
        estimator="adjusted",
        learner="boosted_stumps",
        learner_options=(("rounds", 20),),
        folds=2,
        seed=3,
    )
    base.update(kw)
    return EstimateSettings(**base)


class TestLayout:
    def test_adjusted_blocks_tile_the_vector(self):
        lay = statistic_layout(GRID, span=None, estimator="adjusted")
        j1 = len(GRID)
        assert lay["dte"] == slice(0, j1)
        assert lay["pte"] == slice(j1, 2 * j1 - 1)
        assert lay["ate"] == 2 * j1 - 1
        assert lay["ate_unadjusted"] == 2 * j1
        assert lay["dte_unadjusted"] == slice(2 * j1 + 1, 3 * j1 + 1)

    def test_unadjusted_layout_is_shorter(self):
        lay = statistic_layout(GRID, span=None, estimator="unadjusted")
        assert "ate_unadjusted" not in lay
        assert lay["ate"] == 2 * len(GRID) - 1

    def test_wider_span_shrinks_pte_block(self):
        lay = statistic_layout(GRID, span=2, estimator="unadjusted")
        assert lay["pte"] == slice(4, 6)  # two interval starts


class TestPipelines:
    def test_vector_matches_layout_width(self, dataset):
        for estimator in ("unadjusted", "adjusted"):
            pipe, lay = build_pipeline(dataset, GRID, fast_settings(estimator=estimator))
            vec = pipe(dataset, rows=np.arange(dataset.n), seed=3)
            widths = [
                (s.stop - s.start) if isinstance(s, slice) else 1 for s in lay.values()
            ]
            assert vec.shape == (sum(widths),)

    def test_refit_and_frozen_agree_on_identity_rows(self, dataset):
        settings = fast_settings()
        refit, _ = build_pipeline(dataset, GRID, settings, "refit")
        frozen, _ = build_pipeline(dataset, GRID, settings, "frozen")
        rows = np.arange(dataset.n)
        np.testing.assert_array_equal(
            refit(dataset, rows=rows, seed=settings.seed),
            frozen(dataset, rows=rows, seed=settings.seed),
        )

    def test_frozen_reuses_full_sample_fits_on_resamples(self, dataset):
        # a frozen replicate is a pure re-average: permuting the resample
        # rows permutes nothing in the statistics
        settings = fast_settings()
        frozen, _ = build_pipeline(dataset, GRID, settings, "frozen")
        rng = np.random.default_rng(0)
        rows = rng.integers(0, dataset.n, dataset.n)
        sub = dataset.take(rows)
        a = frozen(sub, rows=rows, seed=1)
        perm = rng.permutation(dataset.n)
        b = frozen(dataset.take(rows[perm]), rows=rows[perm], seed=99)
        np.testing.assert_allclose(a, b, atol=1e-12)

    def test_unknown_nuisance_mode(self, dataset):
        with pytest.raises(ConfigError, match="nuisance mode"):
            build_pipeline(dataset, GRID, fast_settings(), "cached")

    def test_bad_estimator_name(self):
        with pytest.raises(ConfigError, match="estimator"):
            EstimateSettings(estimator="oracle")


class TestRunEstimate:
    def test_point_only_bundle(self, dataset):
        bundle = run_estimate(dataset, GRID, fast_settings())
        assert bundle.dte_curve.se is None
        assert bundle.bootstrap_result is None
        assert [r.kind for r in bundle.ate_rows] == ["unadjusted", "adjusted"]
        assert all(r.se is None for r in bundle.ate_rows)

    def test_bootstrap_attaches_inference(self, dataset):
        boot = BootstrapConfig(replications=12, nuisance_mode="frozen", seed=3)
        bundle = run_estimate(dataset, GRID, fast_settings(), boot)
        assert bundle.dte_curve.se is not None
        assert bundle.pte_curve.ci_lo is not None
        assert all(r.se is not None and r.se >= 0 for r in bundle.ate_rows)
        assert bundle.bootstrap_result.failures == 0

    def test_bootstrap_point_equals_direct_point(self, dataset):
        # the bootstrap's internal full-sample call must reproduce the
        # directly computed estimates exactly
        boot = BootstrapConfig(replications=8, nuisance_mode="refit", seed=3)
        bundle = run_estimate(dataset, GRID, fast_settings(), boot)
        res, lay = bundle.bootstrap_result, bundle.layout
        np.testing.assert_array_equal(res.point[lay["dte"]], bundle.dte_curve.point)
        np.testing.assert_array_equal(res.point[lay["pte"]], bundle.pte_curve.point)
        assert res.point[lay["ate"]] == bundle.ate_rows[1].point
        assert res.point[lay["ate_unadjusted"]] == bundle.ate_rows[0].point

    def test_unadjusted_bundle_and_bootstrap(self, dataset):
        boot = BootstrapConfig(replications=10, seed=2)
        bundle = run_estimate(
            dataset, GRID, fast_settings(estimator="unadjusted"), boot
        )
        assert [r.kind for r in bundle.ate_rows] == ["unadjusted"]
        assert bundle.ate_rows[0].se is not None
        assert bundle.pair.kind == "unadjusted"

    def test_seed_changes_fold_assignment_effects(self, dataset):
        a = run_estimate(dataset, GRID, fast_settings(seed=1))
        b = run_estimate(dataset, GRID, fast_settings(seed=2))
        assert not np.array_equal(a.dte_curve.point, b.dte_curve.point)

    def test_rearrange_flag_propagates(self, dataset):
        bundle = run_estimate(dataset, GRID, fast_settings(rearrange=True))
        assert bundle.pair.rearranged
        assert np.all(np.diff(bundle.pair.f1) >= -1e-12)
