import math

import numpy as np
import pytest

from dte_lab import (
    DegenerateGridError,
    EmptyArmError,
    ExperimentDataset,
    LocationGrid,
    ValidationError,
    build_grid,
    read_csv_dataset,
    subset_by_group,
    validate_dataset,
)
from dte_lab.dataset import write_csv_dataset


def make_dataset(d, y, x=None, rho=0.5, names=None):
    d = np.asarray(d, dtype=np.int8)
    y = np.asarray(y, dtype=np.float64)
    if x is None:
        x = np.empty((len(d), 0))
        names = ()
    else:
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        if x.shape[0] != len(d):
            x = x.T
        names = tuple(names or (f"x{j}" for j in range(x.shape[1])))
    return ExperimentDataset(d=d, y=y, x=x, rho=rho, covariate_names=names)


class TestValidate:
    def test_accepts_wellformed_records(self):
        cols = {"d": [0, 1, 0, 1], "y": [0.0, 3.5, 1.0, 0.0], "age": [20, 30, 40, 50]}
        ds = validate_dataset(cols, rho=0.5)
        assert ds.n == 4
        assert ds.n1 == 2
        assert ds.covariate_names == ("age",)
        assert ds.x.shape == (4, 1)

    def test_accepts_row_records(self):
        rows = [
            {"d": "0", "y": "1.5", "age": "20"},
            {"d": "1", "y": "0", "age": "31"},
        ]
        ds = validate_dataset(rows, rho=0.1)
        assert ds.y[0] == 1.5
        assert ds.rho == 0.1

    def test_nonbinary_treatment_names_row(self):
        cols = {"d": [0, 1, 2], "y": [1.0, 1.0, 1.0]}
        with pytest.raises(ValidationError, match="row 2"):
            validate_dataset(cols, rho=0.5)

    def test_negative_outcome_names_row(self):
        cols = {"d": [0, 1, 0], "y": [1.0, -0.5, 1.0]}
        with pytest.raises(ValidationError, match="row 1"):
            validate_dataset(cols, rho=0.5)

    def test_nan_outcome_rejected(self):
        cols = {"d": [0, 1], "y": [float("nan"), 1.0]}
        with pytest.raises(ValidationError, match="row 0"):
            validate_dataset(cols, rho=0.5)

    def test_ragged_covariates_rejected(self):
        cols = {"d": [0, 1, 0], "y": [1.0, 1.0, 1.0], "age": [20, 30]}
        with pytest.raises(ValidationError, match="age"):
            validate_dataset(cols, rho=0.5)

    def test_single_treated_unit_is_enough(self):
        # arm counts follow realized assignments, not rho
        cols = {"d": [1, 0, 0, 0, 0, 0, 0, 0, 0, 0], "y": [1.0] * 10}
        ds = validate_dataset(cols, rho=0.1)
        assert ds.n1 == 1

    def test_empty_arm_rejected(self):
        with pytest.raises(EmptyArmError, match="control"):
            validate_dataset({"d": [1, 1], "y": [1.0, 2.0]}, rho=0.5)
        with pytest.raises(EmptyArmError, match="treated"):
            validate_dataset({"d": [0, 0], "y": [1.0, 2.0]}, rho=0.5)

    def test_bad_rho_rejected(self):
        with pytest.raises(ValidationError, match="probability"):
            validate_dataset({"d": [0, 1], "y": [1.0, 1.0]}, rho=0.0)

    def test_arrays_are_readonly(self):
        ds = validate_dataset({"d": [0, 1], "y": [1.0, 2.0]}, rho=0.5)
        with pytest.raises(ValueError):
            ds.y[0] = 99.0


class TestGrid:
    def test_locations_are_multiples_of_step(self):
        g = LocationGrid(step_h=2, count_j=23)
        assert len(g) == 24
        assert g.locations[0] == 0
        assert g.locations[-1] == 46
        assert np.all(np.diff(g.locations) == 2)

    def test_step_from_quantile_uses_ceil(self):
        # 0.99 quantile 46 with J=23 intervals: h = ceil(46/23) = 2
        y = np.zeros(1000)
        y[:980] = np.linspace(0.05, 45.0, 980)
        y[980:] = 46.0
        ds = make_dataset([0, 1] * 500, y)
        g = build_grid(ds, percentile_p=0.99, intervals_j=23)
        assert g.step_h == 2
        assert g.top == 46

    def test_step_floor_is_one(self):
        # quantile 5 with J=10 would give h=0.5; floor to 1
        ds = make_dataset([0, 1] * 50, np.full(100, 5.0))
        g = build_grid(ds, percentile_p=0.99, intervals_j=10)
        assert g.step_h == 1
        assert g.top == 10

    def test_all_zero_outcomes_degenerate(self):
        ds = make_dataset([0, 1] * 50, np.zeros(100))
        with pytest.raises(DegenerateGridError, match="explicit"):
            build_grid(ds)

    def test_control_source(self):
        d = np.array([0] * 50 + [1] * 50)
        y = np.concatenate([np.full(50, 10.0), np.full(50, 100.0)])
        ds = make_dataset(d, y)
        g = build_grid(ds, percentile_p=0.99, intervals_j=10, source="control")
        assert g.top == 10

    def test_grid_is_deterministic(self):
        rng = np.random.default_rng(7)
        y = rng.exponential(20.0, size=500).round(3)
        ds = make_dataset(rng.integers(0, 2, 500), y)
        # same data, same grid, regardless of how many times we build it
        grids = {(build_grid(ds).step_h, build_grid(ds).count_j) for _ in range(3)}
        assert len(grids) == 1

    def test_invalid_grid_params(self):
        with pytest.raises(ValidationError):
            LocationGrid(step_h=0, count_j=5)
        with pytest.raises(ValidationError):
            LocationGrid(step_h=1, count_j=0)


class TestSubset:
    def setup_method(self):
        self.ds = make_dataset(
            d=[0, 1, 0, 1, 1, 0],
            y=[1, 2, 3, 4, 5, 6],
            x=[[0, 0, 1, 1, 2, 2], [1, 0, 1, 0, 1, 0]],
            names=("tier", "gender"),
        )

    def test_partition_covers_everything_once(self):
        males = subset_by_group(self.ds, lambda r: r["gender"] == 0)
        females = subset_by_group(self.ds, lambda r: r["gender"] == 1)
        assert males.n + females.n == self.ds.n
        assert sorted(np.concatenate([males.y, females.y]).tolist()) == sorted(
            self.ds.y.tolist()
        )

    def test_schema_and_rho_preserved(self):
        sub = subset_by_group(self.ds, lambda r: r["tier"] >= 1)
        assert sub.covariate_names == self.ds.covariate_names
        assert sub.rho == self.ds.rho

    def test_empty_arm_names_the_arm(self):
        # gender==1 & tier==2 keeps only row 4, a treated unit
        with pytest.raises(EmptyArmError, match="control"):
            subset_by_group(self.ds, lambda r: r["tier"] == 2 and r["gender"] == 1)

    def test_empty_subgroup(self):
        with pytest.raises(EmptyArmError):
            subset_by_group(self.ds, lambda r: r["tier"] > 99)

    def test_idempotent(self):
        pred = lambda r: r["tier"] <= 1
        once = subset_by_group(self.ds, pred)
        twice = subset_by_group(once, pred)
        assert np.array_equal(once.y, twice.y)
        assert np.array_equal(once.d, twice.d)


class TestCsvRoundTrip:
    def test_round_trip(self, tmp_path):
        ds = make_dataset(
            d=[0, 1, 1, 0],
            y=[0.0, 12.25, 3.0, 7.5],
            x=[[18, 25, 40, 61], [0, 1, 1, 0]],
            names=("age", "gender"),
            rho=0.1,
        )
        path = tmp_path / "data.csv"
        write_csv_dataset(path, ds)
        back = read_csv_dataset(path, rho=0.1)
        assert np.array_equal(back.d, ds.d)
        assert np.array_equal(back.y, ds.y)
        assert np.array_equal(back.x, ds.x)
        assert back.covariate_names == ds.covariate_names

    def test_missing_header(self, tmp_path):
        path = tmp_path / "empty.csv"
        path.write_text("")
        with pytest.raises(ValidationError):
            read_csv_dataset(path, rho=0.5)

    def test_error_mentions_path(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("d,y\n0,1.0\n1,-3\n")
        with pytest.raises(ValidationError, match="bad.csv"):
            read_csv_dataset(path, rho=0.5)

    def test_no_covariates(self, tmp_path):
        path = tmp_path / "plain.csv"
        path.write_text("d,y\n0,1.5\n1,2\n")
        ds = read_csv_dataset(path, rho=0.5)
        assert ds.p == 0
        assert ds.x.shape == (2, 0)
