import numpy as np
import pytest

from eplearn import Dataset, load_dataset_csv, save_dataset_csv, validate_dataset
from eplearn.data import load_covariates_csv
from eplearn.errors import (
    DimensionMismatch,
    EmptyData,
    NonBinaryTreatment,
    NonFiniteValue,
)


def test_valid_table_passes_through():
    table = [
        [0.1, 0.2, 1, 2.5],
        [0.3, -0.4, 0, -1.0],
        [1.5, 0.0, 1, 0.0],
    ]
    data = validate_dataset(table)
    assert data.n == 3
    assert data.d == 2
    np.testing.assert_array_equal(data.treatment, [1, 0, 1])


def test_nonbinary_treatment_names_row():
    table = [[0.1, 0.0, 1, 2.5], [0.3, 0.1, 2, 1.0]]
    with pytest.raises(NonBinaryTreatment, match="row 2"):
        validate_dataset(table)


def test_nan_outcome_names_row():
    table = [[0.1, 0.0, 1, np.nan]]
    with pytest.raises(NonFiniteValue, match="row 1"):
        validate_dataset(table)


def test_infinite_covariate_rejected():
    table = [[np.inf, 0.0, 1, 1.0]]
    with pytest.raises(NonFiniteValue):
        validate_dataset(table)


def test_empty_table_rejected():
    with pytest.raises(EmptyData):
        validate_dataset(np.zeros((0, 4)))


def test_fractional_treatment_rejected():
    with pytest.raises(NonBinaryTreatment):
        Dataset.from_arrays([[0.0]], [0.5], [1.0])


def test_dataset_arrays_are_immutable():
    data = validate_dataset([[0.1, 1, 2.0], [0.2, 0, 3.0]])
    with pytest.raises(ValueError):
        data.covariates[0, 0] = 99.0


def test_binary_outcome_detection():
    binary = Dataset.from_arrays([[0.0], [1.0]], [0, 1], [0.0, 1.0])
    cont = Dataset.from_arrays([[0.0], [1.0]], [0, 1], [0.5, 1.0])
    assert binary.binary_outcome
    assert not cont.binary_outcome


def test_csv_round_trip(tmp_path, rng):
    W = rng.normal(size=(20, 3))
    a = (rng.uniform(size=20) < 0.5).astype(int)
    y = rng.normal(size=20)
    data = Dataset.from_arrays(W, a, y)
    path = tmp_path / "data.csv"
    save_dataset_csv(data, path)
    loaded = load_dataset_csv(path)
    np.testing.assert_array_equal(loaded.covariates, data.covariates)
    np.testing.assert_array_equal(loaded.treatment, data.treatment)
    np.testing.assert_array_equal(loaded.outcome, data.outcome)


def test_csv_parse_error_is_one_based(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("w1,a,y\n0.1,1,2.0\n0.2,oops,3.0\n")
    with pytest.raises(NonFiniteValue, match="row 2"):
        load_dataset_csv(path)


def test_csv_header_mismatch(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("x1,a,y\n0.1,1,2.0\n")
    with pytest.raises(DimensionMismatch):
        load_dataset_csv(path)


def test_covariate_csv_loader(tmp_path):
    path = tmp_path / "q.csv"
    path.write_text("w1,w2\n0.5,1.5\n-1.0,2.0\n")
    q = load_covariates_csv(path)
    assert q.shape == (2, 2)
    assert q[1, 0] == -1.0
