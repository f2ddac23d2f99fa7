"""Observation container, table validation, and CSV input/output.

The canonical on-disk format is a UTF-8 CSV with header ``w1,...,wd,a,y``
where ``a`` is a binary treatment indicator. Row numbers in error messages
are 1-based and count data rows (the header is row 0).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, EmptyData, NonBinaryTreatment, NonFiniteValue


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr = np.ascontiguousarray(arr)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class Dataset:
    """Immutable sample of (covariates, treatment, outcome) triples.

    Attributes
    ----------
    covariates : ndarray of shape (n, d)
    treatment : ndarray of shape (n,), entries in {0, 1}
    outcome : ndarray of shape (n,), finite reals
    """

    covariates: np.ndarray
    treatment: np.ndarray
    outcome: np.ndarray

    @property
    def n(self) -> int:
        return self.covariates.shape[0]

    @property
    def d(self) -> int:
        return self.covariates.shape[1]

    @property
    def binary_outcome(self) -> bool:
        return bool(np.isin(self.outcome, (0.0, 1.0)).all())

    @classmethod
    def from_arrays(cls, covariates, treatment, outcome) -> "Dataset":
        W = np.atleast_2d(np.asarray(covariates, dtype=float))
        if W.shape[0] == 1 and np.asarray(treatment).size != 1:
            W = W.T
        a = np.asarray(treatment, dtype=float).ravel()
        y = np.asarray(outcome, dtype=float).ravel()
        if W.shape[0] != a.shape[0] or a.shape[0] != y.shape[0]:
            raise DimensionMismatch(
                f"covariates ({W.shape[0]}), treatment ({a.shape[0]}) and "
                f"outcome ({y.shape[0]}) have mismatched lengths"
            )
        if W.shape[0] == 0:
            raise EmptyData("dataset has no rows")
        _check_rows(W, a, y)
        return cls(_freeze(W), _freeze(a.astype(np.int64)), _freeze(y))


def _check_rows(W: np.ndarray, a: np.ndarray, y: np.ndarray) -> None:
    bad = ~np.isfinite(W).all(axis=1) | ~np.isfinite(a) | ~np.isfinite(y)
    if bad.any():
        row = int(np.flatnonzero(bad)[0]) + 1
        raise NonFiniteValue(f"row {row}: non-finite value")
    nonbinary = (a != 0.0) & (a != 1.0)
    if nonbinary.any():
        row = int(np.flatnonzero(nonbinary)[0]) + 1
        raise NonBinaryTreatment(f"row {row}: treatment {a[row - 1]!r} is not 0 or 1")


def validate_dataset(table) -> Dataset:
    """Validate a raw table of rows ``(w1, ..., wd, a, y)`` into a Dataset.

    Raises EmptyData, NonBinaryTreatment, or NonFiniteValue; error messages
    name the offending 1-based row.
    """
    arr = np.asarray(table, dtype=float)
    if arr.size == 0:
        raise EmptyData("table has no rows")
    if arr.ndim != 2:
        raise DimensionMismatch(f"expected a 2-d table, got shape {arr.shape}")
    if arr.shape[1] < 3:
        raise DimensionMismatch("each row needs at least one covariate plus (a, y)")
    return Dataset.from_arrays(arr[:, :-2], arr[:, -2], arr[:, -1])


def dataset_header(d: int) -> list[str]:
    return [f"w{i + 1}" for i in range(d)] + ["a", "y"]


def load_dataset_csv(path) -> Dataset:
    """Read a ``w1,...,wd,a,y`` CSV. Parse errors reference 1-based data rows."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise EmptyData(f"{path}: file is empty") from None
        d = len(header) - 2
        if d < 1 or header != dataset_header(d):
            raise DimensionMismatch(
                f"{path}: header {header!r} does not match 'w1,...,wd,a,y'"
            )
        rows = []
        for rownum, fields in enumerate(reader, start=1):
            if len(fields) != d + 2:
                raise DimensionMismatch(
                    f"{path}: row {rownum}: expected {d + 2} fields, got {len(fields)}"
                )
            try:
                rows.append([float(v) for v in fields])
            except ValueError as exc:
                raise NonFiniteValue(f"{path}: row {rownum}: {exc}") from None
    if not rows:
        raise EmptyData(f"{path}: no data rows")
    return validate_dataset(np.asarray(rows, dtype=float))


def save_dataset_csv(data: Dataset, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(dataset_header(data.d))
        for i in range(data.n):
            writer.writerow(
                [repr(float(v)) for v in data.covariates[i]]
                + [str(int(data.treatment[i])), repr(float(data.outcome[i]))]
            )


def load_covariates_csv(path) -> np.ndarray:
    """Read a covariate-only query CSV with header ``w1,...,wd``."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise EmptyData(f"{path}: file is empty") from None
        d = len(header)
        if header != [f"w{i + 1}" for i in range(d)]:
            raise DimensionMismatch(f"{path}: header {header!r} does not match 'w1,...,wd'")
        rows = []
        for rownum, fields in enumerate(reader, start=1):
            if len(fields) != d:
                raise DimensionMismatch(
                    f"{path}: row {rownum}: expected {d} fields, got {len(fields)}"
                )
            try:
                rows.append([float(v) for v in fields])
            except ValueError as exc:
                raise NonFiniteValue(f"{path}: row {rownum}: {exc}") from None
    return np.asarray(rows, dtype=float).reshape(len(rows), d)
