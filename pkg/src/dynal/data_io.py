"""Tabular dataset ingestion for the materials-style case study.

CSV rows carry categorical composition columns (one-hot encoded), numeric
columns (standardized to zero mean / unit variance), and a numeric target.
The encoding is deterministic given the schema so runs are reproducible
byte for byte.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from typing import Dict, List, Sequence, Tuple

import numpy as np

logger = logging.getLogger(__name__)


class SchemaError(ValueError):
    """CSV content violates the declared schema."""


@dataclass(frozen=True)
class TabularSchema:
    """Column roles: (name, allowed categories) pairs, numeric names, target."""

    categorical_columns: Tuple[Tuple[str, Tuple[str, ...]], ...]
    numeric_columns: Tuple[str, ...]
    target_column: str

    def __post_init__(self):
        predictors = [c for c, _ in self.categorical_columns]
        predictors += list(self.numeric_columns)
        if self.target_column in predictors:
            raise SchemaError("target column cannot also be a predictor")
        if len(set(predictors)) != len(predictors):
            raise SchemaError("duplicate predictor column names")
        for name, cats in self.categorical_columns:
            if len(set(cats)) != len(cats):
                raise SchemaError(f"duplicate categories in column {name!r}")

    @staticmethod
    def from_dict(d: dict) -> "TabularSchema":
        cats = tuple(
            (str(name), tuple(str(c) for c in values))
            for name, values in d.get("categorical", {}).items()
        )
        return TabularSchema(
            categorical_columns=cats,
            numeric_columns=tuple(str(c) for c in d.get("numeric", ())),
            target_column=str(d["target"]),
        )


@dataclass(frozen=True)
class EncodedTable:
    """One-hot + standardized predictor matrix with its target vector."""

    X: np.ndarray
    y: np.ndarray
    feature_names: Tuple[str, ...]
    scalers: Dict[str, Tuple[float, float]] = field(default_factory=dict)
    schema: TabularSchema = None
    dropped_rows: int = 0


def load_csv(path, schema: TabularSchema) -> EncodedTable:
    """Parse, validate, and encode a CSV file under the schema.

    Rows with missing cells are rejected (count logged); an unknown
    category raises with the offending row number.  Constant numeric
    columns standardize to all zeros with a warning.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        needed = [c for c, _ in schema.categorical_columns]
        needed += list(schema.numeric_columns) + [schema.target_column]
        missing = [c for c in needed if c not in header]
        if missing:
            raise SchemaError(f"header missing columns: {missing}")
        raw_rows = list(reader)

    cat_lookup = {name: {c: k for k, c in enumerate(cats)}
                  for name, cats in schema.categorical_columns}

    kept_rows = []
    dropped = 0
    for lineno, row in enumerate(raw_rows, start=2):
        if any(row.get(c) in (None, "") for c in needed):
            dropped += 1
            continue
        for name, _ in schema.categorical_columns:
            if row[name] not in cat_lookup[name]:
                raise SchemaError(
                    f"row {lineno}: unknown category {row[name]!r} "
                    f"in column {name!r}"
                )
        for name in list(schema.numeric_columns) + [schema.target_column]:
            try:
                v = float(row[name])
            except ValueError:
                raise SchemaError(
                    f"row {lineno}: cell {row[name]!r} in column {name!r} "
                    "is not numeric"
                ) from None
            if not np.isfinite(v):
                raise SchemaError(
                    f"row {lineno}: non-finite value in column {name!r}")
        kept_rows.append(row)
    if dropped:
        logger.warning("dropped %d rows with missing values", dropped)
    if not kept_rows:
        raise SchemaError("no usable rows after validation")

    m = len(kept_rows)
    blocks: List[np.ndarray] = []
    names: List[str] = []
    for name, cats in schema.categorical_columns:
        block = np.zeros((m, len(cats)))
        for i, row in enumerate(kept_rows):
            block[i, cat_lookup[name][row[name]]] = 1.0
        blocks.append(block)
        names.extend(f"{name}={c}" for c in cats)

    scalers: Dict[str, Tuple[float, float]] = {}
    for name in schema.numeric_columns:
        col = np.array([float(r[name]) for r in kept_rows])
        mu = float(col.mean())
        sd = float(col.std())
        if sd == 0.0:
            logger.warning("numeric column %r is constant; encoded as zeros",
                           name)
            blocks.append(np.zeros((m, 1)))
            scalers[name] = (mu, 0.0)
        else:
            blocks.append(((col - mu) / sd)[:, None])
            scalers[name] = (mu, sd)
        names.append(name)

    y = np.array([float(r[schema.target_column]) for r in kept_rows])
    return EncodedTable(
        X=np.hstack(blocks),
        y=y,
        feature_names=tuple(names),
        scalers=scalers,
        schema=schema,
        dropped_rows=dropped,
    )


def decode_categories(table: EncodedTable) -> List[Dict[str, str]]:
    """Recover each row's categorical assignments from its one-hot blocks."""
    out: List[Dict[str, str]] = []
    for i in range(table.X.shape[0]):
        row: Dict[str, str] = {}
        offset = 0
        for name, cats in table.schema.categorical_columns:
            block = table.X[i, offset:offset + len(cats)]
            row[name] = cats[int(np.argmax(block))]
            offset += len(cats)
        out.append(row)
    return out


def split_pool(table: EncodedTable, n_initial: int,
               rng: np.random.Generator):
    """Seed a labeled subset; the rest forms the candidate pool.

    Returns a ``loop.Dataset`` plus the ``TabularOracle`` holding every
    row's label.
    """
    from .loop import Dataset, TabularOracle

    n = table.X.shape[0]
    if not (1 <= n_initial < n):
        raise SchemaError("n_initial must satisfy 1 <= n_initial < rows")
    init = rng.choice(n, size=n_initial, replace=False)
    mask = np.zeros(n, dtype=bool)
    mask[init] = True
    data = Dataset(
        labeled_X=table.X[init],
        labeled_y=table.y[init],
        pool=table.X[~mask],
        pool_indices=np.flatnonzero(~mask),
    )
    return data, TabularOracle(table.X, table.y)
