"""Finite tabular domains: attribute schemas and coded datasets.

A domain is an ordered list of attributes, each with a finite cardinality.
Cells are addressed by a row-major index over the attribute cardinalities,
so ``cell = sum_i code_i * prod_{j>i} card_j``.  One attribute is designated
sensitive; an optional second one is the class attribute used by the
statistical-rate metrics.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np


@dataclass(frozen=True)
class Attribute:
    """One column of the domain.

    ``categories`` maps integer codes back to the raw category labels for
    columns that were label-encoded.  ``bin_edges`` holds the ``cardinality+1``
    equal-width edges for columns that were discretized from real values; its
    presence is what marks an attribute as ordinal for threshold splits.
    """

    name: str
    cardinality: int
    categories: Optional[tuple[str, ...]] = None
    bin_edges: Optional[tuple[float, ...]] = None

    def __post_init__(self) -> None:
        if not self.name:
            raise ValueError("attribute name must be nonempty")
        if self.cardinality < 1:
            raise ValueError(f"attribute {self.name!r}: cardinality must be >= 1")
        if self.categories is not None and len(self.categories) != self.cardinality:
            raise ValueError(f"attribute {self.name!r}: categories do not match cardinality")
        if self.bin_edges is not None and len(self.bin_edges) != self.cardinality + 1:
            raise ValueError(f"attribute {self.name!r}: need cardinality+1 bin edges")

    @property
    def is_ordinal(self) -> bool:
        return self.bin_edges is not None

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "cardinality": self.cardinality,
            "categories": list(self.categories) if self.categories is not None else None,
            "bin_edges": list(self.bin_edges) if self.bin_edges is not None else None,
        }

    @staticmethod
    def from_dict(d: dict) -> "Attribute":
        return Attribute(
            name=d["name"],
            cardinality=int(d["cardinality"]),
            categories=tuple(d["categories"]) if d.get("categories") is not None else None,
            bin_edges=tuple(float(e) for e in d["bin_edges"]) if d.get("bin_edges") is not None else None,
        )


@dataclass(frozen=True)
class AttributeSchema:
    """Ordered attributes plus the sensitive / target designations.

    ``sensitive_index`` may be None for pure-feature subdomains (the
    per-group conditionals live on such a schema); every fairness metric
    requires it to be set.
    """

    attributes: tuple[Attribute, ...]
    sensitive_index: Optional[int]
    target_index: Optional[int] = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "attributes", tuple(self.attributes))
        names = [a.name for a in self.attributes]
        if len(set(names)) != len(names):
            raise ValueError("attribute names must be distinct")
        n = len(self.attributes)
        if self.sensitive_index is not None and not (0 <= self.sensitive_index < n):
            raise ValueError("sensitive_index out of range")
        if self.target_index is not None:
            if not (0 <= self.target_index < n):
                raise ValueError("target_index out of range")
            if self.target_index == self.sensitive_index:
                raise ValueError("target_index must differ from sensitive_index")

    # -- geometry -------------------------------------------------------

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(a.cardinality for a in self.attributes)

    @property
    def n_cells(self) -> int:
        return int(np.prod(self.shape, dtype=np.int64))

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(a.name for a in self.attributes)

    @property
    def sensitive(self) -> Attribute:
        if self.sensitive_index is None:
            raise ValueError("no sensitive attribute")
        return self.attributes[self.sensitive_index]

    def index_of(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise ValueError(f"unknown attribute {name!r}") from None

    # -- cell coding ----------------------------------------------------

    def encode(self, rows: np.ndarray) -> np.ndarray:
        """Row-major cell index for each coordinate row."""
        rows = np.asarray(rows, dtype=np.int64)
        if rows.ndim == 1:
            rows = rows[None, :]
        return np.ravel_multi_index(tuple(rows.T), self.shape)

    def decode(self, cells: np.ndarray) -> np.ndarray:
        """Coordinate rows for each row-major cell index."""
        coords = np.unravel_index(np.asarray(cells, dtype=np.int64), self.shape)
        return np.stack(coords, axis=-1).astype(np.int64)

    def all_cells(self) -> np.ndarray:
        """Coordinate matrix enumerating every cell in row-major order."""
        return self.decode(np.arange(self.n_cells))

    # -- the feature subdomain (everything but the sensitive attribute) --

    @property
    def x_indices(self) -> tuple[int, ...]:
        if self.sensitive_index is None:
            return tuple(range(len(self.attributes)))
        return tuple(i for i in range(len(self.attributes)) if i != self.sensitive_index)

    def x_subschema(self) -> "AttributeSchema":
        """Schema over the non-sensitive attributes, order preserved."""
        if self.sensitive_index is None:
            return self
        attrs = tuple(self.attributes[i] for i in self.x_indices)
        target = None
        if self.target_index is not None:
            target = self.target_index - (1 if self.target_index > self.sensitive_index else 0)
        return AttributeSchema(attrs, sensitive_index=None, target_index=target)

    def split_rows(self, rows: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """(feature columns, sensitive column) of a coordinate matrix."""
        rows = np.asarray(rows, dtype=np.int64)
        if self.sensitive_index is None:
            raise ValueError("no sensitive attribute")
        return rows[:, list(self.x_indices)], rows[:, self.sensitive_index]

    def join_rows(self, x_rows: np.ndarray, a_codes: np.ndarray) -> np.ndarray:
        """Inverse of split_rows."""
        if self.sensitive_index is None:
            raise ValueError("no sensitive attribute")
        x_rows = np.asarray(x_rows, dtype=np.int64)
        a_codes = np.asarray(a_codes, dtype=np.int64)
        out = np.empty((len(x_rows), len(self.attributes)), dtype=np.int64)
        out[:, list(self.x_indices)] = x_rows
        out[:, self.sensitive_index] = a_codes
        return out

    # -- mass-vector reshaping -----------------------------------------

    def group_matrix(self, mass: np.ndarray) -> np.ndarray:
        """Reshape a flat cell vector into (|A|, n_x_cells).

        Column j is the row-major x-cell index of the sensitive-free
        subdomain, so this is the layout shared with InitialDensity
        conditionals.
        """
        cube = np.asarray(mass).reshape(self.shape)
        cube = np.moveaxis(cube, self.sensitive_index, 0)
        return cube.reshape(self.sensitive.cardinality, -1)

    def flatten_groups(self, groups: np.ndarray) -> np.ndarray:
        """Inverse of group_matrix: back to the flat row-major cell vector."""
        card = self.sensitive.cardinality
        x_shape = self.x_subschema().shape
        cube = np.asarray(groups).reshape((card,) + x_shape)
        cube = np.moveaxis(cube, 0, self.sensitive_index)
        return cube.reshape(-1)

    # -- serialization --------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "attributes": [a.to_dict() for a in self.attributes],
            "sensitive_index": self.sensitive_index,
            "target_index": self.target_index,
        }

    @staticmethod
    def from_dict(d: dict) -> "AttributeSchema":
        return AttributeSchema(
            attributes=tuple(Attribute.from_dict(a) for a in d["attributes"]),
            sensitive_index=d.get("sensitive_index"),
            target_index=d.get("target_index"),
        )


def _readonly(arr: np.ndarray) -> np.ndarray:
    arr = np.array(arr, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class Dataset:
    """Coded sample rows on a schema, with optional nonnegative weights."""

    schema: AttributeSchema
    rows: np.ndarray
    weights: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self) -> None:
        rows = np.asarray(self.rows, dtype=np.int64)
        if rows.ndim == 1:
            rows = rows[:, None]
        if rows.ndim != 2 or (rows.size and rows.shape[1] != len(self.schema.attributes)):
            raise ValueError("rows must be (n, n_attributes)")
        if rows.size:
            upper = np.array(self.schema.shape, dtype=np.int64)
            if (rows < 0).any() or (rows >= upper[None, :]).any():
                raise ValueError("row code out of range for schema")
        object.__setattr__(self, "rows", _readonly(rows))
        if self.weights is None:
            w = np.ones(len(rows), dtype=np.float64)
        else:
            w = np.asarray(self.weights, dtype=np.float64)
            if w.shape != (len(rows),):
                raise ValueError("weights must align with rows")
            if not np.isfinite(w).all() or (w < 0).any():
                raise ValueError("weights must be finite and >= 0")
        object.__setattr__(self, "weights", _readonly(w))

    def __len__(self) -> int:
        return len(self.rows)

    def cells(self) -> np.ndarray:
        return self.schema.encode(self.rows)

    def x_rows(self) -> np.ndarray:
        return self.rows[:, list(self.schema.x_indices)]

    def sensitive_codes(self) -> np.ndarray:
        if self.schema.sensitive_index is None:
            raise ValueError("no sensitive attribute")
        return self.rows[:, self.schema.sensitive_index]

    def subset(self, idx: np.ndarray) -> "Dataset":
        idx = np.asarray(idx)
        return Dataset(self.schema, self.rows[idx], self.weights[idx])
