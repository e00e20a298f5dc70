"""Contingency-table kernels: empirical marginals and conditionals.

Tables are dense numpy arrays. Counting uses integer accumulation so results
are exact and independent of row order. Zero cells can be floored to a small
positive value and renormalized, which keeps density ratios finite downstream.
"""

import json
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, EstimationError, SchemaViolation

# floor default: 1/(FLOOR_FACTOR * source_size)
FLOOR_FACTOR = 10
MAX_TABLE_CELLS = 10**8


def default_floor(source_size):
    return 1.0 / (FLOOR_FACTOR * max(int(source_size), 1))


@dataclass(frozen=True)
class MarginalTable:
    """Empirical probability table over an attribute subset."""

    attrs: tuple
    probs: np.ndarray
    source_size: int

    def __post_init__(self):
        object.__setattr__(self, "attrs", tuple(int(a) for a in self.attrs))
        probs = np.ascontiguousarray(self.probs, dtype=np.float64)
        probs.setflags(write=False)
        object.__setattr__(self, "probs", probs)

    @property
    def shape(self):
        return self.probs.shape

    def lookup_rows(self, rows):
        """Vectorized probability lookup for a (n, d) matrix of records."""
        cols = tuple(rows[:, a] for a in self.attrs)
        flat = np.ravel_multi_index(cols, self.probs.shape)
        return self.probs.ravel()[flat]

    def lookup(self, x):
        x = np.asarray(x, dtype=np.int64)
        return float(self.lookup_rows(x[None, :])[0])

    def to_json(self):
        return {
            "kind": "marginal",
            "attrs": list(self.attrs),
            "shape": list(self.probs.shape),
            "probs": self.probs.ravel().tolist(),
            "source_size": int(self.source_size),
        }

    @classmethod
    def from_json(cls, obj):
        probs = np.array(obj["probs"], dtype=np.float64).reshape(obj["shape"])
        return cls(tuple(obj["attrs"]), probs, obj["source_size"])


@dataclass(frozen=True)
class ConditionalTable:
    """P(child | parents), one distribution per parent configuration.

    ``probs`` has shape parent_cardinalities + (child_cardinality,);
    the last axis is the child and sums to 1 per parent configuration.
    """

    child: int
    parents: tuple
    probs: np.ndarray
    source_size: int

    def __post_init__(self):
        object.__setattr__(self, "parents", tuple(int(p) for p in self.parents))
        probs = np.ascontiguousarray(self.probs, dtype=np.float64)
        probs.setflags(write=False)
        object.__setattr__(self, "probs", probs)

    @property
    def attrs(self):
        return self.parents + (self.child,)

    def lookup_rows(self, rows):
        cols = tuple(rows[:, a] for a in self.attrs)
        flat = np.ravel_multi_index(cols, self.probs.shape)
        return self.probs.ravel()[flat]

    def lookup(self, x):
        x = np.asarray(x, dtype=np.int64)
        return float(self.lookup_rows(x[None, :])[0])

    def to_json(self):
        return {
            "kind": "conditional",
            "child": int(self.child),
            "parents": list(self.parents),
            "shape": list(self.probs.shape),
            "probs": self.probs.ravel().tolist(),
            "source_size": int(self.source_size),
        }

    @classmethod
    def from_json(cls, obj):
        probs = np.array(obj["probs"], dtype=np.float64).reshape(obj["shape"])
        return cls(obj["child"], tuple(obj["parents"]), probs, obj["source_size"])


def _check_attrs(ds, attrs):
    d = len(ds.domain)
    if len(set(attrs)) != len(attrs):
        raise ConfigurationError("attributes must be distinct")
    if any(a < 0 or a >= d for a in attrs):
        raise ConfigurationError("attribute index outside the domain")
    cells = 1
    for a in attrs:
        cells *= ds.domain.cardinalities[a]
    if cells > MAX_TABLE_CELLS:
        raise ConfigurationError(f"table of {cells} cells exceeds the dense-storage guard")


def counts(ds, attrs):
    """Integer contingency table over the given attributes."""
    _check_attrs(ds, attrs)
    shape = tuple(ds.domain.cardinalities[a] for a in attrs)
    if len(ds) == 0:
        return np.zeros(shape, dtype=np.int64)
    cols = tuple(ds.rows[:, a] for a in attrs)
    flat = np.ravel_multi_index(cols, shape)
    size = int(np.prod(shape))
    return np.bincount(flat, minlength=size).reshape(shape)


def floor_probs(probs, floor):
    """Raise every cell to at least ``floor`` and renormalize to sum 1."""
    if floor is None or floor <= 0:
        return probs
    out = np.maximum(probs, floor)
    return out / out.sum()


def marginal(ds, attrs, floor=None):
    """Empirical marginal over ``attrs``: cell(v) = count(v) / |ds|."""
    if len(ds) == 0:
        raise EstimationError("cannot estimate a marginal from an empty dataset")
    table = counts(ds, attrs).astype(np.float64) / len(ds)
    table = floor_probs(table, floor)
    return MarginalTable(tuple(attrs), table, len(ds))


def conditional_from_joint(joint_probs, child, parents, source_size, floor=None):
    """Turn a joint table over parents + (child,) into a ConditionalTable.

    Unseen parent configurations become uniform after flooring; zero-count
    child values get the floor; each conditional block is renormalized.
    """
    joint = np.asarray(joint_probs, dtype=np.float64)
    nc = joint.shape[-1]
    sums = joint.sum(axis=-1, keepdims=True)
    with np.errstate(invalid="ignore", divide="ignore"):
        cond = np.where(sums > 0, joint / np.where(sums > 0, sums, 1.0), 1.0 / nc)
    if floor is not None and floor > 0:
        cond = np.maximum(cond, floor)
    cond = cond / cond.sum(axis=-1, keepdims=True)
    return ConditionalTable(child, tuple(parents), cond, source_size)


def conditional(ds, child, parents, floor=None):
    """Empirical conditional P(child | parents) with zero-probability flooring.

    ``floor`` defaults to 1/(10 * |ds|).
    """
    parents = tuple(parents)
    if child in parents:
        raise ConfigurationError("child attribute cannot be one of its parents")
    if len(ds) == 0:
        raise EstimationError("cannot estimate a conditional from an empty dataset")
    if floor is None:
        floor = default_floor(len(ds))
    joint = counts(ds, parents + (child,)).astype(np.float64) / len(ds)
    return conditional_from_joint(joint, child, parents, len(ds), floor)


def lookup(table, x):
    """Probability of a record's projection through a table."""
    x = np.asarray(x, dtype=np.int64)
    for pos, a in enumerate(table.attrs):
        if x[a] < 0 or x[a] >= table.probs.shape[pos]:
            raise SchemaViolation(f"value {x[a]} outside attribute {a} bounds")
    return table.lookup(x)


def table_to_file(table, path):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(table.to_json(), fh)


def table_from_file(path):
    with open(path, encoding="utf-8") as fh:
        obj = json.load(fh)
    if obj.get("kind") == "conditional":
        return ConditionalTable.from_json(obj)
    return MarginalTable.from_json(obj)
