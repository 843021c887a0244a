"""Shared builders for small discrete domains, random tables, and stacks."""

import math

import numpy as np
import pytest

from fairboost import (
    Attribute,
    AttributeSchema,
    BoostedDensity,
    Dataset,
    InitialDensity,
    TabularDensity,
    TableClassifier,
)

LN2 = math.log(2.0)


def xa_schema(nx=2, na=2):
    """Feature x then sensitive a."""
    return AttributeSchema(
        attributes=(Attribute("x", nx), Attribute("a", na)),
        sensitive_index=1,
    )


def xya_schema(nx=2, ny=2, na=2):
    """Feature x, target y, sensitive a."""
    return AttributeSchema(
        attributes=(Attribute("x", nx), Attribute("y", ny), Attribute("a", na)),
        sensitive_index=2,
        target_index=1,
    )


def density(schema, mass):
    arr = np.asarray(mass, dtype=np.float64)
    return TabularDensity(schema, arr / arr.sum())


def random_density(schema, rng, floor=0.01):
    vals = rng.random(schema.n_cells) + floor
    return TabularDensity(schema, vals / vals.sum())


def random_initial(schema, rng, floor=0.05):
    """Anchor with random strictly positive per-group conditionals."""
    card = schema.sensitive.cardinality
    n_x = schema.x_subschema().n_cells
    cond = rng.random((card, n_x)) + floor
    cond /= cond.sum(axis=1, keepdims=True)
    return InitialDensity.from_matrix(schema, cond)


def uniform_initial(schema):
    card = schema.sensitive.cardinality
    n_x = schema.x_subschema().n_cells
    cond = np.full((card, n_x), 1.0 / n_x)
    return InitialDensity.from_matrix(schema, cond)


def table_classifier(schema, values, c_bound=LN2):
    return TableClassifier(
        x_schema=schema.x_subschema(),
        values=np.asarray(values, dtype=np.float64),
        c_bound=c_bound,
    )


def random_stack(schema, rng, rounds, c_bound=LN2, theta_scale=0.3, q0=None):
    """Anchor plus `rounds` random bounded-classifier tilts."""
    bd = BoostedDensity(q0 if q0 is not None else random_initial(schema, rng))
    n_x = schema.x_subschema().n_cells
    for _ in range(rounds):
        values = rng.uniform(-c_bound, c_bound, size=n_x)
        theta = float(rng.uniform(0.0, theta_scale))
        bd = bd.extended(table_classifier(schema, values, c_bound), theta)
    return bd


def dataset_from_rows(schema, rows, weights=None):
    return Dataset(schema, np.asarray(rows, dtype=np.int64), weights)


@pytest.fixture
def rng():
    return np.random.default_rng(20260822)
