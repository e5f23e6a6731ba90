"""Input checks used at estimator and CLI boundaries."""
from __future__ import annotations

import numbers

from .exceptions import InvalidGeometry, NotAPermutation
from .geometry import Model


def check_model(model) -> Model:
    if not isinstance(model, Model):
        raise TypeError(f"expected a waypath Model, got {type(model).__name__}")
    if len(model) == 0:
        raise InvalidGeometry("model has no contours")
    return model


def check_order(order, n: int) -> tuple[int, ...]:
    """Return ``order`` as a tuple of ints, raising NotAPermutation unless it permutes ``0..n-1``."""
    try:
        out = tuple(int(i) for i in order)
    except (TypeError, ValueError) as exc:
        raise NotAPermutation(f"order is not a sequence of integers: {exc}") from None
    if len(out) != n or sorted(out) != list(range(n)):
        raise NotAPermutation(f"order is not a permutation of 0..{n - 1}")
    return out


def check_depgraph(depgraph, model: Model):
    if depgraph.n != len(model):
        raise ValueError(f"dependency graph has {depgraph.n} nodes but model has {len(model)} contours")
    return depgraph


def check_fraction(value, name: str, upper: float | None = 1.0) -> float:
    if not isinstance(value, numbers.Real) or value < 0 or (upper is not None and value > upper):
        bound = f"[0, {upper}]" if upper is not None else "[0, inf)"
        raise ValueError(f"{name} must be a real number in {bound}, got {value!r}")
    return float(value)
