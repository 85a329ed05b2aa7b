"""Commutative semirings that weight tables can be computed over.

A :class:`SemiringSpec` bundles the scalar identities with the numpy
ufuncs the dense evaluator uses, so the rest of the engine never needs to
know which instance is active.  Three instances are provided: boolean
(or/and), real (+/*), and min-tropical (min/+).
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Callable, Union

import numpy as np

Weight = Union[bool, float]


class WeightLiteralError(ValueError):
    """Raised when a factor literal is not in the active semiring's carrier."""


@dataclass(frozen=True)
class SemiringSpec:
    name: str
    zero: Weight
    one: Weight
    add: Callable  # commutative, associative; binary ufunc, reducible
    mul: Callable  # commutative, associative, distributes over add
    idempotent_add: bool
    equality_tolerance: float  # used only by fixpoint convergence; 0 = exact
    dtype: np.dtype

    def sum(self, array: np.ndarray, axis: int) -> np.ndarray:
        """Reduce one axis with semiring addition."""
        return self.add.reduce(array, axis=axis)

    def tables_equal(self, a: np.ndarray, b: np.ndarray) -> bool:
        if self.equality_tolerance == 0.0:
            return bool(np.array_equal(a, b))
        return bool(np.allclose(a, b, rtol=0.0, atol=self.equality_tolerance))

    def __repr__(self) -> str:
        return f"SemiringSpec({self.name!r})"


BOOLEAN = SemiringSpec(
    name="boolean",
    zero=False,
    one=True,
    add=np.logical_or,
    mul=np.logical_and,
    idempotent_add=True,
    equality_tolerance=0.0,
    dtype=np.dtype(bool),
)

REAL = SemiringSpec(
    name="real",
    zero=0.0,
    one=1.0,
    add=np.add,
    mul=np.multiply,
    idempotent_add=False,
    equality_tolerance=1e-9,
    dtype=np.dtype(np.float64),
)

# The zero is +inf; mul is real addition, and since the carrier has no -inf
# the annihilator law inf + x = inf holds under IEEE arithmetic as well.
MIN_TROPICAL = SemiringSpec(
    name="min-tropical",
    zero=float("inf"),
    one=0.0,
    add=np.minimum,
    mul=np.add,
    idempotent_add=True,
    equality_tolerance=0.0,
    dtype=np.dtype(np.float64),
)

SEMIRINGS = {s.name: s for s in (BOOLEAN, REAL, MIN_TROPICAL)}

_BOOL_LITERALS = {
    "true": True, "#t": True, "1": True,
    "false": False, "#f": False, "0": False,
}
_DECIMAL = re.compile(r"[+-]?(\d+(\.\d*)?|\.\d+)([eE][+-]?\d+)?\Z")


def parse_weight_literal(text: str, semiring: SemiringSpec) -> Weight:
    """Read a factor literal as an element of `semiring`.

    boolean accepts true/false/#t/#f/0/1; real accepts decimal literals;
    min-tropical accepts decimal literals and `inf`.
    """
    if semiring.name == "boolean":
        if text in _BOOL_LITERALS:
            return _BOOL_LITERALS[text]
    elif semiring.name == "real":
        if _DECIMAL.match(text):
            return float(text)
    elif semiring.name == "min-tropical":
        if text == "inf":
            return float("inf")
        if _DECIMAL.match(text):
            return float(text)
    else:
        raise ValueError(f"unknown semiring {semiring.name!r}")
    raise WeightLiteralError(
        f"cannot read weight literal {text!r} under the {semiring.name} semiring"
    )


def render_weight(w: Weight, semiring: SemiringSpec) -> str:
    if semiring.name == "boolean":
        return "true" if bool(w) else "false"
    w = float(w)
    if w == float("inf"):
        return "inf"
    return repr(w)
