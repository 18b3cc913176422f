"""Vector fields with expression coefficients: brackets, symbols, Hamiltonian lifts."""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Mapping, Sequence

import numpy as np

from .expr import (
    ScalarExpr,
    add,
    compile_values,
    compile_values_and_jacobian,
    differentiate,
    eval_jet,
    mul,
    parse_expr,
    sub,
    to_text,
)

__all__ = [
    "VectorFieldSpec",
    "CotangentPoint",
    "lie_bracket",
    "lie_bracket_field",
    "symbol",
    "hamiltonian_field",
]


@dataclass(frozen=True)
class VectorFieldSpec:
    """A vector field ``sum_j a_j(x) d/dx_j`` with expression coefficients."""

    coefficients: tuple[ScalarExpr, ...]
    dim: int

    def __post_init__(self):
        if len(self.coefficients) != self.dim:
            raise ValueError(
                f"field has {len(self.coefficients)} coefficients for dimension {self.dim}"
            )

    @staticmethod
    def parse(
        texts: Sequence[str],
        dim: int,
        aliases: Mapping[str, int] | Sequence[str] | None = None,
    ) -> "VectorFieldSpec":
        return VectorFieldSpec(
            tuple(parse_expr(t, dim, aliases) for t in texts), dim
        )

    def to_texts(self, aliases: Sequence[str] | None = None) -> list[str]:
        return [to_text(e, aliases) for e in self.coefficients]

    @cached_property
    def _values_fn(self):
        return compile_values(self.coefficients, self.dim)

    @cached_property
    def _jet_fn(self):
        return compile_values_and_jacobian(self.coefficients, self.dim)

    def values(self, x: Sequence[float]) -> np.ndarray:
        """a(x) as a length-``dim`` array."""
        return np.array(self._values_fn(x), dtype=float)

    def values_and_jacobian(self, x: Sequence[float]) -> tuple[np.ndarray, np.ndarray]:
        """(a(x), Da(x)) with Da[j, k] = da_j/dx_k, exact forward-mode values."""
        vals, jac = self._jet_fn(x)
        return np.array(vals, dtype=float), np.array(jac, dtype=float)

    def scaled(self, factor: ScalarExpr) -> "VectorFieldSpec":
        """The field ``factor * X`` with symbolic coefficients."""
        return VectorFieldSpec(
            tuple(mul(factor, c) for c in self.coefficients), self.dim
        )


@dataclass(frozen=True)
class CotangentPoint:
    """A point (x, xi) of the cotangent bundle over R^dim."""

    x: np.ndarray
    xi: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "x", np.asarray(self.x, dtype=float))
        object.__setattr__(self, "xi", np.asarray(self.xi, dtype=float))
        if self.x.shape != self.xi.shape:
            raise ValueError("base point and covector dimensions differ")

    @property
    def dim(self) -> int:
        return self.x.shape[0]


def _check_dims(X: VectorFieldSpec, Y: VectorFieldSpec) -> None:
    if X.dim != Y.dim:
        raise ValueError(f"field dimensions differ: {X.dim} vs {Y.dim}")


def lie_bracket(X: VectorFieldSpec, Y: VectorFieldSpec, x: Sequence[float]) -> np.ndarray:
    """[X, Y](x) = DY(x)·X(x) - DX(x)·Y(x), from exact first derivatives."""
    _check_dims(X, Y)
    ax, jx = X.values_and_jacobian(x)
    ay, jy = Y.values_and_jacobian(x)
    return jy @ ax - jx @ ay


def lie_bracket_field(X: VectorFieldSpec, Y: VectorFieldSpec) -> VectorFieldSpec:
    """The bracket as a field with symbolic coefficients (for iterated brackets)."""
    _check_dims(X, Y)
    n = X.dim
    coeffs = []
    for j in range(n):
        term = None
        for k in range(n):
            t = sub(
                mul(X.coefficients[k], differentiate(Y.coefficients[j], k)),
                mul(Y.coefficients[k], differentiate(X.coefficients[j], k)),
            )
            term = t if term is None else add(term, t)
        coeffs.append(term)
    return VectorFieldSpec(tuple(coeffs), n)


def symbol(X: VectorFieldSpec, p: CotangentPoint) -> float:
    """sigma(X)(x, xi) = sum_j a_j(x) xi_j."""
    if X.dim != p.dim:
        raise ValueError(f"field dimension {X.dim} does not match point dimension {p.dim}")
    return float(X.values(p.x) @ p.xi)


def hamiltonian_field(X: VectorFieldSpec, p: CotangentPoint) -> tuple[np.ndarray, np.ndarray]:
    """Hamiltonian field of sigma(X) at (x, xi): (xdot, xidot) = (a(x), -Da(x)^T xi)."""
    if X.dim != p.dim:
        raise ValueError(f"field dimension {X.dim} does not match point dimension {p.dim}")
    a, jac = X.values_and_jacobian(p.x)
    return a, -(jac.T @ p.xi)


def eval_field_exact(X: VectorFieldSpec, x: Sequence[float]) -> np.ndarray:
    """Interpreted evaluation; used to cross-check the compiled path."""
    return np.array([eval_jet(c, x, order=0).value for c in X.coefficients])
