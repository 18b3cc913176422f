"""The local-model partial connection on a flattened submanifold.

Coordinates split as x = (x', x'') in R^l x R^m with the submanifold
N = {x'' = 0}.  A frame of fields tangent to N along N induces a covariant
derivative on the normal bundle (coordinates (x', eta'')) via Lie brackets
reduced mod TN.  Three equivalent transport descriptions are implemented:

* the horizontal-lift ODE  eta_j' = sum_k (da_j/dx_k)(x',0) eta_k,
* the differential of the flow of the field, projected to the normal block,
* the dual ODE on the conormal coordinates (x', xi'') with the transposed,
  negated coefficient matrix,

together with consistency checks against the restricted Hamiltonian field
of the symbol and against the connection axioms.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np

from .expr import (
    Const,
    ScalarExpr,
    Var,
    add,
    compile_values_and_jacobian,
    eval_jet,
    mul,
    substitute,
)
from .flow import FlowWord, IntegratorConfig, composed_flow, flow, _integrate
from .vectorfield import CotangentPoint, VectorFieldSpec, hamiltonian_field, lie_bracket

__all__ = [
    "ChartSetup",
    "NormalVector",
    "ConormalCovector",
    "ChartValidationError",
    "ChartReport",
    "validate_chart",
    "covariant_derivative",
    "covariant_derivative_via_bracket",
    "horizontal_transport",
    "flow_transport",
    "dual_transport",
    "curve_transport",
    "xhat_field",
    "hamiltonian_restriction_check",
    "connection_axioms_check",
]

TANGENCY_TOL = 1e-12


class ChartValidationError(Exception):
    """A chart setup violates tangency or frame-rank requirements."""


@dataclass(frozen=True)
class ChartSetup:
    """Local model: dimensions (l, m), N = {x'' = 0}, and a frame tangent to N."""

    l: int
    m: int
    frame: tuple[VectorFieldSpec, ...]

    def __post_init__(self):
        if self.l < 1 or self.m < 0:
            raise ValueError("need l >= 1 and m >= 0")
        n = self.l + self.m
        for f in self.frame:
            if f.dim != n:
                raise ValueError(f"frame field dimension {f.dim} != l + m = {n}")

    @property
    def dim(self) -> int:
        return self.l + self.m

    @property
    def rank(self) -> int:
        return len(self.frame)


@dataclass(frozen=True)
class NormalVector:
    """A point (x', eta'') of the normal bundle in flattened coordinates."""

    base: np.ndarray
    eta: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "base", np.asarray(self.base, dtype=float))
        object.__setattr__(self, "eta", np.asarray(self.eta, dtype=float))


@dataclass(frozen=True)
class ConormalCovector:
    """A point (x', xi'') of the conormal bundle in flattened coordinates."""

    base: np.ndarray
    xi: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "base", np.asarray(self.base, dtype=float))
        object.__setattr__(self, "xi", np.asarray(self.xi, dtype=float))


@dataclass
class ChartReport:
    passed: bool
    max_tangency_violation: float
    rank_ok: bool
    first_failure: tuple[int, int] | None = None  # (field index, sample index), 1-based field

    def __bool__(self) -> bool:
        return self.passed


@lru_cache(maxsize=512)
def _restricted_jet_fn(field: VectorFieldSpec, l: int, m: int) -> Callable:
    """Compiled evaluator of all coefficients at (x', 0) with d/dx'' partials.

    Returns f(s) -> (values, rows) where s is any state vector whose first l
    entries are x', values[j] = a_j(x', 0) and rows[j][k] = da_j/dx_{l+k}(x', 0).
    """
    n = l + m
    refs = [f"x[{i}]" for i in range(l)] + ["0.0"] * m
    return compile_values_and_jacobian(
        field.coefficients, n, var_refs=refs, deriv_vars=range(l, n)
    )


def _restricted(field: VectorFieldSpec, c: ChartSetup, xp: Sequence[float]):
    """(a(x',0), B) with B[j,k] = da_{l+j}/dx_{l+k}(x',0), the normal block."""
    vals, rows = _restricted_jet_fn(field, c.l, c.m)(np.asarray(xp, dtype=float))
    a = np.array(vals, dtype=float)
    b = np.array(rows, dtype=float)[c.l:, :] if c.m else np.zeros((0, 0))
    return a, b


def validate_chart(
    c: ChartSetup,
    samples: Sequence[Sequence[float]],
    tol: float = TANGENCY_TOL,
    rank_rtol: float = 1e-8,
) -> ChartReport:
    """Check K-tangency (|a_j(x',0)| <= tol for j > l) and frame rank at samples."""
    worst = 0.0
    first: tuple[int, int] | None = None
    rank_ok = True
    for s_idx, xp in enumerate(samples):
        vecs = []
        for f_idx, f in enumerate(c.frame, start=1):
            a, _ = _restricted(f, c, xp)
            viol = float(np.max(np.abs(a[c.l:]), initial=0.0))
            if viol > worst:
                worst = viol
            if viol > tol and first is None:
                first = (f_idx, s_idx)
            vecs.append(a)
        if vecs:
            sv = np.linalg.svd(np.column_stack(vecs), compute_uv=False)
            if len(sv) < c.rank or (sv.size and sv[-1] <= rank_rtol * sv[0]):
                rank_ok = False
                if first is None:
                    first = (0, s_idx)
    return ChartReport(worst <= tol and rank_ok, worst, rank_ok, first)


def _require_valid(c: ChartSetup, X: VectorFieldSpec, xp: Sequence[float]) -> None:
    a, _ = _restricted(X, c, xp)
    viol = float(np.max(np.abs(a[c.l:]), initial=0.0))
    if viol > TANGENCY_TOL:
        raise ChartValidationError(
            f"field is not tangent to N at {np.asarray(xp)}: |a''| = {viol:.3e}"
        )


def covariant_derivative(
    c: ChartSetup,
    X: VectorFieldSpec,
    eta: Sequence[ScalarExpr],
    xp: Sequence[float],
) -> np.ndarray:
    """Covariant derivative of the section eta (m expressions of x') along X at x'.

    Component j of the result is
    sum_{k<=l} a_k(x',0) d(eta_j)/dx_k  -  sum_{k>l} eta_k(x') da_j/dx_k(x',0).
    """
    if len(eta) != c.m:
        raise ValueError(f"section has {len(eta)} components, chart has m = {c.m}")
    _require_valid(c, X, xp)
    xp = np.asarray(xp, dtype=float)
    a, b = _restricted(X, c, xp)
    out = np.zeros(c.m)
    eta_vals = np.zeros(c.m)
    for j, ej in enumerate(eta):
        jet = eval_jet(ej, xp, order=1)
        eta_vals[j] = jet.value
        out[j] = float(a[: c.l] @ jet.gradient)
    return out - b @ eta_vals


def lift_section(c: ChartSetup, eta: Sequence[ScalarExpr]) -> VectorFieldSpec:
    """Canonical lift of a normal-bundle section to a field with zero x' part."""
    zeros = [Const(0.0)] * c.l
    return VectorFieldSpec(tuple(zeros) + tuple(eta), c.dim)


def covariant_derivative_via_bracket(
    c: ChartSetup,
    X: VectorFieldSpec,
    lift: VectorFieldSpec,
    xp: Sequence[float],
) -> np.ndarray:
    """[X, lift](x', 0) reduced mod TN (the defining formula for the connection)."""
    x_full = np.concatenate((np.asarray(xp, dtype=float), np.zeros(c.m)))
    return lie_bracket(X, lift, x_full)[c.l:]


def _transport_ode(
    c: ChartSetup,
    X: VectorFieldSpec,
    x0p: Sequence[float],
    v0: Sequence[float],
    t: float,
    cfg: IntegratorConfig,
    sign: float,
    transpose: bool,
    path: list | None = None,
):
    """Shared base/fiber ODE for horizontal (sign=+1) and dual (sign=-1, transposed) transport."""
    _require_valid(c, X, x0p)
    jet_fn = _restricted_jet_fn(X, c.l, c.m)
    l, m = c.l, c.m

    def rhs(_t, y):
        vals, rows = jet_fn(y)
        b = np.array(rows, dtype=float)[l:, :]
        out = np.empty(l + m)
        out[:l] = vals[:l]
        out[l:] = sign * ((b.T if transpose else b) @ y[l:])
        return out

    on_sample = None
    if path is not None:
        path.append((0.0, np.asarray(x0p, float).copy(), np.asarray(v0, float).copy()))

        def on_sample(tt, y):
            path.append((tt, y[:l].copy(), y[l:].copy()))

    y0 = np.concatenate((np.asarray(x0p, dtype=float), np.asarray(v0, dtype=float)))
    y = _integrate(rhs, (0.0, t), y0, cfg, on_sample=on_sample)
    return y[:l], y[l:]


def horizontal_transport(
    c: ChartSetup,
    X: VectorFieldSpec,
    x0p: Sequence[float],
    eta0: Sequence[float],
    t: float,
    cfg: IntegratorConfig = IntegratorConfig(),
    path: list | None = None,
) -> NormalVector:
    """Parallel transport by integrating the horizontal-lift field on the normal bundle."""
    base, eta = _transport_ode(c, X, x0p, eta0, t, cfg, +1.0, False, path)
    return NormalVector(base, eta)


def dual_transport(
    c: ChartSetup,
    X: VectorFieldSpec,
    x0p: Sequence[float],
    xi0: Sequence[float],
    t: float,
    cfg: IntegratorConfig = IntegratorConfig(),
    path: list | None = None,
) -> ConormalCovector:
    """Dual parallel transport on the conormal bundle (integral curves of X-hat)."""
    base, xi = _transport_ode(c, X, x0p, xi0, t, cfg, -1.0, True, path)
    return ConormalCovector(base, xi)


def flow_transport(
    c: ChartSetup,
    X: VectorFieldSpec | FlowWord,
    x0p: Sequence[float],
    eta0: Sequence[float],
    t: float | None = None,
    cfg: IntegratorConfig = IntegratorConfig(),
) -> NormalVector:
    """Transport eta0 by the differential of the (composed) flow, reduced mod TN.

    Lifts eta0 to (0, eta0), pushes it through the flow differential from
    (x0', 0) and keeps the last m coordinates.  ``X`` may be a single field
    with a time ``t`` or a :class:`FlowWord` over the chart frame.
    """
    x0 = np.concatenate((np.asarray(x0p, dtype=float), np.zeros(c.m)))
    if isinstance(X, FlowWord):
        if t is not None:
            raise ValueError("a FlowWord carries its own times; t must be None")
        for idx, _ in X.steps:
            _require_valid(c, c.frame[idx - 1], x0p)
        res = composed_flow(c.frame, X, x0)
    else:
        if t is None:
            raise ValueError("a single field needs a transport time t")
        _require_valid(c, X, x0p)
        res = flow(X, x0, t, cfg)
    lifted = np.concatenate((np.zeros(c.l), np.asarray(eta0, dtype=float)))
    eta_t = (res.differential @ lifted)[c.l:]
    return NormalVector(res.endpoint[: c.l], eta_t)


def curve_transport(
    c: ChartSetup,
    weights: Callable[[float], Sequence[float]],
    x0p: Sequence[float],
    eta0: Sequence[float],
    t: float,
    cfg: IntegratorConfig = IntegratorConfig(),
    *,
    experimental: bool = False,
) -> NormalVector:
    """Horizontal transport along the curve steered by time-dependent frame weights.

    The base curve solves x' = sum_i w_i(t) a^(i)(x', 0) and eta rides the
    corresponding linear ODE.  This extends transport beyond piecewise
    integral curves of single frame fields; it is exposed behind the
    ``experimental`` flag because its agreement with composed-flow transport
    is not asserted by the test suite.
    """
    if not experimental:
        raise ValueError("curve_transport is experimental; pass experimental=True")
    jets = [_restricted_jet_fn(f, c.l, c.m) for f in c.frame]
    l, m = c.l, c.m

    def rhs(tt, y):
        w = np.asarray(weights(tt), dtype=float)
        out = np.zeros(l + m)
        for wi, jet_fn in zip(w, jets):
            if wi == 0.0:
                continue
            vals, rows = jet_fn(y)
            out[:l] += wi * np.array(vals[:l])
            if m:
                out[l:] += wi * (np.array(rows, dtype=float)[l:, :] @ y[l:])
        return out

    y0 = np.concatenate((np.asarray(x0p, dtype=float), np.asarray(eta0, dtype=float)))
    y = _integrate(rhs, (0.0, t), y0, cfg)
    return NormalVector(y[:l], y[l:])


def xhat_field(
    c: ChartSetup, X: VectorFieldSpec, p: tuple[Sequence[float], Sequence[float]]
) -> np.ndarray:
    """Evaluate the conormal transport field at (x', xi''): (a'(x',0), -B^T xi'')."""
    xp, xi = (np.asarray(v, dtype=float) for v in p)
    if xp.shape != (c.l,) or xi.shape != (c.m,):
        raise ValueError("point components do not match chart dimensions")
    a, b = _restricted(X, c, xp)
    return np.concatenate((a[: c.l], -(b.T @ xi)))


@dataclass
class RestrictionReport:
    passed: bool
    max_tangency: float
    max_mismatch: float
    max_multiplier_mismatch: float
    worst_sample: int


def hamiltonian_restriction_check(
    c: ChartSetup,
    X: VectorFieldSpec,
    samples: Sequence[tuple[Sequence[float], Sequence[float]]],
    multiplier: ScalarExpr | None = None,
    tol: float = 1e-12,
    multiplier_tol: float = 1e-10,
) -> RestrictionReport:
    """Compare the restricted Hamiltonian field of the symbol with the conormal field.

    At each (x', xi'') the Hamiltonian field of sigma(X), evaluated at the
    embedded cotangent point ((x', 0), (0, xi'')), must be tangent to the
    conormal bundle (x''-velocities and xi'-velocities vanish) and its
    (x', xi'') part must equal :func:`xhat_field`.  A scalar multiplier on X
    must rescale the restricted field by its value on the base.
    """
    if multiplier is None:
        multiplier = add(Const(1.0), mul(Var(0), Var(0)))
    phi_x = X.scaled(multiplier)
    max_tan = max_mis = max_mult = 0.0
    worst_sample = 0
    for s_idx, (xp, xi) in enumerate(samples):
        xp = np.asarray(xp, dtype=float)
        xi = np.asarray(xi, dtype=float)
        x_full = np.concatenate((xp, np.zeros(c.m)))
        xi_full = np.concatenate((np.zeros(c.l), xi))
        xdot, xidot = hamiltonian_field(X, CotangentPoint(x_full, xi_full))
        tangency = max(
            float(np.max(np.abs(xdot[c.l:]), initial=0.0)),
            float(np.max(np.abs(xidot[: c.l]), initial=0.0)),
        )
        restricted = np.concatenate((xdot[: c.l], xidot[c.l:]))
        mismatch = float(np.max(np.abs(restricted - xhat_field(c, X, (xp, xi)))))
        phi_val = eval_jet(multiplier, x_full, order=0).value
        pdot, pxidot = hamiltonian_field(phi_x, CotangentPoint(x_full, xi_full))
        phi_restricted = np.concatenate((pdot[: c.l], pxidot[c.l:]))
        mult_mismatch = float(np.max(np.abs(phi_restricted - phi_val * restricted)))
        score = max(tangency, mismatch, mult_mismatch)
        if score > max(max_tan, max_mis, max_mult):
            worst_sample = s_idx
        max_tan = max(max_tan, tangency)
        max_mis = max(max_mis, mismatch)
        max_mult = max(max_mult, mult_mismatch)
    passed = max_tan <= tol and max_mis <= tol and max_mult <= multiplier_tol
    return RestrictionReport(passed, max_tan, max_mis, max_mult, worst_sample)


@dataclass
class AxiomsReport:
    passed: bool
    max_scaling_residual: float
    max_leibniz_residual: float
    max_lifting_residual: float
    failing_axiom: str | None = None
    worst_sample: int = 0


def connection_axioms_check(
    c: ChartSetup,
    X: VectorFieldSpec,
    eta: Sequence[ScalarExpr],
    phi: ScalarExpr,
    samples: Sequence[Sequence[float]],
    tangent_perturbation: VectorFieldSpec | None = None,
    tol: float = 1e-10,
) -> AxiomsReport:
    """Check tensoriality in X, the Leibniz rule and lifting independence.

    ``phi`` is a scalar on the ambient chart (l + m variables).  The lifting
    check compares the bracket definition computed with the canonical lift
    of ``eta`` against the same bracket with ``tangent_perturbation`` added;
    the perturbation must be tangent to N along N.
    """
    zero_map = {i: Const(0.0) for i in range(c.l, c.dim)}
    phi_on_n = substitute(phi, zero_map)
    phi_eta = [mul(phi_on_n, ej) for ej in eta]
    lift = lift_section(c, eta)
    if tangent_perturbation is None:
        # x''-weighted normal components and a free x' component: tangent to N on N
        coeffs = [Const(0.0)] * c.dim
        coeffs[0] = Var(0) if c.l >= 1 else Const(0.0)
        for j in range(c.l, c.dim):
            coeffs[j] = mul(Var(c.l), Var(j)) if c.m else Const(0.0)
        tangent_perturbation = VectorFieldSpec(tuple(coeffs), c.dim)
    perturbed = VectorFieldSpec(
        tuple(add(a, b) for a, b in zip(lift.coefficients, tangent_perturbation.coefficients)),
        c.dim,
    )

    max_scale = max_leib = max_lift = 0.0
    worst, failing = 0, None
    for s_idx, xp in enumerate(samples):
        xp = np.asarray(xp, dtype=float)
        x_full = np.concatenate((xp, np.zeros(c.m)))
        base = covariant_derivative(c, X, eta, xp)

        phi_val = eval_jet(phi, x_full, order=0).value
        scaled = covariant_derivative(c, X.scaled(phi), eta, xp)
        r_scale = float(np.max(np.abs(scaled - phi_val * base), initial=0.0))

        a, _ = _restricted(X, c, xp)
        phi_jet = eval_jet(phi, x_full, order=1)
        x_phi = float(a @ phi_jet.gradient)
        eta_vals = np.array([eval_jet(ej, xp, order=0).value for ej in eta])
        leib_lhs = covariant_derivative(c, X, phi_eta, xp)
        r_leib = float(
            np.max(np.abs(leib_lhs - (phi_val * base + x_phi * eta_vals)), initial=0.0)
        )

        b0 = covariant_derivative_via_bracket(c, X, lift, xp)
        b1 = covariant_derivative_via_bracket(c, X, perturbed, xp)
        r_lift = float(np.max(np.abs(b1 - b0), initial=0.0))

        score = max(r_scale, r_leib, r_lift)
        if score > max(max_scale, max_leib, max_lift):
            worst = s_idx
            failing = ("scaling", "leibniz", "lifting")[
                int(np.argmax([r_scale, r_leib, r_lift]))
            ]
        max_scale = max(max_scale, r_scale)
        max_leib = max(max_leib, r_leib)
        max_lift = max(max_lift, r_lift)

    passed = max(max_scale, max_leib, max_lift) <= tol
    return AxiomsReport(
        passed, max_scale, max_leib, max_lift, None if passed else failing, worst
    )
