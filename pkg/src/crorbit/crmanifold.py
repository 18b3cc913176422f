"""Generic submanifolds of C^n: complex structure, tangent spaces, conormal forms.

The ambient space C^n is modelled as R^{2n} with interleaved coordinates
(x1, y1, ..., xn, yn), z_k = x_k + i y_k.  The complex structure J rotates
each (x_k, y_k) pair.  Holomorphic 1-forms omega = sum zeta_j dz_j pair
with real vectors through <omega, v> = sum_j zeta_j (v_{x_j} + i v_{y_j}).

Convention for real forms: a conormal form omega is represented on tangent
vectors by the real 1-form Re<omega, .>; with this choice the
transposedness identity between the restriction map and the
complex-structure isomorphism holds exactly and the image annihilates the
complex tangent space.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Sequence

import numpy as np

from .connection import ChartSetup, dual_transport, flow_transport, validate_chart
from .expr import ScalarExpr, compile_values, compile_values_and_jacobian, parse_expr
from .flow import FlowWord, IntegratorConfig
from .linalg import RANK_RTOL, SubspaceBasis, nullspace, orthonormal_columns
from .vectorfield import VectorFieldSpec

__all__ = [
    "EmbeddedManifold",
    "HolomorphicForm",
    "AdaptedChart",
    "ManifoldError",
    "PointNotOnManifoldError",
    "NonGenericPointError",
    "jmat",
    "apply_j",
    "to_complex",
    "from_complex",
    "pair_form",
    "theta_covector",
    "genericity_check",
    "GenericityReport",
    "tangent_space",
    "complex_tangent_space",
    "cr_frame",
    "PointwiseFrame",
    "conormal_fiber",
    "lemma21_check",
    "Lemma21Report",
    "theta_isomorphism_check",
    "validate_adapted_chart",
    "AdaptedChartReport",
    "e_fiber",
    "EFiber",
    "theta_transport",
    "ThetaTransportResult",
    "theta_star_transport",
    "ThetaStarTransportResult",
    "pair_e_estar",
]

ON_MANIFOLD_TOL = 1e-9


class ManifoldError(Exception):
    """Base class for embedded-manifold failures."""


class PointNotOnManifoldError(ManifoldError):
    pass


class NonGenericPointError(ManifoldError):
    pass


def jmat(n: int) -> np.ndarray:
    """The complex structure on R^{2n}: J dx_k = dy_k, J dy_k = -dx_k."""
    j = np.zeros((2 * n, 2 * n))
    for k in range(n):
        j[2 * k + 1, 2 * k] = 1.0
        j[2 * k, 2 * k + 1] = -1.0
    return j


def apply_j(v: np.ndarray) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    out = np.empty_like(v)
    out[0::2] = -v[1::2]
    out[1::2] = v[0::2]
    return out


def to_complex(v: np.ndarray) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    return v[0::2] + 1j * v[1::2]


def from_complex(w: np.ndarray) -> np.ndarray:
    w = np.asarray(w, dtype=complex)
    out = np.empty(2 * w.shape[0])
    out[0::2] = w.real
    out[1::2] = w.imag
    return out


@dataclass(frozen=True)
class HolomorphicForm:
    """omega = sum_j zeta_j dz_j."""

    zeta: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "zeta", np.asarray(self.zeta, dtype=complex))

    @property
    def n(self) -> int:
        return self.zeta.shape[0]


def pair_form(omega: HolomorphicForm, v: np.ndarray) -> complex:
    """<omega, v> for a real ambient vector v."""
    return complex(omega.zeta @ to_complex(v))


def theta_covector(omega: HolomorphicForm) -> np.ndarray:
    """Real covector r with r . v = Re<omega, v> for all real v."""
    r = np.empty(2 * omega.n)
    r[0::2] = omega.zeta.real
    r[1::2] = -omega.zeta.imag
    return r


@dataclass(frozen=True)
class EmbeddedManifold:
    """M = {rho_1 = ... = rho_d = 0} in C^n, given by real defining functions."""

    n: int
    rho: tuple[ScalarExpr, ...]
    rank_rtol: float = RANK_RTOL

    def __post_init__(self):
        if not self.rho:
            raise ValueError("need at least one defining function")

    @staticmethod
    def parse(
        n: int, texts: Sequence[str], aliases: Sequence[str] | None = None
    ) -> "EmbeddedManifold":
        return EmbeddedManifold(
            n, tuple(parse_expr(t, 2 * n, aliases) for t in texts)
        )

    @property
    def d(self) -> int:
        return len(self.rho)

    @property
    def ambient_dim(self) -> int:
        return 2 * self.n

    @property
    def dim(self) -> int:
        return 2 * self.n - self.d

    @property
    def cr_dim(self) -> int:
        return self.n - self.d

    @cached_property
    def _rho_values_fn(self) -> Callable:
        return compile_values(self.rho, 2 * self.n)

    @cached_property
    def _rho_jet_fn(self) -> Callable:
        return compile_values_and_jacobian(self.rho, 2 * self.n)

    def rho_values(self, x: Sequence[float]) -> np.ndarray:
        return np.array(self._rho_values_fn(x), dtype=float)

    def rho_jacobian(self, x: Sequence[float]) -> np.ndarray:
        _, rows = self._rho_jet_fn(x)
        return np.array(rows, dtype=float)

    def on_manifold(self, x: Sequence[float], tol: float = ON_MANIFOLD_TOL) -> bool:
        return float(np.max(np.abs(self.rho_values(x)))) <= tol

    def require_on_manifold(self, x: Sequence[float], tol: float = ON_MANIFOLD_TOL) -> None:
        resid = float(np.max(np.abs(self.rho_values(x))))
        if resid > tol:
            raise PointNotOnManifoldError(
                f"|rho| = {resid:.3e} exceeds {tol:.1e} at {np.asarray(x)}"
            )

    def complex_differentials(self, z: Sequence[float]) -> np.ndarray:
        """The d x n complex matrix (d rho_i / d z_j) = 0.5 (d/dx_j - i d/dy_j) rho_i."""
        jac = self.rho_jacobian(z)
        return 0.5 * (jac[:, 0::2] - 1j * jac[:, 1::2])


@dataclass
class GenericityReport:
    real_rank: int
    complex_rank: int
    generic: bool


def genericity_check(m: EmbeddedManifold, z: Sequence[float]) -> GenericityReport:
    """Rank report at a point of M; generic iff the d rho_i are C-independent."""
    m.require_on_manifold(z)
    sr = np.linalg.svd(m.rho_jacobian(z), compute_uv=False)
    sc = np.linalg.svd(m.complex_differentials(z), compute_uv=False)
    real_rank = int(np.sum(sr > m.rank_rtol * sr[0])) if sr.size else 0
    complex_rank = int(np.sum(sc > m.rank_rtol * sc[0])) if sc.size else 0
    return GenericityReport(real_rank, complex_rank, complex_rank == m.d)


def _require_generic(m: EmbeddedManifold, z: Sequence[float]) -> None:
    rep = genericity_check(m, z)
    if not rep.generic or rep.real_rank != m.d:
        raise NonGenericPointError(
            f"point is not generic: real rank {rep.real_rank}, "
            f"complex rank {rep.complex_rank}, codimension {m.d}"
        )


def tangent_space(m: EmbeddedManifold, z: Sequence[float]) -> SubspaceBasis:
    """T_zM = ker(d rho) as an orthonormal-column basis."""
    _require_generic(m, z)
    basis = nullspace(m.rho_jacobian(z), m.rank_rtol)
    return SubspaceBasis(m.ambient_dim, basis, m.rank_rtol)


def complex_tangent_space(m: EmbeddedManifold, z: Sequence[float]) -> SubspaceBasis:
    """T^c_zM = ker(d rho) intersect ker(d rho o J); dimension 2(n - d)."""
    _require_generic(m, z)
    jac = m.rho_jacobian(z)
    stacked = np.vstack((jac, jac @ jmat(m.n)))
    basis = nullspace(stacked, m.rank_rtol)
    if basis.shape[1] != 2 * m.cr_dim:
        raise NonGenericPointError(
            f"complex tangent space has dimension {basis.shape[1]}, "
            f"expected {2 * m.cr_dim}"
        )
    return SubspaceBasis(m.ambient_dim, basis, m.rank_rtol)


class PointwiseFrame:
    """Continuous local frame of T^c built pointwise and aligned to an anchor.

    ``basis_at`` orthonormalizes the complex tangent space at the query
    point and rotates it (closest orthogonal alignment) towards the anchor
    basis, producing a frame that varies continuously near the anchor.
    """

    def __init__(self, manifold: EmbeddedManifold, anchor: Sequence[float]):
        self.manifold = manifold
        self.anchor = np.asarray(anchor, dtype=float)
        self.anchor_basis = complex_tangent_space(manifold, anchor).basis

    def basis_at(self, x: Sequence[float]) -> np.ndarray:
        b = complex_tangent_space(self.manifold, x).basis
        u, _, vh = np.linalg.svd(b.T @ self.anchor_basis)
        return b @ (u @ vh)


def cr_frame(
    m: EmbeddedManifold,
    z: Sequence[float],
    mode: str = "user",
    frame: Sequence[VectorFieldSpec] | None = None,
    samples: Sequence[Sequence[float]] | None = None,
    tol: float = 1e-10,
):
    """Verified frame of complex-tangent sections.

    In ``user`` mode the supplied ambient fields are checked to satisfy
    d rho (X) = 0 and d rho (J X) = 0 at the sample points (so X and JX are
    tangent: X is a section of T^c).  ``auto`` mode returns a
    :class:`PointwiseFrame` of aligned pointwise bases.
    """
    if mode == "auto":
        return PointwiseFrame(m, z)
    if mode != "user":
        raise ValueError(f"unknown mode {mode!r}")
    if frame is None:
        raise ValueError("user mode needs a frame")
    pts = [np.asarray(z, dtype=float)] + [np.asarray(s, dtype=float) for s in (samples or [])]
    for f_idx, x_field in enumerate(frame, start=1):
        if x_field.dim != m.ambient_dim:
            raise ValueError(f"frame field {f_idx} has dimension {x_field.dim}")
        for pt in pts:
            jac = m.rho_jacobian(pt)
            v = x_field.values(pt)
            worst = max(
                float(np.max(np.abs(jac @ v), initial=0.0)),
                float(np.max(np.abs(jac @ apply_j(v)), initial=0.0)),
            )
            if worst > tol:
                raise ManifoldError(
                    f"frame field {f_idx} is not a complex-tangent section at "
                    f"{pt}: residual {worst:.3e}"
                )
    return list(frame)


def conormal_fiber(m: EmbeddedManifold, z: Sequence[float]) -> list[HolomorphicForm]:
    """Basis i * d rho_k of the holomorphic forms with Im<omega, TM> = 0."""
    _require_generic(m, z)
    c = m.complex_differentials(z)
    return [HolomorphicForm(1j * c[k]) for k in range(m.d)]


@dataclass
class Lemma21Report:
    passed: bool
    complex_identity_residual: float
    real_convention_residual: float


def lemma21_check(
    m: EmbeddedManifold,
    z: Sequence[float],
    omega: HolomorphicForm,
    x_vec: Sequence[float],
    tol: float = 1e-12,
    membership_tol: float = 1e-9,
) -> Lemma21Report:
    """Transposedness identities for a conormal form and a tangent vector.

    Checks <omega, JX> = i <omega, X> exactly and, under the Re-pairing
    convention for real forms, Im<omega, JX> = theta(omega) . X.
    """
    tangent = tangent_space(m, z)
    x_vec = np.asarray(x_vec, dtype=float)
    if tangent.residual(x_vec) > membership_tol * max(1.0, float(np.linalg.norm(x_vec))):
        raise ManifoldError("vector is not tangent to M at z")
    im_on_tm = max(
        abs(pair_form(omega, tangent.basis[:, k]).imag) for k in range(tangent.dim)
    )
    if im_on_tm > membership_tol:
        raise ManifoldError(
            f"form fails the conormal membership test: max |Im<omega, TM>| = {im_on_tm:.3e}"
        )
    lhs = pair_form(omega, apply_j(x_vec))
    rhs = 1j * pair_form(omega, x_vec)
    r1 = abs(lhs - rhs)
    r2 = abs(lhs.imag - float(theta_covector(omega) @ x_vec))
    return Lemma21Report(max(r1, r2) <= tol, r1, r2)


def theta_isomorphism_check(
    m: EmbeddedManifold, z: Sequence[float]
) -> tuple[bool, float]:
    """Restriction of the conormal basis to TM stays independent (smallest s.v.)."""
    tangent = tangent_space(m, z)
    forms = conormal_fiber(m, z)
    rows = np.array([theta_covector(w) @ tangent.basis for w in forms])
    sv = np.linalg.svd(rows, compute_uv=False)
    smallest = float(sv[-1]) if sv.size else 0.0
    return smallest >= 1e-8, smallest


# ---------------------------------------------------------------------------
# adapted charts, the quotient bundle E and its transported connection
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AdaptedChart:
    """Parameterization psi of M near a point with S = psi({x'' = 0}).

    ``psi`` maps R^{l+m} (l = dim S, l + m = dim M) into R^{2n}; the first l
    parameters run along S.
    """

    l: int
    m: int
    psi: tuple[ScalarExpr, ...]

    @property
    def dim(self) -> int:
        return self.l + self.m

    @cached_property
    def _psi_jet_fn(self) -> Callable:
        return compile_values_and_jacobian(self.psi, self.dim)

    def point_and_frame(self, u: Sequence[float]) -> tuple[np.ndarray, np.ndarray]:
        """(psi(u), d psi(u)) with the differential as a (2n) x (l+m) matrix."""
        vals, rows = self._psi_jet_fn(np.asarray(u, dtype=float))
        return np.array(vals, dtype=float), np.array(rows, dtype=float)

    def point_on_s(self, xp: Sequence[float]) -> np.ndarray:
        u = np.concatenate((np.asarray(xp, dtype=float), np.zeros(self.m)))
        return self.point_and_frame(u)[0]


@dataclass
class AdaptedChartReport:
    passed: bool
    max_rho_residual: float
    min_rank: int


def validate_adapted_chart(
    m: EmbeddedManifold,
    chart: AdaptedChart,
    samples: Sequence[Sequence[float]],
    tol: float = 1e-9,
) -> AdaptedChartReport:
    """psi must land on M and be an immersion at the sample parameters."""
    worst = 0.0
    min_rank = chart.dim
    for u in samples:
        pt, dpsi = chart.point_and_frame(u)
        worst = max(worst, float(np.max(np.abs(m.rho_values(pt)))))
        sv = np.linalg.svd(dpsi, compute_uv=False)
        r = int(np.sum(sv > m.rank_rtol * sv[0])) if sv.size else 0
        min_rank = min(min_rank, r)
    return AdaptedChartReport(worst <= tol and min_rank == chart.dim, worst, min_rank)


@dataclass
class EFiber:
    """Representatives of E = TC^n / (TM + JTS) and the paired form space."""

    point: np.ndarray
    e_basis: SubspaceBasis
    estar_forms: list[HolomorphicForm]
    low_basis: SubspaceBasis  # TM + JTS

    @property
    def dim(self) -> int:
        return self.e_basis.dim


def e_fiber(m: EmbeddedManifold, chart: AdaptedChart, xp: Sequence[float]) -> EFiber:
    """Orthogonal-complement representatives of the quotient at psi(x', 0).

    The paired space of forms is cut out by Im<omega, TM> = 0 together with
    Re<omega, TS> = 0, solved as a real linear system in (Re zeta, Im zeta).
    """
    z = chart.point_on_s(xp)
    m.require_on_manifold(z)
    tm = tangent_space(m, z)
    u = np.concatenate((np.asarray(xp, dtype=float), np.zeros(chart.m)))
    _, dpsi = chart.point_and_frame(u)
    ts = orthonormal_columns(dpsi[:, : chart.l], m.rank_rtol)
    jts = np.column_stack([apply_j(ts[:, k]) for k in range(ts.shape[1])]) if ts.size else ts
    low = SubspaceBasis.from_spanning(np.hstack((tm.basis, jts)), m.rank_rtol)
    e_basis = low.complement()
    # quotient dimension: codim - dim S + 2 CRdim; a mismatch means the chart
    # does not parameterize a CR submanifold of the expected type at this point
    expected = m.d - chart.l + 2 * m.cr_dim
    if e_basis.dim != expected:
        raise ManifoldError(
            f"quotient fiber has dimension {e_basis.dim}, expected {expected}; "
            "chart and manifold are inconsistent at this point"
        )

    # rows of the real system: coefficients on (Re zeta_1, Im zeta_1, ...)
    def im_row(v: np.ndarray) -> np.ndarray:
        w = to_complex(v)
        row = np.empty(2 * m.n)
        row[0::2] = w.imag
        row[1::2] = w.real
        return row

    def re_row(v: np.ndarray) -> np.ndarray:
        w = to_complex(v)
        row = np.empty(2 * m.n)
        row[0::2] = w.real
        row[1::2] = -w.imag
        return row

    rows = [im_row(tm.basis[:, k]) for k in range(tm.dim)]
    rows += [re_row(ts[:, k]) for k in range(ts.shape[1])]
    sols = nullspace(np.array(rows), m.rank_rtol)
    forms = [
        HolomorphicForm(sols[0::2, k] + 1j * sols[1::2, k]) for k in range(sols.shape[1])
    ]
    return EFiber(z, e_basis, forms, low)


@dataclass
class ThetaTransportResult:
    start: EFiber
    end: EFiber
    endpoint_parameters: np.ndarray
    value: np.ndarray  # E-representative at the endpoint


def theta_transport(
    m: EmbeddedManifold,
    chart: AdaptedChart,
    frame_chart: Sequence[VectorFieldSpec],
    word: FlowWord,
    eta: Sequence[float],
    xp: Sequence[float],
    cfg: IntegratorConfig = IntegratorConfig(),
) -> ThetaTransportResult:
    """Transport an E-representative along a composed flow of chart frame fields.

    The class is pulled back through the complex-structure isomorphism to a
    normal-bundle class of S in M (solved in the ambient space), transported
    with the flow-differential description in the chart, pushed forward by J
    and reduced mod (TM + JTS) at the endpoint.
    """
    k_chart = ChartSetup(chart.l, chart.m, tuple(frame_chart))
    chart_rep = validate_chart(k_chart, [np.asarray(xp, dtype=float)])
    if not chart_rep.passed:
        raise ManifoldError(f"frame is not tangent to S in the chart: {chart_rep}")

    start = e_fiber(m, chart, xp)
    eta = np.asarray(eta, dtype=float)
    u0 = np.concatenate((np.asarray(xp, dtype=float), np.zeros(chart.m)))
    _, dpsi0 = chart.point_and_frame(u0)
    tm0 = tangent_space(m, start.point)

    # solve J Y + c = eta with Y in TM, c in TM + JTS
    lhs = np.hstack(
        (
            np.column_stack([apply_j(tm0.basis[:, k]) for k in range(tm0.dim)]),
            start.low_basis.basis,
        )
    )
    coeffs, *_ = np.linalg.lstsq(lhs, eta, rcond=None)
    y_vec = tm0.basis @ coeffs[: tm0.dim]
    resid = float(np.linalg.norm(lhs @ coeffs - eta))
    if resid > 1e-8 * max(1.0, float(np.linalg.norm(eta))):
        raise ManifoldError(
            f"representative cannot be matched in J(TM) + (TM + JTS): residual {resid:.3e}"
        )

    # chart coordinates of the class of Y mod TS
    u_coords, *_ = np.linalg.lstsq(dpsi0, y_vec, rcond=None)
    eta_chart = u_coords[chart.l:]

    moved = flow_transport(k_chart, word, np.asarray(xp, dtype=float), eta_chart, cfg=cfg)
    end = e_fiber(m, chart, moved.base)
    u1 = np.concatenate((moved.base, np.zeros(chart.m)))
    _, dpsi1 = chart.point_and_frame(u1)
    y_end = dpsi1 @ np.concatenate((np.zeros(chart.l), moved.eta))
    value = end.e_basis.project(apply_j(y_end))
    return ThetaTransportResult(start, end, moved.base, value)


@dataclass
class ThetaStarTransportResult:
    start: EFiber
    end: EFiber
    endpoint_parameters: np.ndarray
    value: HolomorphicForm


def pair_e_estar(omega: HolomorphicForm, theta_rep: np.ndarray) -> float:
    """The duality pairing between a form in the paired space and an E-representative."""
    return pair_form(omega, theta_rep).imag


def theta_star_transport(
    m: EmbeddedManifold,
    chart: AdaptedChart,
    frame_chart: Sequence[VectorFieldSpec],
    word: FlowWord,
    omega: HolomorphicForm,
    xp: Sequence[float],
    cfg: IntegratorConfig = IntegratorConfig(),
    membership_tol: float = 1e-9,
) -> ThetaStarTransportResult:
    """Transport a paired-space form along a composed flow (dual route).

    The form is restricted through the real-part convention to conormal
    coordinates of S in M (its x'-components vanish because the form kills
    both Im<.,TM> and Re<.,TS>), moved with the conormal transport ODE in
    the chart, and re-expressed in the paired-space basis at the endpoint.
    Pairings with :func:`theta_transport` values are conserved.
    """
    k_chart = ChartSetup(chart.l, chart.m, tuple(frame_chart))
    start = e_fiber(m, chart, xp)
    theta_r = theta_covector(omega)
    u0 = np.concatenate((np.asarray(xp, dtype=float), np.zeros(chart.m)))
    _, dpsi0 = chart.point_and_frame(u0)
    tangential = float(np.max(np.abs(theta_r @ dpsi0[:, : chart.l]), initial=0.0))
    tm0 = tangent_space(m, start.point)
    conormal_resid = max(
        abs(pair_form(omega, tm0.basis[:, k]).imag) for k in range(tm0.dim)
    )
    if max(tangential, conormal_resid) > membership_tol:
        raise ManifoldError(
            "form is not in the paired space at the base point: "
            f"residual {max(tangential, conormal_resid):.3e}"
        )
    xi_chart = theta_r @ dpsi0[:, chart.l:]

    base = np.asarray(xp, dtype=float)
    xi = np.asarray(xi_chart, dtype=float)
    for idx, tt in word.steps:
        out = dual_transport(k_chart, k_chart.frame[idx - 1], base, xi, tt, cfg)
        base, xi = out.base, out.xi

    end = e_fiber(m, chart, base)
    u1 = np.concatenate((base, np.zeros(chart.m)))
    _, dpsi1 = chart.point_and_frame(u1)
    columns = np.array(
        [theta_covector(w) @ dpsi1[:, chart.l:] for w in end.estar_forms]
    ).T
    coeffs, *_ = np.linalg.lstsq(columns, xi, rcond=None)
    value = HolomorphicForm(
        sum(c * w.zeta for c, w in zip(coeffs, end.estar_forms))
    )
    return ThetaStarTransportResult(start, end, base, value)
