"""CR orbits: Lie hulls, flow-pushforward spans and minimality certificates.

Two independent estimates of the orbit tangent at a point are provided: the
Lie hull (iterated brackets of the frame, evaluated at the point) and the
span of complex-tangent spaces pushed forward by composed-flow
differentials.  The pushforward construction doubles as a certificate of
global minimality: a finite word collection whose pushed spans cover the
full tangent space, reproducible from the recorded seed.  Failure to find a
certificate is reported as such and is never a proof of non-minimality.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .crmanifold import EmbeddedManifold, complex_tangent_space, tangent_space
from .flow import FlowError, FlowWord, IntegratorConfig, composed_flow
from .linalg import SubspaceBasis
from .util import parallel_map
from .vectorfield import VectorFieldSpec, lie_bracket_field
from .expr import Const

__all__ = [
    "LieHullResult",
    "PushforwardSpan",
    "Certificate",
    "MinimalityReport",
    "SampleCloud",
    "OrbitSearchParams",
    "lie_hull",
    "is_minimal",
    "pushforward_span",
    "global_minimality_certificate",
    "verify_certificate",
    "reachable_samples",
    "random_words",
    "write_cloud_csv",
]

FRAME_SUBFAMILY_NOTE = (
    "orbit evidence is generated from composed flows of the supplied frame; "
    "general piecewise-C1 complex-tangent sections are not searched"
)


@dataclass
class LieHullResult:
    base_point: np.ndarray
    depth_reached: int
    basis: SubspaceBasis
    dimension: int
    stabilized: bool


@dataclass
class PushforwardSpan:
    base_point: np.ndarray
    contributions: list[tuple[FlowWord, np.ndarray]]  # (word, source point)
    span: SubspaceBasis
    singular_values: np.ndarray
    dimension: int
    max_tangent_residual: float


@dataclass
class Certificate:
    words: tuple[FlowWord, ...]
    smallest_singular_value: float
    span_dimension: int
    tau: float
    seed: int
    singular_values: tuple[float, ...] = ()

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "tau": self.tau,
            "smallest_singular_value": self.smallest_singular_value,
            "singular_values": list(self.singular_values),
            "span_dimension": self.span_dimension,
            "words": [[list(step) for step in w.steps] for w in self.words],
        }


@dataclass
class MinimalityReport:
    local_dimension: int
    manifold_dimension: int
    minimal: bool
    method: str = "lie-hull"
    hull: LieHullResult | None = None
    certificate: Certificate | None = None
    best_span: PushforwardSpan | None = None
    budget_exhausted: bool = False
    note: str = FRAME_SUBFAMILY_NOTE


@dataclass(frozen=True)
class OrbitSearchParams:
    """Randomized word search: lengths in [1, cap], times in [-T, T], fixed seed."""

    word_length_cap: int = 4
    time_range: float = 0.5
    budget: int = 64
    seed: int = 0
    tau_cert: float = 1e-3


def _is_zero_field(f: VectorFieldSpec) -> bool:
    return all(isinstance(c, Const) and c.value == 0.0 for c in f.coefficients)


def lie_hull(
    m: EmbeddedManifold,
    frame: Sequence[VectorFieldSpec],
    z: Sequence[float],
    max_depth: int = 6,
) -> LieHullResult:
    """Span at z of the frame and its iterated brackets (frame x accumulated).

    Bracket fields are built symbolically, so deeper brackets reuse exact
    derivative trees.  Iteration stops when a sweep adds no dimension, or
    when the hull reaches dim M (it cannot grow past the tangent space).
    """
    if max_depth < 1:
        raise ValueError("max_depth must be >= 1")
    z = np.asarray(z, dtype=float)
    cols = [f.values(z) for f in frame]
    span = SubspaceBasis.from_spanning(np.column_stack(cols), m.rank_rtol)
    level = [f for f in frame if not _is_zero_field(f)]
    seen = set(frame)
    depth = contributing_depth = 1
    stabilized = span.dim >= m.dim
    while depth < max_depth and not stabilized:
        new_level = []
        for x_field in frame:
            for g in level:
                br = lie_bracket_field(x_field, g)
                if _is_zero_field(br) or br in seen:
                    continue
                seen.add(br)
                new_level.append(br)
                cols.append(br.values(z))
        depth += 1
        new_span = SubspaceBasis.from_spanning(np.column_stack(cols), m.rank_rtol)
        if new_span.dim > span.dim:
            contributing_depth = depth
        stabilized = new_span.dim == span.dim or not new_level
        span = new_span
        level = new_level
        if span.dim >= m.dim:
            stabilized = True
    depth_reached = contributing_depth if stabilized else depth
    return LieHullResult(z, depth_reached, span, span.dim, stabilized)


def is_minimal(
    m: EmbeddedManifold,
    frame: Sequence[VectorFieldSpec],
    z: Sequence[float],
    max_depth: int = 6,
) -> MinimalityReport:
    """Local minimality via the Lie hull: minimal iff the hull fills T_zM."""
    hull = lie_hull(m, frame, z, max_depth)
    return MinimalityReport(
        local_dimension=hull.dimension,
        manifold_dimension=m.dim,
        minimal=hull.dimension == m.dim,
        method="lie-hull",
        hull=hull,
    )


def _word_columns(
    m: EmbeddedManifold,
    frame: Sequence[VectorFieldSpec],
    z: np.ndarray,
    word: FlowWord,
    cfg: IntegratorConfig,
) -> tuple[np.ndarray, np.ndarray]:
    """(source point, unit-norm pushed T^c columns at z) for one word."""
    back = composed_flow(frame, word.inverse(), z, cfg, manifold=m)
    if back.drift_exceeded:
        raise FlowError(
            f"backward word left the manifold: drift {back.drift:.3e} > {cfg.drift_bound:.1e}"
        )
    source = back.endpoint
    fwd = composed_flow(frame, word, source, cfg, manifold=m)
    if fwd.drift_exceeded:
        raise FlowError(
            f"forward word left the manifold: drift {fwd.drift:.3e} > {cfg.drift_bound:.1e}"
        )
    if float(np.max(np.abs(fwd.endpoint - z))) > 1e-6:
        raise FlowError("word does not return to the base point within tolerance")
    pushed = fwd.differential @ complex_tangent_space(m, source).basis
    norms = np.linalg.norm(pushed, axis=0)
    return source, pushed / norms


def pushforward_span(
    m: EmbeddedManifold,
    frame: Sequence[VectorFieldSpec],
    z: Sequence[float],
    words: Sequence[FlowWord],
    cfg: IntegratorConfig | None = None,
) -> PushforwardSpan:
    """Span of flow-pushforwards of the complex-tangent distribution into T_zM.

    Each word is run backward from z to find its source, the complex
    tangent space there is pushed forward by the composed-flow differential,
    and all unit-normalized images are assembled; singular values are taken
    in an orthonormal basis of T_zM.
    """
    cfg = cfg or IntegratorConfig(retract=True)
    z = np.asarray(z, dtype=float)
    tangent = tangent_space(m, z)
    contributions = []
    all_cols = []
    max_resid = 0.0
    evaluated = parallel_map(lambda w: _word_columns(m, frame, z, w, cfg), list(words))
    for word, (source, cols) in zip(words, evaluated):
        contributions.append((word, source))
        all_cols.append(cols)
        for k in range(cols.shape[1]):
            max_resid = max(max_resid, tangent.residual(cols[:, k]))
    stacked = np.hstack(all_cols) if all_cols else np.zeros((m.ambient_dim, 0))
    coords = tangent.basis.T @ stacked
    sv = np.linalg.svd(coords, compute_uv=False) if coords.size else np.zeros(0)
    dim = int(np.sum(sv > m.rank_rtol * sv[0])) if sv.size else 0
    span = SubspaceBasis.from_spanning(stacked, m.rank_rtol) if all_cols else SubspaceBasis(
        m.ambient_dim, np.zeros((m.ambient_dim, 0))
    )
    return PushforwardSpan(z, contributions, span, sv, dim, max_resid)


def random_words(
    rng: np.random.Generator,
    count: int,
    frame_size: int,
    length_cap: int,
    time_range: float,
) -> list[FlowWord]:
    """Seeded word sample: length ~ U[1, cap], index ~ U[1, r], t ~ U[-T, T]."""
    words = []
    for _ in range(count):
        length = int(rng.integers(1, length_cap + 1))
        steps = tuple(
            (int(rng.integers(1, frame_size + 1)), float(rng.uniform(-time_range, time_range)))
            for _ in range(length)
        )
        words.append(FlowWord(steps))
    return words


def _sigma_min(coord_cols: list[np.ndarray], dim: int) -> float:
    if not coord_cols:
        return 0.0
    a = np.hstack(coord_cols)
    if a.shape[1] < dim:
        return 0.0
    s = np.linalg.svd(a, compute_uv=False)
    return float(s[dim - 1])


def _greedy_select(
    col_sets: list[np.ndarray],
    words: list[FlowWord],
    dim: int,
    tau: float,
) -> tuple[list[int], float]:
    """Forward-greedy word selection by marginal smallest-singular-value gain.

    Ties break towards shorter words, then lower pool index; selection stops
    as soon as the assembled span clears ``tau``.
    """
    remaining = list(range(len(words)))
    selected: list[int] = []
    chosen_cols: list[np.ndarray] = []
    current = 0.0
    while remaining:
        best = None
        for idx in remaining:
            sig = _sigma_min(chosen_cols + [col_sets[idx]], dim)
            key = (-sig, len(words[idx]), idx)
            if best is None or key < best[0]:
                best = (key, idx, sig)
        _, idx, sig = best
        if sig <= current + 1e-15 and current > 0.0:
            break
        selected.append(idx)
        chosen_cols.append(col_sets[idx])
        remaining.remove(idx)
        current = sig
        if current >= tau:
            break
    return selected, current


def global_minimality_certificate(
    m: EmbeddedManifold,
    frame: Sequence[VectorFieldSpec],
    z: Sequence[float],
    params: OrbitSearchParams = OrbitSearchParams(),
    cfg: IntegratorConfig | None = None,
) -> MinimalityReport:
    """Search composed-flow words whose pushed spans cover T_zM.

    The word pool starts with the empty word and grows by seeded random
    words.  Success requires the smallest singular value of the assembled
    span to reach ``params.tau_cert``; the returned certificate is the
    greedy-pruned minimal subcollection.  On failure the best span reached
    is reported; this is explicitly not a proof of non-minimality.
    """
    cfg = cfg or IntegratorConfig(retract=True)
    z = np.asarray(z, dtype=float)
    tangent = tangent_space(m, z)
    dim = tangent.dim
    rng = np.random.default_rng(params.seed)
    pool = [FlowWord.empty()] + random_words(
        rng, params.budget, len(frame), params.word_length_cap, params.time_range
    )
    col_sets: list[np.ndarray] = []
    kept_words: list[FlowWord] = []
    failures = 0
    success_at = None
    for word in pool:
        try:
            _, cols = _word_columns(m, frame, z, word, cfg)
        except FlowError:
            failures += 1
            continue
        kept_words.append(word)
        col_sets.append(tangent.basis.T @ cols)
        if _sigma_min(col_sets, dim) >= params.tau_cert:
            success_at = len(kept_words)
            break

    hull = lie_hull(m, frame, z)
    local = MinimalityReport(
        local_dimension=hull.dimension,
        manifold_dimension=m.dim,
        minimal=hull.dimension == m.dim,
        hull=hull,
        method="lie-hull+pushforward",
    )
    if success_at is not None:
        selected, sigma = _greedy_select(col_sets, kept_words, dim, params.tau_cert)
        words = tuple(kept_words[i] for i in selected)
        chosen = np.hstack([col_sets[i] for i in selected])
        all_sv = np.linalg.svd(chosen, compute_uv=False)
        local.certificate = Certificate(
            words=words,
            smallest_singular_value=sigma,
            span_dimension=dim,
            tau=params.tau_cert,
            seed=params.seed,
            singular_values=tuple(float(s) for s in all_sv),
        )
        local.best_span = pushforward_span(m, frame, z, list(words), cfg)
    else:
        local.budget_exhausted = True
        local.best_span = pushforward_span(m, frame, z, kept_words, cfg)
        if failures:
            local.note = f"{FRAME_SUBFAMILY_NOTE}; {failures} word(s) failed to integrate"
    return local


def verify_certificate(
    m: EmbeddedManifold,
    frame: Sequence[VectorFieldSpec],
    z: Sequence[float],
    certificate: Certificate,
    cfg: IntegratorConfig | None = None,
) -> tuple[bool, float]:
    """Re-run the certificate words from scratch; sound if sigma_min >= tau / 2."""
    span = pushforward_span(m, frame, z, list(certificate.words), cfg)
    dim = tangent_space(m, z).dim
    sigma = float(span.singular_values[dim - 1]) if span.singular_values.size >= dim else 0.0
    return sigma >= certificate.tau / 2.0, sigma


@dataclass
class SampleCloud:
    base_point: np.ndarray
    points: list[np.ndarray]
    words: list[FlowWord]
    drifts: list[float]
    failures: int


def reachable_samples(
    m: EmbeddedManifold,
    frame: Sequence[VectorFieldSpec],
    z: Sequence[float],
    n_words: int,
    cfg: IntegratorConfig | None = None,
    seed: int = 0,
    word_length_cap: int = 4,
    time_range: float = 0.5,
) -> SampleCloud:
    """Endpoints of seeded random words from z; failed flows are skipped and counted."""
    cfg = cfg or IntegratorConfig(retract=True)
    z = np.asarray(z, dtype=float)
    rng = np.random.default_rng(seed)
    words = random_words(rng, n_words, len(frame), word_length_cap, time_range)

    def run(word):
        try:
            return composed_flow(frame, word, z, cfg, manifold=m)
        except FlowError:
            return None

    pts, kept, drifts, failures = [], [], [], 0
    for word, res in zip(words, parallel_map(run, words)):
        if res is None or res.drift_exceeded:
            failures += 1
            continue
        pts.append(res.endpoint)
        kept.append(word)
        drifts.append(res.drift)
    return SampleCloud(z, pts, kept, drifts, failures)


def write_cloud_csv(path: str, cloud: SampleCloud) -> None:
    """CSV with columns word id, endpoint coordinates, drift."""
    import csv

    dim = cloud.base_point.shape[0]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["word", *[f"x{i + 1}" for i in range(dim)], "drift"])
        for i, (pt, drift) in enumerate(zip(cloud.points, cloud.drifts)):
            writer.writerow([i, *[repr(float(v)) for v in pt], repr(float(drift))])
