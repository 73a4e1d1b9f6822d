"""Localized lifting maps between a covering's target and source.

Below the injectivity radius of a covering, a band operator on the quotient
lifts entrywise to the source: the lift copies each entry to every source
pair within the window and zeroes everything farther apart.  On band grades
this is a linear bijection whose inverse is the pushforward through canonical
preimages.  Group-ring coefficients lift through the unique short preimage of
each support point.

Sources that are truncated free-group balls need boundary care: rows and
columns whose window-neighbourhood exits the ball are zeroed, and every norm
comparison is restricted to the interior sub-ball so that the truncation
cannot manufacture spurious norm drops.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .bandops import (
    ENTRY_TOL,
    BandOperator,
    GroupRingElement,
    operator_norm,
    spaces_match,
    to_band_operator,
)
from .coverings import CoveringMap
from .spaces import BallSpace, CayleySpace


@dataclass(frozen=True)
class LiftWindow:
    """A covering together with a working radius strictly below injectivity."""

    cover: CoveringMap
    R: int

    def __post_init__(self) -> None:
        if self.R < 0:
            raise ValueError(f"window radius must be >= 0, got {self.R}")
        r = self.cover.injectivity_radius
        if self.R > r:
            raise ValueError(
                f"window radius {self.R} exceeds the injectivity radius {r}")

    def interior_indices(self) -> np.ndarray:
        """Source points whose R-ball is not clipped by truncation."""
        return self.cover.interior_points(self.R)


def _lift_entries(op: BandOperator, window: LiftWindow) -> np.ndarray:
    """Entrywise lift formula, without the grade precondition."""
    cover, radius = window.cover, window.R
    src, pm = cover.source, cover.point_map
    n = src.n
    m = op.multiplicity
    near = src.dist <= radius
    keep = np.zeros(n, dtype=bool)
    keep[window.interior_indices()] = True
    mask = near & keep[:, None] & keep[None, :]
    block = op.entries.reshape(m, cover.target.n, m, cover.target.n)
    out = np.zeros((m, n, m, n), dtype=np.complex128)
    ys, yps = np.nonzero(mask)
    out[:, ys, :, yps] = block[:, pm[ys], :, pm[yps]]
    return out.reshape(m * n, m * n)


def lift_operator(op: BandOperator, window: LiftWindow) -> BandOperator:
    """Lift a quotient band operator through the covering window."""
    if not spaces_match(op.space, window.cover.target):
        raise ValueError("operator does not live on the covering target")
    if op.propagation > window.R:
        raise ValueError(
            f"operator propagation {op.propagation} exceeds the window "
            f"radius {window.R}")
    return BandOperator(window.cover.source, _lift_entries(op, window), op.multiplicity)


def canonical_preimages(cover: CoveringMap) -> np.ndarray:
    """For each target point, its closest-to-basepoint source preimage.

    Ties are broken by word order on ball sources and by index otherwise, so
    the choice is deterministic.
    """
    src = cover.source
    depth = src.dist[src.basepoint]
    reps = np.full(cover.target.n, -1, dtype=np.int64)
    if isinstance(src, BallSpace):
        order = sorted(range(src.n), key=lambda i: (int(depth[i]), src.words[i]))
    else:
        order = sorted(range(src.n), key=lambda i: (int(depth[i]), i))
    for y in order:
        x = int(cover.point_map[y])
        if reps[x] < 0:
            reps[x] = y
    return reps


def pushforward_operator(op: BandOperator, window: LiftWindow) -> BandOperator:
    """Inverse of lift_operator on band grades of the window radius.

    Entry (x, x') is read off the canonical preimage of x and the unique
    window preimage of x' beside it.
    """
    cover, radius = window.cover, window.R
    if not spaces_match(op.space, cover.source):
        raise ValueError("operator does not live on the covering source")
    src, tgt = cover.source, cover.target
    reps = canonical_preimages(cover)
    depth = src.dist[src.basepoint]
    cap = cover.radius_cap()
    if isinstance(src, BallSpace):
        bad = [x for x in range(tgt.n) if depth[reps[x]] + radius > cap]
        if bad:
            raise ValueError(
                f"canonical preimages of target points {bad[:5]} have no room "
                f"for a radius-{radius} ball; enlarge the source ball")
    m = op.multiplicity
    block = op.entries.reshape(m, src.n, m, src.n)
    out = np.zeros((m, tgt.n, m, tgt.n), dtype=np.complex128)
    for x in range(tgt.n):
        y = int(reps[x])
        for yp in np.where(src.dist[y] <= radius)[0]:
            xp = int(cover.point_map[yp])
            out[:, x, :, xp] = block[:, y, :, yp]
    return BandOperator(tgt, out.reshape(m * tgt.n, m * tgt.n), m)


def lift_group_ring(a: GroupRingElement, window: LiftWindow) -> GroupRingElement:
    """Lift quotient group-ring coefficients through unique short preimages."""
    cover, radius = window.cover, window.R
    if a.support_radius > radius:
        raise ValueError(
            f"support radius {a.support_radius} exceeds the window radius {radius}")
    src, tgt = cover.source, cover.target
    if not isinstance(src, BallSpace) or not isinstance(tgt, CayleySpace):
        raise ValueError("group-ring lifting needs a ball source over a Cayley target")
    group = tgt.marking.group
    index = {g: i for i, g in enumerate(group.elements)}
    depth = src.dist[src.basepoint]
    coeffs: dict = {}
    for g, v in a.coeffs.items():
        x = index[g]
        candidates = [y for y in range(src.n)
                      if cover.point_map[y] == x and depth[y] <= radius]
        if len(candidates) != 1:
            raise ValueError(
                f"{g!r} has {len(candidates)} preimages within radius {radius}; "
                "the window is not below the injectivity radius")
        coeffs[src.words[candidates[0]]] = v
    return GroupRingElement(src.free, coeffs)


def pushforward_group_ring(a: GroupRingElement, cover: CoveringMap) -> GroupRingElement:
    """Transport source coefficients onto the covering target via the point map."""
    src, tgt = cover.source, cover.target
    if not isinstance(src, BallSpace) or not isinstance(tgt, CayleySpace):
        raise ValueError("group-ring transport needs a ball source over a Cayley target")
    if a.marking != src.free:
        raise ValueError("element does not live on the source free group")
    group = tgt.marking.group
    coeffs: dict = {}
    for w, v in a.coeffs.items():
        y = src.word_index.get(w)
        if y is None:
            raise ValueError(f"support word {w!r} falls outside the source ball")
        g = group.elements[int(cover.point_map[y])]
        coeffs[g] = coeffs.get(g, 0j) + v
    return GroupRingElement(tgt.marking, coeffs)


# -- multiplicativity ------------------------------------------------------------


@dataclass(frozen=True)
class MultiplicativityReport:
    """Comparison of lift(S T) against lift(S) lift(T)."""

    admissible: bool
    region_rows: tuple[int, ...]
    equal: bool
    max_discrepancy: float
    witness: tuple[int, int, complex, complex] | None
    note: str


def local_multiplicativity_check(s: BandOperator, t: BandOperator,
                                 window: LiftWindow,
                                 tol: float = ENTRY_TOL) -> MultiplicativityReport:
    """Check lift(S T) = lift(S) lift(T) entrywise on the safe interior.

    When prop(S) + prop(T) exceeds the window the comparison still runs over
    the window interior and reports the expected failure with a witness.
    """
    if not s.same_space(t):
        raise ValueError("operators live on different spaces")
    cover = window.cover
    prop_sum = s.propagation + t.propagation
    admissible = prop_sum <= window.R
    product = BandOperator(s.space, s.entries @ t.entries, s.multiplicity)
    lhs = _lift_entries(product, window)
    ls = _lift_entries(s, window)
    lt = _lift_entries(t, window)
    rhs = ls @ lt
    src = cover.source
    if admissible:
        rows = cover.interior_points(window.R + prop_sum)
        note = "compared on rows with headroom for the window plus both propagations"
    else:
        rows = cover.interior_points(window.R)
        note = (f"propagation sum {prop_sum} exceeds window {window.R}; "
                "expected-failure comparison over the window interior")
    m = s.multiplicity
    n = src.n
    row_idx = np.concatenate([np.asarray(rows) + k * n for k in range(m)]) if m > 1 \
        else np.asarray(rows)
    diff = np.abs(lhs[row_idx] - rhs[row_idx])
    max_disc = float(diff.max()) if diff.size else 0.0
    witness = None
    if max_disc > tol:
        flat = int(np.argmax(diff))
        i, j = divmod(flat, diff.shape[1])
        y = int(row_idx[i])
        witness = (y, j, complex(lhs[y, j]), complex(rhs[y, j]))
    return MultiplicativityReport(
        admissible=admissible,
        region_rows=tuple(int(r) for r in np.asarray(rows)),
        equal=max_disc <= tol,
        max_discrepancy=max_disc,
        witness=witness,
        note=note,
    )


# -- norm profiles ----------------------------------------------------------------


@dataclass(frozen=True)
class NormProfile:
    """Per-term transported norms of a group-ring element along a family."""

    description: str
    base_norm: float
    term_indices: tuple[int, ...]
    term_radii: tuple[int, ...]
    term_norms: tuple[float, ...]
    skipped: tuple[int, ...]
    limsup_estimate: float
    window_length: int
    witness_ratio: float
    witness_support: int
    witness_matches: tuple[float, ...]
    note: str = field(default="limsup reported as max over the tail window; "
                              "window evidence only")

    def rows(self) -> list[tuple[int, int, float, float, float]]:
        """(m, r_m, norm_transport, norm_base, ratio) rows for tabular output."""
        out = []
        for m, r, nl in zip(self.term_indices, self.term_radii, self.term_norms):
            ratio = nl / self.base_norm if self.base_norm else float("inf")
            out.append((m, r, nl, self.base_norm, ratio))
        return out


def _transport_norm(a: GroupRingElement, cover: CoveringMap, tol: float) -> float:
    moved = pushforward_group_ring(a, cover)
    return operator_norm(to_band_operator(moved, cover.target), tol=tol)


def limsup_norm_profile(a: GroupRingElement, family: Sequence[CoveringMap],
                        tol: float = 1e-9,
                        description: str = "") -> NormProfile:
    """Norms of an element transported along a covering family, with limsup.

    Terms whose injectivity radius does not strictly exceed the support
    radius are skipped and recorded.  The limsup is estimated as the max over
    the tail half of the admissible window and never extrapolated.
    """
    if not family:
        raise ValueError("family of coverings is empty")
    src = family[0].source
    if not isinstance(src, BallSpace):
        raise ValueError("profile needs ball sources")
    if a.marking != src.free:
        raise ValueError("element does not live on the family's source free group")
    indices, radii, norms, skipped = [], [], [], []
    for m, cover in enumerate(family):
        if cover.source is not src:
            raise ValueError("family members must share their source ball")
        if a.support_radius >= cover.injectivity_radius:
            skipped.append(m)
            continue
        indices.append(m)
        radii.append(cover.injectivity_radius)
        norms.append(_transport_norm(a, cover, tol))
    if not indices:
        raise ValueError(
            f"no family term admits support radius {a.support_radius}")
    base_op = to_band_operator(a, src)
    base_norm = operator_norm(base_op, tol=tol)
    tail = max(1, len(norms) // 2)
    limsup = max(norms[-tail:])

    # lower-bound witness: top right-singular vector of the base operator,
    # restricted to columns near the basepoint so that supp(a v) maps
    # injectively through every admissible term and the products transport
    # exactly
    r_min = min(radii)
    span = max(0, r_min - a.support_radius)
    depth_arr = src.dist[src.basepoint]
    cols = np.where(depth_arr <= span)[0]
    sub = base_op.entries[:, cols]
    _, _, vh = np.linalg.svd(sub)
    v = np.zeros(src.n, dtype=np.complex128)
    v[cols] = vh[0].conj()
    av = base_op.entries @ v
    av_norm = float(np.linalg.norm(av))
    witness_ratio = av_norm / base_norm if base_norm else 0.0
    matches = []
    for m in indices:
        cover = family[m]
        tv = _transport_vector(v, cover)
        ta = to_band_operator(pushforward_group_ring(a, cover), cover.target)
        matches.append(abs(float(np.linalg.norm(ta.entries @ tv)) - av_norm))
    return NormProfile(
        description=description or f"support radius {a.support_radius}",
        base_norm=base_norm,
        term_indices=tuple(indices),
        term_radii=tuple(radii),
        term_norms=tuple(norms),
        skipped=tuple(skipped),
        limsup_estimate=limsup,
        window_length=tail,
        witness_ratio=witness_ratio,
        witness_support=int(np.count_nonzero(v)),
        witness_matches=tuple(matches),
    )


def _transport_vector(v: np.ndarray, cover: CoveringMap) -> np.ndarray:
    out = np.zeros(cover.target.n, dtype=np.complex128)
    np.add.at(out, cover.point_map, v)
    return out


# -- asymptotic continuity ---------------------------------------------------------


@dataclass(frozen=True)
class ContinuityVerdict:
    """Window evidence for one sample element along the family."""

    description: str
    support_radius: int
    base_norm: float
    term_indices: tuple[int, ...]
    term_norms: tuple[float, ...]
    continuous_from: int | None
    isometric_from: int | None
    relaxed_continuous_from: int | None
    admissible: bool
    note: str


def continuity_classification(family: Sequence[CoveringMap],
                              samples: Sequence[GroupRingElement],
                              tol: float = 1e-9,
                              c: float | None = None,
                              norm_tol: float = 1e-9) -> list[ContinuityVerdict]:
    """Asymptotic continuity / isometry verdicts over a finite window.

    For each sample, reports the least family index beyond which every
    admissible term satisfies the continuity bound (norm at most base times
    1+tol), the isometry bound (equal up to tol), and, when a constant c is
    supplied, the relaxed bound norm <= base/c.  Samples no term admits are
    flagged inadmissible rather than erroring.
    """
    if not samples:
        raise ValueError("no sample elements given")
    if not family:
        raise ValueError("family of coverings is empty")
    verdicts = []
    for k, a in enumerate(samples):
        indices, norms = [], []
        for m, cover in enumerate(family):
            if a.support_radius >= cover.injectivity_radius:
                continue
            indices.append(m)
            norms.append(_transport_norm(a, cover, norm_tol))
        if not indices:
            verdicts.append(ContinuityVerdict(
                description=f"sample {k}", support_radius=a.support_radius,
                base_norm=float("nan"), term_indices=(), term_norms=(),
                continuous_from=None, isometric_from=None,
                relaxed_continuous_from=None, admissible=False,
                note="no family term admits this support radius"))
            continue
        src = family[indices[0]].source
        base = operator_norm(to_band_operator(a, src), tol=norm_tol)

        def least_from(pred) -> int | None:
            good = [pred(x) for x in norms]
            start = None
            for i in range(len(good) - 1, -1, -1):
                if not good[i]:
                    break
                start = indices[i]
            return start

        cont = least_from(lambda x: x <= base * (1.0 + tol))
        iso = least_from(lambda x: abs(x - base) <= tol * max(base, 1.0))
        relaxed = None
        if c is not None:
            if not 0 < c <= 1:
                raise ValueError(f"constant c must be in (0, 1], got {c}")
            relaxed = least_from(lambda x: x <= base / c * (1.0 + tol))
        verdicts.append(ContinuityVerdict(
            description=f"sample {k}", support_radius=a.support_radius,
            base_norm=base, term_indices=tuple(indices),
            term_norms=tuple(norms), continuous_from=cont,
            isometric_from=iso, relaxed_continuous_from=relaxed,
            admissible=True,
            note="window evidence over the sampled family only"))
    return verdicts
