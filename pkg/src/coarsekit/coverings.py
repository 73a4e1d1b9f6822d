"""Covering maps, injectivity radii, faithfulness reports, box spaces.

Sources are finite balls of marked groups (never infinite groups), so every
"tends to infinity" verdict here is window evidence over the computed range.
The injectivity radius of a covering is the largest integer R such that every
R-ball around an interior source point maps isometrically onto the R-ball
around its image; interior means the ball is not clipped by the source
truncation, which for a group ball is depth R_big - R.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .groups import FiniteGroup, FreeGroup, MarkedGroup, Word, cyclic_group, direct_product, group_from_table, matrix_group_mod_p
from .spaces import BallSpace, CayleySpace, FiniteSpace


@dataclass(frozen=True)
class IsometryViolation:
    """Witness that an R-ball fails to map isometrically."""

    radius: int
    center: int
    kind: str  # "collision" | "distance" | "not-onto"
    pair: tuple[int, int] | None
    source_distance: int | None
    target_distance: int | None


class CoveringMap:
    """Surjective point map between finite spaces, with injectivity window."""

    def __init__(self, source: FiniteSpace, target: FiniteSpace, point_map: Sequence[int]):
        pm = np.array(point_map, dtype=np.int64)
        if pm.shape != (source.n,):
            raise ValueError(f"point map has {pm.shape} entries for {source.n} source points")
        if not ((pm >= 0) & (pm < target.n)).all():
            raise ValueError("point map image out of range")
        if len(set(pm.tolist())) != target.n:
            missing = sorted(set(range(target.n)) - set(pm.tolist()))
            raise ValueError(f"point map is not surjective; misses target points {missing[:8]}")
        pm.flags.writeable = False
        self.source = source
        self.target = target
        self.point_map = pm
        self._radius: int | None = None

    def interior_points(self, depth: int) -> np.ndarray:
        """Source points whose depth-ball is not clipped by truncation."""
        if isinstance(self.source, BallSpace):
            return self.source.interior(depth)
        return np.arange(self.source.n)

    def radius_cap(self) -> int:
        if isinstance(self.source, BallSpace):
            return self.source.radius
        return self.source.diameter()

    @property
    def injectivity_radius(self) -> int:
        if self._radius is None:
            self._radius = injectivity_radius(self)
        return self._radius


def ball_isometry_witness(cover: CoveringMap, radius: int) -> IsometryViolation | None:
    """First violation of the R-ball isometry condition, or None if it holds."""
    src, tgt, pm = cover.source, cover.target, cover.point_map
    for y in cover.interior_points(radius):
        pts = src.ball(int(y), radius)
        imgs = pm[pts]
        if len(set(imgs.tolist())) != len(pts):
            seen: dict[int, int] = {}
            for p, i in zip(pts.tolist(), imgs.tolist()):
                if i in seen:
                    return IsometryViolation(radius, int(y), "collision", (seen[i], p), None, None)
                seen[i] = p
        dsub = src.dist[np.ix_(pts, pts)]
        tsub = tgt.dist[np.ix_(imgs, imgs)]
        if (dsub != tsub).any():
            a, b = np.argwhere(dsub != tsub)[0]
            return IsometryViolation(radius, int(y), "distance",
                                     (int(pts[a]), int(pts[b])),
                                     int(dsub[a, b]), int(tsub[a, b]))
        tball = tgt.ball(int(pm[y]), radius)
        if set(imgs.tolist()) != set(tball.tolist()):
            return IsometryViolation(radius, int(y), "not-onto", None, None, None)
    return None


def injectivity_radius(cover: CoveringMap) -> int:
    """Largest R whose interior R-balls all map isometrically onto image balls."""
    r = 0
    for radius in range(1, cover.radius_cap() + 1):
        if ball_isometry_witness(cover, radius) is not None:
            break
        r = radius
    return r


# -- quotient coverings ------------------------------------------------------


@dataclass(frozen=True)
class QuotientData:
    """A finite marked quotient of a free group: images of the free generators."""

    free: FreeGroup
    marking: MarkedGroup
    images: tuple  # image of generator i+1 at position i

    def evaluate(self, word: Word):
        g = self.marking.group
        x = g.identity
        for letter in word:
            img = self.images[abs(letter) - 1]
            x = g.mul(x, img if letter > 0 else g.inv(img))
        return x


def quotient_data(free: FreeGroup, group: FiniteGroup, images: Sequence) -> QuotientData:
    """Bundle a quotient: free generators mapped onto marked group generators."""
    if len(images) != free.rank:
        raise ValueError(f"need {free.rank} generator images, got {len(images)}")
    gens: list = []
    for img in images:
        if img not in group.index:
            raise ValueError(f"generator image {img!r} is not a group element")
        inv = group.inv(img)
        for g in (img, inv):
            if g != group.identity and g not in gens:
                gens.append(g)
    if not gens:
        raise ValueError("all generator images are the identity; quotient marking is empty")
    marking = MarkedGroup(group, gens)
    return QuotientData(free=free, marking=marking, images=tuple(images))


def quotient_covering(ball: BallSpace, quotient: QuotientData) -> CoveringMap:
    """Covering map from a free-group ball onto the quotient Cayley space."""
    if ball.free.rank != quotient.free.rank:
        raise ValueError(
            f"ball has rank {ball.free.rank} but quotient expects rank {quotient.free.rank}")
    target = CayleySpace(quotient.marking)
    group = quotient.marking.group
    pm = [group.index[quotient.evaluate(w)] for w in ball.words]
    if len(set(pm)) != target.n:
        raise ValueError(
            f"ball of radius {ball.radius} does not reach every quotient point; "
            f"increase the ball radius")
    return CoveringMap(ball, target, pm)


def parse_group_spec(data: dict) -> FiniteGroup:
    """Build a finite group from the JSON quotient-spec group object."""
    kind = data.get("type")
    params = data.get("params", {})
    if kind == "cyclic":
        return cyclic_group(int(params["n"]))
    if kind == "product":
        factors = [parse_group_spec(f) for f in params["factors"]]
        if len(factors) < 2:
            raise ValueError("product group needs at least two factors")
        g = factors[0]
        for h in factors[1:]:
            g = direct_product(g, h)
        return g
    if kind == "table":
        return group_from_table(params["table"], int(params.get("identity", 0)))
    if kind == "matrix_mod_p":
        return matrix_group_mod_p(
            [tuple(map(tuple, m)) for m in params["generators"]], int(params["p"]))
    raise ValueError(f"unknown group type {kind!r}")


def _canon_element(group: FiniteGroup, raw):
    """Map a JSON-serialized element onto the group's canonical element."""
    candidates = [raw]
    if isinstance(raw, list):
        flat = raw
        if flat and isinstance(flat[0], list):
            flat = [x for row in raw for x in row]
        candidates.append(tuple(flat))
        candidates.append(tuple(raw))
        try:
            candidates.append(tuple(tuple(r) for r in raw))
        except TypeError:
            pass
    for c in candidates:
        try:
            if c in group.index:
                return c
        except TypeError:
            continue
    raise ValueError(f"element {raw!r} is not in the group")


def parse_quotient_spec(text: str) -> QuotientData:
    """Parse the quotient specification JSON.

    Shape: {"rank": k, "generator_images": [...],
            "group": {"type": "cyclic"|"product"|"table"|"matrix_mod_p", "params": {...}}}
    """
    data = json.loads(text)
    for key in ("rank", "generator_images", "group"):
        if key not in data:
            raise ValueError(f"quotient spec is missing field {key!r}")
    free = FreeGroup(int(data["rank"]))
    group = parse_group_spec(data["group"])
    images = [_canon_element(group, raw) for raw in data["generator_images"]]
    return quotient_data(free, group, images)


# -- faithfulness over a family ----------------------------------------------


@dataclass(frozen=True)
class FaithfulnessReport:
    """Per-term injectivity radii plus a window-evidence verdict."""

    radii: tuple[int, ...]
    verdict: str  # "increasing" | "not increasing" | "insufficient data"
    note: str = "window evidence over the computed range, not a divergence proof"


def faithfulness_report(family: Sequence[CoveringMap]) -> FaithfulnessReport:
    if not family:
        raise ValueError("family must be nonempty")
    ranks = {c.source.free.rank for c in family if isinstance(c.source, BallSpace)}
    if len(ranks) > 1:
        raise ValueError(f"family mixes source markings of ranks {sorted(ranks)}")
    radii = tuple(c.injectivity_radius for c in family)
    if len(radii) < 2:
        verdict = "insufficient data"
    elif all(a <= b for a, b in zip(radii, radii[1:])) and radii[-1] > radii[0]:
        verdict = "increasing"
    else:
        verdict = "not increasing"
    return FaithfulnessReport(radii=radii, verdict=verdict)


# -- box spaces ---------------------------------------------------------------


@dataclass(frozen=True)
class BoxSpace:
    """Finitely many components strung along a ray at scheduled positions.

    Distance within a component is its own metric; across components it is the
    position gap plus the distances to the two basepoints, which keeps the
    triangle inequality exact while the components drift apart.
    """

    components: tuple[FiniteSpace, ...]
    schedule: tuple[int, ...]
    space: FiniteSpace
    offsets: tuple[int, ...]

    def component_slice(self, i: int) -> np.ndarray:
        start = self.offsets[i]
        stop = self.offsets[i + 1] if i + 1 < len(self.components) else self.space.n
        return np.arange(start, stop)

    def separation(self, i: int, j: int) -> int:
        return abs(self.schedule[i] - self.schedule[j])


def assemble_box_space(components: Sequence[FiniteSpace], schedule: Sequence[int]) -> BoxSpace:
    """Assemble finitely many spaces with scheduled pairwise separations."""
    if not components:
        raise ValueError("component list must be nonempty")
    if len(schedule) != len(components):
        raise ValueError(
            f"schedule needs one position per component: {len(schedule)} != {len(components)}")
    sched = [int(s) for s in schedule]
    if any(b <= a for a, b in zip(sched, sched[1:])):
        raise ValueError("schedule must be strictly increasing")
    sizes = [c.n for c in components]
    offsets = np.concatenate([[0], np.cumsum(sizes)[:-1]]).astype(int)
    total = sum(sizes)
    dist = np.zeros((total, total), dtype=np.int64)
    for i, ci in enumerate(components):
        oi = offsets[i]
        dist[oi:oi + ci.n, oi:oi + ci.n] = ci.dist
        bi = ci.dist[ci.basepoint]
        for j in range(i + 1, len(components)):
            cj = components[j]
            oj = offsets[j]
            gap = sched[j] - sched[i]
            bj = cj.dist[cj.basepoint]
            block = gap + bi[:, None] + bj[None, :]
            dist[oi:oi + ci.n, oj:oj + cj.n] = block
            dist[oj:oj + cj.n, oi:oi + ci.n] = block.T
    space = FiniteSpace(dist, basepoint=int(offsets[0] + components[0].basepoint))
    return BoxSpace(components=tuple(components), schedule=tuple(sched),
                    space=space, offsets=tuple(int(o) for o in offsets))
