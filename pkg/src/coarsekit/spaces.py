"""Finite metric spaces with integer graph metrics.

Spaces are vertex sets 0..n-1 with a validated integer distance table, almost
always the breadth-first metric of a connected graph.  On top of the basic
type this module provides Cayley-graph construction for marked finite groups,
girth, four-point hyperbolicity, annular decompositions around the basepoint,
cover multiplicity at a scale, and the two-palette annular colouring that
splits a bounded-multiplicity cover into r-disjoint families.
"""

from __future__ import annotations

import hashlib
import json
from collections import deque
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .groups import FiniteGroup, FreeGroup, MarkedGroup, Word

#: Hyperbolicity convention used by every report that quotes a delta.
DELTA_CONVENTION = "four-point"

#: Largest point count accepted by the exhaustive O(n^4) hyperbolicity scan.
DEFAULT_DELTA_MAX_POINTS = 64


class FiniteSpace:
    """Finite metric space: points 0..n-1 with an integer distance table."""

    def __init__(self, dist: np.ndarray, basepoint: int = 0, *, trusted: bool = False):
        d = np.array(dist, dtype=np.int64)
        if d.ndim != 2 or d.shape[0] != d.shape[1]:
            raise ValueError(f"distance table must be square, got shape {d.shape}")
        n = d.shape[0]
        if n == 0:
            raise ValueError("space must be nonempty")
        if (d < 0).any():
            raise ValueError("distances must be nonnegative")
        if (np.diag(d) != 0).any():
            raise ValueError("self-distances must be zero")
        if not trusted:
            # breadth-first metrics satisfy these by construction; tables
            # supplied from outside get the full O(n^3) validation
            if (d != d.T).any():
                raise ValueError("distance table must be symmetric")
            off = d + np.eye(n, dtype=np.int64)
            if (off == 0).any():
                raise ValueError("distinct points must have positive distance")
            for k in range(n):
                if (d > d[:, [k]] + d[[k], :]).any():
                    raise ValueError(f"triangle inequality fails through point {k}")
        if not 0 <= basepoint < n:
            raise ValueError(f"basepoint {basepoint} out of range for {n} points")
        d.flags.writeable = False
        self.dist = d
        self.n = n
        self.basepoint = basepoint

    # -- constructors ------------------------------------------------------

    @classmethod
    def from_edges(cls, n: int, edges: Iterable[tuple[int, int]], basepoint: int = 0) -> "FiniteSpace":
        """Breadth-first metric of a connected undirected graph."""
        import scipy.sparse as sp
        from scipy.sparse.csgraph import shortest_path

        pairs = []
        for u, v in edges:
            if not (0 <= u < n and 0 <= v < n):
                raise ValueError(f"edge ({u}, {v}) out of range for {n} points")
            if u != v:
                pairs.append((u, v))
        if pairs:
            rows = np.array([p[0] for p in pairs])
            cols = np.array([p[1] for p in pairs])
            graph = sp.csr_matrix((np.ones(len(pairs)), (rows, cols)), shape=(n, n))
        else:
            graph = sp.csr_matrix((n, n))
        d = shortest_path(graph, method="D", directed=False, unweighted=True)
        if np.isinf(d).any():
            raise ValueError("graph is not connected")
        return cls(d.astype(np.int64), basepoint, trusted=True)

    @classmethod
    def cycle(cls, n: int, basepoint: int = 0) -> "FiniteSpace":
        if n < 3:
            raise ValueError(f"cycle needs >= 3 points, got {n}")
        return cls.from_edges(n, [(i, (i + 1) % n) for i in range(n)], basepoint)

    @classmethod
    def path(cls, n: int, basepoint: int = 0) -> "FiniteSpace":
        if n < 1:
            raise ValueError(f"path needs >= 1 point, got {n}")
        if n == 1:
            return cls(np.zeros((1, 1), dtype=np.int64), 0)
        return cls.from_edges(n, [(i, i + 1) for i in range(n - 1)], basepoint)

    # -- queries -----------------------------------------------------------

    def ball(self, center: int, radius: int) -> np.ndarray:
        """Indices of the closed ball of the given radius."""
        return np.where(self.dist[center] <= radius)[0]

    def diameter(self) -> int:
        return int(self.dist.max())

    def eccentricity(self, x: int | None = None) -> int:
        if x is None:
            x = self.basepoint
        return int(self.dist[x].max())

    def adjacency(self) -> np.ndarray:
        return (self.dist == 1).astype(np.complex128)

    def edges(self) -> list[tuple[int, int]]:
        iu, ju = np.where(np.triu(self.dist == 1))
        return [(int(i), int(j)) for i, j in zip(iu, ju)]

    def generator_degree(self) -> int:
        return int((self.dist == 1).sum(axis=1).max())

    # -- serialization -----------------------------------------------------

    def to_json(self) -> str:
        payload = {
            "points": self.n,
            "edges": [[u, v] for u, v in self.edges()],
            "basepoint": self.basepoint,
        }
        return json.dumps(payload, sort_keys=True, separators=(",", ":"))

    @classmethod
    def from_json(cls, text: str) -> "FiniteSpace":
        data = json.loads(text)
        for key in ("points", "edges", "basepoint"):
            if key not in data:
                raise ValueError(f"space JSON is missing field {key!r}")
        space = cls.from_edges(int(data["points"]),
                               [(int(u), int(v)) for u, v in data["edges"]],
                               int(data["basepoint"]))
        # distance tables are always recomputed; edge data is the contract
        return space

    def content_hash(self) -> str:
        return hashlib.sha256(self.to_json().encode()).hexdigest()[:16]


class CayleySpace(FiniteSpace):
    """Cayley graph of a marked finite group; point i is marking element i."""

    def __init__(self, marking: MarkedGroup):
        group = marking.group
        n = len(group)
        gen_idx = marking.generator_indices()
        edges = [(i, group.mul_index(i, g)) for i in range(n) for g in gen_idx]
        tmp = FiniteSpace.from_edges(n, edges, basepoint=group.identity_index)
        super().__init__(tmp.dist, tmp.basepoint, trusted=True)
        self.marking = marking

    def quotient_of_indices(self, i: int, j: int) -> int:
        """Index of x^-1 y for points x = i, y = j."""
        g = self.marking.group
        return g.mul_index(g.inv_index(i), j)


class BallSpace(FiniteSpace):
    """Metric ball of a free group, as a finite space; point i is word i.

    Balls in trees are geodesically convex, so the breadth-first metric of the
    induced graph agrees with the restricted word metric.
    """

    def __init__(self, free: FreeGroup, radius: int):
        words = free.ball_words(radius)
        index = {w: i for i, w in enumerate(words)}
        edges = []
        for i, w in enumerate(words):
            for g in free.generators():
                u = free.mul(w, g)
                j = index.get(u)
                if j is not None:
                    edges.append((i, j))
        tmp = FiniteSpace.from_edges(len(words), edges, basepoint=0)
        super().__init__(tmp.dist, tmp.basepoint, trusted=True)
        self.free = free
        self.radius = radius
        self.words: tuple[Word, ...] = tuple(words)
        self.word_index = index

    def interior(self, depth: int) -> np.ndarray:
        """Points whose depth-neighbourhood stays inside the ball."""
        return np.where(self.dist[self.basepoint] <= self.radius - depth)[0]


def build_cayley_space(group: FiniteGroup, generators: Sequence) -> CayleySpace:
    """Cayley graph space of a finite group with a symmetric generating set."""
    return CayleySpace(MarkedGroup(group, generators))


# -- cover and annulus types ------------------------------------------------


@dataclass(frozen=True)
class Cover:
    """Cover of a space by point sets; every point must lie in some member."""

    members: tuple[frozenset[int], ...]

    def __init__(self, members: Iterable[Iterable[int]]):
        object.__setattr__(self, "members", tuple(frozenset(m) for m in members))

    def validate(self, space: FiniteSpace) -> None:
        covered: set[int] = set()
        for i, m in enumerate(self.members):
            if not m:
                raise ValueError(f"cover member {i} is empty")
            if any(not 0 <= x < space.n for x in m):
                raise ValueError(f"cover member {i} contains out-of-range points")
            covered |= m
        if covered != set(range(space.n)):
            missing = sorted(set(range(space.n)) - covered)
            raise ValueError(f"cover misses points {missing[:8]}")

    def diameter_bound(self, space: FiniteSpace) -> int:
        bound = 0
        for m in self.members:
            idx = np.fromiter(m, dtype=np.int64)
            bound = max(bound, int(space.dist[np.ix_(idx, idx)].max()))
        return bound


@dataclass(frozen=True)
class AnnularDecomposition:
    """Partition around the basepoint into annuli [kR, (k+1)R)."""

    width: int
    parts: tuple[frozenset[int], ...]

    def part_of(self, space: FiniteSpace, x: int) -> int:
        return int(space.dist[space.basepoint, x]) // self.width


def annular_decomposition(space: FiniteSpace, width: int) -> AnnularDecomposition:
    """Split the space into annuli of the given width around the basepoint."""
    if width < 1:
        raise ValueError(f"annulus width must be >= 1, got {width}")
    radii = space.dist[space.basepoint]
    k_max = int(radii.max()) // width
    parts = []
    for k in range(k_max + 1):
        part = frozenset(np.where((radii >= k * width) & (radii < (k + 1) * width))[0].tolist())
        parts.append(part)
    while parts and not parts[-1]:
        parts.pop()
    return AnnularDecomposition(width=width, parts=tuple(parts))


def cover_multiplicity(space: FiniteSpace, cover: Cover, r: int) -> int:
    """Largest number of cover members meeting a single closed r-ball."""
    if r < 0:
        raise ValueError(f"scale must be >= 0, got {r}")
    cover.validate(space)
    best = 0
    for x in range(space.n):
        ball = set(space.ball(x, r).tolist())
        count = sum(1 for m in cover.members if m & ball)
        best = max(best, count)
    return best


def _witness_ball(space: FiniteSpace, cover: Cover, r: int, bound: int) -> int | None:
    for x in range(space.n):
        ball = set(space.ball(x, r).tolist())
        if sum(1 for m in cover.members if m & ball) > bound:
            return x
    return None


@dataclass(frozen=True)
class ColoredPiece:
    """One coloured set: a cover member clipped to an annulus."""

    member: int
    annulus: int
    points: frozenset[int]
    color: int


@dataclass(frozen=True)
class Coloring:
    """Result of the annular colouring; same colour means > gap apart."""

    gap: int
    pieces: tuple[ColoredPiece, ...]
    color_count: int
    multiplicity: int
    bound_two_k: int
    bound_two_k_plus: int

    def colors_of_member(self, member: int) -> set[int]:
        return {p.color for p in self.pieces if p.member == member}


def greedy_color_cover(space: FiniteSpace, cover: Cover, r: int, k: int) -> Coloring:
    """Split a cover with 2r-multiplicity <= k into r-disjoint colour classes.

    Members are clipped to annuli of width 2r around the basepoint.  Within
    one annulus, two pieces conflict when their set distance is at most r;
    a first-fit sweep in ascending distance from the basepoint colours the
    conflict graph properly, so same-coloured pieces of one annulus are
    always more than r apart.  Odd and even annuli use disjoint palettes;
    annuli two apart are separated by a 2r-wide band, so reusing a palette
    across them is safe.  The multiplicity premise keeps each conflict
    neighbourhood near a clique of 2r-ball co-occupants, which is what pins
    the palette at the recorded bounds.
    """
    if r < 1:
        raise ValueError(f"gap must be >= 1, got {r}")
    if k < 1:
        raise ValueError(f"multiplicity bound must be >= 1, got {k}")
    witness = _witness_ball(space, cover, 2 * r, k)
    if witness is not None:
        raise ValueError(
            f"cover multiplicity at scale {2 * r} exceeds {k}: witness ball center {witness}")

    annuli = annular_decomposition(space, 2 * r)
    pieces: list[tuple[int, int, frozenset[int]]] = []
    by_annulus: dict[int, list[int]] = {i: [] for i in range(len(annuli.parts))}
    for mi, member in enumerate(cover.members):
        for ai, part in enumerate(annuli.parts):
            clip = member & part
            if clip:
                by_annulus[ai].append(len(pieces))
                pieces.append((mi, ai, clip))

    radii = space.dist[space.basepoint]
    colors: dict[int, int] = {}
    palette_used = [0, 0]  # per parity

    for ai in range(len(annuli.parts)):
        parity = ai % 2
        arrays = {pi: np.fromiter(pieces[pi][2], dtype=np.int64)
                  for pi in by_annulus[ai]}
        order = sorted(by_annulus[ai],
                       key=lambda pi: (int(radii[arrays[pi]].min()),
                                       int(arrays[pi].min())))
        for pos, pi in enumerate(order):
            taken = {colors[qi] for qi in order[:pos]
                     if int(space.dist[np.ix_(arrays[pi], arrays[qi])].min()) <= r}
            free = 0
            while free in taken:
                free += 1
            colors[pi] = free
            palette_used[parity] = max(palette_used[parity], free + 1)

    # disjoint palettes: odd colours sit above the even palette
    offset = palette_used[0]
    final = []
    for pi, (mi, ai, clip) in enumerate(pieces):
        c = colors[pi] + (offset if ai % 2 == 1 else 0)
        final.append(ColoredPiece(member=mi, annulus=ai, points=clip, color=c))

    multiplicity = cover_multiplicity(space, cover, 2 * r)
    return Coloring(
        gap=r,
        pieces=tuple(final),
        color_count=palette_used[0] + palette_used[1],
        multiplicity=multiplicity,
        bound_two_k=2 * k,
        bound_two_k_plus=2 * (k + 1),
    )


# -- scalar geometry --------------------------------------------------------


def girth(space: FiniteSpace) -> int | None:
    """Length of the shortest simple cycle in the distance-1 graph.

    Returns None for forests.  Uses the standard per-vertex BFS scan: a
    non-tree edge at depths (a, b) from the root closes a cycle of length
    a + b + 1.
    """
    n = space.n
    adj = [np.where(space.dist[i] == 1)[0].tolist() for i in range(n)]
    best: int | None = None
    for root in range(n):
        depth = [-1] * n
        parent = [-1] * n
        depth[root] = 0
        queue = deque([root])
        while queue:
            x = queue.popleft()
            if best is not None and depth[x] * 2 >= best:
                continue
            for y in adj[x]:
                if depth[y] < 0:
                    depth[y] = depth[x] + 1
                    parent[y] = x
                    queue.append(y)
                elif parent[x] != y and parent[y] != x:
                    cyc = depth[x] + depth[y] + 1
                    if best is None or cyc < best:
                        best = cyc
    return best


def hyperbolicity_delta(space: FiniteSpace, max_points: int = DEFAULT_DELTA_MAX_POINTS) -> float:
    """Least four-point delta: for every quadruple the two largest of the
    three pairings differ by at most 2*delta.

    Exhaustive over all quadruples, O(n^4); refuses spaces larger than
    max_points.  Reports quote DELTA_CONVENTION alongside the value.
    """
    n = space.n
    if n > max_points:
        raise ValueError(
            f"space has {n} points; exhaustive scan capped at {max_points} "
            f"(raise max_points to override)")
    d = space.dist.astype(np.int64)
    worst = 0
    for x in range(n):
        for y in range(x + 1, n):
            s1 = d[x, y] + d  # pairing (xy)(zw)
            s2 = d[x, :, None] + d[y, None, :]  # pairing (xz)(yw)
            s3 = d[y, :, None] + d[x, None, :]  # pairing (xw)(yz)
            stacked = np.stack([s1, s2, s3])
            stacked.sort(axis=0)
            gap = int((stacked[2] - stacked[1]).max())
            worst = max(worst, gap)
    return worst / 2.0
