"""Finite groups, marked generating sets, and free-group words.

A "marking" is a group together with a symmetric generating set; it supplies
the word length used by metric constructions and group-ring supports.  Finite
groups are stored with explicit multiplication tables, so any finite structure
(cyclic, direct product, raw table, matrix group mod p) goes through the same
code path.  Free groups are represented by reduced words over signed generator
indices: generator i is the integer i + 1, its inverse -(i + 1).
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

Word = tuple[int, ...]


def reduce_word(letters: Iterable[int]) -> Word:
    """Freely reduce a word given as signed generator indices."""
    out: list[int] = []
    for x in letters:
        if x == 0:
            raise ValueError("letter 0 is not a valid signed generator index")
        if out and out[-1] == -x:
            out.pop()
        else:
            out.append(x)
    return tuple(out)


def invert_word(word: Sequence[int]) -> Word:
    return tuple(-x for x in reversed(word))


@dataclass(frozen=True)
class FreeGroup:
    """Free group of finite rank acting on reduced words."""

    rank: int

    def __post_init__(self) -> None:
        if self.rank < 1:
            raise ValueError(f"rank must be >= 1, got {self.rank}")

    @property
    def identity(self) -> Word:
        return ()

    def generators(self) -> tuple[Word, ...]:
        """Symmetric generating set: a, a^-1, b, b^-1, ..."""
        gens: list[Word] = []
        for i in range(1, self.rank + 1):
            gens.append((i,))
            gens.append((-i,))
        return tuple(gens)

    def mul(self, a: Sequence[int], b: Sequence[int]) -> Word:
        return reduce_word(tuple(a) + tuple(b))

    def inv(self, a: Sequence[int]) -> Word:
        return invert_word(a)

    def length(self, a: Sequence[int]) -> int:
        return len(a)

    def ball_words(self, radius: int) -> list[Word]:
        """All reduced words of length <= radius, in BFS order."""
        if radius < 0:
            raise ValueError(f"radius must be >= 0, got {radius}")
        words: list[Word] = [()]
        frontier: list[Word] = [()]
        for _ in range(radius):
            nxt: list[Word] = []
            for w in frontier:
                for g in range(1, self.rank + 1):
                    for s in (g, -g):
                        if w and w[-1] == -s:
                            continue
                        nxt.append(w + (s,))
            words.extend(nxt)
            frontier = nxt
        return words


class FiniteGroup:
    """Finite group with explicit element list and multiplication table."""

    def __init__(self, elements: Sequence, mul_table: np.ndarray, identity_index: int):
        n = len(elements)
        table = np.asarray(mul_table, dtype=np.int64)
        if table.shape != (n, n):
            raise ValueError(f"multiplication table shape {table.shape} != ({n}, {n})")
        if not ((table >= 0) & (table < n)).all():
            raise ValueError("multiplication table entries out of range")
        self.elements = tuple(elements)
        self.index = {g: i for i, g in enumerate(self.elements)}
        if len(self.index) != n:
            raise ValueError("group elements must be distinct")
        self.table = table
        self.table.flags.writeable = False
        self.identity_index = identity_index
        self._check_axioms()
        inv = np.full(n, -1, dtype=np.int64)
        for i in range(n):
            hits = np.where(table[i] == identity_index)[0]
            if len(hits) != 1:
                raise ValueError(f"element {i} has {len(hits)} inverses")
            inv[i] = hits[0]
        self.inverse = inv
        self.inverse.flags.writeable = False

    def _check_axioms(self) -> None:
        t = self.table
        e = self.identity_index
        n = len(self.elements)
        if not (t[e] == np.arange(n)).all() or not (t[:, e] == np.arange(n)).all():
            raise ValueError("identity element does not act as identity")
        # associativity: (ab)c == a(bc), vectorised over b and c for each a
        for a in range(n):
            if not (t[t[a]] == t[a][t]).all():
                raise ValueError(f"multiplication table not associative at element {a}")

    def __len__(self) -> int:
        return len(self.elements)

    @property
    def identity(self):
        return self.elements[self.identity_index]

    def mul(self, a, b):
        return self.elements[self.table[self.index[a], self.index[b]]]

    def inv(self, a):
        return self.elements[self.inverse[self.index[a]]]

    def mul_index(self, i: int, j: int) -> int:
        return int(self.table[i, j])

    def inv_index(self, i: int) -> int:
        return int(self.inverse[i])


def _table_from_op(elements: Sequence, op) -> np.ndarray:
    idx = {g: i for i, g in enumerate(elements)}
    n = len(elements)
    table = np.zeros((n, n), dtype=np.int64)
    for i, a in enumerate(elements):
        for j, b in enumerate(elements):
            c = op(a, b)
            if c not in idx:
                raise ValueError(f"product {a} * {b} = {c} is not in the element list")
            table[i, j] = idx[c]
    return table


def cyclic_group(n: int) -> FiniteGroup:
    """Z/n with elements 0..n-1 under addition."""
    if n < 1:
        raise ValueError(f"cyclic group order must be >= 1, got {n}")
    elements = list(range(n))
    return FiniteGroup(elements, _table_from_op(elements, lambda a, b: (a + b) % n), 0)


def direct_product(g: FiniteGroup, h: FiniteGroup) -> FiniteGroup:
    """Direct product with elements as pairs."""
    elements = [(a, b) for a in g.elements for b in h.elements]
    op = lambda x, y: (g.mul(x[0], y[0]), h.mul(x[1], y[1]))
    e = (g.identity, h.identity)
    table = _table_from_op(elements, op)
    return FiniteGroup(elements, table, elements.index(e))


def group_from_table(table: Sequence[Sequence[int]], identity_index: int = 0) -> FiniteGroup:
    """Group on elements 0..n-1 from an explicit multiplication table."""
    n = len(table)
    return FiniteGroup(list(range(n)), np.asarray(table), identity_index)


def matrix_group_mod_p(generators: Sequence[Sequence[Sequence[int]]], p: int) -> FiniteGroup:
    """Subgroup of GL(2, Z/p) generated by the given 2x2 matrices.

    Elements are flattened tuples (a, b, c, d) mod p; the closure is built by
    breadth-first multiplication, so non-invertible generators are rejected.
    """
    if p < 2:
        raise ValueError(f"modulus must be >= 2, got {p}")

    def canon(m) -> tuple[int, int, int, int]:
        (a, b), (c, d) = m
        return (a % p, b % p, c % p, d % p)

    def mmul(x, y):
        a, b, c, d = x
        e, f, g, h = y
        return ((a * e + b * g) % p, (a * f + b * h) % p,
                (c * e + d * g) % p, (c * f + d * h) % p)

    gens = [canon(m) for m in generators]
    for m in gens:
        if (m[0] * m[3] - m[1] * m[2]) % p == 0:
            raise ValueError(f"generator {m} is singular mod {p}")
    e = (1, 0, 0, 1)
    seen = {e}
    order = [e]
    queue = deque([e])
    while queue:
        x = queue.popleft()
        for g in gens:
            y = mmul(x, g)
            if y not in seen:
                seen.add(y)
                order.append(y)
                queue.append(y)
    return FiniteGroup(order, _table_from_op(order, mmul), 0)


@dataclass(frozen=True)
class MarkedGroup:
    """Finite group with a distinguished symmetric generating set.

    Word lengths are breadth-first distances from the identity in the Cayley
    graph of the marking; they back the metric constructions downstream.
    """

    group: FiniteGroup
    generators: tuple
    lengths: np.ndarray = field(init=False, repr=False)

    def __init__(self, group: FiniteGroup, generators: Sequence):
        object.__setattr__(self, "group", group)
        object.__setattr__(self, "generators", tuple(generators))
        gen_idx = []
        for g in self.generators:
            if g not in group.index:
                raise ValueError(f"generator {g} is not a group element")
            if g == group.identity:
                raise ValueError("identity is not allowed as a generator")
            gen_idx.append(group.index[g])
        if len(set(gen_idx)) != len(gen_idx):
            raise ValueError("generators must be distinct")
        for i in gen_idx:
            if group.inv_index(i) not in gen_idx:
                raise ValueError("generating set must be symmetric (closed under inverse)")
        lengths = _bfs_lengths(group, gen_idx)
        if (lengths < 0).any():
            raise ValueError("generators do not generate the group")
        lengths.flags.writeable = False
        object.__setattr__(self, "lengths", lengths)

    @property
    def identity(self):
        return self.group.identity

    def mul(self, a, b):
        return self.group.mul(a, b)

    def inv(self, a):
        return self.group.inv(a)

    def length(self, a) -> int:
        return int(self.lengths[self.group.index[a]])

    def generator_indices(self) -> list[int]:
        return [self.group.index[g] for g in self.generators]


def _bfs_lengths(group: FiniteGroup, gen_idx: Sequence[int]) -> np.ndarray:
    n = len(group)
    dist = np.full(n, -1, dtype=np.int64)
    e = group.identity_index
    dist[e] = 0
    queue = deque([e])
    while queue:
        x = queue.popleft()
        for g in gen_idx:
            y = group.mul_index(x, g)
            if dist[y] < 0:
                dist[y] = dist[x] + 1
                queue.append(y)
    return dist
