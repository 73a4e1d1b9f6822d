"""Small-cancellation bookkeeping: words, pieces, and relator schedules.

Relators are cyclic words over a lowercase alphabet, with capital letters as
inverses.  Pieces (maximal common subwords across the symmetrized relator
set) drive the metric C'(lambda) and combinatorial C(p) condition checks.
The two schedulers realize the inductive constructions that interleave
control scales with sparse relator lengths: one over an abstract stream of
lengths, one over a sequence of labelled graphs selected by girth.

Group-theoretic consequences (hyperbolicity of the stages, injectivity radii
of the quotient maps) are consumed from the classical theory, so every bound
derived from them is labelled conditional.
"""

from __future__ import annotations

import json
import warnings
from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

_GAP_DEFAULT = 4.0


def _check_letter(ch: str) -> None:
    if len(ch) != 1 or not ch.isascii() or not ch.isalpha():
        raise ValueError(f"letters must be ascii a-z or A-Z, got {ch!r}")


def invert_letters(word: str) -> str:
    """Inverse word: reversed, with case swapped letterwise."""
    return word[::-1].swapcase()


def _cyclic_reduce(word: str) -> str:
    letters = list(word)
    changed = True
    while changed and letters:
        changed = False
        out: list[str] = []
        for ch in letters:
            if out and out[-1] == ch.swapcase():
                out.pop()
                changed = True
            else:
                out.append(ch)
        while len(out) >= 2 and out[0] == out[-1].swapcase():
            out.pop()
            out.pop(0)
            changed = True
        letters = out
    return "".join(letters)


@dataclass(frozen=True)
class CyclicWord:
    """Cyclically reduced word over a-z with capitals as inverses."""

    letters: str

    def __post_init__(self) -> None:
        if not self.letters:
            raise ValueError("cyclic word must be nonempty")
        for ch in self.letters:
            _check_letter(ch)
        n = len(self.letters)
        for i in range(n):
            if self.letters[i] == self.letters[(i + 1) % n].swapcase():
                raise ValueError(
                    f"{self.letters!r} is not cyclically reduced at position {i}")

    @classmethod
    def from_raw(cls, word: str) -> "CyclicWord":
        """Cyclically reduce first; raises if everything cancels."""
        reduced = _cyclic_reduce(word)
        if not reduced:
            raise ValueError(f"{word!r} reduces to the empty word")
        return cls(reduced)

    def __len__(self) -> int:
        return len(self.letters)

    @property
    def reduced(self) -> bool:
        return True

    @property
    def cyclically_reduced(self) -> bool:
        return True

    def inverse(self) -> "CyclicWord":
        return CyclicWord(invert_letters(self.letters))

    def rotations(self) -> list[str]:
        w = self.letters
        return [w[i:] + w[:i] for i in range(len(w))]

    def canonical(self) -> str:
        """Lexicographically least rotation of the word or its inverse."""
        return min(min(self.rotations()),
                   min(self.inverse().rotations()))

    def subword(self, offset: int, length: int) -> str:
        if not 0 <= length <= len(self.letters):
            raise ValueError(f"subword length {length} out of range")
        doubled = self.letters + self.letters
        o = offset % len(self.letters)
        return doubled[o:o + length]


def dedup_words(words: Iterable[CyclicWord]) -> list[CyclicWord]:
    """Keep one representative per class under rotation and inversion."""
    seen: dict[str, CyclicWord] = {}
    for w in words:
        seen.setdefault(w.canonical(), w)
    return [seen[k] for k in sorted(seen, key=lambda k: (len(k), k))]


# -- labelled graphs -------------------------------------------------------------------


@dataclass(frozen=True)
class LabelledGraph:
    """Finite multigraph with a lowercase label and orientation per edge.

    Reading an edge along its orientation gives the label; against it, the
    capitalized inverse.
    """

    n: int
    edges: tuple[tuple[int, int, str], ...]

    def __init__(self, n: int, edges: Iterable[tuple[int, int, str]]):
        clean = []
        for u, v, label in edges:
            if not (0 <= u < n and 0 <= v < n):
                raise ValueError(f"edge ({u}, {v}) out of range for {n} vertices")
            _check_letter(label)
            if not label.islower():
                raise ValueError(
                    f"edge labels are lowercase; orientation encodes {label!r}")
            clean.append((int(u), int(v), label))
        object.__setattr__(self, "n", int(n))
        object.__setattr__(self, "edges", tuple(clean))

    def girth(self) -> int | None:
        """Length of the shortest cycle, or None for a forest."""
        best: int | None = None
        adjacency: list[list[tuple[int, int]]] = [[] for _ in range(self.n)]
        for eid, (u, v, _) in enumerate(self.edges):
            if u == v:
                best = 1 if best is None else min(best, 1)
                continue
            adjacency[u].append((eid, v))
            adjacency[v].append((eid, u))
        for s in range(self.n):
            dist = {s: 0}
            via = {s: -1}
            queue = deque([s])
            while queue:
                x = queue.popleft()
                for eid, y in adjacency[x]:
                    if eid == via[x]:
                        continue
                    if y not in dist:
                        dist[y] = dist[x] + 1
                        via[y] = eid
                        queue.append(y)
                    else:
                        cycle = dist[x] + dist[y] + 1
                        best = cycle if best is None else min(best, cycle)
        return best

    def to_json(self) -> str:
        return json.dumps({
            "vertices": self.n,
            "edges": [{"u": u, "v": v, "label": label}
                      for u, v, label in self.edges],
        }, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "LabelledGraph":
        blob = json.loads(text)
        return cls(blob["vertices"],
                   [(e["u"], e["v"], e["label"]) for e in blob["edges"]])


def _simple_cycles(graph: LabelledGraph) -> list[list[tuple[int, bool]]]:
    """Vertex-simple cycles as edge paths (edge id, traversed forward)."""
    adjacency: list[list[tuple[int, int, bool]]] = [[] for _ in range(graph.n)]
    loops: list[list[tuple[int, bool]]] = []
    for eid, (u, v, _) in enumerate(graph.edges):
        if u == v:
            loops.append([(eid, True)])
            continue
        adjacency[u].append((eid, v, True))
        adjacency[v].append((eid, u, False))
    cycles = list(loops)

    for start in range(graph.n):
        path: list[tuple[int, bool]] = []
        visited = {start}
        stack = [(start, 0)]
        while stack:
            vertex, idx = stack[-1]
            if idx >= len(adjacency[vertex]):
                stack.pop()
                if path:
                    path.pop()
                    visited.discard(vertex)
                continue
            stack[-1] = (vertex, idx + 1)
            eid, nxt, forward = adjacency[vertex][idx]
            if path and eid == path[-1][0]:
                continue
            if nxt == start and path:
                cycles.append(path + [(eid, forward)])
            elif nxt > start and nxt not in visited:
                visited.add(nxt)
                path.append((eid, forward))
                stack.append((nxt, 0))
    return cycles


def relators_from_graph(graph: LabelledGraph, cap: int) -> list[CyclicWord]:
    """Cyclically reduced cycle labels up to the cap, deduplicated."""
    girth = graph.girth()
    if girth is None:
        warnings.warn("graph is acyclic: no cycle relators", stacklevel=2)
        return []
    if cap < girth:
        raise ValueError(f"cap {cap} is below the girth {girth}")
    words = []
    for cycle in _simple_cycles(graph):
        if len(cycle) > cap:
            continue
        raw = "".join(
            graph.edges[eid][2] if forward else graph.edges[eid][2].swapcase()
            for eid, forward in cycle)
        reduced = _cyclic_reduce(raw)
        if not reduced:
            warnings.warn(
                f"cycle label {raw!r} cancels completely; dropped", stacklevel=2)
            continue
        words.append(CyclicWord(reduced))
    return dedup_words(words)


# -- pieces and conditions --------------------------------------------------------------


@dataclass(frozen=True)
class PieceTable:
    """Occurrence data for the symmetrized relator set."""

    relator_lengths: tuple[int, ...]
    max_piece: tuple[int, ...]
    occurrences: dict[str, tuple[tuple[int, int, int], ...]]

    def overall_max(self) -> int:
        return max(self.max_piece, default=0)


def compute_pieces(relators: Sequence[CyclicWord]) -> PieceTable:
    """All pieces: subwords with two distinct cyclic occurrences.

    An occurrence is a triple (relator index, cyclic offset, orientation)
    with orientation +1 for the relator and -1 for its inverse.  A subword is
    a piece when it has at least two distinct occurrences; per relator the
    table records the longest piece that occurs in it (in either
    orientation), always a proper subword.
    """
    occurrences: dict[str, list[tuple[int, int, int]]] = {}
    for i, rel in enumerate(relators):
        length = len(rel)
        for orientation, word in ((1, rel.letters), (-1, rel.inverse().letters)):
            doubled = word + word
            for offset in range(length):
                for sub_len in range(1, length):
                    sub = doubled[offset:offset + sub_len]
                    occurrences.setdefault(sub, []).append(
                        (i, offset, orientation))
    pieces = {sub: tuple(occ) for sub, occ in occurrences.items()
              if len(occ) >= 2}
    max_piece = []
    for i, rel in enumerate(relators):
        best = 0
        for sub, occ in pieces.items():
            if any(j == i for j, _, _ in occ):
                best = max(best, len(sub))
        max_piece.append(best)
    return PieceTable(
        relator_lengths=tuple(len(r) for r in relators),
        max_piece=tuple(max_piece),
        occurrences=pieces,
    )


@dataclass(frozen=True)
class ConditionVerdict:
    """Outcome of a small-cancellation condition check."""

    kind: str
    parameter: float
    passed: bool
    witnesses: tuple[tuple[int, str], ...]
    min_decompositions: tuple[int | None, ...] | None = None


def _min_piece_decomposition(rel: CyclicWord, piece_lengths: set[str]) -> int | None:
    """Fewest pieces concatenating to the cyclic word, or None if impossible."""
    n = len(rel)
    doubled = rel.letters + rel.letters
    best: int | None = None
    for start in range(n):
        window = doubled[start:start + n]
        # linear DP over the rotated word
        counts = [None] * (n + 1)
        counts[0] = 0
        for end in range(1, n + 1):
            for cut in range(end):
                if counts[cut] is None:
                    continue
                if window[cut:end] in piece_lengths:
                    cand = counts[cut] + 1
                    if counts[end] is None or cand < counts[end]:
                        counts[end] = cand
        if counts[n] is not None and (best is None or counts[n] < best):
            best = counts[n]
    return best


def check_condition(relators: Sequence[CyclicWord], *,
                    metric: float | None = None,
                    count: int | None = None) -> ConditionVerdict:
    """Check C'(lambda) (metric=lambda) or C(p) (count=p) with witnesses.

    C'(lambda): every piece occurring in a relator is strictly shorter than
    lambda times that relator's length.  C(p): no relator decomposes into
    fewer than p pieces; the minimal decomposition size is found by dynamic
    programming over every rotation of the cyclic word.
    """
    if (metric is None) == (count is None):
        raise ValueError("give exactly one of metric=lambda or count=p")
    if not relators:
        raise ValueError("no relators given")
    table = compute_pieces(relators)
    if metric is not None:
        if not 0 < metric < 1:
            raise ValueError(f"lambda must lie in (0, 1), got {metric}")
        witnesses = []
        for sub, occ in table.occurrences.items():
            for i, offset, _ in occ:
                if len(sub) >= metric * len(relators[i]):
                    witnesses.append((i, sub))
        witnesses = sorted(set(witnesses))
        return ConditionVerdict(
            kind="C'", parameter=metric, passed=not witnesses,
            witnesses=tuple(witnesses))
    if count < 2:
        raise ValueError(f"p must be >= 2, got {count}")
    piece_set = set(table.occurrences)
    decomps = []
    witnesses = []
    for i, rel in enumerate(relators):
        size = _min_piece_decomposition(rel, piece_set)
        decomps.append(size)
        if size is not None and size < count:
            witnesses.append((i, rel.letters))
    return ConditionVerdict(
        kind="C", parameter=float(count), passed=not witnesses,
        witnesses=tuple(witnesses), min_decompositions=tuple(decomps))


# -- presentations -----------------------------------------------------------------------


@dataclass(frozen=True)
class Presentation:
    """Alphabet plus cyclically reduced relators."""

    alphabet: str
    relators: tuple[CyclicWord, ...]

    def __init__(self, alphabet: str, relators: Iterable[CyclicWord]):
        letters = tuple(dict.fromkeys(alphabet))
        for ch in letters:
            _check_letter(ch)
            if not ch.islower():
                raise ValueError(f"alphabet letters are lowercase, got {ch!r}")
        rels = tuple(relators)
        allowed = set(letters) | {ch.upper() for ch in letters}
        for rel in rels:
            stray = set(rel.letters) - allowed
            if stray:
                raise ValueError(
                    f"relator {rel.letters!r} uses letters outside the "
                    f"alphabet: {sorted(stray)}")
        object.__setattr__(self, "alphabet", "".join(letters))
        object.__setattr__(self, "relators", rels)

    def length_profile(self) -> tuple[int, ...]:
        return tuple(sorted(len(r) for r in self.relators))

    def to_text(self) -> str:
        head = f"# alphabet {self.alphabet}\n"
        return head + "".join(f"{r.letters}\n" for r in self.relators)

    @classmethod
    def from_text(cls, text: str) -> "Presentation":
        alphabet = None
        relators = []
        for line in text.splitlines():
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                parts = line[1:].split()
                if len(parts) == 2 and parts[0] == "alphabet":
                    alphabet = parts[1]
                continue
            relators.append(CyclicWord(line))
        if alphabet is None:
            alphabet = "".join(sorted({ch.lower() for r in relators
                                       for ch in r.letters}))
        return cls(alphabet, relators)


# -- schedules ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ScheduleState:
    """One stage of an inductive relator schedule."""

    stage: int
    relator_lengths: tuple[float, ...]
    scale: float
    epsilon: float
    oracle_t: float | None
    oracle_eps_prime: float | None
    gap_factor: float
    new_lengths: tuple[float, ...]
    conditional_injectivity_bound: float | None
    assumption: str = field(default="bound conditional on the small-cancellation "
                                    "embedding theory; not derived here")

    def __post_init__(self) -> None:
        if not 0 < self.epsilon < 0.25:
            raise ValueError(
                f"stage tolerance must lie in (0, 1/4), got {self.epsilon}")

    def to_json_dict(self) -> dict:
        return {
            "stage": self.stage,
            "relator_lengths": list(self.relator_lengths),
            "scale": self.scale,
            "epsilon": self.epsilon,
            "oracle_t": self.oracle_t,
            "oracle_eps_prime": self.oracle_eps_prime,
            "gap_factor": self.gap_factor,
            "new_lengths": list(self.new_lengths),
            "conditional_injectivity_bound": self.conditional_injectivity_bound,
            "assumption": self.assumption,
        }


def _lengths_in(lengths: Sequence[float], low: float, high: float) -> tuple[float, ...]:
    """Stream lengths in the open interval (low, high)."""
    return tuple(x for x in lengths if low < x < high)


def _conditional_bound(lengths: Sequence[float],
                       accumulated: Sequence[float]) -> float | None:
    """Half the shortest stream length not yet accumulated, minus one."""
    pool = _multiset_difference(lengths, accumulated)
    if not pool:
        return None
    return min(pool) / 2.0 - 1.0


def schedule_general(lengths: Sequence[float],
                     oracle: Callable[[float, float], tuple[float, float]],
                     r0: float, eps0: float,
                     gap: float = _GAP_DEFAULT,
                     max_stages: int = 32,
                     min_stages: int = 0) -> list[ScheduleState]:
    """Inductive schedule over a sparse stream of relator lengths.

    Stage 0 takes every length below r0.  Each later stage calls the control
    oracle at the scale of the longest accumulated relator, inherits its
    output tolerance, and adds the block of lengths in (t, r_m) where
    r_m >= gap * t is chosen just past the next unused stream length.  The
    schedule ends when the stream is exhausted; if that happens before
    min_stages stages, it is an error.
    """
    if gap <= 1:
        raise ValueError(f"gap factor must exceed 1, got {gap}")
    if not 0 < eps0 < 0.25:
        raise ValueError(f"seed tolerance must lie in (0, 1/4), got {eps0}")
    if r0 <= 0:
        raise ValueError(f"seed scale must be positive, got {r0}")
    if any(b < a for a, b in zip(lengths, list(lengths)[1:])):
        raise ValueError("length stream must be sorted nondecreasing")
    if any(x <= 0 for x in lengths):
        raise ValueError("relator lengths must be positive")
    stream = list(lengths)
    block = _lengths_in(stream, 0.0, r0)
    taken = list(block)
    states = [ScheduleState(
        stage=0, relator_lengths=tuple(taken), scale=float(r0),
        epsilon=float(eps0), oracle_t=None, oracle_eps_prime=None,
        gap_factor=float(gap), new_lengths=block,
        conditional_injectivity_bound=_conditional_bound(stream, taken))]
    eps = float(eps0)
    scale = float(r0)
    for stage in range(1, max_stages + 1):
        longest = max(taken) if taken else scale
        t, eps_prime = oracle(longest, eps)
        if not 0 < eps_prime < 0.25:
            raise ValueError(
                f"oracle tolerance {eps_prime} leaves (0, 1/4) at stage {stage}")
        if t <= 0:
            raise ValueError(f"oracle scale {t} must be positive at stage {stage}")
        candidates = [x for x in _multiset_difference(stream, taken) if x > t]
        if not candidates:
            if stage <= min_stages:
                raise ValueError(
                    f"length stream exhausted at stage {stage}, before the "
                    f"requested {min_stages} stages")
            break
        scale = max(gap * t, min(candidates) + 1.0)
        block = tuple(x for x in candidates if t < x < scale)
        taken = sorted(taken + list(block))
        eps = float(eps_prime)
        states.append(ScheduleState(
            stage=stage, relator_lengths=tuple(taken), scale=float(scale),
            epsilon=eps, oracle_t=float(t), oracle_eps_prime=float(eps_prime),
            gap_factor=float(gap), new_lengths=block,
            conditional_injectivity_bound=_conditional_bound(stream, taken)))
    return states


def _multiset_difference(pool: Sequence[float], taken: Sequence[float]) -> list[float]:
    out = list(pool)
    for x in taken:
        if x in out:
            out.remove(x)
    return out


def verify_schedule(states: Sequence[ScheduleState],
                    lengths: Sequence[float]) -> None:
    """Re-check every schedule invariant from scratch; raises on violation."""
    if not states:
        raise ValueError("empty schedule")
    for m, state in enumerate(states):
        if state.stage != m:
            raise ValueError(f"stage numbering broken at {m}")
        if not 0 < state.epsilon < 0.25:
            raise ValueError(f"stage {m} tolerance out of range")
        prev: tuple[float, ...] = states[m - 1].relator_lengths if m else ()
        pool = _multiset_difference(state.relator_lengths, prev)
        if sorted(pool) != sorted(state.new_lengths):
            raise ValueError(f"stage {m} block does not extend the previous stage")
        if m:
            t = state.oracle_t
            if t is None or state.scale < state.gap_factor * t:
                raise ValueError(
                    f"stage {m} scale {state.scale} is under the gap bound")
            if any(not t < x < state.scale for x in state.new_lengths):
                raise ValueError(f"stage {m} block leaves the interval")
        bound = _conditional_bound(lengths, state.relator_lengths)
        if state.conditional_injectivity_bound != bound:
            raise ValueError(f"stage {m} conditional bound mismatch")


@dataclass(frozen=True)
class GraphSchedule:
    """Schedule over a graph sequence with the selected subsequence."""

    states: tuple[ScheduleState, ...]
    selected: tuple[int, ...]
    shortfall: str | None


def schedule_from_graphs(graphs: Sequence[LabelledGraph],
                         oracle: Callable[[float, float], tuple[float, float]],
                         eps0: float,
                         gap: float = _GAP_DEFAULT,
                         cycle_cap: int | None = None,
                         max_stages: int = 32) -> GraphSchedule:
    """Girth-driven schedule: stage n adds the first graph beating gap * t.

    Stage 0 reads every cycle of the first graph; its longest cycle is the
    seed scale.  Later stages call the oracle at the longest accumulated
    relator and scan the remaining graphs in order for girth > gap * t.
    Exhausting the window is not an error: the schedule is returned with an
    explicit shortfall note.
    """
    if not graphs:
        raise ValueError("no graphs supplied")
    if not 0 < eps0 < 0.25:
        raise ValueError(f"seed tolerance must lie in (0, 1/4), got {eps0}")
    if gap <= 1:
        raise ValueError(f"gap factor must exceed 1, got {gap}")

    def cycle_lengths(g: LabelledGraph) -> list[float]:
        cap = cycle_cap if cycle_cap is not None else max(len(g.edges), 1)
        return [float(len(w)) for w in relators_from_graph(g, cap)]

    first = cycle_lengths(graphs[0])
    if not first:
        raise ValueError("the first graph is acyclic; no seed relators")
    taken = sorted(first)
    scale = max(first)
    eps = float(eps0)
    states = [ScheduleState(
        stage=0, relator_lengths=tuple(taken), scale=scale, epsilon=eps,
        oracle_t=None, oracle_eps_prime=None, gap_factor=float(gap),
        new_lengths=tuple(sorted(first)), conditional_injectivity_bound=None)]
    selected = [0]
    shortfall = None
    cursor = 1
    for stage in range(1, max_stages + 1):
        if cursor >= len(graphs):
            break
        t, eps_prime = oracle(max(taken), eps)
        if not 0 < eps_prime < 0.25:
            raise ValueError(
                f"oracle tolerance {eps_prime} leaves (0, 1/4) at stage {stage}")
        pick = None
        for idx in range(cursor, len(graphs)):
            girth = graphs[idx].girth()
            if girth is not None and girth > gap * t:
                pick = idx
                break
        if pick is None:
            shortfall = (f"no graph from index {cursor} on has girth above "
                         f"{gap * t} (stage {stage})")
            break
        block = cycle_lengths(graphs[pick])
        taken = sorted(taken + block)
        eps = float(eps_prime)
        scale = max(taken)
        selected.append(pick)
        states.append(ScheduleState(
            stage=stage, relator_lengths=tuple(taken), scale=scale,
            epsilon=eps, oracle_t=float(t), oracle_eps_prime=float(eps_prime),
            gap_factor=float(gap), new_lengths=tuple(sorted(block)),
            conditional_injectivity_bound=None))
        cursor = pick + 1
    return GraphSchedule(tuple(states), tuple(selected), shortfall)


# -- lacunarity over a window --------------------------------------------------------------


@dataclass(frozen=True)
class LacunarityVerdict:
    """Window evidence for delta_m = o(r_m) plus profile sparsity gaps."""

    ratios: tuple[float, ...]
    sparsity_gaps: tuple[float, ...]
    verdict: str
    note: str = field(default="window evidence only; asymptotics are not decided "
                              "by finitely many stages")


def lacunarity_check(scales: Sequence[float], deltas: Sequence[float],
                     profile: Sequence[float] = ()) -> LacunarityVerdict:
    """Ratios delta_m / r_m over the window, with a monotone-decay verdict."""
    if len(scales) != len(deltas):
        raise ValueError(
            f"{len(deltas)} delta estimates for {len(scales)} stages")
    if any(r <= 0 for r in scales):
        raise ValueError("stage scales must be positive")
    if any(d < 0 for d in deltas):
        raise ValueError("delta estimates must be nonnegative")
    ratios = tuple(d / r for d, r in zip(deltas, scales))
    gaps = tuple(b / a for a, b in zip(profile, list(profile)[1:])) if profile else ()
    if len(ratios) < 2:
        verdict = "insufficient data"
    elif all(b < a for a, b in zip(ratios, ratios[1:])) and ratios[-1] < ratios[0]:
        verdict = "ratios decreasing on window"
    else:
        verdict = "ratios not decreasing on window"
    return LacunarityVerdict(ratios=ratios, sparsity_gaps=gaps, verdict=verdict)
