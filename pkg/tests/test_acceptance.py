"""End-to-end acceptance checks: one test per shipped guarantee.

Each test exercises a complete workflow at its published tolerance; the
guarantees that carry a wall-clock budget assert the elapsed time as well.
Run with ``pytest -v tests/test_acceptance.py`` to get one pass/fail line
per guarantee.
"""

import itertools
import json
import time
from collections import Counter
from fractions import Fraction

import numpy as np
import pytest

from coarsekit import cli
from coarsekit.bandops import BandOperator, GroupRingElement, to_band_operator
from coarsekit.coverings import injectivity_radius
from coarsekit.groups import FreeGroup
from coarsekit.lifting import (
    LiftWindow,
    local_multiplicativity_check,
    pushforward_group_ring,
)
from coarsekit.onl import (
    ControlFunction,
    amplify_constant,
    lacunary_control_radius,
    localization_search,
    onl_constant_floor,
)
from coarsekit.quantk import (
    LocalisationPath,
    PartitionOfUnity,
    index_form,
    path_lift_report,
    smooth_cycle,
)
from coarsekit.smallcancel import (
    LabelledGraph,
    schedule_from_graphs,
    schedule_general,
    verify_schedule,
)
from coarsekit.sobolev import lift_isometry_check
from coarsekit.spaces import Cover, FiniteSpace, cover_multiplicity, greedy_color_cover
from oracles import brute_operator_norm, brute_set_distance
from test_coverings import brute_injectivity_radius, z_mod_cover


def _random_free_element(rng, radius):
    free = FreeGroup(1)
    coeffs = {w: complex(rng.standard_normal(), rng.standard_normal())
              for w in free.ball_words(radius)}
    return GroupRingElement(free, coeffs)


def _ring_residual(lhs, rhs):
    keys = set(lhs.coeffs) | set(rhs.coeffs)
    return max((abs(lhs.coeffs.get(g, 0j) - rhs.coeffs.get(g, 0j)) for g in keys),
               default=0.0)


def test_c01_lift_multiplicativity_inside_window_and_witness_outside():
    """500 in-window pairs are exact to 1e-12; 100 violating pairs witness; <10 s."""
    rng = np.random.default_rng(20260815)
    t0 = time.monotonic()
    checked = 0
    for n in (8, 12, 16, 24):
        cover = z_mod_cover(n)
        inj = cover.injectivity_radius
        window = LiftWindow(cover, inj)
        for _ in range(125):
            r1 = int(rng.integers(0, inj))
            r2 = int(rng.integers(0, inj - r1))
            a = _random_free_element(rng, r1)
            b = _random_free_element(rng, r2)
            pa = pushforward_group_ring(a, cover)
            pb = pushforward_group_ring(b, cover)
            ring_gap = _ring_residual(pushforward_group_ring(a.mul(b), cover),
                                      pa.mul(pb))
            assert ring_gap <= 1e-12
            report = local_multiplicativity_check(
                to_band_operator(pa, cover.target),
                to_band_operator(pb, cover.target),
                window)
            assert report.admissible
            assert report.equal
            assert report.max_discrepancy <= 1e-12
            checked += 1
    assert checked == 500
    witnessed = 0
    for n in (8, 12, 16, 24):
        cover = z_mod_cover(n)
        inj = cover.injectivity_radius
        window = LiftWindow(cover, inj)
        for _ in range(25):
            a = _random_free_element(rng, inj)
            b = _random_free_element(rng, inj)
            report = local_multiplicativity_check(
                to_band_operator(pushforward_group_ring(a, cover), cover.target),
                to_band_operator(pushforward_group_ring(b, cover), cover.target),
                window)
            assert not report.admissible
            assert report.witness is not None
            witnessed += 1
    assert witnessed == 100
    assert time.monotonic() - t0 < 10.0


def test_c02_sobolev_lift_isometry_inside_window():
    """1000 seeded elements per covering family keep residual <= 1e-12; <5 s."""
    rng = np.random.default_rng(4117)
    t0 = time.monotonic()
    for n in (8, 12, 16):
        cover = z_mod_cover(n)
        window = LiftWindow(cover, cover.injectivity_radius)
        marking = cover.target.marking
        index = marking.group.index
        for _ in range(1000):
            w = int(rng.integers(0, window.R + 1))
            support = [g for g in marking.group.elements
                       if marking.lengths[index[g]] <= w]
            coeffs = {g: complex(rng.standard_normal(), rng.standard_normal())
                      for g in support}
            a = GroupRingElement(marking, coeffs)
            s = float(rng.choice([0.0, 0.5, 1.0, 2.0]))
            check = lift_isometry_check(a, window, s)
            assert check.equal
            assert check.residual <= 1e-12
    assert time.monotonic() - t0 < 5.0


def _random_cycle_cover(rng):
    n = int(rng.integers(12, 37))
    r = int(rng.integers(1, 3))
    length = 2 * r + int(rng.integers(2, 5))
    step = length - 1
    offset = int(rng.integers(0, n))
    space = FiniteSpace.cycle(n)
    members = [frozenset((offset + j * step + t) % n for t in range(length))
               for j in range(-(-n // step))]
    return space, Cover(members), r


def _random_torus_cover(rng):
    a = int(rng.integers(4, 8))
    b = int(rng.integers(4, 8))
    height = int(rng.integers(2, 4))
    offset = int(rng.integers(0, a))
    edges = []
    for i in range(a):
        for j in range(b):
            v = i * b + j
            edges.append((v, ((i + 1) % a) * b + j))
            edges.append((v, i * b + (j + 1) % b))
    space = FiniteSpace.from_edges(a * b, edges)
    members = [frozenset(((offset + q * height + t) % a) * b + j
                         for t in range(height) for j in range(b))
               for q in range(-(-a // height))]
    return space, Cover(members), 1


def test_c03_coloring_bound_and_separation():
    """200 random covers with multiplicity k <= 5 use <= 2(k+1) colors; <30 s."""
    rng = np.random.default_rng(909)
    t0 = time.monotonic()
    builders = [_random_cycle_cover] * 120 + [_random_torus_cover] * 80
    for build in builders:
        space, cover, r = build(rng)
        cover.validate(space)
        k = cover_multiplicity(space, cover, 2 * r)
        assert k <= 5
        coloring = greedy_color_cover(space, cover, r, k)
        assert coloring.color_count <= 2 * (k + 1)
        for p, q in itertools.combinations(coloring.pieces, 2):
            if p.color == q.color:
                assert brute_set_distance(space.dist, p.points, q.points) > r
    assert time.monotonic() - t0 < 30.0


def test_c04_index_form_identity_on_exact_unitaries():
    """100 permutation-times-phase unitaries give I(F) = diag(1, 0) to 1e-10."""
    rng = np.random.default_rng(8128)
    for _ in range(100):
        n = int(rng.integers(3, 65))
        space = FiniteSpace.cycle(n)
        perm = rng.permutation(n)
        phases = np.exp(2j * np.pi * rng.random(n))
        entries = np.zeros((n, n), dtype=np.complex128)
        entries[np.arange(n), perm] = phases
        f = BandOperator(space, entries)
        formed = index_form(f)
        expected = np.zeros((2 * n, 2 * n), dtype=np.complex128)
        expected[:n, :n] = np.eye(n)
        assert float(np.max(np.abs(formed.entries - expected))) <= 1e-10
        smoothed = smooth_cycle(f, PartitionOfUnity.trivial(space))
        assert np.array_equal(smoothed.entries, f.entries)


def test_c05_injectivity_radius_matches_exhaustive_oracle():
    """Folding the line over n points has injectivity radius n//4 for n=4..40."""
    for n in range(4, 41):
        cover = z_mod_cover(n)
        assert injectivity_radius(cover) == brute_injectivity_radius(cover) == n // 4
    assert injectivity_radius(z_mod_cover(12)) == 3


def test_c06_localisation_constant_arithmetic():
    """Constant floor, verbatim amplification, control radii, divergence; <1 s."""
    t0 = time.monotonic()
    for degree in range(1, 13):
        assert onl_constant_floor(degree) == Fraction(1, 2 * degree)
    f = ControlFunction.from_pairs([(0, 1.0), (2, 5.0), (5, 9.0)])
    n, g = amplify_constant(0.5, f, 0.25, mode="verbatim")
    assert n == 2
    for k in range(0, 12):
        assert g.evaluate(k) == pytest.approx(k + f.evaluate(2 * k))
    assert lacunary_control_radius([2.0], [400.0]).radii[0] == 11
    sweep = lacunary_control_radius([float(m) for m in range(1, 10001)],
                                    [float(m * m) for m in range(1, 10001)])
    assert sweep.verdict == "increasing"
    assert time.monotonic() - t0 < 1.0


def test_c07_localization_ratio_monotone_on_cycle():
    """On the 100-cycle adjacency the ratio is nondecreasing and tops out at 1."""
    space = FiniteSpace.cycle(100)
    entries = space.adjacency().astype(np.complex128)
    op = BandOperator(space, entries)
    ratios = [localization_search(op, d)[1] for d in range(0, 51)]
    for a, b in zip(ratios, ratios[1:]):
        assert b >= a - 1e-12
    assert ratios[-1] >= 1.0 - 1e-9
    column_oracle = max(float(np.linalg.norm(entries[:, j]))
                        for j in range(space.n)) / brute_operator_norm(entries)
    assert abs(ratios[0] - column_oracle) <= 1e-9
    assert abs(ratios[0] - np.sqrt(2.0) / 2.0) <= 1e-9


def test_c08_path_lift_commutes_with_evaluation():
    """Lifting then evaluating equals evaluating then lifting on 100 paths."""
    rng = np.random.default_rng(55)
    done = 0
    for n in (8, 12, 16):
        cover = z_mod_cover(n)
        window = LiftWindow(cover, cover.injectivity_radius)
        target = cover.target
        for _ in range(34 if n == 8 else 33):
            k = int(rng.integers(1, 5))
            times = np.concatenate([[0.0], np.cumsum(rng.uniform(0.1, 1.0, k - 1))])
            props = sorted((int(p) for p in rng.integers(0, window.R + 1, k)),
                           reverse=True)
            ops = []
            for p in props:
                mask = target.dist <= p
                raw = rng.standard_normal((target.n, target.n)) \
                    + 1j * rng.standard_normal((target.n, target.n))
                ops.append(BandOperator(target, raw * mask))
            path = LocalisationPath(times, ops)
            _, report = path_lift_report(path, window)
            assert report.commuting_residual == 0.0
            done += 1
    assert done == 100


def test_c09_schedule_invariants_and_girth_selection():
    """Doubling streams keep the stage invariants; graph stages raise the girth."""
    lengths = [2.0 ** k for k in range(1, 21)]
    states = schedule_general(lengths, lambda r, e: (2.0 * r, e / 2.0),
                              r0=3.0, eps0=0.2)
    verify_schedule(states, lengths)
    for state in states:
        assert 0.0 < state.epsilon < 0.25
    for prev, cur in zip(states, states[1:]):
        assert cur.oracle_t is not None
        assert cur.scale >= 4.0 * cur.oracle_t
        assert Counter(prev.relator_lengths) <= Counter(cur.relator_lengths)
    graphs = []
    for k in range(2, 11):
        m = 2 ** k
        graphs.append(LabelledGraph(m, [(i, (i + 1) % m, "a") for i in range(m)]))
    schedule = schedule_from_graphs(graphs, lambda r, e: (2.0 * r, e / 2.0),
                                    eps0=0.2)
    assert schedule.shortfall is None
    girths = [graphs[i].girth() for i in schedule.selected]
    assert len(girths) >= 2
    assert all(b > a for a, b in zip(girths, girths[1:]))


@pytest.mark.parametrize("name,args", [
    ("lift_mult", ["--seed", "7", "lift", "mult",
                   "--target", "cyclic:12", "--pairs", "3"]),
    ("onl_certificate", ["--seed", "5", "onl", "certificate", "--space",
                         "cycle:16", "--r", "1", "--c", "0.5", "--size", "3"]),
    ("rd_estimate", ["--seed", "3", "rd", "estimate", "--space", "cayley:12",
                     "--s", "1", "--size", "4"]),
])
def test_c10_seeded_reports_are_byte_identical(tmp_path, name, args):
    """Two runs of each ensemble report with one seed emit identical bytes."""
    dirs = [tmp_path / "first", tmp_path / "second"]
    for out in dirs:
        assert cli.main(["--output-dir", str(out), *args]) == 0
    first = {p.name: p.read_bytes() for p in sorted(dirs[0].iterdir())}
    second = {p.name: p.read_bytes() for p in sorted(dirs[1].iterdir())}
    assert first.keys() == second.keys()
    assert any(n.endswith(".json") for n in first)
    for fname, blob in first.items():
        assert second[fname] == blob
    payload = json.loads(first[f"{name}.json"].decode())
    assert payload["meta"]["seed"] is not None
