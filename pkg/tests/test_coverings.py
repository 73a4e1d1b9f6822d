"""Covering maps, injectivity radii, faithfulness windows, box spaces."""

import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from coarsekit.coverings import (
    CoveringMap,
    FaithfulnessReport,
    assemble_box_space,
    ball_isometry_witness,
    faithfulness_report,
    injectivity_radius,
    parse_quotient_spec,
    quotient_covering,
    quotient_data,
)
from coarsekit.groups import FreeGroup, cyclic_group, direct_product
from coarsekit.spaces import BallSpace, FiniteSpace


def z_ball(radius):
    return BallSpace(FreeGroup(1), radius)


def z_mod_cover(n, radius=None):
    if radius is None:
        radius = n // 2 + 2
    q = quotient_data(FreeGroup(1), cyclic_group(n), [1])
    return quotient_covering(z_ball(radius), q)


def brute_injectivity_radius(cover):
    """Independent oracle: exhaustive ball comparison, plain Python."""
    src, tgt, pm = cover.source, cover.target, cover.point_map
    cap = src.radius if isinstance(src, BallSpace) else src.diameter()
    base = src.basepoint
    best = 0
    for R in range(1, cap + 1):
        ok = True
        for y in range(src.n):
            if isinstance(src, BallSpace) and src.dist[base, y] > src.radius - R:
                continue
            pts = [p for p in range(src.n) if src.dist[y, p] <= R]
            imgs = [int(pm[p]) for p in pts]
            if len(set(imgs)) != len(pts):
                ok = False
                break
            for a in range(len(pts)):
                for b in range(len(pts)):
                    if src.dist[pts[a], pts[b]] != tgt.dist[imgs[a], imgs[b]]:
                        ok = False
                        break
                if not ok:
                    break
            if not ok:
                break
            target_ball = {p for p in range(tgt.n) if tgt.dist[int(pm[y]), p] <= R}
            if set(imgs) != target_ball:
                ok = False
                break
        if not ok:
            break
        best = R
    return best


# -- quotient coverings -------------------------------------------------------


def test_free_ball_cardinality():
    assert z_ball(8).n == 17
    f2 = BallSpace(FreeGroup(2), 4)
    assert f2.n == 1 + 4 * (3**4 - 1) // 2  # 161


def test_quotient_covering_z_mod_12():
    cover = z_mod_cover(12)
    assert cover.target.n == 12
    # evaluation is a homomorphism on composable ball words
    ball = cover.source
    free = ball.free
    for w1 in ball.words[:20]:
        for w2 in ball.words[:20]:
            w = free.mul(w1, w2)
            if w in ball.word_index:
                i, j = ball.word_index[w1], ball.word_index[w2]
                k = ball.word_index[w]
                expect = (cover.point_map[i] + cover.point_map[j]) % 12
                assert cover.point_map[k] == expect


def test_quotient_image_count_mismatch():
    with pytest.raises(ValueError, match="generator images"):
        quotient_data(FreeGroup(2), cyclic_group(5), [1])


def test_quotient_ball_too_small():
    q = quotient_data(FreeGroup(1), cyclic_group(30), [1])
    with pytest.raises(ValueError, match="radius"):
        quotient_covering(z_ball(3), q)


def test_parse_quotient_spec_product():
    spec = {
        "rank": 2,
        "generator_images": [[1, 0], [0, 1]],
        "group": {"type": "product", "params": {"factors": [
            {"type": "cyclic", "params": {"n": 5}},
            {"type": "cyclic", "params": {"n": 5}},
        ]}},
    }
    q = parse_quotient_spec(json.dumps(spec))
    cover = quotient_covering(BallSpace(FreeGroup(2), 4), q)
    assert cover.target.n == 25


def test_parse_quotient_spec_matrix():
    spec = {
        "rank": 2,
        "generator_images": [[[1, 1], [0, 1]], [[1, 0], [1, 1]]],
        "group": {"type": "matrix_mod_p", "params": {
            "p": 3,
            "generators": [[[1, 1], [0, 1]], [[1, 0], [1, 1]]],
        }},
    }
    q = parse_quotient_spec(json.dumps(spec))
    assert len(q.marking.group) == 24  # SL(2, Z/3)


# -- injectivity radius -------------------------------------------------------


def test_injectivity_radius_z_mod_12():
    cover = z_mod_cover(12, radius=8)
    assert injectivity_radius(cover) == 3
    # R = 4 fails with a distance witness
    witness = ball_isometry_witness(cover, 4)
    assert witness is not None
    assert witness.kind == "distance"
    assert witness.source_distance != witness.target_distance
    # the antipodal pair -4, +4 shows source distance 8 against target 4
    ball = cover.source
    u, v = ball.word_index[(-1,) * 4], ball.word_index[(1,) * 4]
    assert ball.dist[u, v] == 8
    assert cover.target.dist[cover.point_map[u], cover.point_map[v]] == 4


@pytest.mark.parametrize("n,expected", [(4, 1), (8, 2), (16, 4), (32, 8)])
def test_injectivity_radius_powers_of_two(n, expected):
    cover = z_mod_cover(n)
    assert injectivity_radius(cover) == expected


@pytest.mark.parametrize("n", list(range(4, 21)))
def test_injectivity_radius_matches_oracle(n):
    cover = z_mod_cover(n)
    r = injectivity_radius(cover)
    assert r == brute_injectivity_radius(cover)
    assert r == n // 4  # closed form for cyclic quotients of Z
    assert ball_isometry_witness(cover, r + 1) is not None
    if r >= 1:
        assert ball_isometry_witness(cover, r) is None


def test_injectivity_radius_abelianization():
    g5 = cyclic_group(5)
    q = quotient_data(FreeGroup(2), direct_product(g5, g5), [(1, 0), (0, 1)])
    cover = quotient_covering(BallSpace(FreeGroup(2), 4), q)
    assert injectivity_radius(cover) == 1
    assert brute_injectivity_radius(cover) == 1


def test_identity_covering_radius_is_maximal():
    ball = z_ball(5)
    ident = CoveringMap(ball, ball, list(range(ball.n)))
    assert injectivity_radius(ident) == 5
    space = FiniteSpace.cycle(12)
    ident2 = CoveringMap(space, space, list(range(12)))
    assert injectivity_radius(ident2) == space.diameter()


def test_non_surjective_point_map_rejected():
    with pytest.raises(ValueError, match="surjective"):
        CoveringMap(FiniteSpace.path(3), FiniteSpace.path(3), [0, 0, 1])


# -- faithfulness -------------------------------------------------------------


def test_faithfulness_increasing_family():
    family = [z_mod_cover(n) for n in (4, 8, 16, 32)]
    report = faithfulness_report(family)
    assert report.radii == (1, 2, 4, 8)
    assert report.verdict == "increasing"
    assert "window evidence" in report.note


def test_faithfulness_stuck_family():
    # the commutator has fixed length 4, so abelianizations pin the radius at 1
    family = []
    for n in (5, 7):
        gn = cyclic_group(n)
        q = quotient_data(FreeGroup(2), direct_product(gn, gn), [(1, 0), (0, 1)])
        family.append(quotient_covering(BallSpace(FreeGroup(2), 2 * (n // 2)), q))
    report = faithfulness_report(family)
    assert report.radii == (1, 1)
    assert report.verdict == "not increasing"
    for cover in family:
        assert brute_injectivity_radius(cover) == cover.injectivity_radius


def test_injectivity_radius_torus_mod_3_collapses():
    # in (Z/3)^2 the images of a and a^-1 are adjacent while the source
    # distance is 2, so even 1-balls fail isometry (see decisions ledger)
    g3 = cyclic_group(3)
    q = quotient_data(FreeGroup(2), direct_product(g3, g3), [(1, 0), (0, 1)])
    cover = quotient_covering(BallSpace(FreeGroup(2), 3), q)
    assert injectivity_radius(cover) == 0
    assert brute_injectivity_radius(cover) == 0


def test_faithfulness_single_term():
    assert faithfulness_report([z_mod_cover(8)]).verdict == "insufficient data"


def test_faithfulness_empty_family():
    with pytest.raises(ValueError, match="nonempty"):
        faithfulness_report([])


# -- box spaces ---------------------------------------------------------------


def test_box_space_two_cycles():
    box = assemble_box_space([FiniteSpace.cycle(4), FiniteSpace.cycle(8)], [0, 10])
    assert box.space.n == 12
    cross = box.space.dist[np.ix_(box.component_slice(0), box.component_slice(1))]
    assert cross.min() == 10


def test_box_space_components_isometric():
    parts = [FiniteSpace.cycle(6), FiniteSpace.path(5), FiniteSpace.cycle(4)]
    box = assemble_box_space(parts, [0, 9, 30])
    for i, part in enumerate(parts):
        idx = box.component_slice(i)
        sub = box.space.dist[np.ix_(idx, idx)]
        assert (sub == part.dist).all()


def test_box_space_scheduled_separations():
    g5 = cyclic_group(5)
    torus = direct_product(g5, g5)
    from coarsekit.spaces import build_cayley_space
    t = build_cayley_space(torus, [(1, 0), (4, 0), (0, 1), (0, 4)])
    box = assemble_box_space([t, t, t], [5, 25, 125])
    for i in range(3):
        for j in range(i + 1, 3):
            cross = box.space.dist[np.ix_(box.component_slice(i), box.component_slice(j))]
            assert cross.min() == box.separation(i, j)
            assert box.separation(i, j) == abs(box.schedule[j] - box.schedule[i])


def test_box_space_bad_schedules():
    with pytest.raises(ValueError, match="nonempty"):
        assemble_box_space([], [])
    with pytest.raises(ValueError, match="strictly increasing"):
        assemble_box_space([FiniteSpace.cycle(4), FiniteSpace.cycle(4)], [5, 5])


@given(st.lists(st.integers(3, 8), min_size=1, max_size=4), st.data())
@settings(max_examples=25, deadline=None)
def test_box_space_is_metric(sizes, data):
    gaps = data.draw(st.lists(st.integers(1, 20), min_size=len(sizes), max_size=len(sizes)))
    schedule = np.cumsum(gaps).tolist()
    comps = [FiniteSpace.cycle(n) for n in sizes]
    box = assemble_box_space(comps, schedule)  # FiniteSpace validates the metric
    assert box.space.n == sum(sizes)
