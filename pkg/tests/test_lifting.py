import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from coarsekit.bandops import BandOperator, GroupRingElement, multiply, operator_norm, to_band_operator
from coarsekit.coverings import CoveringMap, quotient_covering, quotient_data
from coarsekit.groups import FreeGroup, cyclic_group
from coarsekit.lifting import (
    LiftWindow,
    canonical_preimages,
    continuity_classification,
    lift_group_ring,
    lift_operator,
    limsup_norm_profile,
    local_multiplicativity_check,
    pushforward_group_ring,
    pushforward_operator,
)
from coarsekit.spaces import BallSpace, FiniteSpace

from oracles import brute_operator_norm

FREE1 = FreeGroup(1)
BALL8 = BallSpace(FREE1, 8)


def z_mod_cover(n: int, ball: BallSpace = BALL8) -> CoveringMap:
    return quotient_covering(ball, quotient_data(ball.free, cyclic_group(n), [1]))


def oracle_lift(t: np.ndarray, cover: CoveringMap, radius: int) -> np.ndarray:
    src, pm = cover.source, cover.point_map
    inside = set(int(i) for i in cover.interior_points(radius))
    out = np.zeros((src.n, src.n), dtype=complex)
    for y in range(src.n):
        for yp in range(src.n):
            if y in inside and yp in inside and src.dist[y, yp] <= radius:
                out[y, yp] = t[pm[y], pm[yp]]
    return out


# -- window ---------------------------------------------------------------------


def test_window_accepts_up_to_injectivity_radius():
    cover = z_mod_cover(12)
    assert cover.injectivity_radius == 3
    assert LiftWindow(cover, 3).R == 3
    with pytest.raises(ValueError, match="exceeds the injectivity radius"):
        LiftWindow(cover, 4)
    with pytest.raises(ValueError, match=">= 0"):
        LiftWindow(cover, -1)


# -- operator lift ----------------------------------------------------------------


def test_identity_lifts_to_identity_through_identity_covering():
    space = FiniteSpace.cycle(12)
    cover = CoveringMap(space, space, list(range(12)))
    window = LiftWindow(cover, 2)
    lifted = lift_operator(BandOperator.identity(space), window)
    assert np.array_equal(lifted.entries, np.eye(12))


def test_identity_lifts_to_truncated_identity_on_ball_source():
    cover = z_mod_cover(12)
    window = LiftWindow(cover, 3)
    lifted = lift_operator(BandOperator.identity(cover.target), window)
    inside = set(int(i) for i in cover.interior_points(3))
    want = np.diag([1.0 if i in inside else 0.0 for i in range(BALL8.n)])
    assert np.array_equal(lifted.entries, want)


def test_adjacency_lift_matches_entrywise_oracle():
    cover = z_mod_cover(12)
    window = LiftWindow(cover, 3)
    adj = to_band_operator(
        GroupRingElement(cover.target.marking, {1: 1.0, 11: 1.0}), cover.target)
    lifted = lift_operator(adj, window)
    assert np.array_equal(lifted.entries, oracle_lift(adj.entries, cover, 3))
    assert lifted.propagation == 1
    # boundary rows beyond the interior are zeroed
    depth = BALL8.dist[BALL8.basepoint]
    for y in np.where(depth > 5)[0]:
        assert (lifted.entries[y] == 0).all()
        assert (lifted.entries[:, y] == 0).all()
    # interior rows carry the ball adjacency
    for y in np.where(depth <= 4)[0]:
        row = lifted.entries[y]
        assert sorted(np.nonzero(row)[0].tolist()) == sorted(
            int(j) for j in np.where(BALL8.dist[y] == 1)[0] if depth[j] <= 5)


def test_lift_rejects_propagation_above_window():
    cover = z_mod_cover(12)
    window = LiftWindow(cover, 3)
    wide = to_band_operator(
        GroupRingElement(cover.target.marking, {5: 1.0}), cover.target)
    with pytest.raises(ValueError, match="propagation 5 exceeds the window radius 3"):
        lift_operator(wide, window)


def test_lift_is_linear_and_adjoint_compatible():
    cover = z_mod_cover(12)
    window = LiftWindow(cover, 3)
    rng = np.random.default_rng(3)
    for _ in range(10):
        coeffs_a = {int(g) % 12: complex(*rng.standard_normal(2))
                    for g in rng.integers(-3, 4, 3)}
        coeffs_b = {int(g) % 12: complex(*rng.standard_normal(2))
                    for g in rng.integers(-3, 4, 3)}
        s = to_band_operator(GroupRingElement(cover.target.marking, coeffs_a), cover.target)
        t = to_band_operator(GroupRingElement(cover.target.marking, coeffs_b), cover.target)
        alpha, beta = complex(*rng.standard_normal(2)), complex(*rng.standard_normal(2))
        combo = BandOperator(cover.target, alpha * s.entries + beta * t.entries)
        lhs = lift_operator(combo, window).entries
        rhs = alpha * lift_operator(s, window).entries + beta * lift_operator(t, window).entries
        assert np.max(np.abs(lhs - rhs)) == 0.0
        star_lift = lift_operator(s.adjoint(), window).entries
        lift_star = lift_operator(s, window).adjoint().entries
        assert np.max(np.abs(star_lift - lift_star)) == 0.0


# -- group ring lift -----------------------------------------------------------------


def test_delta_identity_lifts_to_delta_identity():
    window = LiftWindow(z_mod_cover(12), 3)
    a = GroupRingElement(window.cover.target.marking, {0: 1.0})
    assert lift_group_ring(a, window).coeffs == {(): (1 + 0j)}


def test_delta_one_lifts_to_unique_short_preimage():
    window = LiftWindow(z_mod_cover(12), 3)
    a = GroupRingElement(window.cover.target.marking, {1: 1.0})
    assert lift_group_ring(a, window).coeffs == {(1,): (1 + 0j)}


def test_lift_group_ring_rejects_wide_support():
    window = LiftWindow(z_mod_cover(12), 3)
    a = GroupRingElement(window.cover.target.marking, {4: 1.0})
    with pytest.raises(ValueError, match="support radius 4 exceeds the window radius 3"):
        lift_group_ring(a, window)


def test_lift_preserves_support_radius_and_l2_norm():
    window = LiftWindow(z_mod_cover(16), 4)
    rng = np.random.default_rng(11)
    for _ in range(25):
        coeffs = {int(g) % 16: complex(*rng.standard_normal(2))
                  for g in rng.integers(-4, 5, 4)}
        a = GroupRingElement(window.cover.target.marking, coeffs)
        lifted = lift_group_ring(a, window)
        assert lifted.support_radius == a.support_radius
        assert lifted.l2_norm() == pytest.approx(a.l2_norm(), abs=1e-15)
        # pushforward returns the original coefficients
        back = pushforward_group_ring(lifted, window.cover)
        assert back.close_to(a)


# -- grade bijection -------------------------------------------------------------------


def test_canonical_preimages_prefer_short_words():
    cover = z_mod_cover(8)
    reps = canonical_preimages(cover)
    assert BALL8.words[reps[0]] == ()
    assert BALL8.words[reps[1]] == (1,)
    assert BALL8.words[reps[7]] == (-1,)
    # the antipode ties at depth 4; word order picks the negative side
    assert BALL8.words[reps[4]] == (-1, -1, -1, -1)


def test_pushforward_inverts_lift_on_grades():
    cover = z_mod_cover(8)
    window = LiftWindow(cover, 2)
    rng = np.random.default_rng(5)
    for _ in range(20):
        coeffs = {int(g) % 8: complex(*rng.standard_normal(2))
                  for g in rng.integers(-2, 3, 3)}
        t = to_band_operator(GroupRingElement(cover.target.marking, coeffs), cover.target)
        lifted = lift_operator(t, window)
        back = pushforward_operator(lifted, window)
        assert np.max(np.abs(back.entries - t.entries)) == 0.0
        # and lift(pushforward(lift)) == lift exactly
        again = lift_operator(back, window)
        assert np.array_equal(again.entries, lifted.entries)


def test_pushforward_requires_room_for_representatives():
    cover = z_mod_cover(12)  # representatives reach depth 6; 6 + 3 > 8
    window = LiftWindow(cover, 3)
    op = BandOperator.identity(BALL8)
    with pytest.raises(ValueError, match="no room"):
        pushforward_operator(op, window)


# -- local multiplicativity ---------------------------------------------------------


def test_multiplicativity_identity_pair():
    window = LiftWindow(z_mod_cover(12), 3)
    i = BandOperator.identity(window.cover.target)
    report = local_multiplicativity_check(i, i, window)
    assert report.admissible and report.equal
    assert report.witness is None


def test_multiplicativity_adjacency_pair_exact():
    window = LiftWindow(z_mod_cover(12), 3)
    adj = to_band_operator(
        GroupRingElement(window.cover.target.marking, {1: 1.0, 11: 1.0}),
        window.cover.target)
    report = local_multiplicativity_check(adj, adj, window)
    assert report.admissible
    assert report.equal
    assert report.max_discrepancy == 0.0
    assert len(report.region_rows) > 0


def test_multiplicativity_failure_produces_wraparound_witness():
    window = LiftWindow(z_mod_cover(12), 3)
    far = to_band_operator(
        GroupRingElement(window.cover.target.marking, {4: 1.0, 8: 1.0}),
        window.cover.target)
    report = local_multiplicativity_check(far, far, window)
    assert not report.admissible
    assert not report.equal
    assert report.witness is not None
    y, yp, lhs, rhs = report.witness
    # the squared element has 2 delta_0 on the diagonal, which survives the
    # window cut, while each clipped factor lifts to zero
    assert y == yp
    assert lhs == pytest.approx(2.0)
    assert rhs == pytest.approx(0.0)


def test_multiplicativity_matches_direct_formula():
    window = LiftWindow(z_mod_cover(12), 3)
    marking = window.cover.target.marking
    s = to_band_operator(GroupRingElement(marking, {1: 1.0, 11: 1.0}), window.cover.target)
    t = to_band_operator(GroupRingElement(marking, {2: 0.5}), window.cover.target)
    st = multiply(s, t)
    lifted_st = oracle_lift(st.entries, window.cover, 3)
    ls = oracle_lift(s.entries, window.cover, 3)
    lt = oracle_lift(t.entries, window.cover, 3)
    report = local_multiplicativity_check(s, t, window)
    rows = np.array(report.region_rows)
    assert report.admissible
    diff = np.abs(lifted_st[rows] - (ls @ lt)[rows])
    assert report.equal == (diff.max() <= 1e-12)


# -- norm profiles -------------------------------------------------------------------


def test_profile_of_delta_identity_is_all_ones():
    family = [z_mod_cover(n) for n in (8, 12, 16)]
    a = GroupRingElement(FREE1, {(): 1.0})
    profile = limsup_norm_profile(a, family)
    assert profile.term_norms == pytest.approx((1.0, 1.0, 1.0))
    assert profile.limsup_estimate == pytest.approx(1.0)
    assert profile.base_norm == pytest.approx(1.0)
    assert profile.skipped == ()


def test_profile_of_adjacency_matches_eigen_oracle():
    family = [z_mod_cover(n) for n in (8, 12, 16)]
    a = GroupRingElement(FREE1, {(1,): 1.0, (-1,): 1.0})
    profile = limsup_norm_profile(a, family)
    for n, got in zip((8, 12, 16), profile.term_norms):
        adj = np.zeros((n, n), dtype=complex)
        for k in range(n):
            adj[k, (k + 1) % n] = adj[k, (k - 1) % n] = 1.0
        assert got == pytest.approx(brute_operator_norm(adj), abs=1e-9)
        assert got == pytest.approx(2.0, abs=1e-9)
    assert profile.limsup_estimate == pytest.approx(2.0, abs=1e-9)
    # truncated base norm on the 17-point path: 2 cos(pi/18) < 2
    assert profile.base_norm == pytest.approx(2 * np.cos(np.pi / 18), abs=1e-9)
    assert profile.base_norm < 2.0
    # the finite-support witness transports exactly through every term
    assert profile.witness_ratio > 0.5
    assert all(m <= 1e-12 for m in profile.witness_matches)


def test_profile_skips_terms_that_cannot_hold_the_support():
    family = [z_mod_cover(n) for n in (4, 12, 16)]
    a = GroupRingElement(FREE1, {(1,) * 2: 1.0, (-1,) * 2: 1.0})
    profile = limsup_norm_profile(a, family)
    assert profile.skipped == (0,)  # Z/4 has injectivity radius 1
    assert profile.term_indices == (1, 2)


def test_profile_errors_when_no_term_fits():
    family = [z_mod_cover(n) for n in (4, 8)]
    a = GroupRingElement(FREE1, {(1,) * 5: 1.0})
    with pytest.raises(ValueError, match="no family term admits"):
        limsup_norm_profile(a, family)


def test_profile_rows_are_tabular():
    family = [z_mod_cover(n) for n in (8, 12)]
    a = GroupRingElement(FREE1, {(): 1.0})
    rows = limsup_norm_profile(a, family).rows()
    assert [(m, r) for m, r, *_ in rows] == [(0, 2), (1, 3)]
    for _, _, nl, nb, ratio in rows:
        assert ratio == pytest.approx(nl / nb)


# -- continuity classification ----------------------------------------------------


def test_identity_sample_is_isometric_everywhere():
    family = [z_mod_cover(n) for n in (8, 12, 16)]
    verdicts = continuity_classification(
        family, [GroupRingElement(FREE1, {(): 1.0})], tol=1e-9)
    (v,) = verdicts
    assert v.admissible
    assert v.isometric_from == 0
    assert v.continuous_from == 0


def test_adjacency_samples_isometric_over_window_up_to_truncation():
    family = [z_mod_cover(n) for n in (8, 12, 16)]
    a = GroupRingElement(FREE1, {(1,): 1.0, (-1,): 1.0})
    (v,) = continuity_classification(family, [a], tol=0.05)
    assert v.admissible
    assert v.term_norms == pytest.approx((2.0, 2.0, 2.0), abs=1e-9)
    # base norm runs slightly under 2 because the source ball is truncated
    assert v.base_norm == pytest.approx(2 * np.cos(np.pi / 18), abs=1e-9)
    assert v.isometric_from == 0
    assert "window" in v.note


def test_relaxed_verdict_uses_supplied_constant():
    family = [z_mod_cover(n) for n in (8, 12, 16)]
    a = GroupRingElement(FREE1, {(1,): 1.0, (-1,): 1.0})
    (v,) = continuity_classification(family, [a], tol=1e-9, c=0.9)
    # strict continuity fails at tol 1e-9 (2 > truncated base) but the
    # 1/c-relaxed bound holds from the first term
    assert v.continuous_from is None
    assert v.relaxed_continuous_from == 0
    with pytest.raises(ValueError, match="constant c"):
        continuity_classification(family, [a], c=1.5)


def test_stuck_family_flags_inadmissible_sample():
    family = [z_mod_cover(4)]  # injectivity radius 1
    a = GroupRingElement(FREE1, {(1, 1): 1.0})
    (v,) = continuity_classification(family, [a])
    assert not v.admissible
    assert v.isometric_from is None
    assert "no family term admits" in v.note


def test_classification_rejects_empty_inputs():
    family = [z_mod_cover(8)]
    with pytest.raises(ValueError, match="no sample"):
        continuity_classification(family, [])
    with pytest.raises(ValueError, match="family"):
        continuity_classification([], [GroupRingElement(FREE1, {(): 1.0})])


# -- lemma analogue: coefficient norms through the lift -------------------------------


@settings(max_examples=30, deadline=None)
@given(st.data())
def test_lift_preserves_coefficient_norms(data):
    window = LiftWindow(z_mod_cover(16), 4)
    marking = window.cover.target.marking
    n_terms = data.draw(st.integers(1, 4))
    coeffs = {}
    for _ in range(n_terms):
        g = data.draw(st.integers(-4, 4)) % 16
        re = data.draw(st.floats(-2, 2, allow_nan=False))
        coeffs[g] = coeffs.get(g, 0) + re
    a = GroupRingElement(marking, coeffs)
    lifted = lift_group_ring(a, window)
    assert lifted.l2_norm() == pytest.approx(a.l2_norm(), abs=1e-12)
