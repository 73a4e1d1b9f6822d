import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from coarsekit.bandops import (
    BandOperator,
    GroupRingElement,
    NormConvergenceError,
    add_scale,
    block2x2,
    from_band_operator,
    multiply,
    operator_from_text,
    operator_norm,
    operator_to_text,
    propagation_of,
    to_band_operator,
)
from coarsekit.groups import FreeGroup, MarkedGroup, cyclic_group
from coarsekit.spaces import BallSpace, CayleySpace, FiniteSpace

from oracles import brute_operator_norm, convolve, star


def c12_space() -> CayleySpace:
    g = cyclic_group(12)
    return CayleySpace(MarkedGroup(g, [1, 11]))


def adjacency_element(space: CayleySpace) -> GroupRingElement:
    marking = space.marking
    return GroupRingElement(marking, {g: 1.0 for g in marking.generators})


# -- group ring ----------------------------------------------------------------


def test_group_ring_drops_zeros_and_measures_support():
    g = cyclic_group(12)
    marking = MarkedGroup(g, [1, 11])
    a = GroupRingElement(marking, {0: 2.0, 3: 0.0, 5: 1.0})
    assert set(a.coeffs) == {0, 5}
    assert a.support_radius == 5


def test_group_ring_convolution_matches_oracle():
    g = cyclic_group(12)
    marking = MarkedGroup(g, [1, 11])
    a = GroupRingElement(marking, {1: 1.0, 11: 2.0})
    b = GroupRingElement(marking, {0: 1.0, 2: -1.0})
    got = a.mul(b).coeffs
    want = convolve(a.coeffs, b.coeffs, lambda x, y: (x + y) % 12)
    assert set(got) == {k for k, v in want.items() if v != 0}
    for k, v in got.items():
        assert got[k] == pytest.approx(want[k])


def test_group_ring_star_matches_oracle():
    g = cyclic_group(12)
    marking = MarkedGroup(g, [1, 11])
    a = GroupRingElement(marking, {1: 1 + 2j, 3: -1j})
    want = star({k: complex(v) for k, v in a.coeffs.items()}, lambda x: (-x) % 12)
    assert a.star().coeffs == want


def test_free_group_ring_support_radius_uses_word_length():
    free = FreeGroup(2)
    a = GroupRingElement(free, {(1, 2): 1.0, (-1,): 3.0})
    assert a.support_radius == 2


def test_free_group_ring_rejects_unreduced_words():
    free = FreeGroup(2)
    with pytest.raises(ValueError):
        GroupRingElement(free, {(1, -1, 2): 1.0})


# -- conversion to band operators ------------------------------------------------


def test_adjacency_operator_on_c12_propagation_and_norm():
    space = c12_space()
    t = to_band_operator(adjacency_element(space), space)
    assert propagation_of(t) == 1
    # adjacency of a cycle: top eigenvalue 2cos(0) = 2
    assert operator_norm(t) == pytest.approx(2.0, abs=1e-9)
    eig = max(abs(np.linalg.eigvalsh(t.entries.real)))
    assert operator_norm(t) == pytest.approx(eig, abs=1e-9)


def test_adjacency_squared_has_propagation_two_and_expected_entries():
    space = c12_space()
    t = to_band_operator(adjacency_element(space), space)
    t2 = multiply(t, t)
    assert propagation_of(t2) == 2
    assert t2.entries[0, 0] == pytest.approx(2.0)
    assert t2.entries[0, 2] == pytest.approx(1.0)
    assert t2.entries[0, 10] == pytest.approx(1.0)
    assert t2.entries[0, 1] == pytest.approx(0.0)


def test_delta_identity_maps_to_identity_matrix():
    space = c12_space()
    a = GroupRingElement.delta(space.marking, 0)
    t = to_band_operator(a, space)
    assert propagation_of(t) == 0
    assert np.allclose(t.entries, np.eye(12))
    assert operator_norm(t) == pytest.approx(1.0, abs=1e-9)


def test_support_exceeding_diameter_is_rejected():
    free = FreeGroup(1)
    ball = BallSpace(free, 3)  # diameter 6
    a = GroupRingElement(free, {(1,) * 7: 1.0})
    with pytest.raises(ValueError, match="exceeds space diameter"):
        to_band_operator(a, ball)


def test_marking_mismatch_is_rejected():
    space = c12_space()
    other = MarkedGroup(cyclic_group(10), [1, 9])
    a = GroupRingElement(other, {1: 1.0})
    with pytest.raises(ValueError, match="does not match"):
        to_band_operator(a, space)


def test_conversion_roundtrip_recovers_coefficients():
    space = c12_space()
    a = GroupRingElement(space.marking, {0: 0.5, 1: 1 - 1j, 7: 2.0})
    back = from_band_operator(to_band_operator(a, space))
    assert back.close_to(a)


def test_conversion_is_multiplicative_on_finite_groups():
    space = c12_space()
    rng = np.random.default_rng(7)
    for _ in range(20):
        ga = {int(g): complex(*rng.standard_normal(2)) for g in rng.integers(0, 12, 3)}
        gb = {int(g): complex(*rng.standard_normal(2)) for g in rng.integers(0, 12, 3)}
        a = GroupRingElement(space.marking, ga)
        b = GroupRingElement(space.marking, gb)
        lhs = to_band_operator(a.mul(b), space).entries
        rhs = multiply(to_band_operator(a, space), to_band_operator(b, space)).entries
        assert np.max(np.abs(lhs - rhs)) <= 1e-12


def test_conversion_on_free_ball_uses_word_translation():
    free = FreeGroup(2)
    ball = BallSpace(free, 2)
    a = GroupRingElement(free, {(1,): 1.0})
    t = to_band_operator(a, ball)
    e = ball.word_index[()]
    y = ball.word_index[(1,)]
    assert t.entries[e, y] == 1.0
    # deep points whose translate leaves the ball get a zero row entry
    far = ball.word_index[(1, 1)]
    assert (t.entries[far] == 0).all()
    assert propagation_of(t) == 1


def test_equivariance_via_right_translations():
    space = c12_space()
    a = GroupRingElement(space.marking, {1: 1.0, 11: -2.0, 3: 1j})
    t = to_band_operator(a, space).entries
    group = space.marking.group
    for h in (1, 5, 7):
        perm = np.zeros((12, 12))
        for x in range(12):
            perm[x, group.mul_index(x, h)] = 1.0
        assert np.allclose(t @ perm, perm @ t)


# -- algebra and propagation ------------------------------------------------------


def test_propagation_is_recomputed_tight_after_cancellation():
    space = c12_space()
    a = to_band_operator(GroupRingElement(space.marking, {3: 1.0, 1: 1.0}), space)
    b = to_band_operator(GroupRingElement(space.marking, {3: 1.0}), space)
    diff = add_scale(1.0, a, -1.0, b)
    assert propagation_of(a) == 3
    assert propagation_of(diff) == 1


@settings(max_examples=40, deadline=None)
@given(st.data())
def test_propagation_subadditive_under_product(data):
    space = c12_space()
    rng = np.random.default_rng(data.draw(st.integers(0, 10_000)))
    def rand_op():
        coeffs = {int(g): float(rng.standard_normal())
                  for g in rng.integers(0, 12, rng.integers(1, 4))}
        return to_band_operator(GroupRingElement(space.marking, coeffs), space)
    s, t = rand_op(), rand_op()
    prod = multiply(s, t)
    assert propagation_of(prod) <= min(
        propagation_of(s) + propagation_of(t), space.diameter())
    assert propagation_of(s.adjoint()) == propagation_of(s)
    both = add_scale(1.0, s, 1.0, t)
    assert propagation_of(both) <= max(propagation_of(s), propagation_of(t))


def test_adjoint_conjugates_entries():
    space = c12_space()
    t = to_band_operator(GroupRingElement(space.marking, {1: 1 + 1j}), space)
    assert np.allclose(t.adjoint().entries, t.entries.conj().T)


def test_multiply_rejects_mismatched_spaces():
    sa = FiniteSpace.cycle(6)
    sb = FiniteSpace.cycle(8)
    with pytest.raises(ValueError, match="different spaces"):
        multiply(BandOperator.identity(sa), BandOperator.identity(sb))


# -- multiplicity ------------------------------------------------------------------


def test_amplified_identity_keeps_norm_and_propagation():
    space = FiniteSpace.cycle(8)
    t = BandOperator.identity(space)
    big = t.amplify(2)
    assert big.multiplicity == 3
    assert big.entries.shape == (24, 24)
    assert propagation_of(big) == 0
    assert operator_norm(big) == pytest.approx(1.0, abs=1e-9)


def test_block2x2_propagation_is_blockwise():
    space = c12_space()
    t = to_band_operator(adjacency_element(space), space)
    z = BandOperator.zero(space)
    i = BandOperator.identity(space)
    big = block2x2(t, z, z, i)
    assert big.multiplicity == 2
    assert propagation_of(big) == 1
    assert operator_norm(big) == pytest.approx(2.0, abs=1e-9)


def test_multiplicity_mismatch_rejected():
    space = FiniteSpace.cycle(6)
    with pytest.raises(ValueError, match="multiplicity"):
        multiply(BandOperator.identity(space, 2), BandOperator.identity(space, 1))


# -- operator norm ------------------------------------------------------------------


def test_operator_norm_matches_brute_oracle_on_random_matrices():
    rng = np.random.default_rng(42)
    space = FiniteSpace.cycle(10)
    for _ in range(25):
        m = rng.standard_normal((10, 10)) + 1j * rng.standard_normal((10, 10))
        got = operator_norm(BandOperator(space, m))
        assert got == pytest.approx(brute_operator_norm(m), abs=1e-8)


def test_operator_norm_zero_matrix():
    space = FiniteSpace.cycle(5)
    assert operator_norm(BandOperator.zero(space)) == 0.0


def test_operator_norm_rejects_bad_tolerance():
    space = FiniteSpace.cycle(5)
    t = BandOperator.identity(space)
    with pytest.raises(ValueError, match="tolerance"):
        operator_norm(t, tol=1e-3)
    with pytest.raises(ValueError, match="tolerance"):
        operator_norm(t, tol=0.0)


def test_operator_norm_nonconvergence_reports_residual():
    space = FiniteSpace.cycle(40)
    adj = np.zeros((40, 40), dtype=complex)
    for k in range(40):
        adj[k, (k + 1) % 40] = adj[k, (k - 1) % 40] = 1.0
    with pytest.raises(NormConvergenceError) as err:
        operator_norm(BandOperator(space, adj), max_iter=3)
    assert err.value.residual >= 0.0


def test_operator_norm_degenerate_top_singular_value():
    # two equal top singular values: power method must still find the value
    space = FiniteSpace.path(4)
    m = np.diag([2.0, 2.0, 1.0, 0.5]).astype(complex)
    assert operator_norm(BandOperator(space, m)) == pytest.approx(2.0, abs=1e-9)


# -- serialization -------------------------------------------------------------------


def test_operator_text_roundtrip():
    space = c12_space()
    t = to_band_operator(GroupRingElement(space.marking, {1: 1.5 - 0.25j, 4: 2.0}), space)
    text = operator_to_text(t)
    assert text.splitlines()[0].startswith("# space")
    back = operator_from_text(text, space)
    assert np.array_equal(back.entries, t.entries)
    assert back.propagation == t.propagation
    assert back.multiplicity == t.multiplicity


def test_operator_text_rejects_wrong_space():
    space = c12_space()
    t = BandOperator.identity(space)
    text = operator_to_text(t)
    # a 12-cycle built directly is the *same* metric space, so it must load
    assert operator_from_text(text, FiniteSpace.cycle(12)) is not None
    with pytest.raises(ValueError, match="serialized for space"):
        operator_from_text(text, FiniteSpace.cycle(10))


def test_operator_text_rejects_tampered_propagation():
    space = c12_space()
    t = to_band_operator(adjacency_element(space), space)
    text = operator_to_text(t).replace("propagation 1", "propagation 3")
    with pytest.raises(ValueError, match="propagation"):
        operator_from_text(text, space)
