import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from oracles import prox_oracle, random_instance
from structdl.errors import InvalidArgumentError
from structdl.groups import make_groups
from structdl.prox import (ProxThresholds, prox_composite_elem, prox_composite_row,
                           prox_elementwise_l1, prox_group_frobenius, prox_row_l2)

GS = make_groups([2, 3, 1])
finite = st.floats(-10, 10, allow_nan=False, allow_infinity=False)
mats = arrays(float, (6, 3), elements=finite)
kappas = st.floats(0, 5, allow_nan=False)


def all_ops(kg, ki, per_column=False):
    return {
        "row": lambda V: prox_row_l2(V, ki),
        "elem": lambda V: prox_elementwise_l1(V, ki),
        "group": lambda V: prox_group_frobenius(V, GS, kg, per_column),
        "composite_row": lambda V: prox_composite_row(V, GS, kg, ki, per_column),
        "composite_elem": lambda V: prox_composite_elem(V, GS, kg, ki, per_column),
    }


def test_row_closed_form():
    np.testing.assert_allclose(prox_row_l2(np.array([[3.0, 4.0]]), 2.5), [[1.5, 2.0]])
    V = np.array([[0.3, 0.4], [3.0, 0.0]])
    out = prox_row_l2(V, 0.5)
    assert np.all(out[0] == 0.0)
    np.testing.assert_allclose(out[1], [2.5, 0.0])


def test_elementwise_closed_form():
    assert prox_elementwise_l1(np.array([0.5]), 0.7)[0] == 0.0
    assert prox_elementwise_l1(np.array([-2.0]), 0.5)[0] == -1.5
    np.testing.assert_array_equal(prox_elementwise_l1(np.zeros(3), 0.1), np.zeros(3))


def test_group_closed_form():
    gs = make_groups([2, 2])
    V = np.array([[np.sqrt(2.0)], [np.sqrt(2.0)], [0.0], [0.0]])
    out = prox_group_frobenius(V, gs, 1.0)
    np.testing.assert_allclose(out[:2], V[:2] / 2)
    assert np.all(out[2:] == 0.0)
    assert np.all(np.isfinite(out))


def test_group_row_mismatch():
    with pytest.raises(InvalidArgumentError):
        prox_group_frobenius(np.ones((5, 2)), GS, 0.1)


def test_negative_threshold():
    with pytest.raises(InvalidArgumentError):
        prox_row_l2(np.ones((2, 2)), -0.1)
    with pytest.raises(InvalidArgumentError):
        prox_elementwise_l1(np.ones(2), -1.0)


def test_composites_identity_at_zero(rng):
    V = rng.standard_normal((6, 4))
    np.testing.assert_array_equal(prox_composite_row(V, GS, 0.0, 0.0), V)
    np.testing.assert_array_equal(prox_composite_elem(V, GS, 0.0, 0.0), V)


def test_composite_row_kills_small_group(rng):
    V = rng.standard_normal((6, 4))
    V[2:5] *= 1e-3
    out = prox_composite_row(V, GS, 0.05, 0.05)
    assert np.all(out[2:5] == 0.0)


def test_composite_elem_single_group_huge():
    gs = make_groups([4])
    out = prox_composite_elem(np.arange(8.0).reshape(4, 2), gs, 1e6, 0.1)
    assert np.all(out == 0.0)


def test_vector_input_keeps_shape(rng):
    v = rng.standard_normal(6)
    assert prox_group_frobenius(v, GS, 0.3).shape == (6,)
    assert prox_composite_row(v, GS, 0.3, 0.1).shape == (6,)
    assert prox_row_l2(v, 0.3).shape == (6,)


def test_thresholds_mapping():
    k = ProxThresholds.from_weights(lam_row=1.0, lam_elem=0.2, lam_group_a=0.3,
                                    lam_group_b=0.4, mu=2.0)
    assert (k.group_a, k.row, k.group_b, k.elem) == (0.15, 0.5, 0.2, 0.1)
    with pytest.raises(InvalidArgumentError):
        ProxThresholds.from_weights(1, 1, 1, 1, 0.0)
    with pytest.raises(InvalidArgumentError):
        ProxThresholds(-1.0, 0, 0, 0)


@pytest.mark.parametrize("kind", ["row", "elem", "group", "composite_row", "composite_elem"])
def test_matches_numerical_minimization(kind):
    rng = np.random.default_rng(7)
    for _ in range(15):
        V, gs = random_instance(rng)
        kg, ki = rng.uniform(0, 1.5, 2)
        ours = {
            "row": lambda: prox_row_l2(V, ki),
            "elem": lambda: prox_elementwise_l1(V, ki),
            "group": lambda: prox_group_frobenius(V, gs, kg),
            "composite_row": lambda: prox_composite_row(V, gs, kg, ki),
            "composite_elem": lambda: prox_composite_elem(V, gs, kg, ki),
        }[kind]()
        ref = prox_oracle(kind, V, gs, kg, ki)
        assert np.linalg.norm(ours - ref) <= 1e-6


@pytest.mark.parametrize("kind", ["group", "composite_row", "composite_elem"])
def test_per_column_matches_numerical_minimization(kind):
    rng = np.random.default_rng(8)
    for _ in range(10):
        V, gs = random_instance(rng)
        kg, ki = rng.uniform(0, 1.5, 2)
        fn = {"group": lambda: prox_group_frobenius(V, gs, kg, True),
              "composite_row": lambda: prox_composite_row(V, gs, kg, ki, True),
              "composite_elem": lambda: prox_composite_elem(V, gs, kg, ki, True)}[kind]
        assert np.linalg.norm(fn() - prox_oracle(kind, V, gs, kg, ki, per_column=True)) <= 1e-6


def test_per_column_equals_columnwise(rng):
    V = rng.standard_normal((6, 5))
    for fn in (lambda M: prox_composite_row(M, GS, 0.4, 0.3, True),
               lambda M: prox_composite_elem(M, GS, 0.4, 0.3, True),
               lambda M: prox_group_frobenius(M, GS, 0.4, True)):
        joint = fn(V)
        for i in range(V.shape[1]):
            np.testing.assert_allclose(joint[:, i], fn(V[:, i:i + 1])[:, 0], atol=1e-15)


@settings(max_examples=60, deadline=None)
@given(mats, mats, kappas, kappas)
def test_nonexpansive(V1, V2, kg, ki):
    for op in all_ops(kg, ki).values():
        assert np.linalg.norm(op(V1) - op(V2)) <= np.linalg.norm(V1 - V2) + 1e-9


@settings(max_examples=60, deadline=None)
@given(mats, kappas, kappas)
def test_shrinks(V, kg, ki):
    for op in list(all_ops(kg, ki).values()) + list(all_ops(kg, ki, True).values()):
        assert np.linalg.norm(op(V)) <= np.linalg.norm(V) + 1e-12


@settings(max_examples=60, deadline=None)
@given(mats)
def test_identity_at_zero_threshold(V):
    for op in all_ops(0.0, 0.0).values():
        np.testing.assert_array_equal(op(V), V)


@settings(max_examples=60, deadline=None)
@given(mats, kappas, st.floats(0, 3, allow_nan=False))
def test_support_nesting(V, k, extra):
    for name in ("row", "elem", "group"):
        lo = all_ops(k, k)[name](V)
        hi = all_ops(k + extra, k + extra)[name](V)
        assert np.all(hi[lo == 0] == 0)
