import math
from fractions import Fraction

import numpy as np
import pytest

from aftriple.matfun import LipschitzClass, PLMatrixFunction, random_lipschitz
from aftriple.paths import HALF_LEFT, HALF_RIGHT, MIDPOINT, Affine, Constant, PathList
from aftriple.system import (InductiveSystem, InvalidSystem, Stage, af_image, apply_connecting,
                             block_values, compose_stages, custom_system, intertwining_defect,
                             jiang_su_preset, reindex, toy_preset, validate_system)

DOUBLING = PathList.of((HALF_LEFT, 1), (HALF_RIGHT, 1))


def test_stage_multiplicity_bookkeeping():
    with pytest.raises(InvalidSystem):
        Stage(2, 5, DOUBLING)
    assert Stage(3, 6, DOUBLING).ratio == 2


def test_compose_stages_doubling_block_order():
    s = compose_stages(Stage(1, 2, DOUBLING), Stage(2, 4, DOUBLING))
    assert s.path_list.expand() == [Affine(0, 2), Affine(2, 2), Affine(1, 2), Affine(3, 2)]
    # direct two-step block evaluation: outer block k holds inner blocks in order
    for k, outer in enumerate([HALF_LEFT, HALF_RIGHT]):
        for j, inner in enumerate([HALF_LEFT, HALF_RIGHT]):
            for num in range(9):
                x = Fraction(num, 8)
                assert s.path_list.expand()[2 * k + j](x) == inner(outer(x))


def test_compose_with_single_path_stage():
    s = compose_stages(Stage(1, 2, DOUBLING), Stage(2, 2, PathList.of((HALF_LEFT, 1))))
    assert s.path_list.expand() == [Affine(0, 2), Affine(2, 2)]


def test_jiang_su_two_steps_quarter_paths():
    js = jiang_su_preset(3)
    s = compose_stages(js.stages[1], js.stages[2])
    for p in s.distinct_paths:
        if isinstance(p, Affine):
            assert p.l == 2
        else:
            assert (p.value * 4).denominator == 1


def test_apply_connecting_examples():
    sys_ = toy_preset("doubling", 3)
    f = random_lipschitz(2, LipschitzClass(1.5, 1), seed=0)
    assert apply_connecting(sys_, f, 1, 1) is f
    a = np.array([[1.0, 2.0], [3.0, 4.0]])
    g = apply_connecting(sys_, PLMatrixFunction.constant(a), 1, 3)
    np.testing.assert_allclose(g(Fraction(3, 8)), np.kron(np.eye(4), a))
    x = PLMatrixFunction.linear(np.zeros((2, 2)), np.eye(2))
    h = apply_connecting(sys_, x, 1, 3)
    paths = sys_.composite(1, 3).expand()
    for k in range(17):
        t = Fraction(k, 16)
        expect = np.kron(np.diag([float(p(t)) for p in paths]), np.eye(2))
        np.testing.assert_allclose(h(t), expect, atol=1e-14)


def test_jiang_su_preset():
    assert jiang_su_preset(1).dims == (1, 6)
    js = jiang_su_preset(4)
    assert js.dims == (1, 6, 210, 188790, 142894962210)
    for st in js.stages:
        assert set(st.distinct_paths) == {HALF_LEFT, MIDPOINT, HALF_RIGHT}
    for lv in js.metadata["levels"][1:]:
        assert math.gcd(lv["p"], lv["q"]) == 1
        assert lv["p"] * lv["q"] == js.dims[js.metadata["levels"].index(lv)]


def _multiplicities(h, tol=1e-8):
    ev = np.linalg.eigvalsh(h)
    counts, start = [], 0
    for k in range(1, len(ev) + 1):
        if k == len(ev) or ev[k] - ev[k - 1] > tol:
            counts.append(k - start)
            start = k
    return counts


def test_jiang_su_boundary_spectrum():
    """The unitary-free image of f in Z_{2,3} is unitarily equivalent to an
    element of Z_{p',q'}: at 0 every eigenvalue multiplicity is a multiple of
    q', at 1 a multiple of p' (generic Hermitian boundary data)."""
    from aftriple.numerics import tensor
    from oracles import random_hermitian
    js = jiang_su_preset(2)
    lv = js.metadata["levels"][2]
    rng = np.random.default_rng(0)
    f = PLMatrixFunction.linear(tensor(random_hermitian(rng, 2), np.eye(3)),
                                tensor(np.eye(2), random_hermitian(rng, 3)))
    g = apply_connecting(js, f, 1, 2)
    assert all(m % lv["q"] == 0 for m in _multiplicities(g(0)))
    assert all(m % lv["p"] == 0 for m in _multiplicities(g(1)))


def test_jiang_su_multiplicity_arithmetic():
    """Same condition by counting: at 0 the x/2 blocks give f(0) (p-blocks of
    multiplicity q each) and the other two give f(1/2); symmetrically at 1."""
    js = jiang_su_preset(7)
    levels = js.metadata["levels"]
    for prev, lv in zip(levels[1:], levels[2:]):
        a, b, c = lv["mult"]
        assert (a * prev["q"]) % lv["q"] == 0 and (b + c) % lv["q"] == 0
        assert (c * prev["p"]) % lv["p"] == 0 and (a + b) % lv["p"] == 0
        assert lv["k0"] > 2 * prev["q"] and lv["k1"] > 2 * prev["p"]


def test_toy_presets():
    assert toy_preset("doubling", 3).dims == (1, 2, 4, 8)
    assert toy_preset("tripling", 2).dims == (1, 3, 9)
    for name in ("doubling", "tripling"):
        assert all(st.max_oscillation == Fraction(1, 2) for st in toy_preset(name, 3).stages)
        assert validate_system(toy_preset(name, 3)) == []


def test_reindex():
    r = reindex(toy_preset("doubling", 6))
    assert r.reindexed and r.dims == (1, 4, 16, 64)
    for st in r.stages:
        assert st.path_list.total == 4
        assert all(p.oscillation == Fraction(1, 4) for p in st.distinct_paths)
    assert validate_system(r) == []
    assert validate_system(reindex(jiang_su_preset(6))) == []


def test_validate_rejects_identity_path():
    sys_ = custom_system([Stage(1, 2, PathList.of((Affine(0, 0), 1), (HALF_LEFT, 1)))])
    problems = validate_system(sys_)
    assert len(problems) == 1 and "oscillation" in problems[0]


def test_af_image_examples():
    sys_ = toy_preset("doubling", 3)
    x = PLMatrixFunction.linear(np.zeros((1, 1)), np.eye(1))
    np.testing.assert_allclose(np.diag(af_image(sys_, x, 0, 2)), [0, 0.5, 0.25, 0.75])
    a = np.array([[0.0, 1.0], [2.0, 0.0]])
    np.testing.assert_allclose(af_image(sys_, PLMatrixFunction.constant(a), 1, 3),
                               np.kron(np.eye(4), a))


def test_af_image_telescoping():
    sys_ = toy_preset("tripling", 4)
    f = random_lipschitz(3, LipschitzClass(1.5, 1), seed=3)
    for m in range(1, 4):
        step = np.linalg.norm(af_image(sys_, f, 1, m + 1)
                              - np.kron(np.eye(3), af_image(sys_, f, 1, m)), 2)
        assert step <= f.lipschitz_constant * float(sys_.max_oscillation(1, m)) + 1e-12


def test_block_values_shape():
    sys_ = toy_preset("doubling", 4)
    f = random_lipschitz(2, LipschitzClass(1.5, 1), seed=3)
    assert block_values(sys_, f, 1, 4).shape == (8, 2, 2)


def test_intertwining_defect_examples():
    sys_ = toy_preset("doubling", 3)
    assert intertwining_defect(sys_, PLMatrixFunction.constant(np.eye(2)), 1) == 0
    x = PLMatrixFunction.linear(np.zeros((2, 2)), np.eye(2))
    assert intertwining_defect(sys_, x, 1) == pytest.approx(0.5)


def test_system_shape_errors():
    with pytest.raises(InvalidSystem):
        InductiveSystem((2, 4), (Stage(2, 4, DOUBLING),))
    with pytest.raises(InvalidSystem):
        InductiveSystem((1, 2, 4), (Stage(1, 2, DOUBLING),))


def test_oscillation_profile_extends_geometrically():
    sys_ = toy_preset("doubling", 3)
    assert sys_.oscillation_profile(1, 3) == Fraction(1, 4)
    assert sys_.oscillation_profile(1, 5) == Fraction(1, 16)


def test_stage_json_roundtrip():
    js = jiang_su_preset(3)
    st = js.stages[2]
    assert Stage.from_json(st.to_json()) == st
    lazy = reindex(jiang_su_preset(4)).stages[1]
    assert Stage.from_json(lazy.to_json()).distinct_paths == lazy.distinct_paths
