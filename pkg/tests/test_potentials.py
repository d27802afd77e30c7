import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from srpfmc.params import ModelParams
from srpfmc.potentials import (PotentialSpec, cumulative, evaluate, floor_active, load_user_table, negative_part,
                               path_integral, positive_part, relativistic_kato_diagnostic, save_user_table)


def test_point_values():
    assert evaluate(PotentialSpec("harmonic", omega0=0.5), 2.0) == 2.0
    assert evaluate(PotentialSpec("soft_coulomb", g=1.0, a=1.0), 0.0) == -1.0
    assert evaluate(PotentialSpec("square_well", depth=3.0, width=2.0), [0.9, 1.1]).tolist() == [-3.0, 0.0]
    x = np.array([[3.0, 4.0, 0.0]])
    assert evaluate(PotentialSpec("coulomb3d", g=2.0), x, d=3)[0] == pytest.approx(-0.4)


def test_coulomb_floor():
    spec = PotentialSpec("coulomb3d", g=1.0, floor=100.0)
    x = np.array([[0.0, 0.0, 0.0], [0.005, 0.0, 0.0], [0.5, 0.0, 0.0]])
    np.testing.assert_allclose(evaluate(spec, x, 3), [-100.0, -100.0, -2.0])
    assert floor_active(spec, x, 3).tolist() == [True, True, False]
    assert spec.lower_bound() == -100.0


@given(st.floats(-20, 20, allow_nan=False))
def test_parts_split_potential(x):
    spec = PotentialSpec("soft_coulomb", g=0.7, a=0.3)
    assert positive_part(spec, x) - negative_part(spec, x) == pytest.approx(evaluate(spec, x))
    assert evaluate(spec, x) >= spec.lower_bound()


def test_user_table_roundtrip(tmp_path):
    xs, vs = np.linspace(-2, 2, 5), np.array([1.0, 0.0, -1.0, 0.0, 1.0])
    save_user_table(tmp_path / "v.txt", xs, vs)
    spec = load_user_table(tmp_path / "v.txt")
    assert evaluate(spec, [-5.0, -0.5, 0.0, 9.0]).tolist() == [1.0, -0.5, -1.0, 1.0]
    with pytest.raises(ValueError):
        PotentialSpec("user_table", table_x=(0.0, 0.0), table_v=(1.0, 2.0))


def test_unknown_kind():
    with pytest.raises(ValueError):
        PotentialSpec("yukawa")


def test_trapezoid_exact_on_linear_paths():
    t = np.linspace(0, 2, 9)
    pos = np.broadcast_to(t[None, :, None], (3, 9, 1)).copy()
    spec = PotentialSpec("user_table", table_x=(-10.0, 10.0), table_v=(-10.0, 10.0))  # V(x) = x
    out = path_integral(spec, pos, 0.25)
    np.testing.assert_allclose(out[:, -1], 2.0)
    np.testing.assert_allclose(out[0], 0.5 * t * t)
    np.testing.assert_allclose(cumulative(np.ones((1, 5)), 0.5, "right")[0], [0, 0.5, 1, 1.5, 2])


def test_kato_diagnostic_trivial_for_nonnegative_potential():
    rep = relativistic_kato_diagnostic(PotentialSpec("harmonic", omega0=1.0), 1.0, [0.0, 1.0], 200,
                                       ModelParams(d=1, m=1.0), n_slabs=4)
    assert all(e.mean == 1.0 and e.stderr == 0.0 for e in rep.estimates)
    assert not rep.superlinear_flag


def test_kato_diagnostic_square_well_bounds():
    depth = 0.8
    rep = relativistic_kato_diagnostic(PotentialSpec("square_well", depth=depth, width=2.0), 2.0, [0.0, 3.0], 2000,
                                       ModelParams(d=1, m=1.0), n_slabs=16, seed=4)
    for e in rep.estimates:
        assert 1.0 <= e.mean <= math.exp(depth * 2.0)
    assert rep.estimates[0].mean > rep.estimates[1].mean
    assert rep.floor_activation_rate == 0.0


def test_kato_diagnostic_counts_coulomb_floor():
    spec = PotentialSpec("coulomb3d", g=1.0, floor=2.0)
    rep = relativistic_kato_diagnostic(spec, 1.0, [np.zeros(3)], 500, ModelParams(d=3, m=1.0), n_slabs=8)
    assert rep.floor_activation_rate > 0


@given(st.lists(st.floats(-30, 30), min_size=1, max_size=20))
def test_sign_parts_disjoint(xs):
    for spec in (PotentialSpec("soft_coulomb", g=1.0), PotentialSpec("user_table", table_x=(-1.0, 1.0),
                                                                     table_v=(-2.0, 2.0))):
        vp, vn = positive_part(spec, np.array(xs)), negative_part(spec, np.array(xs))
        assert np.all(vp * vn == 0)
        np.testing.assert_array_equal(vp - vn, evaluate(spec, np.array(xs)))


def test_kato_diagnostic_monotone_in_coupling():
    pts, prm = [np.array([0.5, 0.0, 0.0])], ModelParams(d=3, m=1.0)
    vals = [relativistic_kato_diagnostic(PotentialSpec("coulomb3d", g=g), 0.5, pts, 2000, prm, seed=3,
                                         n_slabs=8).estimates[0].mean for g in (0.1, 0.3, 0.6)]
    assert vals[0] <= vals[1] <= vals[2]
