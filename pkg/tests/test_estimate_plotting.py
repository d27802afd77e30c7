import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from srpfmc.estimate import Estimate, estimate_from_samples, map_chunks
from srpfmc.plotting import curve


@given(st.lists(st.floats(-1e6, 1e6), min_size=2, max_size=200))
def test_mean_is_order_independent(values):
    a = estimate_from_samples(values, 0)
    b = estimate_from_samples(values[::-1], 0)
    assert a.mean == b.mean
    assert a.stderr == pytest.approx(b.stderr, rel=1e-9, abs=1e-12)


def test_stderr_formula():
    x = np.arange(10.0)
    est = estimate_from_samples(x, 3, n_excluded=2, bound=6.0)
    assert est.stderr == pytest.approx(np.std(x, ddof=1) / math.sqrt(10))
    assert est.bias_bound == pytest.approx(6.0 * 2 / 12)
    assert estimate_from_samples([], 0).n == 0


def test_within():
    e = Estimate(1.0, 0.1, 10, 0)
    assert e.within(1.29) and not e.within(1.31)
    assert e.within(1.5, rel=0.5)


def test_map_chunks_order():
    parts = map_chunks(lambda a, b: list(range(a, b)), 1000, workers=4, chunk=64)
    assert sum(parts, []) == list(range(1000))


def test_curve_writes_file(tmp_path):
    recs = [{"x": x, "y": math.exp(-x), "e": 0.01, "tgt": math.exp(-x), "g": x > 1} for x in (0.5, 1.0, 1.5, 2.0)]
    path = curve(recs, "x", "y", err="e", target="tgt", logy=True, group="g", path=tmp_path / "c.png")
    assert path.exists() and path.stat().st_size > 1000
    assert curve([{"x": None}], "x", "y", path=tmp_path / "none.png") is None
