import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from statsmodels.regression.linear_model import yule_walker

from mixedpelt.panel import (BINARY, GroupSpec, PanelError, Segmentation, TimeSeriesPanel,
                             demean, load_csv, load_groups, prewhiten_ar, write_csv,
                             write_groups)


def _write(path, text):
    path.write_text(text)
    return path


def _lag1(x):
    x = x - x.mean()
    return float(x[1:] @ x[:-1] / (x @ x))


# ---------------------------------------------------------------------------
# loading


def test_binary_csv_parses(tmp_path):
    f = _write(tmp_path / "a.csv", "a,b\n0,1\n1,1\n0,0\n")
    p = load_csv(f, GroupSpec((2,)), kind=BINARY)
    assert (p.n, p.P, p.K) == (3, 2, 1)
    np.testing.assert_array_equal(p.values, [[0, 1], [1, 1], [0, 0]])


def test_width_mismatch_is_an_error(tmp_path):
    f = _write(tmp_path / "a.csv", "a,b\n0,1\n1,1\n0,0\n")
    with pytest.raises(PanelError, match="width mismatch"):
        load_csv(f, GroupSpec((1, 2)), kind=BINARY)


def test_paper_sized_panel(tmp_path, rng):
    g = GroupSpec((14,) * 4)
    panel = TimeSeriesPanel(rng.standard_normal((904, 56)), g)
    f = tmp_path / "fc.csv"
    write_csv(panel, f)
    p = load_csv(f, g)
    assert (p.n, p.K) == (904, 4)
    np.testing.assert_array_equal(p.values, panel.values)


@pytest.mark.parametrize("text, match", [
    ("", "empty CSV"),
    ("a,b\n", "no data rows"),
    ("a,b\n1,2\n3\n", "ragged"),
    ("a,b\n1,x\n", "non-numeric"),
    ("a,a\n1,2\n", "duplicate"),
    ("a,b\n1,nan\n", "non-finite"),
])
def test_malformed_csv(tmp_path, text, match):
    f = _write(tmp_path / "bad.csv", text)
    with pytest.raises(PanelError, match=match) as info:
        load_csv(f, GroupSpec((2,)))
    if match != "non-finite":
        assert "bad.csv" in str(info.value)


def test_binary_kind_rejects_other_values(tmp_path):
    f = _write(tmp_path / "a.csv", "a,b\n0,2\n")
    with pytest.raises(PanelError, match="binary"):
        load_csv(f, GroupSpec((2,)), kind=BINARY)


def test_missing_file(tmp_path):
    with pytest.raises(PanelError, match="nope.csv"):
        load_csv(tmp_path / "nope.csv", GroupSpec((2,)))


def test_groups_reorder_columns_and_round_trip(tmp_path, rng):
    f = _write(tmp_path / "x.csv", "c,a,d,b\n1,2,3,4\n5,6,7,8\n")
    spec = _write(tmp_path / "g.ini", "[groups]\nfirst = a, b\nsecond = c, d\n")
    g = load_groups(spec)
    assert g.labels == ("first", "second") and g.sizes == (2, 2)
    p = load_csv(f, g)
    assert p.columns == ("a", "b", "c", "d")
    np.testing.assert_array_equal(p.values, [[2, 4, 1, 3], [6, 8, 5, 7]])
    out = tmp_path / "y.csv"
    write_csv(p, out)
    assert out.read_text() == "c,a,d,b\n1.0,2.0,3.0,4.0\n5.0,6.0,7.0,8.0\n"
    write_groups(p.groups, p.columns, tmp_path / "g2.ini")
    assert load_groups(tmp_path / "g2.ini") == g


@pytest.mark.parametrize("text, match", [
    ("[other]\na = x\n", r"\[groups\]"),
    ("[groups]\n", "no groups"),
    ("[groups]\na =\n", "no columns"),
    ("not an ini", "malformed"),
])
def test_bad_group_spec(tmp_path, text, match):
    with pytest.raises(PanelError, match=match):
        load_groups(_write(tmp_path / "g.ini", text))


def test_group_spec_unknown_column(tmp_path):
    f = _write(tmp_path / "x.csv", "a,b\n1,2\n")
    g = GroupSpec.from_members({"u": ["a", "zz"]})
    with pytest.raises(PanelError, match="unknown columns"):
        load_csv(f, g)


@given(st.integers(1, 30), st.lists(st.integers(1, 4), min_size=1, max_size=4),
       st.integers(0, 2**31 - 1))
def test_csv_round_trip_is_exact(n, sizes, seed):
    import tempfile
    rng = np.random.default_rng(seed)
    g = GroupSpec(tuple(sizes))
    panel = TimeSeriesPanel(rng.standard_normal((n, g.P)) * 10.0 ** rng.integers(-5, 6), g)
    with tempfile.TemporaryDirectory() as d:
        write_csv(panel, f"{d}/p.csv")
        assert load_csv(f"{d}/p.csv", g).equals(panel)


def test_values_are_read_only(rng):
    p = TimeSeriesPanel(rng.standard_normal((3, 2)), GroupSpec((2,)))
    with pytest.raises(ValueError):
        p.values[0, 0] = 1.0


# ---------------------------------------------------------------------------
# slicing and segmentations


def test_slice_convention():
    p = TimeSeriesPanel(np.arange(10.0)[:, None], GroupSpec((1,)))
    assert p.slice(0, 10).equals(p)
    np.testing.assert_array_equal(p.slice(3, 5).values[:, 0], [3.0, 4.0])  # time 4 and 5
    with pytest.raises(PanelError):
        p.slice(5, 5)
    with pytest.raises(PanelError):
        p.slice(0, 11)


def test_segmentation():
    seg = Segmentation((3, 7), 10)
    assert seg.M == 2
    assert seg.segments() == [(0, 3), (3, 7), (7, 10)]
    np.testing.assert_array_equal(seg.labels(), [0, 0, 0, 1, 1, 1, 1, 2, 2, 2])
    for bad in [(0,), (10,), (5, 5), (6, 2)]:
        with pytest.raises(PanelError):
            Segmentation(bad, 10)


# ---------------------------------------------------------------------------
# preprocessing


def test_demean_examples():
    g = GroupSpec((3,))
    p = TimeSeriesPanel(np.array([[1.0, 0.5, 7.0], [2.0, -1.0, 7.0], [3.0, 0.5, 7.0]]), g)
    out = demean(p).values
    np.testing.assert_allclose(out[:, 0], [-1, 0, 1], atol=1e-15)
    np.testing.assert_allclose(out[:, 1], p.values[:, 1], atol=1e-12)
    np.testing.assert_array_equal(out[:, 2], 0.0)


def test_demean_rejects_binary():
    p = TimeSeriesPanel(np.array([[0.0, 1.0]]), GroupSpec((2,)), BINARY)
    with pytest.raises(PanelError):
        demean(p)


def test_prewhiten_white_noise(rng):
    n = 2000
    x = rng.standard_normal((n, 1))
    out = prewhiten_ar(TimeSeriesPanel(x, GroupSpec((1,))), 1).values[:, 0]
    assert abs(_lag1(out)) < 3 / np.sqrt(n)
    z = (x[1:, 0] - x[1:, 0].mean()) / x[1:, 0].std(ddof=1)
    assert np.corrcoef(out, z)[0, 1] > 0.99


def test_prewhiten_ar1(rng):
    n = 3000
    e = rng.standard_normal(n)
    x = np.empty(n)
    x[0] = e[0] / np.sqrt(1 - 0.36)
    for t in range(1, n):
        x[t] = 0.6 * x[t - 1] + e[t]
    assert _lag1(x) > 0.5
    out = prewhiten_ar(TimeSeriesPanel(x[:, None], GroupSpec((1,))), 1).values[:, 0]
    assert abs(_lag1(out)) < 3 / np.sqrt(n)
    assert out.std(ddof=1) == pytest.approx(1.0)


def test_prewhiten_order8_matches_yule_walker_oracle(rng):
    n = 904
    x = np.cumsum(rng.standard_normal((n, 3)), axis=0) * 0.1 + rng.standard_normal((n, 3))
    p = TimeSeriesPanel(x, GroupSpec((3,)))
    out = prewhiten_ar(p, 8).values
    assert out.shape == (896, 3)
    for j in range(3):
        rho, _ = yule_walker(x[:, j], order=8, method="mle", demean=True)
        resid = x[8:, j] - sum(rho[i] * x[7 - i:n - 1 - i, j] for i in range(8))
        np.testing.assert_allclose(out[:, j], resid / resid.std(ddof=1), rtol=1e-9, atol=1e-9)


def test_prewhiten_errors(rng):
    p = TimeSeriesPanel(rng.standard_normal((5, 2)), GroupSpec((2,)))
    with pytest.raises(PanelError):
        prewhiten_ar(p, 0)
    with pytest.raises(PanelError, match="too large"):
        prewhiten_ar(p, 4)
    flat = TimeSeriesPanel(np.ones((20, 1)), GroupSpec((1,)))
    with pytest.raises(PanelError, match="singular"):
        prewhiten_ar(flat, 2)
