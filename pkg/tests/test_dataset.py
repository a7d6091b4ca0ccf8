import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kdesum.dataset import (
    PointFileError,
    PointSet,
    gaussian_normalizer,
    generate,
    kernel_value,
    load_points,
    save_values,
)


def write(tmp_path, text, name="p.txt"):
    path = tmp_path / name
    path.write_text(text)
    return path


def test_load_comma(tmp_path):
    ps = load_points(write(tmp_path, "0,0\n1,1\n"))
    assert (ps.n, ps.d) == (2, 2)
    np.testing.assert_array_equal(ps.data, [[0, 0], [1, 1]])


def test_load_single_value(tmp_path):
    ps = load_points(write(tmp_path, "3.5\n"))
    assert (ps.n, ps.d) == (1, 1)
    assert ps.data[0, 0] == 3.5


def test_load_whitespace_and_blank_lines(tmp_path):
    ps = load_points(write(tmp_path, "1 2\t3\n\n  4 5 6  \n"))
    np.testing.assert_array_equal(ps.data, [[1, 2, 3], [4, 5, 6]])


def test_ragged_row_reports_line(tmp_path):
    with pytest.raises(PointFileError) as info:
        load_points(write(tmp_path, "1,2\n3\n"))
    assert info.value.line == 2
    assert "line 2" in str(info.value)


def test_unparseable_field_reports_line(tmp_path):
    with pytest.raises(PointFileError) as info:
        load_points(write(tmp_path, "1,2\n3,4\n5,abc\n"))
    assert info.value.line == 3


def test_header_row_skipped(tmp_path):
    ps = load_points(write(tmp_path, "x,y\n1,2\n"))
    np.testing.assert_array_equal(ps.data, [[1, 2]])


def test_missing_file(tmp_path):
    with pytest.raises(OSError):
        load_points(tmp_path / "nope.csv")


def test_empty_file(tmp_path):
    with pytest.raises(PointFileError):
        load_points(write(tmp_path, "\n\n"))


def test_pointset_rejects_nonfinite():
    with pytest.raises(ValueError):
        PointSet([[0.0, np.nan]])


def test_pointset_is_immutable_copy():
    src = np.zeros((3, 2))
    ps = PointSet(src)
    src[0, 0] = 9
    assert ps.data[0, 0] == 0
    with pytest.raises(ValueError):
        ps.data[0, 0] = 1


def test_pointset_1d_input_is_column():
    assert PointSet([1.0, 2.0, 3.0]).d == 1


def test_round_trip(tmp_path, rng):
    vals = rng.normal(size=(50, 3)) * 10.0 ** rng.integers(-8, 8, size=(50, 3))
    path = tmp_path / "v.csv"
    save_values(path, vals)
    back = load_points(path).data
    np.testing.assert_allclose(back, vals, rtol=1e-15, atol=0)


@pytest.mark.parametrize(
    "h,dist,expected",
    [(1.0, 0.0, 1.0), (1.0, math.sqrt(2.0), 0.367879441171), (2.0, 2.0, 0.606530659713)],
)
def test_kernel_value_examples(h, dist, expected):
    assert kernel_value(h, dist) == pytest.approx(expected, rel=1e-11)


@given(st.floats(0.01, 100), st.floats(0, 50), st.floats(0, 50))
def test_kernel_monotone_and_scaled(h, a, b):
    lo, hi = sorted((a, b))
    assert kernel_value(h, lo) >= kernel_value(h, hi)
    assert kernel_value(h, a) == pytest.approx(kernel_value(1.0, a / h), rel=1e-12, abs=1e-300)
    assert 0 <= kernel_value(h, a) <= 1


@pytest.mark.parametrize(
    "d,h,expected", [(1, 1.0, 2.506628275), (2, 1.0, 6.283185307), (2, 0.5, 1.570796327)]
)
def test_normalizer_examples(d, h, expected):
    assert gaussian_normalizer(d, h) == pytest.approx(expected, rel=1e-9)


@settings(max_examples=50)
@given(st.integers(1, 6), st.floats(0.01, 10))
def test_normalizer_separable(d, h):
    assert gaussian_normalizer(d, h) == pytest.approx(gaussian_normalizer(1, h) ** d, rel=1e-12)


@pytest.mark.parametrize("kind", ["mixture", "uniform", "clustered"])
def test_generate_deterministic(kind):
    a = generate(kind, 300, 3, seed=7)
    b = generate(kind, 300, 3, seed=7)
    assert (a.n, a.d) == (300, 3)
    np.testing.assert_array_equal(a.data, b.data)
    assert not np.array_equal(a.data, generate(kind, 300, 3, seed=8).data)


def test_generate_unknown_kind():
    with pytest.raises(ValueError):
        generate("spiral", 10, 2)
