import logging

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mixbicluster import data
from mixbicluster.data import (BINARY, CONTINUOUS, COUNT, PROPORTION, ColumnType, DataError, Kind,
                               MixedMatrix, compute_intercepts, load_csv, ordinal, save_csv)
from mixbicluster.mathcore import std_normal_quantile


def _write(tmp_path, text, name="d.csv"):
    path = tmp_path / name
    path.write_text(text)
    return path


def small_matrix():
    X = np.array([[1, 2, 0.2, 1.5, 3],
                  [0, 5, 0.9, -2.0, 0],
                  [1, 1, 0.5, 0.0, 7]], dtype=float)
    return MixedMatrix(X, (BINARY, ordinal(5), PROPORTION, CONTINUOUS, COUNT),
                       ("b", "o", "pr", "c", "n"))


def test_type_tags_round_trip():
    for t in (BINARY, ordinal(5), PROPORTION, CONTINUOUS, COUNT):
        assert ColumnType.parse(t.tag) == t
    assert ColumnType.parse(" Ordinal:3 ") == ordinal(3)
    assert int(Kind.BINARY) == 1 and int(Kind.COUNT) == 5
    for bad in ("ordinal", "ordinal:x", "ordinal:1", "nominal"):
        with pytest.raises(DataError):
            ColumnType.parse(bad)


def test_csv_round_trip(tmp_path):
    m = small_matrix()
    save_csv(m, tmp_path / "m.csv")
    back = load_csv(tmp_path / "m.csv")
    assert back == m
    assert back.fingerprint() == m.fingerprint()


def test_values_are_read_only():
    m = small_matrix()
    with pytest.raises(ValueError):
        m.values[0, 0] = 5


@pytest.mark.parametrize("row, msg", [
    ("2,1", "row 3, column 1: binary ∉ {0,1}"),
    ("1,6", "row 3, column 2: ordinal"),
    ("1,", "row 3, column 2: value is missing"),
    ("1,x", "row 3, column 2: not a number"),
    ("1", "row 3: expected 2 fields"),
])
def test_load_errors_name_row_and_column(tmp_path, row, msg):
    path = _write(tmp_path, f"a,b\nbinary,ordinal:5\n{row}\n0,2\n")
    with pytest.raises(DataError, match=msg.replace("{", r"\{").replace("}", r"\}")):
        load_csv(path)


def test_load_error_on_second_data_row(tmp_path):
    path = _write(tmp_path, "a,b\nbinary,count\n1,2\n1,-1\n")
    with pytest.raises(DataError, match="row 4, column 2"):
        load_csv(path)


def test_bad_tag_row(tmp_path):
    with pytest.raises(DataError, match="row 2, column 2"):
        load_csv(_write(tmp_path, "a,b\nbinary,colour\n1,1\n0,0\n"))
    with pytest.raises(DataError, match="row 2: expected 2 type tags"):
        load_csv(_write(tmp_path, "a,b\nbinary\n1,1\n0,0\n"))


def test_proportion_clamping_logged(tmp_path, caplog):
    path = _write(tmp_path, "a,b\nproportion,continuous\n0,1.0\n1,2.0\n0.5,3\n")
    with caplog.at_level(logging.WARNING):
        m = load_csv(path)
    assert m.clamped == 2
    assert m.values[0, 0] == 1e-6 and m.values[1, 0] == 1 - 1e-6
    assert "clamped 2" in caplog.text
    with pytest.raises(DataError, match="proportion"):
        load_csv(_write(tmp_path, "a,b\nproportion,continuous\n1.2,1\n0.5,2\n", "e.csv"))


def test_shape_checks():
    with pytest.raises(DataError):
        MixedMatrix(np.zeros((1, 3)), (CONTINUOUS,) * 3)
    with pytest.raises(DataError):
        MixedMatrix(np.zeros((3, 2)), (CONTINUOUS,))


def test_intercepts_closed_forms():
    m = small_matrix()
    a = compute_intercepts(m)
    eps = 0.01
    x = m.values
    assert a[0] == pytest.approx(np.mean(std_normal_quantile((x[:, 0] + eps) / (1 + 2 * eps))))
    assert a[1] == pytest.approx(np.mean(std_normal_quantile((x[:, 1] + eps) / (5 + 2 * eps))))
    assert a[2] == pytest.approx(np.mean(np.log(x[:, 2] / (1 - x[:, 2]))))
    assert a[3] == pytest.approx(np.mean(x[:, 3]))
    assert a[4] == pytest.approx(np.log(np.mean(x[:, 4]) + eps))


def test_binary_intercept_finite_for_constant_columns():
    m = MixedMatrix(np.array([[1, 0], [1, 0], [1, 0]], float), (BINARY, BINARY))
    a = compute_intercepts(m)
    assert np.all(np.isfinite(a))
    assert a[0] > 2 and a[1] < -2


@settings(max_examples=60, deadline=None)
@given(st.data())
def test_random_matrices_round_trip(tmp_path_factory, draw):
    n = draw.draw(st.integers(2, 6))
    kinds = draw.draw(st.lists(st.sampled_from(["binary", "ordinal:4", "proportion",
                                                "continuous", "count"]), min_size=2, max_size=5))
    cols = []
    for tag in kinds:
        if tag == "binary":
            el = st.sampled_from([0.0, 1.0])
        elif tag == "ordinal:4":
            el = st.integers(1, 4).map(float)
        elif tag == "count":
            el = st.integers(0, 50).map(float)
        elif tag == "proportion":
            el = st.floats(1e-6, 1 - 1e-6)
        else:
            el = st.floats(-1e6, 1e6, allow_nan=False)
        cols.append(draw.draw(st.lists(el, min_size=n, max_size=n)))
    m = MixedMatrix(np.array(cols).T, tuple(ColumnType.parse(t) for t in kinds))
    path = tmp_path_factory.mktemp("rt") / "m.csv"
    save_csv(m, path)
    back = load_csv(path)
    assert back == m
    assert np.all(np.isfinite(compute_intercepts(m)))


def test_columns_of_and_kinds():
    m = small_matrix()
    assert list(m.columns_of(Kind.PROPORTION)) == [2]
    assert list(m.kinds) == [1, 2, 3, 4, 5]
    assert data.clamp_proportions(np.array([0.0, 0.5, 1.0]))[1] == 2
