"""Time-series container and its file forms."""
import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from superrad.timeseries import COLUMN_ORDER, TimeSeries, read_csv, read_json


def _series(n=5):
    t = np.linspace(0, 1, n)
    return TimeSeries(t, {"nd": t * 3, "Jz": np.sin(t), "J2": np.cos(t) / 3, "extra": t**2}, {"N": 4, "solver": "x"})


def test_column_order():
    s = _series()
    assert s.ordered_names() == ["Jz", "J2", "nd", "extra"]
    assert COLUMN_ORDER[0] == "Jz"


def test_validation():
    with pytest.raises(ValueError):
        TimeSeries([0, 1, 1], {})
    with pytest.raises(ValueError):
        TimeSeries([0, 1], {"Jz": [1, 2, 3]})
    with pytest.raises(ValueError):
        TimeSeries(np.zeros((2, 2)), {})


def test_getitem_and_contains():
    s = _series()
    assert s["t"] is s.t and "t" in s and "Jz" in s and "nb" not in s
    assert len(s) == 5


def test_csv_header_and_sidecar(tmp_path):
    p = _series().to_csv(tmp_path / "a.csv")
    assert p.read_text().splitlines()[0] == "t,Jz,J2,nd,extra"
    meta = json.loads((tmp_path / "a.csv.meta.json").read_text())
    assert meta == {"N": 4, "solver": "x"}


def test_csv_without_meta(tmp_path):
    _series().to_csv(tmp_path / "a.csv", write_meta=False)
    assert not (tmp_path / "a.csv.meta.json").exists()
    assert read_csv(tmp_path / "a.csv").meta == {}


def test_csv_first_column_checked(tmp_path):
    (tmp_path / "b.csv").write_text("x,Jz\n0,1\n")
    with pytest.raises(ValueError):
        read_csv(tmp_path / "b.csv")


finite = st.floats(allow_nan=False, allow_infinity=False, width=64)


@given(arrays(np.float64, st.integers(1, 30), elements=finite), st.data())
def test_csv_roundtrip_bit_identical(tmp_path_factory, values, data):
    # [TRIVIAL] 17 significant digits reproduce every double exactly
    t = np.arange(values.size) + data.draw(st.floats(0, 1))
    jz = data.draw(arrays(np.float64, t.shape, elements=finite))
    s = TimeSeries(t, {"Jz": jz, "nb": values}, {"N": 3})
    path = tmp_path_factory.mktemp("rt") / "s.csv"
    back = read_csv(s.to_csv(path))
    assert back.t.tobytes() == s.t.tobytes()
    assert back["Jz"].tobytes() == jz.tobytes() and back["nb"].tobytes() == values.tobytes()
    assert back.meta == {"N": 3}


def test_json_roundtrip(tmp_path):
    s = _series()
    s.meta["arr"] = np.arange(3)
    s.meta["f"] = np.float64(0.1)
    back = read_json(s.to_json(tmp_path / "s.json"))
    assert np.array_equal(back["Jz"], s["Jz"]) and back.meta["arr"] == [0, 1, 2]


def test_normalized():
    s = TimeSeries([0, 1], {"Jz": [2, 1], "J2": [6, 6], "JpJm": [3, 0]}, {"N": 4})
    n = s.normalized()
    assert n["Jz"].tolist() == [1, 0.5] and n["J2"].tolist() == [1, 1] and n["JpJm"].tolist() == [0.5, 0]
