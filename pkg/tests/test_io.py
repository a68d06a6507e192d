import numpy as np
import pytest

from beamkey.io import (
    Table,
    emit_csv,
    format_value,
    read_bits,
    read_csv,
    read_matrices,
    table_to_csv,
    write_bits,
    write_matrices,
)


def test_empty_table_header_only(tmp_path):
    path = tmp_path / "t.csv"
    emit_csv(Table(["a", "b[dB]"]), path)
    assert path.read_bytes() == b"a,b[dB]\r\n"


def test_single_row(tmp_path):
    t = Table(["x", "y"])
    t.add(1, 0.5)
    path = tmp_path / "t.csv"
    emit_csv(t, path)
    assert path.read_bytes() == b"x,y\r\n1,0.5\r\n"
    header, rows = read_csv(path)
    assert header == ["x", "y"] and rows == [["1", "0.5"]]


def test_format_value():
    assert format_value(1 / 3) == "0.333333333333"
    assert format_value(np.float64(1e-20)) == "1e-20"
    assert format_value(np.int64(7)) == "7"
    assert format_value(True) == "1"
    assert format_value(float("nan")) == "nan"
    assert format_value(-float("inf")) == "-inf"


def test_rerun_identical():
    def make():
        t = Table(["v"])
        for x in np.random.default_rng(3).standard_normal(20):
            t.add(x)
        return table_to_csv(t)
    assert make() == make()


def test_row_length_checked():
    with pytest.raises(ValueError):
        Table(["a"]).add(1, 2)


def test_find_by_prefix():
    t = Table(["snr_db[dB]", "rate[bits/round]"])
    t.add(0.0, 1.5)
    assert t.find("rate") == "rate[bits/round]"
    assert t["snr_db"].tolist() == [0.0]
    with pytest.raises(KeyError):
        t.find("ra")


def test_matrices_round_trip(tmp_path, rng):
    mats = {"A": rng.standard_normal((3, 2)) + 1j * rng.standard_normal((3, 2)),
            "b": np.array([[1e-300 - 2j]])}
    path = tmp_path / "m.txt"
    write_matrices(mats, path)
    back = read_matrices(path)
    assert back.keys() == mats.keys()
    for k in mats:
        np.testing.assert_array_equal(back[k], mats[k])


def test_matrices_malformed(tmp_path):
    path = tmp_path / "m.txt"
    path.write_text("# A 2 2\n1,0 2,0\n3,0\n")
    with pytest.raises(ValueError, match="line 3"):
        read_matrices(path)


def test_bits_round_trip(tmp_path, rng):
    seqs = [rng.integers(0, 2, n) for n in (1, 17, 256)]
    path = tmp_path / "k.txt"
    write_bits(seqs, path)
    for a, b in zip(seqs, read_bits(path)):
        np.testing.assert_array_equal(a, b)


def test_bits_reject_garbage(tmp_path):
    path = tmp_path / "k.txt"
    path.write_text("0101\n01x1\n")
    with pytest.raises(ValueError, match="line 2"):
        read_bits(path)
