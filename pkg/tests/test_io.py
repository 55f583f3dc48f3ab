import os

import numpy as np

from nhsr.io import atomic_write, csv_text, read_csv, write_json


def test_atomic_write_leaves_no_temp(tmp_path):
    p = atomic_write(tmp_path / "a" / "x.txt", "hello\n")
    assert p.read_text() == "hello\n"
    assert os.listdir(tmp_path / "a") == ["x.txt"]


def test_atomic_write_keeps_old_file_on_failure(tmp_path):
    p = tmp_path / "x.json"
    p.write_text("old")
    try:
        write_json(p, {"bad": object()})
    except TypeError:
        pass
    assert p.read_text() == "old"
    assert os.listdir(tmp_path) == ["x.json"]


def test_csv_full_precision_roundtrip(tmp_path):
    x = np.array([0.1, 1 / 3, np.pi * 1e-300, -2.5e17])
    p = tmp_path / "v.csv"
    atomic_write(p, csv_text(["i", "x"], [np.arange(4), x], int_columns=(0,)))
    header, data = read_csv(p)
    assert header == ["i", "x"]
    assert np.array_equal(data[:, 1], x)
    assert p.read_text().splitlines()[1] == "0,0.10000000000000001"


def test_csv_empty():
    assert csv_text(["a", "b"], [np.empty(0), np.empty(0)]) == "a,b\n"
