import pytest

from spikesim.errors import DataError
from spikesim.tables import format_cell, read_metadata, read_table, sidecar_path
from spikesim.tables import write_table


def test_sidecar_path(tmp_path):
    assert sidecar_path(tmp_path / "trace.csv") == tmp_path / "trace.csv.meta.json"


def test_format_cell():
    assert format_cell(0.1) == "0.1"
    assert format_cell(1 / 3) == repr(1 / 3)
    assert format_cell(12) == "12"
    assert format_cell("fit") == "fit"


def test_write_read_table(tmp_path):
    path = tmp_path / "out" / "trace.csv"
    rows = [(1, 0.5), (2, 1 / 3)]
    write_table(path, rows, ("timestep", "error_rate"), {"seed": 0, "model": {"variant": "ideal"}})
    assert path.read_text() == "timestep,error_rate\n1,0.5\n2,{}\n".format(repr(1 / 3))
    header, body = read_table(path)
    assert header == ["timestep", "error_rate"]
    assert float(body[1][1]) == 1 / 3
    assert read_metadata(path) == {"seed": 0, "model": {"variant": "ideal"}}


def test_write_table_without_meta(tmp_path):
    path = write_table(tmp_path / "t.csv", [], ("a",))
    assert not sidecar_path(path).exists()
    assert read_table(path) == (["a"], [])


def test_write_table_column_mismatch(tmp_path):
    with pytest.raises(ValueError):
        write_table(tmp_path / "t.csv", [(1, 2, 3)], ("a", "b"))


def test_read_table_comments(tmp_path):
    path = tmp_path / "t.csv"
    path.write_text("# measured\n\na, b\n1, 2\n")
    assert read_table(path) == (["a", "b"], [["1", "2"]])


@pytest.mark.parametrize("text", ["", "# only a comment\n", "a,b\n1\n"])
def test_read_table_invalid(tmp_path, text):
    path = tmp_path / "t.csv"
    path.write_text(text)
    with pytest.raises(DataError):
        read_table(path)
