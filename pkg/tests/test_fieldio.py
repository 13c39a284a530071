import numpy as np
import pytest

from pdrelax.errors import ConfigurationError
from pdrelax.fieldio import MAGIC, read_field, read_fields, write_fields
from pdrelax.littlewood_paley import SpectralField, TorusGrid


def test_binary_roundtrip(tmp_path):
    g = TorusGrid(2, 16, 2.5)
    rng = np.random.default_rng(0)
    fields = [SpectralField(g, values=rng.standard_normal(g.shape)) for _ in range(3)]
    path = tmp_path / "x.fld"
    write_fields(path, fields)
    back = read_fields(path)
    assert len(back) == 3
    for a, b in zip(fields, back):
        assert b.grid == g
        assert np.array_equal(a.values, b.values)
    raw = path.read_bytes()
    assert raw.startswith(MAGIC)
    write_fields(path, fields)
    assert path.read_bytes() == raw


def test_single_field(tmp_path):
    g = TorusGrid(1, 32, 1.0)
    f = SpectralField(g, values=np.sin(g.coords[0]))
    path = tmp_path / "s.fld"
    write_fields(path, f)
    assert np.array_equal(read_field(path).values, f.values)
    write_fields(path, [f, f])
    with pytest.raises(ConfigurationError):
        read_field(path)


def test_csv_field(tmp_path):
    path = tmp_path / "f.csv"
    path.write_text("# L_len=2.0\nx,value\n0,1.5\n1,-2\n2,0.25\n3,4\n")
    f = read_field(path)
    assert f.grid == TorusGrid(1, 4, 2.0)
    np.testing.assert_array_equal(f.values, [1.5, -2.0, 0.25, 4.0])
    path.write_text("1\n2\nabc\n")
    with pytest.raises(ConfigurationError):
        read_field(path)


def test_bad_files(tmp_path):
    path = tmp_path / "bad.fld"
    path.write_bytes(b"NOTFIELD" + bytes(40))
    with pytest.raises(ConfigurationError):
        read_fields(path)
    path.write_bytes(b"PDR")
    with pytest.raises(ConfigurationError):
        read_fields(path)
    g = TorusGrid(1, 8, 1.0)
    write_fields(path, [SpectralField.zeros(g)])
    path.write_bytes(path.read_bytes()[:-8])
    with pytest.raises(ConfigurationError):
        read_fields(path)
    with pytest.raises(ConfigurationError):
        write_fields(path, [])
    with pytest.raises(ConfigurationError):
        write_fields(path, [SpectralField.zeros(g), SpectralField.zeros(TorusGrid(1, 16, 1.0))])
