"""Binary and CSV storage of periodic fields.

Binary layout (little endian)::

    8 bytes   magic b"PDRFLD01"
    uint32    d
    uint32    N
    uint32    number of components
    float64   L_len
    float64   data, components then row-major samples
"""

import struct

import numpy as np

from .errors import ConfigurationError
from .littlewood_paley import SpectralField, TorusGrid

MAGIC = b"PDRFLD01"
_HEADER = struct.Struct("<8sIIId")


def write_fields(path, fields):
    """Write one or more fields sharing a grid."""
    if isinstance(fields, SpectralField):
        fields = [fields]
    fields = list(fields)
    if not fields:
        raise ConfigurationError("nothing to write")
    grid = fields[0].grid
    if any(f.grid != grid for f in fields):
        raise ConfigurationError("fields must share one grid")
    data = np.stack([f.values for f in fields]).astype("<f8", copy=False)
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, grid.d, grid.N, len(fields), grid.L_len))
        fh.write(np.ascontiguousarray(data).tobytes(order="C"))


def read_fields(path):
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < _HEADER.size:
        raise ConfigurationError(f"{path}: truncated header")
    magic, d, N, ncomp, L_len = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise ConfigurationError(f"{path}: not a field file")
    grid = TorusGrid(d, N, L_len)
    count = ncomp * N ** d
    payload = raw[_HEADER.size:]
    if len(payload) != 8 * count:
        raise ConfigurationError(f"{path}: expected {count} samples, found {len(payload) // 8}")
    data = np.frombuffer(payload, dtype="<f8").reshape((ncomp,) + grid.shape)
    return [SpectralField(grid, values=data[i]) for i in range(ncomp)]


def read_field(path):
    """Read a field from the binary format, or from CSV when the name ends in ``.csv``.

    A CSV file holds the samples of a one-dimensional field, one value per
    line (a second column, if present, is taken as the value and the first
    as ``x``); ``L_len`` defaults to 1 and can be given in a ``# L_len=``
    comment line.
    """
    if str(path).endswith(".csv"):
        return read_csv_field(path)
    fields = read_fields(path)
    if len(fields) != 1:
        raise ConfigurationError(f"{path}: expected a single component, found {len(fields)}")
    return fields[0]


def read_csv_field(path, L_len=None):
    values = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                body = line[1:].strip()
                if body.startswith("L_len=") and L_len is None:
                    L_len = float(body.split("=", 1)[1])
                continue
            cols = line.replace(",", " ").split()
            try:
                values.append(float(cols[-1]))
            except ValueError:
                if values:
                    raise ConfigurationError(f"{path}: bad value {cols[-1]!r}") from None
                # header row
    grid = TorusGrid(1, len(values), 1.0 if L_len is None else L_len)
    return SpectralField(grid, values=np.array(values))
