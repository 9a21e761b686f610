"""Field files (OFTF binary, CSV slices) and PGM raster refraction maps.

OFTF layout, all little-endian::

    b"OFTF"  u32 version=1  u32 dim
    dim x (u64 n, f64 lower, f64 upper)
    prod(n) x (f64 re, f64 im)        # axis 1 fastest
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .grid import ComplexField, Grid, RefractionField

__all__ = [
    "OftfError",
    "PgmParseError",
    "write_oftf",
    "read_oftf",
    "write_csv",
    "read_pgm",
    "load_raster_refraction",
]

MAGIC = b"OFTF"
VERSION = 1


class OftfError(ValueError):
    """Malformed or unsupported OFTF file."""


class PgmParseError(ValueError):
    def __init__(self, offset: int, message: str):
        self.offset = offset
        super().__init__(f"PGM parse error at byte {offset}: {message}")


def write_oftf(path, field: ComplexField) -> None:
    grid = field.grid
    header = bytearray(MAGIC)
    header += struct.pack("<II", VERSION, grid.dim)
    for n, lo, hi in zip(grid.n, grid.lower, grid.upper):
        header += struct.pack("<Qdd", n, lo, hi)
    data = np.empty(2 * grid.size, dtype="<f8")
    flat = field.flat()
    data[0::2] = flat.real
    data[1::2] = flat.imag
    with open(path, "wb") as fh:
        fh.write(bytes(header))
        fh.write(data.tobytes())


def read_oftf(path) -> ComplexField:
    raw = Path(path).read_bytes()
    if raw[:4] != MAGIC:
        raise OftfError("bad magic; not an OFTF file")
    if len(raw) < 12:
        raise OftfError("truncated header")
    version, dim = struct.unpack_from("<II", raw, 4)
    if version != VERSION:
        raise OftfError(f"unsupported OFTF version {version}")
    if dim not in (1, 2, 3):
        raise OftfError(f"invalid dimension {dim}")
    off = 12
    ns, los, his = [], [], []
    for _ in range(dim):
        if len(raw) < off + 24:
            raise OftfError("truncated axis header")
        n, lo, hi = struct.unpack_from("<Qdd", raw, off)
        ns.append(n)
        los.append(lo)
        his.append(hi)
        off += 24
    grid = Grid(tuple(los), tuple(his), tuple(ns))
    expected = 16 * grid.size
    if len(raw) - off != expected:
        raise OftfError(f"payload has {len(raw) - off} bytes, expected {expected}")
    # reinterpret (re, im) pairs directly so signed zeros and NaN payloads survive
    data = np.frombuffer(raw, dtype="<c16", offset=off).astype(complex)
    return ComplexField(grid, data)


def write_csv(path, field: ComplexField, slice_axis: int | None = None, index: int | None = None) -> None:
    """Write ``x[,y],re,im`` rows; 3-D fields are cut to a 2-D slice first.

    The default 3-D slice is the middle plane normal to the last axis.
    """
    grid = field.grid
    values = field.values
    axes = list(range(grid.dim))
    if grid.dim == 3:
        slice_axis = 2 if slice_axis is None else slice_axis
        index = grid.n[slice_axis] // 2 if index is None else index
        values = np.take(values, index, axis=slice_axis)
        axes.remove(slice_axis)
    elif slice_axis is not None:
        raise ValueError("slicing only applies to 3-D fields")
    coords = np.meshgrid(*(grid.axis(d) for d in axes), indexing="ij")
    cols = [c.ravel(order="F") for c in coords] + [values.ravel(order="F").real, values.ravel(order="F").imag]
    names = ["x", "y", "z"]
    header = ",".join([names[d] for d in axes] + ["re", "im"])
    np.savetxt(path, np.column_stack(cols), delimiter=",", header=header, comments="", fmt="%.17g")


def _pgm_token(raw: bytes, pos: int) -> tuple[bytes, int, int]:
    """Next whitespace-delimited header token, skipping comments."""
    n = len(raw)
    while pos < n:
        ch = raw[pos : pos + 1]
        if ch == b"#":
            while pos < n and raw[pos : pos + 1] not in (b"\n", b"\r"):
                pos += 1
        elif ch.isspace():
            pos += 1
        else:
            break
    start = pos
    while pos < n and not raw[pos : pos + 1].isspace() and raw[pos : pos + 1] != b"#":
        pos += 1
    if start == pos:
        raise PgmParseError(start, "unexpected end of header")
    return raw[start:pos], start, pos


def read_pgm(path) -> np.ndarray:
    """8-bit binary PGM (P5) as a ``(height, width)`` uint8 array."""
    raw = Path(path).read_bytes()
    tok, start, pos = _pgm_token(raw, 0)
    if tok != b"P5":
        raise PgmParseError(start, f"expected magic P5, got {tok[:8]!r}")
    fields = []
    for name in ("width", "height", "maxval"):
        tok, start, pos = _pgm_token(raw, pos)
        if not tok.isdigit():
            raise PgmParseError(start, f"{name} is not a positive integer: {tok[:16]!r}")
        fields.append(int(tok))
    width, height, maxval = fields
    if width < 1 or height < 1:
        raise PgmParseError(start, "image has zero size")
    if not 0 < maxval < 256:
        raise PgmParseError(start, f"only 8-bit PGM is supported (maxval {maxval})")
    if pos >= len(raw) or not raw[pos : pos + 1].isspace():
        raise PgmParseError(pos, "missing whitespace after header")
    pos += 1
    need = width * height
    if len(raw) - pos < need:
        raise PgmParseError(len(raw), f"pixel data truncated: need {need} bytes, have {len(raw) - pos}")
    pix = np.frombuffer(raw, dtype=np.uint8, count=need, offset=pos).reshape(height, width)
    if maxval != 255:
        pix = np.round(pix.astype(float) * (255.0 / maxval)).astype(np.uint8)
    return pix


def _bilinear(img: np.ndarray, rows: np.ndarray, cols: np.ndarray) -> np.ndarray:
    h, w = img.shape
    r = np.clip(rows, 0, h - 1)
    c = np.clip(cols, 0, w - 1)
    r0 = np.minimum(np.floor(r).astype(int), max(h - 2, 0))
    c0 = np.minimum(np.floor(c).astype(int), max(w - 2, 0))
    r1 = np.minimum(r0 + 1, h - 1)
    c1 = np.minimum(c0 + 1, w - 1)
    fr = r - r0
    fc = c - c0
    top = img[r0, c0] * (1 - fc) + img[r0, c1] * fc
    bot = img[r1, c0] * (1 - fc) + img[r1, c1] * fc
    return top * (1 - fr) + bot * fr


def load_raster_refraction(path, amplitude: float, grid: Grid) -> RefractionField:
    """``beta = 1 + amplitude * pixel/255`` resampled bilinearly onto a 2-D grid.

    The image spans the whole domain: pixel centres map to an equispaced
    lattice from corner to corner, image row 0 at the top (largest x2).
    """
    if grid.dim != 2:
        raise ValueError("raster refraction maps need a 2-D grid")
    if amplitude < 0:
        raise ValueError("amplitude must be non-negative")
    img = read_pgm(path).astype(float) / 255.0
    h, w = img.shape
    # grid point (i, j) -> image column along x1, row along -x2
    cols = np.linspace(0.0, w - 1, grid.n[0])[:, None] * np.ones((1, grid.n[1]))
    rows = np.linspace(h - 1, 0.0, grid.n[1])[None, :] * np.ones((grid.n[0], 1))
    frac = np.clip(_bilinear(img, rows, cols), 0.0, 1.0)
    return RefractionField(grid, 1.0 + amplitude * frac)
