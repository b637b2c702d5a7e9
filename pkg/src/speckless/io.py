"""Binary containers for volumes and compressed models, plus the CSV
interchange for masks and segmentation surfaces.

Both binary formats are little-endian, versioned, and carry a trailing
CRC-32 of the payload. Every malformed-input class maps to a distinct
exception so callers (and the CLI) can report precisely what broke.

Volume container ("OCTV"): magic, u16 version, u8 element code (1 = float32,
2 = float64), u8 order, u32 dims, column-major payload, u32 CRC.

Model container ("TTML"): magic, u16 version, u8 kind (1 = TT, 2 = Tucker),
u8 norm code (0 = unspecified, then s0/s12/s23/s1), u8 order, u32 dims,
u8 rank count, u32 ranks, f64 stored compression ratio, float32 column-major
factor payload (TT cores in order; Tucker core then factors), u32 CRC.

Byte accounting: models store float32 factors, so against a float32 volume
the payload byte ratio equals the parameter-count CR exactly; a float64
volume adds a factor of two, and headers add a few dozen bytes either way.
"""

from __future__ import annotations

import math
import struct
import zlib

import numpy as np

from .decomp import TTModel, TuckerModel
from .metrics import SurfaceSet
from .prox import SpNorm
from .tensor import DenseTensor, as_tensor

__all__ = [
    "FileFormatError",
    "BadMagicError",
    "TruncatedFileError",
    "CrcMismatchError",
    "InvalidHeaderError",
    "InvalidDataError",
    "ModelConsistencyError",
    "read_volume",
    "write_volume",
    "read_model",
    "write_model",
    "read_header",
    "read_mask_csv",
    "write_mask_csv",
    "read_surfaces_csv",
    "write_surfaces_csv",
]

VOLUME_MAGIC = b"OCTV"
MODEL_MAGIC = b"TTML"
FORMAT_VERSION = 1

_ELEM_DTYPES = {1: np.dtype("<f4"), 2: np.dtype("<f8")}
_ELEM_CODES = {"f32": 1, "f64": 2}
_KIND_TT = 1
_KIND_TUCKER = 2
_NORM_CODES = {None: 0, SpNorm.S0: 1, SpNorm.S12: 2, SpNorm.S23: 3, SpNorm.S1: 4}
_NORM_FROM_CODE = {v: k for k, v in _NORM_CODES.items()}


class FileFormatError(Exception):
    """Base class for container-format failures."""


class BadMagicError(FileFormatError):
    """Leading magic bytes do not identify a known container."""


class TruncatedFileError(FileFormatError):
    """File ends before the declared structure is complete."""


class CrcMismatchError(FileFormatError):
    """Payload checksum does not match the trailer."""


class InvalidHeaderError(FileFormatError):
    """A header field holds an invalid or inconsistent value."""


class InvalidDataError(FileFormatError):
    """Payload decodes to non-finite values."""


class ModelConsistencyError(FileFormatError):
    """Declared ranks, payload size, or stored CR disagree."""


def _take(buf: bytes, offset: int, count: int, what: str) -> tuple[bytes, int]:
    if offset + count > len(buf):
        raise TruncatedFileError(f"file ends inside {what}")
    return buf[offset : offset + count], offset + count


def _check_crc(payload: bytes, trailer: bytes, ) -> None:
    (stored,) = struct.unpack("<I", trailer)
    if zlib.crc32(payload) & 0xFFFFFFFF != stored:
        raise CrcMismatchError("payload CRC-32 mismatch")


def write_volume(t, path, dtype: str = "f64") -> None:
    """Write a tensor as a volume container at the chosen precision."""
    t = as_tensor(t)
    if dtype not in _ELEM_CODES:
        raise ValueError(f"dtype must be 'f32' or 'f64', got {dtype!r}")
    code = _ELEM_CODES[dtype]
    payload = np.ascontiguousarray(t.data, dtype=_ELEM_DTYPES[code]).tobytes()
    header = struct.pack("<4sHBB", VOLUME_MAGIC, FORMAT_VERSION, code, t.order)
    header += np.asarray(t.dims, dtype="<u4").tobytes()
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(payload)
        fh.write(struct.pack("<I", zlib.crc32(payload) & 0xFFFFFFFF))


def read_volume(path) -> DenseTensor:
    """Read a volume container, verifying structure and checksum."""
    with open(path, "rb") as fh:
        buf = fh.read()
    fixed, offset = _take(buf, 0, 8, "fixed header")
    magic, version, elem, order = struct.unpack("<4sHBB", fixed)
    if magic != VOLUME_MAGIC:
        raise BadMagicError(f"expected magic {VOLUME_MAGIC!r}, got {magic!r}")
    if version != FORMAT_VERSION:
        raise InvalidHeaderError(f"unsupported version {version}")
    if elem not in _ELEM_DTYPES:
        raise InvalidHeaderError(f"unknown element-type code {elem}")
    if order < 1:
        raise InvalidHeaderError("tensor order must be at least 1")
    raw_dims, offset = _take(buf, offset, 4 * order, "dims")
    dims = tuple(int(d) for d in np.frombuffer(raw_dims, dtype="<u4"))
    if any(d < 1 for d in dims):
        raise InvalidHeaderError(f"dims must be positive, got {dims}")
    dtype = _ELEM_DTYPES[elem]
    payload_len = math.prod(dims) * dtype.itemsize
    expected = offset + payload_len + 4
    if len(buf) < expected:
        raise TruncatedFileError(
            f"need {expected} bytes for dims {dims}, file has {len(buf)}"
        )
    if len(buf) > expected:
        raise InvalidHeaderError(f"{len(buf) - expected} unexpected trailing bytes")
    payload, offset = _take(buf, offset, payload_len, "payload")
    _check_crc(payload, buf[offset:])
    flat = np.frombuffer(payload, dtype=dtype).astype(np.float64)
    if not np.isfinite(flat).all():
        raise InvalidDataError("payload contains non-finite values")
    return DenseTensor.from_flat(flat, dims)


def _model_parts(model) -> tuple[int, tuple[int, ...], list[np.ndarray]]:
    if isinstance(model, TTModel):
        return _KIND_TT, model.ranks, list(model.cores)
    if isinstance(model, TuckerModel):
        return _KIND_TUCKER, model.ranks, [model.core.array] + list(model.factors)
    raise TypeError(f"expected TTModel or TuckerModel, got {type(model).__name__}")


def stored_cr(dims, param_count: int) -> float:
    """Parameter-count compression ratio recorded in model containers; for
    3-way models this is exactly the TT/Tucker CR formula."""
    return math.prod(dims) / param_count


def write_model(model, path, *, norm=None) -> None:
    """Write a TT or Tucker model container (factors stored as float32)."""
    kind, ranks, blocks = _model_parts(model)
    norm = SpNorm.parse(norm) if norm is not None else None
    dims = model.dims
    cr = stored_cr(dims, model.param_count())
    header = struct.pack(
        "<4sHBBB",
        MODEL_MAGIC,
        FORMAT_VERSION,
        kind,
        _NORM_CODES[norm],
        len(dims),
    )
    header += np.asarray(dims, dtype="<u4").tobytes()
    header += struct.pack("<B", len(ranks))
    header += np.asarray(ranks, dtype="<u4").tobytes()
    header += struct.pack("<d", cr)
    payload = b"".join(
        np.ascontiguousarray(b.ravel(order="F"), dtype="<f4").tobytes()
        for b in blocks
    )
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(payload)
        fh.write(struct.pack("<I", zlib.crc32(payload) & 0xFFFFFFFF))


def _expected_blocks(kind: int, dims, ranks) -> list[tuple[int, ...]]:
    if kind == _KIND_TT:
        chain = (1,) + tuple(ranks) + (1,)
        return [
            (chain[n], dims[n], chain[n + 1]) for n in range(len(dims))
        ]
    shapes = [tuple(ranks)]
    shapes += [(d, r) for d, r in zip(dims, ranks)]
    return shapes


def read_model(path):
    """Read a model container back into a :class:`TTModel` or
    :class:`TuckerModel`, verifying structure, checksum, and that the stored
    CR matches the one recomputed from the declared ranks."""
    with open(path, "rb") as fh:
        buf = fh.read()
    fixed, offset = _take(buf, 0, 9, "fixed header")
    magic, version, kind, norm_code, order = struct.unpack("<4sHBBB", fixed)
    if magic != MODEL_MAGIC:
        raise BadMagicError(f"expected magic {MODEL_MAGIC!r}, got {magic!r}")
    if version != FORMAT_VERSION:
        raise InvalidHeaderError(f"unsupported version {version}")
    if kind not in (_KIND_TT, _KIND_TUCKER):
        raise InvalidHeaderError(f"unknown model kind {kind}")
    if norm_code not in _NORM_FROM_CODE:
        raise InvalidHeaderError(f"unknown norm code {norm_code}")
    if order < 2:
        raise InvalidHeaderError("model order must be at least 2")
    raw_dims, offset = _take(buf, offset, 4 * order, "dims")
    dims = tuple(int(d) for d in np.frombuffer(raw_dims, dtype="<u4"))
    if any(d < 1 for d in dims):
        raise InvalidHeaderError(f"dims must be positive, got {dims}")
    raw_n, offset = _take(buf, offset, 1, "rank count")
    (nranks,) = struct.unpack("<B", raw_n)
    expected_nranks = order - 1 if kind == _KIND_TT else order
    if nranks != expected_nranks:
        raise InvalidHeaderError(
            f"expected {expected_nranks} ranks for this kind, header says {nranks}"
        )
    raw_ranks, offset = _take(buf, offset, 4 * nranks, "ranks")
    ranks = tuple(int(r) for r in np.frombuffer(raw_ranks, dtype="<u4"))
    if any(r < 1 for r in ranks):
        raise InvalidHeaderError(f"ranks must be positive, got {ranks}")
    raw_cr, offset = _take(buf, offset, 8, "stored CR")
    (cr_in_file,) = struct.unpack("<d", raw_cr)

    shapes = _expected_blocks(kind, dims, ranks)
    param_count = sum(math.prod(s) for s in shapes)
    expected = offset + 4 * param_count + 4
    if len(buf) != expected:
        raise ModelConsistencyError(
            f"ranks {ranks} imply a {4 * param_count}-byte payload; file "
            f"layout disagrees by {len(buf) - expected} bytes"
        )
    payload, offset = _take(buf, offset, 4 * param_count, "payload")
    _check_crc(payload, buf[offset:])
    cr = stored_cr(dims, param_count)
    if abs(cr - cr_in_file) > 1e-9 * max(1.0, abs(cr)):
        raise ModelConsistencyError(
            f"stored CR {cr_in_file!r} does not match {cr!r} recomputed from ranks"
        )
    flat = np.frombuffer(payload, dtype="<f4").astype(np.float64)
    if not np.isfinite(flat).all():
        raise InvalidDataError("payload contains non-finite values")
    blocks = []
    pos = 0
    for shape in shapes:
        size = math.prod(shape)
        blocks.append(flat[pos : pos + size].reshape(shape, order="F"))
        pos += size
    if kind == _KIND_TT:
        return TTModel(cores=blocks, dims=dims)
    return TuckerModel(core=DenseTensor(blocks[0]), factors=blocks[1:])


def model_norm(path):
    """Norm code recorded in a model container (None if unspecified)."""
    info = read_header(path)
    return info["norm"]


def read_header(path) -> dict:
    """Parse a container header (either format) without touching the payload.

    Returns a dict with at least ``format``, ``version``, ``dims``; volume
    headers add ``dtype``, model headers add ``kind``, ``norm``, ``ranks``,
    and ``stored_cr``.
    """
    with open(path, "rb") as fh:
        buf = fh.read(64 * 1024)
    head, _ = _take(buf, 0, 4, "magic")
    if head == VOLUME_MAGIC:
        fixed, offset = _take(buf, 0, 8, "fixed header")
        _, version, elem, order = struct.unpack("<4sHBB", fixed)
        if elem not in _ELEM_DTYPES:
            raise InvalidHeaderError(f"unknown element-type code {elem}")
        raw_dims, _ = _take(buf, offset, 4 * order, "dims")
        dims = tuple(int(d) for d in np.frombuffer(raw_dims, dtype="<u4"))
        return {
            "format": "volume",
            "version": version,
            "dtype": "f32" if elem == 1 else "f64",
            "dims": dims,
        }
    if head == MODEL_MAGIC:
        fixed, offset = _take(buf, 0, 9, "fixed header")
        _, version, kind, norm_code, order = struct.unpack("<4sHBBB", fixed)
        if kind not in (_KIND_TT, _KIND_TUCKER):
            raise InvalidHeaderError(f"unknown model kind {kind}")
        if norm_code not in _NORM_FROM_CODE:
            raise InvalidHeaderError(f"unknown norm code {norm_code}")
        raw_dims, offset = _take(buf, offset, 4 * order, "dims")
        dims = tuple(int(d) for d in np.frombuffer(raw_dims, dtype="<u4"))
        raw_n, offset = _take(buf, offset, 1, "rank count")
        (nranks,) = struct.unpack("<B", raw_n)
        raw_ranks, offset = _take(buf, offset, 4 * nranks, "ranks")
        ranks = tuple(int(r) for r in np.frombuffer(raw_ranks, dtype="<u4"))
        raw_cr, _ = _take(buf, offset, 8, "stored CR")
        (cr,) = struct.unpack("<d", raw_cr)
        return {
            "format": "model",
            "version": version,
            "kind": "tt" if kind == _KIND_TT else "tucker",
            "norm": _NORM_FROM_CODE[norm_code],
            "dims": dims,
            "ranks": ranks,
            "stored_cr": cr,
        }
    raise BadMagicError(f"unknown magic {head!r}")


def write_mask_csv(mask: np.ndarray, path) -> None:
    """Write the true voxels of a boolean mask as 1-based i1,i2,i3 rows."""
    mask = np.asarray(mask)
    with open(path, "w", encoding="ascii") as fh:
        fh.write("i1,i2,i3\n")
        for idx in np.argwhere(mask):
            fh.write(",".join(str(int(v) + 1) for v in idx) + "\n")


def read_mask_csv(path, dims) -> np.ndarray:
    """Read a boolean mask from 1-based i1,i2,i3 rows."""
    dims = tuple(int(d) for d in dims)
    if len(dims) != 3:
        raise ValueError(f"expected 3-way dims, got {dims}")
    mask = np.zeros(dims, dtype=bool, order="F")
    with open(path, "r", encoding="ascii") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith(("#", "i1")):
                continue
            parts = line.split(",")
            if len(parts) != 3:
                raise ValueError(f"{path}:{lineno}: expected i1,i2,i3")
            i1, i2, i3 = (int(p) for p in parts)
            if not (1 <= i1 <= dims[0] and 1 <= i2 <= dims[1] and 1 <= i3 <= dims[2]):
                raise ValueError(f"{path}:{lineno}: voxel ({i1},{i2},{i3}) out of bounds")
            mask[i1 - 1, i2 - 1, i3 - 1] = True
    return mask


def write_surfaces_csv(surfaces: SurfaceSet, path) -> None:
    """Write surface positions as i2,i3,l,position rows (1-based indices)."""
    with open(path, "w", encoding="ascii") as fh:
        fh.write("i2,i3,l,position\n")
        n_surf, n_cols, _ = surfaces.positions.shape
        for s_idx, scan in enumerate(surfaces.scan_indices):
            for l in range(n_surf):
                for i2 in range(n_cols):
                    fh.write(
                        f"{i2 + 1},{scan},{l + 1},"
                        f"{surfaces.positions[l, i2, s_idx]:.6g}\n"
                    )


def read_surfaces_csv(path) -> SurfaceSet:
    """Read surface positions from i2,i3,l,position rows; the grid must be
    complete (every column and surface present for every listed scan)."""
    entries: dict[tuple[int, int, int], float] = {}
    with open(path, "r", encoding="ascii") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith(("#", "i2")):
                continue
            parts = line.split(",")
            if len(parts) != 4:
                raise ValueError(f"{path}:{lineno}: expected i2,i3,l,position")
            i2, i3, l = (int(p) for p in parts[:3])
            entries[(l, i2, i3)] = float(parts[3])
    if not entries:
        raise ValueError(f"{path}: no surface rows")
    n_surf = max(k[0] for k in entries)
    n_cols = max(k[1] for k in entries)
    scans = sorted({k[2] for k in entries})
    positions = np.full((n_surf, n_cols, len(scans)), np.nan)
    for (l, i2, i3), value in entries.items():
        positions[l - 1, i2 - 1, scans.index(i3)] = value
    if np.isnan(positions).any():
        raise ValueError(f"{path}: incomplete surface grid")
    return SurfaceSet(positions=positions, scan_indices=tuple(scans))
