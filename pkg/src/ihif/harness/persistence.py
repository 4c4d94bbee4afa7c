"""Binary model files.

Layout (all integers little-endian)::

    b"IHIF"  u32 version  u32 n_sections
    n_sections x { u16 name_len, name (UTF-8), u64 offset, u64 length, u32 crc32 }
    u32 crc32 of every header byte above
    payloads

Array sections hold ``u64 rows, u64 cols`` followed by ``rows * cols``
float64 values in row-major order.  The ``meta`` section is UTF-8 JSON
with sorted keys.  Offsets are absolute.
"""

from __future__ import annotations

import json
import struct
import zlib
from pathlib import Path

import numpy as np

from ..classifier import ClassModel
from ..errors import ChecksumError, ModelFormatError, VersionError
from ..features import ExtractionParams, GlobalLengths
from ..gabor import GaborParams
from ..ica import IcaModel, WhiteningModel
from .pipeline import FORMAT_VERSION, ModelBundle

MAGIC = b"IHIF"
SUPPORTED_VERSIONS = (FORMAT_VERSION,)

_PREFIX = struct.Struct("<4sII")
_ENTRY = struct.Struct("<QQI")
_U16 = struct.Struct("<H")
_U32 = struct.Struct("<I")
_DIMS = struct.Struct("<QQ")


def encode_array(a) -> bytes:
    a = np.asarray(a, dtype=np.float64)
    if a.ndim == 1:
        a = a[None, :]
    if a.ndim != 2:
        raise ValueError("only 1-D and 2-D arrays can be stored")
    return _DIMS.pack(*a.shape) + np.ascontiguousarray(a, dtype="<f8").tobytes()


def decode_array(buf: bytes, name: str = "array") -> np.ndarray:
    if len(buf) < _DIMS.size:
        raise ModelFormatError(f"section {name!r} is too short")
    rows, cols = _DIMS.unpack_from(buf)
    expected = _DIMS.size + 8 * rows * cols
    if len(buf) != expected:
        raise ModelFormatError(f"section {name!r} holds {len(buf)} bytes, expected {expected}")
    return np.frombuffer(buf, dtype="<f8", offset=_DIMS.size).reshape(rows, cols).astype(np.float64)


def pack_sections(sections: dict[str, bytes], version: int = FORMAT_VERSION) -> bytes:
    names = list(sections)
    header_len = _PREFIX.size + _U32.size
    for name in names:
        header_len += _U16.size + len(name.encode("utf-8")) + _ENTRY.size
    header = bytearray(_PREFIX.pack(MAGIC, version, len(names)))
    offset = header_len
    for name in names:
        raw = name.encode("utf-8")
        payload = sections[name]
        header += _U16.pack(len(raw)) + raw
        header += _ENTRY.pack(offset, len(payload), zlib.crc32(payload))
        offset += len(payload)
    header += _U32.pack(zlib.crc32(bytes(header)))
    return bytes(header) + b"".join(sections[n] for n in names)


def unpack_sections(data: bytes) -> tuple[int, dict[str, bytes]]:
    if len(data) < _PREFIX.size:
        raise ModelFormatError("file is truncated")
    magic, version, count = _PREFIX.unpack_from(data)
    if magic != MAGIC:
        raise ModelFormatError("not a model file (bad magic)")
    if version not in SUPPORTED_VERSIONS:
        raise VersionError(f"unsupported model format version {version}; supported {SUPPORTED_VERSIONS}")
    pos = _PREFIX.size
    table = []
    try:
        for _ in range(count):
            (name_len,) = _U16.unpack_from(data, pos)
            pos += _U16.size
            name = data[pos : pos + name_len]
            if len(name) != name_len:
                raise ModelFormatError("file is truncated")
            pos += name_len
            offset, length, crc = _ENTRY.unpack_from(data, pos)
            pos += _ENTRY.size
            table.append((name, offset, length, crc))
        (header_crc,) = _U32.unpack_from(data, pos)
    except struct.error:
        raise ModelFormatError("file is truncated") from None
    if zlib.crc32(data[:pos]) != header_crc:
        raise ChecksumError("header checksum mismatch")
    end = max((offset + length for _, offset, length, _ in table), default=pos + _U32.size)
    if end < len(data):
        raise ModelFormatError(f"{len(data) - end} unexpected trailing bytes")
    sections = {}
    for raw_name, offset, length, crc in table:
        name = raw_name.decode("utf-8")
        if offset + length > len(data):
            raise ModelFormatError(f"section {name!r} runs past the end of the file (truncated)")
        payload = data[offset : offset + length]
        if zlib.crc32(payload) != crc:
            raise ChecksumError(f"checksum mismatch in section {name!r}")
        sections[name] = payload
    return version, sections


def _meta(bundle: ModelBundle) -> dict:
    g, e = bundle.gabor, bundle.extraction
    return {
        "image": {"width": bundle.width, "height": bundle.height},
        "gabor": {
            "sigma": g.sigma,
            "k_max": g.k_max,
            "f": g.f,
            "n_scales": g.n_scales,
            "n_orientations": g.n_orientations,
            "kernel_size": g.kernel_size,
        },
        "features": {"block_size": e.block_size, "threshold": e.threshold,
                     "n_blocks": bundle.lengths.n_blocks},
        "ica": {"contrast": bundle.ica.contrast},
        "classifier": {"labels": list(bundle.classes.labels), "metric": bundle.classes.metric},
    }


def dumps(bundle: ModelBundle) -> bytes:
    meta = json.dumps(_meta(bundle), sort_keys=True, separators=(",", ":")).encode("utf-8")
    wm = bundle.ica.whitening
    sections = {
        "meta": meta,
        "features.lengths": encode_array(bundle.lengths.lengths.astype(np.float64)),
        "whitening.mean": encode_array(wm.mean),
        "whitening.eigvecs": encode_array(wm.eigvecs),
        "whitening.eigvals": encode_array(wm.eigvals),
        "ica.unmixing": encode_array(bundle.ica.unmixing),
        "classifier.means": encode_array(bundle.classes.means),
        "classifier.threshold": encode_array([bundle.classes.threshold]),
    }
    return pack_sections(sections, bundle.version)


def loads(data: bytes) -> ModelBundle:
    version, sec = unpack_sections(data)
    try:
        meta = json.loads(sec["meta"].decode("utf-8"))
        arrays = {k: decode_array(v, k) for k, v in sec.items() if k != "meta"}
        lengths = arrays["features.lengths"].ravel()
        if not np.array_equal(lengths, np.round(lengths)):
            raise ModelFormatError("retained lengths must be integers")
        g, f, c = meta["gabor"], meta["features"], meta["classifier"]
        wm = WhiteningModel(
            arrays["whitening.mean"].ravel(),
            arrays["whitening.eigvecs"],
            arrays["whitening.eigvals"].ravel(),
        )
        return ModelBundle(
            width=meta["image"]["width"],
            height=meta["image"]["height"],
            gabor=GaborParams(g["sigma"], g["k_max"], g["f"], g["n_scales"],
                              g["n_orientations"], g["kernel_size"]),
            extraction=ExtractionParams(f["block_size"], f["threshold"]),
            lengths=GlobalLengths(lengths.astype(np.int64), f["n_blocks"]),
            ica=IcaModel(wm, arrays["ica.unmixing"], meta["ica"]["contrast"]),
            classes=ClassModel(tuple(c["labels"]), arrays["classifier.means"],
                               float(arrays["classifier.threshold"][0, 0]), c["metric"]),
            version=version,
        )
    except ModelFormatError:
        raise
    except KeyError as exc:
        raise ModelFormatError(f"missing model field {exc}") from None
    except (ValueError, TypeError, UnicodeDecodeError) as exc:
        raise ModelFormatError(f"malformed model: {exc}") from None


def save_model(bundle: ModelBundle, path) -> None:
    Path(path).write_bytes(dumps(bundle))


def load_model(path) -> ModelBundle:
    try:
        data = Path(path).read_bytes()
    except OSError as exc:
        raise ModelFormatError(f"{path}: cannot read model ({exc})") from None
    return loads(data)
