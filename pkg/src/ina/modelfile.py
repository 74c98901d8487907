"""Binary model file.

Layout, all integers little-endian::

    magic      4 bytes  b"INAM"
    version    u16
    length     u64      total file length in bytes, checksum included
    header     u32 length + UTF-8 JSON (dims, nnz, config, provenance)
    vocab      u32 count + (u32 length + UTF-8) per feature, then per class
    bias       W x f64
    weights    nnz x (u32 feature, u32 class, f64 bits), sorted by (feature, class)
    checksum   8 bytes, BLAKE2b-64 of every preceding byte
"""
from __future__ import annotations

import hashlib
import json
import os
import struct
import tempfile
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .corpus import Vocabulary
from .errors import ChecksumError, ModelFileError, TruncatedModelError, VersionMismatchError
from .info_math import EmergenceConfig
from .model import InfoModel

MAGIC = b"INAM"
FORMAT_VERSION = 1
_PREFIX = struct.Struct("<4sHQ")
_U32 = struct.Struct("<I")
_TRIPLE = np.dtype([("i", "<u4"), ("j", "<u4"), ("w", "<f8")])
_CHECKSUM_SIZE = 8


def _checksum(data) -> bytes:
    return hashlib.blake2b(data, digest_size=_CHECKSUM_SIZE).digest()


def _pack_strings(names) -> bytes:
    parts = [_U32.pack(len(names))]
    for name in names:
        raw = name.encode("utf-8")
        parts.append(_U32.pack(len(raw)))
        parts.append(raw)
    return b"".join(parts)


def to_bytes(model: InfoModel) -> bytes:
    w = model.weights
    header = {
        "n_features": model.n_features,
        "n_classes": model.n_classes,
        "nnz": int(w.nnz),
        "activation": model.activation,
        "emergence": model.emergence.to_dict(),
        "provenance": model.provenance,
    }
    header_raw = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    triples = np.empty(w.nnz, dtype=_TRIPLE)
    triples["i"] = np.repeat(np.arange(w.shape[0], dtype=np.uint32), np.diff(w.indptr))
    triples["j"] = w.indices
    triples["w"] = w.data
    body = b"".join([
        _U32.pack(len(header_raw)), header_raw,
        _pack_strings(model.vocab.feature_names),
        _pack_strings(model.vocab.class_names),
        model.bias.astype("<f8").tobytes(),
        triples.tobytes(),
    ])
    total = _PREFIX.size + len(body) + _CHECKSUM_SIZE
    payload = _PREFIX.pack(MAGIC, FORMAT_VERSION, total) + body
    return payload + _checksum(payload)


class _Reader:
    def __init__(self, buf: memoryview, pos: int):
        self.buf = buf
        self.pos = pos

    def take(self, n: int) -> memoryview:
        if self.pos + n > len(self.buf):
            raise ModelFileError("model file structure overruns its declared length")
        out = self.buf[self.pos:self.pos + n]
        self.pos += n
        return out

    def u32(self) -> int:
        return _U32.unpack(self.take(4))[0]

    def strings(self) -> list:
        return [bytes(self.take(self.u32())).decode("utf-8") for _ in range(self.u32())]


def from_bytes(data: bytes) -> InfoModel:
    if len(data) < _PREFIX.size:
        raise TruncatedModelError(f"file is {len(data)} bytes, shorter than the fixed prefix")
    magic, version, total = _PREFIX.unpack_from(data)
    if magic != MAGIC:
        raise ModelFileError("not an ina model file (bad magic)")
    if version != FORMAT_VERSION:
        raise VersionMismatchError(f"model format version {version}, expected {FORMAT_VERSION}")
    if len(data) < total:
        raise TruncatedModelError(f"file is {len(data)} bytes, header declares {total}")
    if len(data) > total:
        raise ModelFileError(f"file is {len(data)} bytes, header declares {total}")
    payload = memoryview(data)[:-_CHECKSUM_SIZE]
    if _checksum(payload) != data[-_CHECKSUM_SIZE:]:
        raise ChecksumError("checksum mismatch; model file is corrupt")
    try:
        return _decode(_Reader(payload, _PREFIX.size))
    except (ValueError, KeyError, TypeError, UnicodeDecodeError) as exc:
        raise ModelFileError(f"malformed model body: {exc}") from exc


def _decode(r: _Reader) -> InfoModel:
    header = json.loads(bytes(r.take(r.u32())).decode("utf-8"))
    M, W, nnz = header["n_features"], header["n_classes"], header["nnz"]
    vocab = Vocabulary(r.strings(), r.strings())
    bias = np.frombuffer(r.take(8 * W), dtype="<f8").astype(np.float64)
    triples = np.frombuffer(r.take(_TRIPLE.itemsize * nnz), dtype=_TRIPLE)
    if r.pos != len(r.buf):
        raise ModelFileError("trailing bytes after weight block")
    indptr = np.zeros(M + 1, dtype=np.int64)
    np.cumsum(np.bincount(triples["i"].astype(np.int64), minlength=M), out=indptr[1:])
    weights = sp.csr_matrix(
        (triples["w"].astype(np.float64), triples["j"].astype(np.int32), indptr),
        shape=(M, W))
    return InfoModel(weights, bias, vocab,
                     emergence=EmergenceConfig.from_dict(header["emergence"]),
                     activation=header["activation"],
                     provenance=header["provenance"])


def save(model: InfoModel, path) -> None:
    """Write atomically: a temp file in the target directory, then rename."""
    path = Path(path)
    data = to_bytes(model)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent or ".")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def load(path) -> InfoModel:
    return from_bytes(Path(path).read_bytes())
