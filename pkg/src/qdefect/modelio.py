"""Binary model files.

Layout (little-endian)::

    b"QSVM" | version u16 | payload length u64 | payload | checksum u64

The checksum is an 8-byte BLAKE2b digest of every preceding byte. The
payload is a field count (u32) followed by fields sorted by name; each field
is ``name`` (u16 length + UTF-8), a one-byte type tag and the value. Nested
records are flattened into dotted names. Reals are IEEE-754 binary64, so a
round trip is lossless.
"""
from __future__ import annotations

import hashlib
import struct
from pathlib import Path

import numpy as np

from .dataio import ScalingParams
from .svm import KernelBinding, PegasosModel, TrainedSvm

MAGIC = b"QSVM"
FORMAT_VERSION = 1


class ModelFormatError(ValueError):
    pass


class VersionMismatchError(ModelFormatError):
    pass


class CorruptModelError(ModelFormatError):
    pass


class MissingFieldError(ModelFormatError):
    pass


def _digest(data: bytes) -> bytes:
    return hashlib.blake2b(data, digest_size=8).digest()


# -- field codec -------------------------------------------------------------


def _encode_value(v) -> bytes:
    if isinstance(v, (bool, np.bool_)):
        return b"i" + struct.pack("<q", int(v))
    if isinstance(v, (int, np.integer)):
        return b"i" + struct.pack("<q", int(v))
    if isinstance(v, (float, np.floating)):
        return b"f" + struct.pack("<d", float(v))
    if isinstance(v, str):
        raw = v.encode("utf-8")
        return b"s" + struct.pack("<I", len(raw)) + raw
    if isinstance(v, np.ndarray):
        if v.dtype.kind in "iub":
            tag, arr = b"I", np.ascontiguousarray(v, dtype="<i8")
        else:
            tag, arr = b"F", np.ascontiguousarray(v, dtype="<f8")
        head = struct.pack("<B", arr.ndim) + struct.pack(f"<{arr.ndim}Q", *arr.shape)
        return tag + head + arr.tobytes()
    raise TypeError(f"cannot serialise {type(v).__name__}")


def _flatten(prefix: str, obj, out: dict) -> None:
    if isinstance(obj, dict):
        for k, v in obj.items():
            _flatten(f"{prefix}.{k}" if prefix else str(k), v, out)
    elif obj is not None:
        out[prefix] = obj


def _unflatten(flat: dict) -> dict:
    root: dict = {}
    for key, v in flat.items():
        node = root
        parts = key.split(".")
        for p in parts[:-1]:
            node = node.setdefault(p, {})
        node[parts[-1]] = v
    return root


def encode_fields(fields: dict) -> bytes:
    flat: dict = {}
    _flatten("", fields, flat)
    chunks = [struct.pack("<I", len(flat))]
    for name in sorted(flat):
        raw = name.encode("utf-8")
        chunks.append(struct.pack("<H", len(raw)) + raw + _encode_value(flat[name]))
    body = b"".join(chunks)
    head = MAGIC + struct.pack("<H", FORMAT_VERSION) + struct.pack("<Q", len(body))
    return head + body + _digest(head + body)


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int) -> bytes:
        if n < 0 or self.pos + n > len(self.data):
            raise CorruptModelError("payload ends early")
        b = self.data[self.pos : self.pos + n]
        self.pos += n
        return b

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))


def decode_fields(data: bytes) -> dict:
    if len(data) < 6 or data[:4] != MAGIC:
        raise CorruptModelError("missing QSVM magic")
    (version,) = struct.unpack("<H", data[4:6])
    if version != FORMAT_VERSION:
        raise VersionMismatchError(f"model format version {version}, expected {FORMAT_VERSION}")
    if len(data) < 6 + 8 + 8:
        raise CorruptModelError("file truncated")
    (length,) = struct.unpack("<Q", data[6:14])
    if len(data) != 14 + length + 8:
        raise CorruptModelError("file length does not match header")
    if _digest(data[:-8]) != data[-8:]:
        raise CorruptModelError("checksum mismatch")

    r = _Reader(data[14:-8])
    (count,) = r.unpack("<I")
    flat = {}
    for _ in range(count):
        (nlen,) = r.unpack("<H")
        try:
            name = r.take(nlen).decode("utf-8")
        except UnicodeDecodeError:
            raise CorruptModelError("bad field name") from None
        tag = r.take(1)
        if tag == b"i":
            (v,) = r.unpack("<q")
        elif tag == b"f":
            (v,) = r.unpack("<d")
        elif tag == b"s":
            (slen,) = r.unpack("<I")
            v = r.take(slen).decode("utf-8")
        elif tag in (b"F", b"I"):
            (ndim,) = r.unpack("<B")
            shape = r.unpack(f"<{ndim}Q")
            size = int(np.prod(shape)) if ndim else 1
            dtype = "<f8" if tag == b"F" else "<i8"
            v = np.frombuffer(r.take(8 * size), dtype=dtype).reshape(shape).copy()
            v = v.astype(np.float64 if tag == b"F" else np.int64)
        else:
            raise CorruptModelError(f"unknown type tag {tag!r}")
        flat[name] = v
    if r.pos != len(r.data):
        raise CorruptModelError("trailing bytes in payload")
    return _unflatten(flat)


# -- models ------------------------------------------------------------------


def _model_fields(model) -> dict:
    common = {
        "support_vectors": model.support_vectors,
        "bias": float(model.bias),
        "C": float(model.C),
        "kernel": model.kernel.to_dict(),
        "scaling": None if model.scaling is None else {
            "mins": np.asarray(model.scaling.mins, dtype=float),
            "maxs": np.asarray(model.scaling.maxs, dtype=float),
            "low": model.scaling.low,
            "high": model.scaling.high,
        },
        "meta": dict(model.metadata) or None,
    }
    if isinstance(model, TrainedSvm):
        return {"model_type": "svc", "dual_coefs": model.dual_coefs,
                "converged": bool(model.converged), **common}
    if isinstance(model, PegasosModel):
        return {"model_type": "pegasos", "support_labels": model.support_labels,
                "counts": model.counts, "steps": model.steps, "n_train": model.n_train,
                "seed": model.seed, **common}
    raise TypeError(f"cannot save {type(model).__name__}")


def model_bytes(model) -> bytes:
    return encode_fields(_model_fields(model))


def save_model(model, path) -> None:
    Path(path).write_bytes(model_bytes(model))


def _need(d: dict, *keys):
    missing = [k for k in keys if k not in d]
    if missing:
        raise MissingFieldError(f"model file lacks field(s): {', '.join(missing)}")
    return [d[k] for k in keys]


def model_from_bytes(data: bytes):
    f = decode_fields(data)
    (kind,) = _need(f, "model_type")
    sv, bias, C, kd = _need(f, "support_vectors", "bias", "C", "kernel")
    kernel = KernelBinding.from_dict(kd)
    scaling = ScalingParams.from_dict(f["scaling"]) if "scaling" in f else None
    meta = f.get("meta", {})
    if kind == "svc":
        coefs, conv = _need(f, "dual_coefs", "converged")
        return TrainedSvm(sv, coefs, bias, C, kernel, scaling, bool(conv), meta)
    if kind == "pegasos":
        labels, counts, steps, n_train, seed = _need(
            f, "support_labels", "counts", "steps", "n_train", "seed")
        return PegasosModel(sv, labels, counts, steps, C, n_train, kernel, seed, bias,
                            scaling, meta)
    raise CorruptModelError(f"unknown model type {kind!r}")


def load_model(path):
    return model_from_bytes(Path(path).read_bytes())


def file_sha256(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()
