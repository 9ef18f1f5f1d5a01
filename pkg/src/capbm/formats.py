"""Binary containers.

CAPM (model parameters)::

    b"CAPM" | u32 version | u8 kind (0 = full BM, 1 = RBM) | u32 dims...
    | row-major little-endian f64 payload, complex values as (re, im) pairs

    kind 0: u32 N;     then b (NxN), theta (NxN), J (NxN), eps (N)
    kind 1: u32 V, H;  then W (VxH complex), J (VxH), a (V), b (H)

CPXD (complex datasets)::

    b"CPXD" | u32 version=1 | u32 n_samples | u32 n_units | u32 width | u32 height
    | n_samples x n_units complex f64 (re, im) pairs

width = height = 0 marks an unshaped dataset.
"""
import struct

import numpy as np

from .errors import BadMagicError, CorruptPayloadError, TruncatedFileError, VersionMismatchError
from .model import CapBmParams, CapRbmParams

CAPM_MAGIC = b"CAPM"
CAPM_VERSION = 1
CPXD_MAGIC = b"CPXD"
CPXD_VERSION = 1

_F64 = np.dtype("<f8")


def _read_exact(buf, offset, n):
    if offset + n > len(buf):
        raise TruncatedFileError(f"expected {n} bytes at offset {offset}, file has {len(buf)}")
    return buf[offset : offset + n], offset + n


def _read_f64(buf, offset, count):
    chunk, offset = _read_exact(buf, offset, 8 * count)
    arr = np.frombuffer(chunk, dtype=_F64).astype(float)
    if not np.all(np.isfinite(arr)):
        raise CorruptPayloadError("payload contains NaN or infinite values")
    return arr, offset


def _complex_bytes(z):
    z = np.ascontiguousarray(z, dtype=complex)
    return np.stack([z.real, z.imag], axis=-1).astype(_F64).tobytes()


def _real_bytes(x):
    return np.ascontiguousarray(x, dtype=_F64).tobytes()


def encode_params(params):
    if isinstance(params, CapBmParams):
        n = params.n_units
        head = CAPM_MAGIC + struct.pack("<IBI", CAPM_VERSION, 0, n)
        body = b"".join(_real_bytes(m) for m in (params.b, params.theta, params.J, params.eps))
    elif isinstance(params, CapRbmParams):
        head = CAPM_MAGIC + struct.pack("<IBII", CAPM_VERSION, 1, params.n_visible, params.n_hidden)
        body = _complex_bytes(params.W) + b"".join(_real_bytes(m) for m in (params.J, params.a, params.b))
    else:
        raise TypeError(f"cannot serialise {type(params).__name__}")
    return head + body


def decode_params(buf):
    magic, off = _read_exact(buf, 0, 4)
    if magic != CAPM_MAGIC:
        raise BadMagicError(f"not a CAPM file (magic {magic!r})")
    raw, off = _read_exact(buf, off, 5)
    version, kind = struct.unpack("<IB", raw)
    if version != CAPM_VERSION:
        raise VersionMismatchError(f"CAPM version {version}, expected {CAPM_VERSION}")
    if kind == 0:
        raw, off = _read_exact(buf, off, 4)
        (n,) = struct.unpack("<I", raw)
        _check_size(buf, off, 8 * (3 * n * n + n))
        b, off = _read_f64(buf, off, n * n)
        theta, off = _read_f64(buf, off, n * n)
        J, off = _read_f64(buf, off, n * n)
        eps, off = _read_f64(buf, off, n)
        return CapBmParams(b.reshape(n, n), theta.reshape(n, n), J.reshape(n, n), eps)
    if kind == 1:
        raw, off = _read_exact(buf, off, 8)
        V, H = struct.unpack("<II", raw)
        _check_size(buf, off, 8 * (3 * V * H + V + H))
        w, off = _read_f64(buf, off, 2 * V * H)
        J, off = _read_f64(buf, off, V * H)
        a, off = _read_f64(buf, off, V)
        b, off = _read_f64(buf, off, H)
        W = w.view(np.complex128).reshape(V, H)
        return CapRbmParams(W, J.reshape(V, H), a, b)
    raise CorruptPayloadError(f"unknown model kind {kind}")


def _check_size(buf, off, n_payload):
    have = len(buf) - off
    if have < n_payload:
        raise TruncatedFileError(f"payload needs {n_payload} bytes, found {have}")
    if have > n_payload:
        raise CorruptPayloadError(f"{have - n_payload} unexpected trailing bytes")


def save_params(params, path):
    with open(path, "wb") as f:
        f.write(encode_params(params))


def load_params(path):
    with open(path, "rb") as f:
        return decode_params(f.read())


def encode_dataset(samples, shape=None):
    samples = np.asarray(samples, dtype=complex)
    n_samples, n_units = samples.shape
    width, height = shape if shape is not None else (0, 0)
    head = CPXD_MAGIC + struct.pack("<5I", CPXD_VERSION, n_samples, n_units, width, height)
    return head + _complex_bytes(samples)


def decode_dataset(buf):
    """Return ``(samples, shape)``; ``shape`` is None for unshaped data."""
    magic, off = _read_exact(buf, 0, 4)
    if magic != CPXD_MAGIC:
        raise BadMagicError(f"not a CPXD file (magic {magic!r})")
    raw, off = _read_exact(buf, off, 20)
    version, n_samples, n_units, width, height = struct.unpack("<5I", raw)
    if version != CPXD_VERSION:
        raise VersionMismatchError(f"CPXD version {version}, expected {CPXD_VERSION}")
    if (width, height) != (0, 0) and width * height != n_units:
        raise CorruptPayloadError(f"shape {width}x{height} does not match {n_units} units")
    _check_size(buf, off, 16 * n_samples * n_units)
    flat, off = _read_f64(buf, off, 2 * n_samples * n_units)
    samples = flat.view(np.complex128).reshape(n_samples, n_units)
    shape = None if (width, height) == (0, 0) else (width, height)
    return samples, shape
