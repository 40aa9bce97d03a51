"""On-disk formats: CSI frame containers and clutter-state blobs.

Both are little-endian.  Frame container (``CSIF``)::

    magic "CSIF" | version u16 | N u32 | M u32 | count u32 | t_base f64 | period f64
    count * N * M * (re f32, im f32), row-major over (subcarrier, symbol)

State blob (``SCRP``)::

    magic "SCRP" | version u16 | Q u64 | L u16 | epoch u32 | sigma_n f64
    singular (L f64) | subspace columns (Q*L complex f64) | proj_factor columns (Q*L complex f64)

Writes go to a temporary file in the target directory and are renamed into
place, so a partially written file never appears under the final name.
"""

import os
import struct
import tempfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .clutter import ClutterState
from .errors import FormatError

__all__ = [
    "FRAME_MAGIC",
    "STATE_MAGIC",
    "FrameContainer",
    "FrameWriter",
    "read_frames",
    "write_frames",
    "write_real_matrix",
    "save_state",
    "load_state",
    "atomic_write_bytes",
]

FRAME_MAGIC = b"CSIF"
FRAME_VERSION = 1
FRAME_HEADER = struct.Struct("<4sHIIIdd")

STATE_MAGIC = b"SCRP"
STATE_VERSION = 1
STATE_HEADER = struct.Struct("<4sHQHId")

_C64 = np.dtype("<c8")
_C128 = np.dtype("<c16")
_F64 = np.dtype("<f8")


def atomic_write_bytes(path, payload):
    path = Path(path)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=path.parent or ".")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(payload)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


@dataclass
class FrameContainer:
    N: int
    M: int
    count: int
    t_base: float
    period: float
    payload: np.ndarray  # count x N x M complex64
    version: int = FRAME_VERSION

    def frame(self, k):
        return self.payload[k]

    def timestamp(self, k):
        return self.t_base + k * self.period

    def __len__(self):
        return self.count


class FrameWriter:
    """Streaming, atomic writer for frame containers.

    Frames are appended with :meth:`append`; the frame count in the header is
    patched on :meth:`close`, after which the file is renamed into place.
    """

    def __init__(self, path, N, M, t_base=0.0, period=0.0):
        self.path = Path(path)
        self.N, self.M = int(N), int(M)
        self.t_base, self.period = float(t_base), float(period)
        self.count = 0
        fd, self._tmp = tempfile.mkstemp(
            prefix=f".{self.path.name}.", suffix=".tmp", dir=self.path.parent or "."
        )
        self._fh = os.fdopen(fd, "wb")
        self._fh.write(self._header())

    def _header(self):
        return FRAME_HEADER.pack(
            FRAME_MAGIC, FRAME_VERSION, self.N, self.M, self.count, self.t_base, self.period
        )

    def append(self, data):
        data = np.asarray(data)
        if data.shape != (self.N, self.M):
            raise FormatError(f"frame shape {data.shape} does not match container ({self.N}, {self.M})")
        self._fh.write(np.ascontiguousarray(data, dtype=_C64).tobytes())
        self.count += 1

    def close(self):
        if self._fh is None:
            return
        self._fh.seek(0)
        self._fh.write(self._header())
        self._fh.flush()
        os.fsync(self._fh.fileno())
        self._fh.close()
        self._fh = None
        os.replace(self._tmp, self.path)

    def abort(self):
        if self._fh is not None:
            self._fh.close()
            self._fh = None
            if os.path.exists(self._tmp):
                os.unlink(self._tmp)

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc, tb):
        if exc_type is None:
            self.close()
        else:
            self.abort()


def write_frames(path, frames, t_base=0.0, period=0.0):
    frames = [np.asarray(f.data if hasattr(f, "data") else f) for f in frames]
    if not frames:
        raise FormatError("cannot write an empty container")
    n, m = frames[0].shape
    with FrameWriter(path, n, m, t_base, period) as w:
        for f in frames:
            w.append(f)


def write_real_matrix(path, matrix, t=0.0):
    """Dense real matrix as a one-frame container (imaginary parts zero)."""
    matrix = np.asarray(matrix, dtype=float)
    write_frames(path, [matrix.astype(np.complex64)], t_base=t, period=0.0)


def read_frames(path):
    raw = Path(path).read_bytes()
    return parse_frames(raw)


def parse_frames(raw):
    if len(raw) < FRAME_HEADER.size:
        raise FormatError(
            f"truncated frame header: {len(raw)} of {FRAME_HEADER.size} bytes", offset=len(raw)
        )
    magic, version, n, m, count, t_base, period = FRAME_HEADER.unpack_from(raw, 0)
    if magic != FRAME_MAGIC:
        raise FormatError(f"bad magic {magic!r}, expected {FRAME_MAGIC!r}", offset=0)
    if version != FRAME_VERSION:
        raise FormatError(f"unsupported frame container version {version}", offset=4)
    if n < 1 or m < 1:
        raise FormatError(f"invalid frame dimensions {n}x{m}", offset=6)
    expected = FRAME_HEADER.size + count * n * m * _C64.itemsize
    if len(raw) < expected:
        frame_bytes = n * m * _C64.itemsize
        complete = (len(raw) - FRAME_HEADER.size) // frame_bytes
        raise FormatError(
            f"truncated payload: {len(raw)} of {expected} bytes, frame {complete} incomplete",
            offset=len(raw),
        )
    if len(raw) > expected:
        raise FormatError(f"{len(raw) - expected} trailing bytes after payload", offset=expected)
    payload = np.frombuffer(raw, dtype=_C64, count=count * n * m, offset=FRAME_HEADER.size)
    return FrameContainer(n, m, count, t_base, period, payload.reshape(count, n, m), version)


def state_to_bytes(state):
    q, l = state.subspace.shape
    if l > 0xFFFF:
        raise FormatError(f"clutter order {l} does not fit the state format")
    head = STATE_HEADER.pack(STATE_MAGIC, STATE_VERSION, q, l, int(state.epoch), float(state.sigma_n))
    parts = [
        head,
        np.asarray(state.singular, dtype=_F64).tobytes(),
        np.ascontiguousarray(state.subspace.T, dtype=_C128).tobytes(),
        np.ascontiguousarray(state.proj_factor.T, dtype=_C128).tobytes(),
    ]
    return b"".join(parts)


def state_from_bytes(raw):
    if len(raw) < STATE_HEADER.size:
        raise FormatError(
            f"truncated state header: {len(raw)} of {STATE_HEADER.size} bytes", offset=len(raw)
        )
    magic, version, q, l, epoch, sigma_n = STATE_HEADER.unpack_from(raw, 0)
    if magic != STATE_MAGIC:
        raise FormatError(f"bad magic {magic!r}, expected {STATE_MAGIC!r}", offset=0)
    if version != STATE_VERSION:
        raise FormatError(f"unsupported state version {version}", offset=4)
    off = STATE_HEADER.size
    expected = off + l * _F64.itemsize + 2 * q * l * _C128.itemsize
    if len(raw) != expected:
        raise FormatError(f"state blob has {len(raw)} bytes, expected {expected}", offset=min(len(raw), expected))
    singular = np.frombuffer(raw, dtype=_F64, count=l, offset=off).copy()
    off += l * _F64.itemsize
    sub = np.frombuffer(raw, dtype=_C128, count=q * l, offset=off).reshape(l, q).T.copy()
    off += q * l * _C128.itemsize
    proj = np.frombuffer(raw, dtype=_C128, count=q * l, offset=off).reshape(l, q).T.copy()
    return ClutterState(sub, singular, proj, epoch, sigma_n)


def save_state(path, state):
    atomic_write_bytes(path, state_to_bytes(state))


def load_state(path):
    return state_from_bytes(Path(path).read_bytes())
