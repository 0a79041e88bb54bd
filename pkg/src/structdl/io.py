"""File formats for matrices and models, plus input helpers.

Matrix file layout (all little-endian)::

    magic   4 bytes  b"SDLM"
    version u16      1
    rows    u32
    cols    u32
    dtype   u8       1 = float64
    payload rows*cols float64 values, column-major

Columns are samples, so column-major storage keeps each sample contiguous.

A model file is a small container::

    magic    8 bytes  b"SDLMODEL"
    version  u16
    manifest u32 length + UTF-8 JSON (sorted keys)
    count    u16 number of matrix sections
    sections u16 name length + name + u64 length + matrix file bytes

Nothing time-dependent is written, so equal inputs give equal bytes.
"""

from __future__ import annotations

import io
import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .dictionary import Dictionary, normalize_columns
from .errors import InvalidArgumentError
from .groups import make_groups

MATRIX_MAGIC = b"SDLM"
MATRIX_VERSION = 1
DTYPE_FLOAT64 = 1
_MATRIX_HEADER = struct.Struct("<4sHIIB")

MODEL_MAGIC = b"SDLMODEL"
MODEL_VERSION = 1


# ---------------------------------------------------------------------------
# matrices

def matrix_to_bytes(X) -> bytes:
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if X.ndim != 2:
        raise InvalidArgumentError(f"expected a 2-D matrix, got shape {X.shape}")
    rows, cols = X.shape
    if rows >= 2**32 or cols >= 2**32:
        raise InvalidArgumentError("matrix too large for the file header")
    header = _MATRIX_HEADER.pack(MATRIX_MAGIC, MATRIX_VERSION, rows, cols, DTYPE_FLOAT64)
    return header + X.astype("<f8").tobytes(order="F")


def matrix_from_bytes(buf: bytes) -> np.ndarray:
    if len(buf) < _MATRIX_HEADER.size:
        raise InvalidArgumentError("truncated matrix header")
    magic, version, rows, cols, dtype = _MATRIX_HEADER.unpack_from(buf)
    if magic != MATRIX_MAGIC:
        raise InvalidArgumentError(f"bad matrix magic {magic!r}")
    if version != MATRIX_VERSION:
        raise InvalidArgumentError(f"unsupported matrix version {version}")
    if dtype != DTYPE_FLOAT64:
        raise InvalidArgumentError(f"unsupported element type tag {dtype}")
    payload = buf[_MATRIX_HEADER.size:]
    if len(payload) != rows * cols * 8:
        raise InvalidArgumentError(
            f"payload has {len(payload)} bytes, header implies {rows * cols * 8}")
    flat = np.frombuffer(payload, dtype="<f8")
    return np.array(flat.reshape((rows, cols), order="F"), dtype=float)


def save_matrix(path, X):
    Path(path).write_bytes(matrix_to_bytes(X))


def load_matrix(path) -> np.ndarray:
    """Read a matrix file, or a ``.csv``/``.txt`` file (rows are features, columns samples)."""
    path = Path(path)
    if path.suffix.lower() in (".csv", ".txt"):
        delim = "," if path.suffix.lower() == ".csv" else None
        X = np.loadtxt(path, delimiter=delim, ndmin=2)
        return np.asarray(X, dtype=float)
    return matrix_from_bytes(path.read_bytes())


def save_labels(path, labels):
    labels = np.asarray(labels).astype(int).ravel()
    Path(path).write_text("".join(f"{v}\n" for v in labels))


def load_labels(path) -> np.ndarray:
    """One 1-based integer label per line; blank lines are skipped."""
    out = []
    for n, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.strip()
        if not line:
            continue
        try:
            val = int(line)
        except ValueError:
            raise InvalidArgumentError(f"{path}:{n}: not an integer label: {line!r}") from None
        if val < 1:
            raise InvalidArgumentError(f"{path}:{n}: labels are 1-based, got {val}")
        out.append(val)
    return np.asarray(out, dtype=int)


# ---------------------------------------------------------------------------
# models

@dataclass
class ModelFile:
    """Learned dictionary, classifier weights and the settings that produced them."""

    manifest: dict
    matrices: dict = field(default_factory=dict)

    @property
    def dictionary(self) -> Dictionary:
        return Dictionary(self.matrices["D"], make_groups(self.manifest["group_sizes"]))

    @property
    def W(self):
        return self.matrices.get("W")

    @property
    def mode(self) -> str:
        return self.manifest["mode"]

    def to_bytes(self) -> bytes:
        out = io.BytesIO()
        out.write(MODEL_MAGIC)
        out.write(struct.pack("<H", MODEL_VERSION))
        text = json.dumps(self.manifest, sort_keys=True, separators=(",", ":")).encode()
        out.write(struct.pack("<I", len(text)))
        out.write(text)
        names = sorted(self.matrices)
        out.write(struct.pack("<H", len(names)))
        for name in names:
            raw = name.encode()
            body = matrix_to_bytes(self.matrices[name])
            out.write(struct.pack("<H", len(raw)))
            out.write(raw)
            out.write(struct.pack("<Q", len(body)))
            out.write(body)
        return out.getvalue()

    @classmethod
    def from_bytes(cls, buf: bytes) -> "ModelFile":
        view = memoryview(buf)
        pos = 0

        def take(n):
            nonlocal pos
            if pos + n > len(view):
                raise InvalidArgumentError("truncated model file")
            chunk = bytes(view[pos:pos + n])
            pos += n
            return chunk

        if take(8) != MODEL_MAGIC:
            raise InvalidArgumentError("not a model file (bad magic)")
        (version,) = struct.unpack("<H", take(2))
        if version != MODEL_VERSION:
            raise InvalidArgumentError(f"unsupported model version {version}")
        (n_text,) = struct.unpack("<I", take(4))
        manifest = json.loads(take(n_text).decode())
        (count,) = struct.unpack("<H", take(2))
        matrices = {}
        for _ in range(count):
            (n_name,) = struct.unpack("<H", take(2))
            name = take(n_name).decode()
            (n_body,) = struct.unpack("<Q", take(8))
            matrices[name] = matrix_from_bytes(take(n_body))
        if pos != len(view):
            raise InvalidArgumentError("trailing bytes after model sections")
        return cls(manifest, matrices)


def save_model(path, model: ModelFile):
    Path(path).write_bytes(model.to_bytes())


def load_model(path) -> ModelFile:
    return ModelFile.from_bytes(Path(path).read_bytes())


# ---------------------------------------------------------------------------
# features

def random_project(X, target_dim: int, seed=0, identity=False) -> np.ndarray:
    """Seeded Gaussian projection to ``target_dim`` rows, then unit-norm columns.

    The projection matrix has i.i.d. ``N(0, 1/target_dim)`` entries. With
    ``identity=True`` (requires ``target_dim == X.shape[0]``) only the
    normalization is applied.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise InvalidArgumentError(f"X must be 2-D, got shape {X.shape}")
    target_dim = int(target_dim)
    if target_dim <= 0:
        raise InvalidArgumentError(f"target_dim must be > 0, got {target_dim}")
    if identity:
        if target_dim != X.shape[0]:
            raise InvalidArgumentError("identity projection needs target_dim equal to the input dim")
        return normalize_columns(X)
    rng = np.random.default_rng(seed)
    P = rng.standard_normal((target_dim, X.shape[0])) / np.sqrt(target_dim)
    return normalize_columns(P @ X)
