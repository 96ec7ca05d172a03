"""Per-class truncated eigenbases and their binary container formats.

Each class keeps the mean of its training frames plus the leading left
singular vectors of the mean-centered snapshot matrix. Projecting an image
onto a class replaces it with the closest point of that class's affine
subspace (mean restored), which filters whatever the retained modes do not
span. Values of a projected image may leave [0, 1]; they are clamped only
when exported to 8-bit storage.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import BinaryIO, Sequence

import numpy as np

from .dataset import ClassLabel, Pair, assemble_snapshot_matrix
from .errors import CapacityError, ConfigError, DataFormatError, NumericError
from .svd import ThinSVD, select_rank, thin_svd, truncate

FACTORS_MAGIC = b"EIGH"
LIBRARY_MAGIC = b"EIGB"
FORMAT_VERSION = 1

# Below this relative spread the ensemble is treated as a single repeated
# image and gets the canonical one-mode basis instead of an SVD of noise.
DEGENERATE_SPREAD = 1e-12


@dataclass(frozen=True)
class ClassBasis:
    """Affine subspace of one class: mean image plus orthonormal modes.

    ``values`` holds the singular values behind the kept modes when the
    basis was built in-process; it is diagnostic only and not serialized.
    """

    label: ClassLabel
    mean: np.ndarray
    modes: np.ndarray
    values: np.ndarray | None = None

    @property
    def rank(self) -> int:
        return int(self.modes.shape[1])

    def center(self, vectors: np.ndarray) -> np.ndarray:
        return vectors - (self.mean[:, None] if vectors.ndim == 2 else self.mean)

    def project(self, vectors: np.ndarray) -> np.ndarray:
        """Mean-restored projection, column-wise for 2-D input."""
        centered = self.center(vectors)
        fitted = self.modes @ (self.modes.T @ centered)
        return fitted + (self.mean[:, None] if vectors.ndim == 2 else self.mean)

    def residuals(self, vectors: np.ndarray) -> np.ndarray:
        """Distance of each column (or of a single vector) to the subspace."""
        centered = self.center(vectors)
        off = centered - self.modes @ (self.modes.T @ centered)
        return np.linalg.norm(off, axis=0 if off.ndim == 2 else None)


@dataclass
class BasisLibrary:
    """All class bases of one view plus build provenance.

    ``provenance`` records how the library was built (rank rule, warnings,
    source description); it rides along in the serialized file so a loaded
    library still explains itself.
    """

    frame_shape: tuple[int, int]
    bases: tuple[ClassBasis, ...]
    provenance: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        ids = [b.label.id for b in self.bases]
        if ids != sorted(set(ids)):
            raise ConfigError("library bases must be unique and sorted by class id")
        j = self.frame_shape[0] * self.frame_shape[1]
        for b in self.bases:
            if b.mean.shape != (j,) or b.modes.shape[0] != j:
                raise ConfigError(
                    f"class {b.label.code}: basis dimension does not match "
                    f"frame shape {self.frame_shape}"
                )

    @property
    def class_count(self) -> int:
        return len(self.bases)

    def basis_for(self, class_id: int) -> ClassBasis:
        for b in self.bases:
            if b.label.id == class_id:
                return b
        raise ConfigError(f"no basis for class id {class_id}")


def build_class_basis(
    frames: Sequence[np.ndarray],
    label: ClassLabel,
    rank: int | None = None,
    tolerance: float | None = None,
    method: str = "auto",
) -> tuple[ClassBasis, ThinSVD | None, list[str]]:
    """Mean-center a class ensemble and keep the leading modes.

    Returns the basis, the full (untruncated) SVD for diagnostics, and any
    warnings. An ensemble of identical frames has a zero centered matrix;
    it falls back to the canonical first-coordinate mode so every class
    always offers at least one direction.
    """
    matrix = assemble_snapshot_matrix(frames)
    j, k = matrix.shape
    mean = matrix.mean(axis=1)
    centered = matrix - mean[:, None]
    spread = np.linalg.norm(centered)
    scale = max(np.linalg.norm(matrix), 1.0)
    if spread <= DEGENERATE_SPREAD * scale:
        modes = np.zeros((j, 1))
        modes[0, 0] = 1.0
        warning = (
            f"class {label.code}: all {k} frames identical; "
            "using canonical one-mode basis"
        )
        basis = ClassBasis(label, mean, modes, values=np.zeros(1))
        return basis, None, [warning]
    svd = thin_svd(centered, method=method)
    r = select_rank(svd, (j, k), rank=rank, tolerance=tolerance)
    kept = truncate(svd, r)
    warnings = []
    if rank is not None and rank > svd.rank:
        warnings.append(
            f"class {label.code}: requested rank {rank} capped at {svd.rank}"
        )
    basis = ClassBasis(label, mean, kept.modes.copy(), values=kept.values.copy())
    return basis, svd, warnings


def build_library(
    pairs: Sequence[Pair],
    frame_shape: tuple[int, int],
    rank: int | None = None,
    tolerance: float | None = None,
    method: str = "auto",
    source: str = "",
) -> BasisLibrary:
    """One basis per class from labeled frames (normally the train split)."""
    if not pairs:
        raise CapacityError("no frames to build a basis library from")
    grouped: dict[int, tuple[ClassLabel, list[np.ndarray]]] = {}
    for image, label in pairs:
        grouped.setdefault(label.id, (label, []))[1].append(image)
    bases = []
    warnings: list[str] = []
    for class_id in sorted(grouped):
        label, frames = grouped[class_id]
        basis, _, notes = build_class_basis(
            frames, label, rank=rank, tolerance=tolerance, method=method
        )
        bases.append(basis)
        warnings.extend(notes)
    if rank is not None:
        rule = {"kind": "fixed", "rank": rank}
    elif tolerance is not None:
        rule = {"kind": "energy", "tolerance": tolerance}
    else:
        rule = {"kind": "hard-threshold"}
    provenance = {
        "rank_rule": rule,
        "ranks": {b.label.code: b.rank for b in bases},
        "training_frames": {
            b.label.code: len(grouped[b.label.id][1]) for b in bases
        },
        "source": source,
        "warnings": warnings,
    }
    return BasisLibrary(frame_shape, tuple(bases), provenance)


def project_pairs(library: BasisLibrary, pairs: Sequence[Pair]) -> list[Pair]:
    """Project every frame onto its own class's subspace.

    This uses the true label, which is legitimate for preprocessing
    training data but leaks labels when applied to evaluation partitions;
    callers reporting results on projected evaluation data must say so.
    """
    h, w = library.frame_shape
    out: list[Pair] = []
    for image, label in pairs:
        basis = library.basis_for(label.id)
        projected = basis.project(image.reshape(-1)).reshape(h, w)
        out.append((projected, label))
    return out


# ---------------------------------------------------------------------------
# Serialization. Both containers are little-endian: a 4-byte magic, a u32
# version, fixed-width integer fields, then float64 payloads. Matrices are
# stored column-major so columns (modes) stay contiguous.
# ---------------------------------------------------------------------------


def _write_array(stream: BinaryIO, array: np.ndarray) -> None:
    stream.write(np.asarray(array, dtype="<f8").tobytes(order="F"))


def _read_exact(stream: BinaryIO, count: int, what: str) -> bytes:
    data = stream.read(count)
    if len(data) != count:
        raise DataFormatError(f"truncated file while reading {what}")
    return data


def _read_array(stream: BinaryIO, shape: tuple[int, ...], what: str) -> np.ndarray:
    count = int(np.prod(shape)) if shape else 1
    data = _read_exact(stream, 8 * count, what)
    array = np.frombuffer(data, dtype="<f8").reshape(shape, order="F")
    return np.asarray(array, dtype=np.float64, order="C").copy()


def _check_header(stream: BinaryIO, magic: bytes, path: Path) -> None:
    got = _read_exact(stream, 4, "magic")
    if got != magic:
        raise DataFormatError(
            f"{path}: bad magic {got!r}, expected {magic.decode('ascii')!r}"
        )
    (version,) = struct.unpack("<I", _read_exact(stream, 4, "version"))
    if version != FORMAT_VERSION:
        raise DataFormatError(f"{path}: unsupported format version {version}")


def save_factors(svd: ThinSVD, path: str | Path) -> None:
    """Write thin-SVD factors: J, K, r, then sigma, W, T."""
    j = svd.modes.shape[0]
    k = svd.coeffs.shape[0]
    with open(path, "wb") as stream:
        stream.write(FACTORS_MAGIC)
        stream.write(struct.pack("<I", FORMAT_VERSION))
        stream.write(struct.pack("<QQQ", j, k, svd.rank))
        _write_array(stream, svd.values)
        _write_array(stream, svd.modes)
        _write_array(stream, svd.coeffs)


def load_factors(path: str | Path) -> ThinSVD:
    path = Path(path)
    with open(path, "rb") as stream:
        _check_header(stream, FACTORS_MAGIC, path)
        j, k, r = struct.unpack("<QQQ", _read_exact(stream, 24, "dimensions"))
        if r > min(j, k):
            raise DataFormatError(f"{path}: rank {r} exceeds min({j}, {k})")
        values = _read_array(stream, (r,), "singular values")
        modes = _read_array(stream, (j, r), "modes")
        coeffs = _read_array(stream, (k, r), "coefficients")
        if stream.read(1):
            raise DataFormatError(f"{path}: trailing bytes after factors")
    if np.any(values < 0) or np.any(np.diff(values) > 0):
        raise DataFormatError(f"{path}: singular values not nonincreasing")
    if not (np.isfinite(values).all() and np.isfinite(modes).all()):
        raise NumericError(f"{path}: non-finite factor entries")
    return ThinSVD(modes=modes, values=values, coeffs=coeffs)


def save_library(library: BasisLibrary, path: str | Path) -> None:
    """Write a basis library: shape, provenance JSON, then per-class
    (id, code, rank, mean, modes) blocks in class-id order."""
    blob = json.dumps(library.provenance, sort_keys=True).encode("utf-8")
    h, w = library.frame_shape
    with open(path, "wb") as stream:
        stream.write(LIBRARY_MAGIC)
        stream.write(struct.pack("<I", FORMAT_VERSION))
        stream.write(struct.pack("<I", library.class_count))
        stream.write(struct.pack("<QQ", h, w))
        stream.write(struct.pack("<Q", len(blob)))
        stream.write(blob)
        for basis in library.bases:
            code = basis.label.code.encode("utf-8")
            stream.write(struct.pack("<I", basis.label.id))
            stream.write(struct.pack("<I", len(code)))
            stream.write(code)
            stream.write(struct.pack("<Q", basis.rank))
            _write_array(stream, basis.mean)
            _write_array(stream, basis.modes)


def load_library(path: str | Path) -> BasisLibrary:
    path = Path(path)
    with open(path, "rb") as stream:
        _check_header(stream, LIBRARY_MAGIC, path)
        (count,) = struct.unpack("<I", _read_exact(stream, 4, "class count"))
        h, w = struct.unpack("<QQ", _read_exact(stream, 16, "frame shape"))
        (blob_len,) = struct.unpack("<Q", _read_exact(stream, 8, "provenance size"))
        try:
            provenance = json.loads(_read_exact(stream, blob_len, "provenance"))
        except json.JSONDecodeError as exc:
            raise DataFormatError(f"{path}: provenance is not valid JSON") from exc
        j = h * w
        bases = []
        for _ in range(count):
            (class_id,) = struct.unpack("<I", _read_exact(stream, 4, "class id"))
            (code_len,) = struct.unpack("<I", _read_exact(stream, 4, "code size"))
            code = _read_exact(stream, code_len, "class code").decode("utf-8")
            (rank,) = struct.unpack("<Q", _read_exact(stream, 8, "rank"))
            if not 1 <= rank <= j:
                raise DataFormatError(f"{path}: class {code}: bad rank {rank}")
            mean = _read_array(stream, (j,), f"class {code} mean")
            modes = _read_array(stream, (j, rank), f"class {code} modes")
            bases.append(ClassBasis(ClassLabel(class_id, code), mean, modes))
        if stream.read(1):
            raise DataFormatError(f"{path}: trailing bytes after bases")
    for basis in bases:
        if not (np.isfinite(basis.mean).all() and np.isfinite(basis.modes).all()):
            raise NumericError(f"{path}: class {basis.label.code}: non-finite basis")
    return BasisLibrary((int(h), int(w)), tuple(bases), provenance)
