"""Base-feature data model and on-disk feature store.

A track's per-modality representation is a small float32 matrix of
per-segment features produced by frozen upstream encoders. This module owns
that data model, the binary ``.feat`` format used to persist it, the
frame-to-segment averaging used for video, and a deterministic hashing text
encoder that stands in for a pretrained sentence encoder.

Store layout::

    <root>/manifest.json
    <root>/<modality>/<track_id>.feat

Each ``.feat`` file is a 20-byte header (magic, format version, n, d as
little-endian uint32) followed by row-major little-endian float32 data.
"""

from __future__ import annotations

import hashlib
import json
import math
import re
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import kernels

MODALITIES = ("video", "music", "text")

MAGIC = b"VIMLFEAT"
FORMAT_VERSION = 1
_HEADER = struct.Struct("<8sIII")

_TRACK_ID_RE = re.compile(r"^[A-Za-z0-9._-]+$")


class StoreError(RuntimeError):
    """Base class for feature-store failures."""


class CorruptStoreError(StoreError):
    """A file or manifest entry disagrees with its recorded shape."""


class IncompleteStoreError(StoreError):
    """The manifest references files that do not exist."""


@dataclass
class BaseFeatureSequence:
    """An n x d matrix of per-segment features for one modality of one track.

    ``segment_seconds`` records the temporal span each row covers; it is
    carried as metadata for video/music and ignored for text, which is always
    a single track-level row (n=1).
    """

    track_id: str
    modality: str
    features: np.ndarray
    segment_seconds: float = 10.0

    def __post_init__(self) -> None:
        if self.modality not in MODALITIES:
            raise ValueError(f"unknown modality {self.modality!r}")
        if not _TRACK_ID_RE.match(self.track_id):
            raise ValueError(f"track_id {self.track_id!r} is not filesystem-safe")
        self.features = np.asarray(self.features, dtype=np.float32)
        if self.features.ndim != 2:
            raise ValueError("features must be a 2-D matrix")
        n, d = self.features.shape
        if n < 1 or d < 1:
            raise ValueError("features must have at least one row and column")
        if self.modality == "text" and n != 1:
            raise ValueError("text features are track-level: expected n=1")
        if self.segment_seconds <= 0:
            raise ValueError("segment_seconds must be positive")
        if not np.all(np.isfinite(self.features)):
            raise ValueError("features contain non-finite values")

    @property
    def n(self) -> int:
        return int(self.features.shape[0])

    @property
    def d(self) -> int:
        return int(self.features.shape[1])


def aggregate_frames(
    frames: Sequence[np.ndarray] | np.ndarray,
    fps: int,
    segment_seconds: float,
    track_id: str = "clip",
) -> BaseFeatureSequence:
    """Average per-frame feature vectors into fixed-duration segments.

    Window ``i`` covers frame indices ``[i*fps*segment_seconds,
    (i+1)*fps*segment_seconds)``; a trailing partial window is averaged over
    the frames it actually contains, so a 30-second clip at the default
    parameters yields exactly 3 rows.
    """
    if fps <= 0 or segment_seconds <= 0:
        raise ValueError("fps and segment_seconds must be positive")
    mat = np.asarray(frames, dtype=np.float64)
    if mat.size == 0:
        raise ValueError("empty input")
    if mat.ndim != 2:
        raise ValueError("frames must be a sequence of equal-length vectors")
    window = fps * segment_seconds
    if window < 1:
        raise ValueError("fps * segment_seconds must be at least 1 frame")
    if abs(window - round(window)) < 1e-9:
        out = kernels.window_mean(np.ascontiguousarray(mat), int(round(window)))
    else:
        # Non-integral windows: frame j belongs to window floor(j / window).
        m = mat.shape[0]
        n = math.ceil(m / window)
        out = np.empty((n, mat.shape[1]), dtype=np.float64)
        for i in range(n):
            lo = math.ceil(i * window - 1e-9)
            hi = min(math.ceil((i + 1) * window - 1e-9), m)
            out[i] = mat[lo:hi].mean(axis=0)
    return BaseFeatureSequence(
        track_id=track_id,
        modality="video",
        features=out.astype(np.float32),
        segment_seconds=float(segment_seconds),
    )


# ---------------------------------------------------------------------------
# Feature store
# ---------------------------------------------------------------------------


def _write_feat_file(path: Path, features: np.ndarray) -> None:
    n, d = features.shape
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, FORMAT_VERSION, n, d))
        fh.write(np.ascontiguousarray(features, dtype="<f4").tobytes())


def _read_feat_header(path: Path) -> tuple[int, int]:
    with open(path, "rb") as fh:
        raw = fh.read(_HEADER.size)
    if len(raw) != _HEADER.size:
        raise CorruptStoreError(f"corrupt store: truncated header in {path.name}")
    magic, version, n, d = _HEADER.unpack(raw)
    if magic != MAGIC:
        raise CorruptStoreError(f"corrupt store: bad magic in {path.name}")
    if version != FORMAT_VERSION:
        raise CorruptStoreError(f"corrupt store: unsupported version {version}")
    return n, d


def _read_feat_file(path: Path) -> np.ndarray:
    n, d = _read_feat_header(path)
    expected = _HEADER.size + 4 * n * d
    data = path.read_bytes()
    if len(data) != expected:
        raise CorruptStoreError(
            f"corrupt store: {path.name} holds {len(data)} bytes, expected {expected}"
        )
    mat = np.frombuffer(data, dtype="<f4", offset=_HEADER.size).reshape(n, d)
    return np.array(mat, dtype=np.float32)


@dataclass
class ManifestEntry:
    track_id: str
    modality: str
    file: str
    n: int
    d: int
    segment_seconds: float = 10.0


@dataclass
class FeatureStore:
    """Read-side handle over a store root with a validated manifest.

    Reads are safe to issue concurrently; writing a store requires exclusive
    access to its root directory.
    """

    root: Path
    entries: list[ManifestEntry] = field(default_factory=list)
    version: str = str(FORMAT_VERSION)

    def _index(self) -> dict[tuple[str, str], ManifestEntry]:
        return {(e.track_id, e.modality): e for e in self.entries}

    def track_ids(self, modality: str) -> list[str]:
        return [e.track_id for e in self.entries if e.modality == modality]

    def modalities(self) -> set[str]:
        return {e.modality for e in self.entries}

    def has(self, track_id: str, modality: str) -> bool:
        return (track_id, modality) in self._index()

    def dim(self, modality: str) -> int:
        for e in self.entries:
            if e.modality == modality:
                return e.d
        raise KeyError(f"store has no {modality} features")

    def load(self, track_id: str, modality: str) -> BaseFeatureSequence:
        entry = self._index().get((track_id, modality))
        if entry is None:
            raise KeyError(f"no {modality} features for track {track_id!r}")
        path = self.root / entry.file
        mat = _read_feat_file(path)
        if mat.shape != (entry.n, entry.d):
            raise CorruptStoreError(
                f"corrupt store: {entry.file} shape {mat.shape} does not match "
                f"manifest ({entry.n}, {entry.d})"
            )
        if not np.all(np.isfinite(mat)):
            raise CorruptStoreError(f"corrupt store: non-finite values in {entry.file}")
        return BaseFeatureSequence(
            track_id=track_id,
            modality=modality,
            features=mat,
            segment_seconds=entry.segment_seconds,
        )

    def load_all(self, modality: str) -> list[BaseFeatureSequence]:
        return [self.load(tid, modality) for tid in self.track_ids(modality)]


def write_store(
    sequences: Iterable[BaseFeatureSequence], root: str | Path
) -> FeatureStore:
    """Persist sequences under ``root`` and return the resulting store."""
    root = Path(root)
    sequences = list(sequences)
    seen: set[tuple[str, str]] = set()
    dims: dict[str, int] = {}
    for seq in sequences:
        key = (seq.track_id, seq.modality)
        if key in seen:
            raise ValueError(f"duplicate (track_id, modality): {key}")
        seen.add(key)
        if dims.setdefault(seq.modality, seq.d) != seq.d:
            raise ValueError(
                f"inconsistent {seq.modality} dimension: "
                f"{seq.d} vs {dims[seq.modality]}"
            )
    root.mkdir(parents=True, exist_ok=True)
    entries = []
    for seq in sequences:
        rel = f"{seq.modality}/{seq.track_id}.feat"
        (root / seq.modality).mkdir(exist_ok=True)
        _write_feat_file(root / rel, seq.features)
        entries.append(
            ManifestEntry(
                track_id=seq.track_id,
                modality=seq.modality,
                file=rel,
                n=seq.n,
                d=seq.d,
                segment_seconds=float(seq.segment_seconds),
            )
        )
    manifest = {
        "version": str(FORMAT_VERSION),
        "entries": [vars(e) for e in entries],
    }
    (root / "manifest.json").write_text(
        json.dumps(manifest, indent=2), encoding="utf-8"
    )
    return FeatureStore(root=root, entries=entries)


def read_store(root: str | Path) -> FeatureStore:
    """Open a store, validating that every manifest entry is backed by a file
    whose header matches the recorded shape."""
    root = Path(root)
    manifest_path = root / "manifest.json"
    if not manifest_path.exists():
        raise IncompleteStoreError(f"incomplete store: {manifest_path} missing")
    try:
        manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
        entries = [ManifestEntry(**raw) for raw in manifest["entries"]]
    except (json.JSONDecodeError, KeyError, TypeError) as exc:
        raise CorruptStoreError(f"corrupt store: malformed manifest ({exc})") from exc
    seen: set[tuple[str, str]] = set()
    for entry in entries:
        key = (entry.track_id, entry.modality)
        if key in seen:
            raise CorruptStoreError(f"corrupt store: duplicate manifest entry {key}")
        seen.add(key)
        path = root / entry.file
        if not path.exists():
            raise IncompleteStoreError(f"incomplete store: {entry.file} missing")
        n, d = _read_feat_header(path)
        if (n, d) != (entry.n, entry.d):
            raise CorruptStoreError(
                f"corrupt store: {entry.file} header ({n}, {d}) does not match "
                f"manifest ({entry.n}, {entry.d})"
            )
    return FeatureStore(root=root, entries=entries, version=str(manifest["version"]))


# ---------------------------------------------------------------------------
# Text feature provider
# ---------------------------------------------------------------------------


class HashingTextEncoder:
    """Deterministic bag-of-words sentence encoder.

    Stand-in for a frozen pretrained text encoder: each token maps to a fixed
    pseudo-random unit direction derived from a salted hash, and a sentence
    embeds as the L2-normalized sum of its token directions. Sentences sharing
    vocabulary therefore land near each other, which is all the trainable
    model above it needs. The empty string maps to the zero vector.
    """

    def __init__(self, dim: int = 512, seed: int = 0):
        self.dim = int(dim)
        self.seed = int(seed)
        self._cache: dict[str, np.ndarray] = {}

    def _token_vector(self, token: str) -> np.ndarray:
        vec = self._cache.get(token)
        if vec is None:
            digest = hashlib.blake2b(
                f"{self.seed}:{token}".encode("utf-8"), digest_size=8
            ).digest()
            rng = np.random.default_rng(int.from_bytes(digest, "little"))
            vec = rng.standard_normal(self.dim)
            vec /= np.linalg.norm(vec)
            self._cache[token] = vec
        return vec

    def encode(self, text: str) -> np.ndarray:
        """Embed ``text`` as a single row of shape (1, dim), float32."""
        tokens = re.findall(r"[a-z0-9']+", text.lower())
        if not tokens:
            return np.zeros((1, self.dim), dtype=np.float32)
        acc = np.zeros(self.dim, dtype=np.float64)
        for tok in tokens:
            acc += self._token_vector(tok)
        norm = np.linalg.norm(acc)
        if norm > 0:
            acc /= norm
        return acc[None, :].astype(np.float32)

    def sequence(self, track_id: str, text: str) -> BaseFeatureSequence:
        return BaseFeatureSequence(
            track_id=track_id, modality="text", features=self.encode(text)
        )
