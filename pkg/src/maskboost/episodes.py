"""Dataset manifests, 4-fold class splits, and seeded episode sampling.

The sampler uses a counter-mode generator over SHA-256 rather than a
language-builtin PRNG: the byte stream for a given seed is pinned by the
hash function itself, so episode lists reproduce across platforms,
Python versions, and reimplementations in other languages.
"""

from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

from .errors import (
    ConfigError,
    IndivisibleClassCount,
    InsufficientSamples,
    MissingMask,
)

SCHEME_CONTIGUOUS = "contiguous"
SCHEME_INTERLEAVED = "interleaved"
SPLIT_SCHEMES = (SCHEME_CONTIGUOUS, SCHEME_INTERLEAVED)

N_FOLDS = 4

# Conventional fold schemes for the two standard benchmarks.
_DEFAULT_SCHEMES = {"pascal5i": SCHEME_CONTIGUOUS, "coco20i": SCHEME_INTERLEAVED}


class CounterRng:
    """Deterministic RNG: SHA-256 over (seed, block counter) in counter mode.

    Block i of the stream is SHA-256(big-endian uint64 seed || big-endian
    uint64 i). Integers below a bound are drawn from 8-byte words of the
    stream by rejection sampling, so every admissible value is exactly
    equally likely and the sequence is identical on every platform.
    """

    _WORDS_PER_BLOCK = 4  # 32-byte digest = 4 uint64 words

    def __init__(self, seed: int) -> None:
        if seed < 0:
            raise ValueError("seed must be nonnegative")
        self._seed = seed
        self._block = 0
        self._words: List[int] = []

    def _refill(self) -> None:
        digest = hashlib.sha256(
            struct.pack(">QQ", self._seed, self._block)
        ).digest()
        self._block += 1
        self._words = list(struct.unpack(">QQQQ", digest))

    def _next_word(self) -> int:
        if not self._words:
            self._refill()
        return self._words.pop(0)

    def randbelow(self, bound: int) -> int:
        """Uniform integer in [0, bound)."""
        if bound <= 0:
            raise ValueError("bound must be positive")
        if bound == 1:
            return 0
        # Reject the tail of the 64-bit range that does not divide evenly.
        limit = (1 << 64) - ((1 << 64) % bound)
        while True:
            word = self._next_word()
            if word < limit:
                return word % bound

    def sample_without_replacement(self, pool: Sequence, k: int) -> list:
        """First k elements of a partial Fisher-Yates shuffle of pool."""
        if k > len(pool):
            raise ValueError(f"cannot draw {k} from {len(pool)} items")
        items = list(pool)
        for i in range(k):
            j = i + self.randbelow(len(items) - i)
            items[i], items[j] = items[j], items[i]
        return items[:k]


@dataclass(frozen=True)
class ManifestEntry:
    image_ref: str
    gt_mask_ref: str
    class_id: int


@dataclass(frozen=True)
class DatasetManifest:
    name: str
    class_count: int
    entries: Tuple[ManifestEntry, ...]
    split_scheme: str

    def __post_init__(self) -> None:
        if self.class_count < 1:
            raise ConfigError(f"class_count must be positive, got {self.class_count}")
        if self.split_scheme not in SPLIT_SCHEMES:
            raise ConfigError(f"unknown split scheme {self.split_scheme!r}")
        for e in self.entries:
            if not 1 <= e.class_id <= self.class_count:
                raise ConfigError(
                    f"entry {e.image_ref!r} has class_id {e.class_id} "
                    f"outside [1, {self.class_count}]"
                )

    def entries_for_class(self, class_id: int) -> List[ManifestEntry]:
        return [e for e in self.entries if e.class_id == class_id]


@dataclass(frozen=True)
class SupportRef:
    image_ref: str
    mask_ref: str


@dataclass(frozen=True)
class Episode:
    id: str
    fold: int
    class_id: int
    k: int
    query_image_ref: str
    query_gt_mask_ref: str
    supports: Tuple[SupportRef, ...]
    fss_mask_ref: str

    def __post_init__(self) -> None:
        if len(self.supports) != self.k:
            raise ValueError(f"episode {self.id}: {len(self.supports)} supports, k={self.k}")
        for s in self.supports:
            if s.image_ref == self.query_image_ref:
                raise ValueError(f"episode {self.id}: query appears in supports")


def default_split_scheme(name: str) -> str:
    return _DEFAULT_SCHEMES.get(name, SCHEME_CONTIGUOUS)


def fold_classes(manifest: DatasetManifest, fold: int) -> List[int]:
    """Class ids belonging to one of the four evaluation folds."""
    if not 0 <= fold < N_FOLDS:
        raise ConfigError(f"fold must be in [0, {N_FOLDS - 1}], got {fold}")
    n = manifest.class_count
    if n % N_FOLDS != 0:
        raise IndivisibleClassCount(
            f"class_count {n} is not divisible by {N_FOLDS}"
        )
    if manifest.split_scheme == SCHEME_CONTIGUOUS:
        per = n // N_FOLDS
        return list(range(fold * per + 1, (fold + 1) * per + 1))
    return [c for c in range(1, n + 1) if (c - 1) % N_FOLDS == fold]


def _stem(ref: str) -> str:
    return Path(ref).stem


def sample_episodes(
    manifest: DatasetManifest,
    fold: int,
    n: int = 1000,
    k: int = 1,
    seed: int = 0,
    fss_dir: Optional[str] = None,
) -> List[Episode]:
    """Draw n seeded episodes from one fold.

    Per episode: a class uniform over the fold's classes, a query uniform
    over that class's entries, and k supports without replacement from
    the remaining entries of the class. fss_mask_ref defaults to
    <fss_dir>/<episode_id>.png when fss_dir is given, else "".
    """
    classes = fold_classes(manifest, fold)
    pools: Dict[int, List[ManifestEntry]] = {
        c: manifest.entries_for_class(c) for c in classes
    }
    for c, pool in pools.items():
        if len(pool) < k + 1:
            raise InsufficientSamples(
                f"class {c} has {len(pool)} entries; needs at least {k + 1} "
                f"for a query plus {k} supports"
            )
    rng = CounterRng(seed)
    episodes: List[Episode] = []
    for index in range(n):
        class_id = classes[rng.randbelow(len(classes))]
        pool = pools[class_id]
        query = pool[rng.randbelow(len(pool))]
        others = [e for e in pool if e is not query]
        supports = rng.sample_without_replacement(others, k)
        episode_id = (
            f"{manifest.name}_f{fold}_c{class_id}_{_stem(query.image_ref)}"
            f"_s{seed}_{index:05d}"
        )
        fss_ref = str(Path(fss_dir) / f"{episode_id}.png") if fss_dir else ""
        episodes.append(
            Episode(
                id=episode_id,
                fold=fold,
                class_id=class_id,
                k=k,
                query_image_ref=query.image_ref,
                query_gt_mask_ref=query.gt_mask_ref,
                supports=tuple(
                    SupportRef(s.image_ref, s.gt_mask_ref) for s in supports
                ),
                fss_mask_ref=fss_ref,
            )
        )
    return episodes


# --- manifest and episode file formats ---------------------------------------


def manifest_from_dict(payload: dict) -> DatasetManifest:
    try:
        name = payload["name"]
        class_count = int(payload["class_count"])
        raw_entries = payload["entries"]
    except KeyError as exc:
        raise ConfigError(f"manifest missing field {exc}") from exc
    scheme = payload.get("split_scheme") or default_split_scheme(name)
    entries = []
    for i, e in enumerate(raw_entries):
        try:
            entries.append(
                ManifestEntry(
                    image_ref=e["image_ref"],
                    gt_mask_ref=e["gt_mask_ref"],
                    class_id=int(e["class_id"]),
                )
            )
        except KeyError as exc:
            raise ConfigError(f"manifest entry {i} missing field {exc}") from exc
    return DatasetManifest(
        name=name,
        class_count=class_count,
        entries=tuple(entries),
        split_scheme=scheme,
    )


def manifest_to_dict(manifest: DatasetManifest) -> dict:
    return {
        "name": manifest.name,
        "class_count": manifest.class_count,
        "split_scheme": manifest.split_scheme,
        "entries": [
            {
                "image_ref": e.image_ref,
                "gt_mask_ref": e.gt_mask_ref,
                "class_id": e.class_id,
            }
            for e in manifest.entries
        ],
    }


def load_manifest(path) -> DatasetManifest:
    path = Path(path)
    try:
        payload = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read manifest {path}: {exc}") from exc
    return manifest_from_dict(payload)


def save_manifest(manifest: DatasetManifest, path) -> None:
    Path(path).write_text(
        json.dumps(manifest_to_dict(manifest), indent=2) + "\n", encoding="utf-8"
    )


def validate_manifest(manifest: DatasetManifest, base_dir) -> List[str]:
    """Check that every referenced ground-truth mask exists under base_dir.

    Returns the list of missing refs; raises MissingMask if any.
    """
    base = Path(base_dir)
    missing = [
        e.gt_mask_ref
        for e in manifest.entries
        if not (base / e.gt_mask_ref).exists()
    ]
    if missing:
        raise MissingMask(
            f"{len(missing)} referenced mask(s) missing, first: {missing[0]}"
        )
    return missing


def episode_to_dict(ep: Episode) -> dict:
    return {
        "id": ep.id,
        "fold": ep.fold,
        "class_id": ep.class_id,
        "k": ep.k,
        "query": {"image_ref": ep.query_image_ref, "gt_mask_ref": ep.query_gt_mask_ref},
        "supports": [
            {"image_ref": s.image_ref, "mask_ref": s.mask_ref} for s in ep.supports
        ],
        "fss_mask_ref": ep.fss_mask_ref,
    }


def episode_from_dict(payload: dict) -> Episode:
    try:
        return Episode(
            id=payload["id"],
            fold=int(payload["fold"]),
            class_id=int(payload["class_id"]),
            k=int(payload["k"]),
            query_image_ref=payload["query"]["image_ref"],
            query_gt_mask_ref=payload["query"]["gt_mask_ref"],
            supports=tuple(
                SupportRef(s["image_ref"], s["mask_ref"])
                for s in payload["supports"]
            ),
            fss_mask_ref=payload.get("fss_mask_ref", ""),
        )
    except KeyError as exc:
        raise ConfigError(f"episode record missing field {exc}") from exc


def write_episodes_jsonl(episodes: Sequence[Episode], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for ep in episodes:
            fh.write(json.dumps(episode_to_dict(ep), sort_keys=True) + "\n")


def read_episodes_jsonl(path) -> List[Episode]:
    out = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                out.append(episode_from_dict(json.loads(line)))
    return out
