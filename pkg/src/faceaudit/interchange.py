"""On-disk data model connecting attribution producers to the audit engine.

A dataset is catalogued by a JSON manifest that names, per sample, an RGB
image, a raw float32 attribution grid (`.f32`) and a raw uint8 region label
grid (`.lbl`). Grids carry no header; the manifest owns the dimensions.
"""

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import numpy as np

FORMAT_VERSION = 1

DEFAULT_REGION_NAMES = (
    "background",
    "skin",
    "l_brow",
    "r_brow",
    "l_eye",
    "r_eye",
    "eye_g",
    "l_ear",
    "r_ear",
    "ear_r",
    "nose",
    "mouth",
    "u_lip",
    "l_lip",
    "neck",
    "neck_l",
    "cloth",
    "hair",
    "hat",
)


class InterchangeError(ValueError):
    """Base class for manifest / grid file problems."""


class ManifestError(InterchangeError):
    """Manifest document is malformed or violates an invariant."""


class GridSizeError(InterchangeError):
    """A grid file's byte length disagrees with the manifest dimensions."""


class GridValueError(InterchangeError):
    """An attribution value is non-finite or outside [0, 1]."""


class LabelRangeError(InterchangeError):
    """A mask label falls outside the region table."""


@dataclass(frozen=True)
class RegionTable:
    """Ordered (label_id, name) pairs; label 0 is always the background."""

    entries: Tuple[Tuple[int, str], ...]

    def __post_init__(self):
        ids = [i for i, _ in self.entries]
        if ids != list(range(len(ids))):
            raise ManifestError(f"region ids must be contiguous from 0, got {ids}")
        if not self.entries or self.entries[0][1] != "background":
            raise ManifestError("region 0 must be named 'background'")
        names = [n for _, n in self.entries]
        if len(set(names)) != len(names):
            raise ManifestError("region names must be unique")

    @classmethod
    def default(cls) -> "RegionTable":
        return cls(tuple(enumerate(DEFAULT_REGION_NAMES)))

    def __len__(self) -> int:
        return len(self.entries)

    def name_of(self, label: int) -> str:
        if not 0 <= label < len(self.entries):
            raise LabelRangeError(f"label {label} outside table of size {len(self.entries)}")
        return self.entries[label][1]

    def label_of(self, name: str) -> int:
        for label, n in self.entries:
            if n == name:
                return label
        raise ManifestError(f"unknown region name {name!r}")

    def labels(self) -> List[int]:
        return [i for i, _ in self.entries]

    def foreground_labels(self) -> List[int]:
        return [i for i, _ in self.entries if i != 0]


@dataclass
class SampleRecord:
    id: str
    image_path: str
    attribution_path: str
    mask_path: str
    attributes: Dict[str, int] = field(default_factory=dict)
    label: Optional[int] = None
    prediction: Optional[int] = None

    def __post_init__(self):
        if not self.id:
            raise ManifestError("sample id must be non-empty")


@dataclass
class Manifest:
    height: int
    width: int
    region_table: RegionTable
    samples: List[SampleRecord]
    format_version: int = FORMAT_VERSION
    base_dir: Path = field(default_factory=Path, compare=False)

    def __post_init__(self):
        if self.format_version != FORMAT_VERSION:
            raise ManifestError(f"unknown format_version {self.format_version}")
        if self.height <= 0 or self.width <= 0:
            raise ManifestError(f"dimensions must be positive, got {self.height}x{self.width}")
        seen = set()
        for rec in self.samples:
            if rec.id in seen:
                raise ManifestError(f"duplicate sample id {rec.id!r}")
            seen.add(rec.id)

    @property
    def shape(self) -> Tuple[int, int]:
        return (self.height, self.width)

    def resolve(self, path: str) -> Path:
        p = Path(path)
        return p if p.is_absolute() else self.base_dir / p


def _sample_to_doc(rec: SampleRecord) -> dict:
    doc = {
        "id": rec.id,
        "image_path": rec.image_path,
        "attribution_path": rec.attribution_path,
        "mask_path": rec.mask_path,
        "attributes": rec.attributes,
    }
    if rec.label is not None:
        doc["label"] = rec.label
    if rec.prediction is not None:
        doc["prediction"] = rec.prediction
    return doc


def manifest_to_document(manifest: Manifest) -> dict:
    return {
        "format_version": manifest.format_version,
        "height": manifest.height,
        "width": manifest.width,
        "region_table": [{"id": i, "name": n} for i, n in manifest.region_table.entries],
        "samples": [_sample_to_doc(rec) for rec in manifest.samples],
    }


def manifest_from_document(doc: dict, base_dir: Path = Path(".")) -> Manifest:
    try:
        table = RegionTable(tuple((e["id"], e["name"]) for e in doc["region_table"]))
        samples = [
            SampleRecord(
                id=s["id"],
                image_path=s["image_path"],
                attribution_path=s["attribution_path"],
                mask_path=s["mask_path"],
                attributes=dict(s.get("attributes", {})),
                label=s.get("label"),
                prediction=s.get("prediction"),
            )
            for s in doc["samples"]
        ]
        return Manifest(
            height=doc["height"],
            width=doc["width"],
            region_table=table,
            samples=samples,
            format_version=doc["format_version"],
            base_dir=base_dir,
        )
    except (KeyError, TypeError) as exc:
        raise ManifestError(f"malformed manifest document: {exc}") from exc


def read_manifest(path) -> Manifest:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ManifestError(f"cannot read manifest {path}: {exc}") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ManifestError(f"manifest {path} is not valid JSON: {exc}") from exc
    return manifest_from_document(doc, base_dir=path.parent)


def write_manifest(manifest: Manifest, path) -> None:
    path = Path(path)
    doc = manifest_to_document(manifest)
    path.write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")


def manifest_digest(manifest: Manifest) -> str:
    """Stable content hash of the manifest; ties derived artifacts together."""
    canonical = json.dumps(manifest_to_document(manifest), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def load_attribution(record: SampleRecord, manifest: Manifest) -> np.ndarray:
    """Decode a `.f32` grid to an (H, W) float32 array, validating range."""
    path = manifest.resolve(record.attribution_path)
    h, w = manifest.shape
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise GridSizeError(f"cannot read attribution for {record.id!r}: {exc}") from exc
    expected = h * w * 4
    if len(raw) != expected:
        raise GridSizeError(
            f"attribution for {record.id!r}: {len(raw)} bytes, expected {expected}"
        )
    values = np.frombuffer(raw, dtype="<f4").reshape(h, w)
    bad = ~np.isfinite(values)
    if bad.any():
        idx = int(np.flatnonzero(bad)[0])
        raise GridValueError(f"attribution for {record.id!r}: non-finite value at pixel {idx}")
    out_of_range = (values < 0.0) | (values > 1.0)
    if out_of_range.any():
        idx = int(np.flatnonzero(out_of_range)[0])
        raise GridValueError(
            f"attribution for {record.id!r}: value {values.flat[idx]} outside [0,1] at pixel {idx}"
        )
    return values


def load_mask(record: SampleRecord, manifest: Manifest) -> np.ndarray:
    """Decode a `.lbl` grid to an (H, W) uint8 array, validating labels."""
    path = manifest.resolve(record.mask_path)
    h, w = manifest.shape
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise GridSizeError(f"cannot read mask for {record.id!r}: {exc}") from exc
    expected = h * w
    if len(raw) != expected:
        raise GridSizeError(f"mask for {record.id!r}: {len(raw)} bytes, expected {expected}")
    labels = np.frombuffer(raw, dtype=np.uint8).reshape(h, w)
    n_regions = len(manifest.region_table)
    if labels.max(initial=0) >= n_regions:
        idx = int(np.flatnonzero(labels >= n_regions)[0])
        raise LabelRangeError(
            f"mask for {record.id!r}: label {labels.flat[idx]} at pixel {idx} "
            f"outside table of size {n_regions}"
        )
    return labels


def save_attribution(values: np.ndarray, path) -> None:
    values = np.asarray(values, dtype=np.float32)
    if not np.isfinite(values).all():
        raise GridValueError("attribution contains non-finite values")
    if values.min() < 0.0 or values.max() > 1.0:
        raise GridValueError("attribution values must lie in [0,1]")
    Path(path).write_bytes(values.astype("<f4").tobytes(order="C"))


def save_mask(labels: np.ndarray, path, region_table: RegionTable) -> None:
    labels = np.asarray(labels, dtype=np.uint8)
    if labels.max(initial=0) >= len(region_table):
        raise LabelRangeError(f"label {labels.max()} outside table of size {len(region_table)}")
    Path(path).write_bytes(labels.tobytes(order="C"))


def _draw_key(seed: int, sample_id: str) -> bytes:
    # Keyed on (seed, id), not iteration position, so parallel readers agree.
    return hashlib.blake2b(f"{seed}:{sample_id}".encode("utf-8"), digest_size=16).digest()


def balance_subset(manifest: Manifest, target: str, attribute: str, seed: int) -> Manifest:
    """Trim the manifest so the four (target, attribute) cells have equal size.

    Each cell keeps the n samples with the smallest blake2b((seed, id)) keys,
    where n is the smallest cell size; original sample order is preserved.
    """
    cells: Dict[Tuple[int, int], List[SampleRecord]] = {
        (t, a): [] for t in (0, 1) for a in (0, 1)
    }
    for rec in manifest.samples:
        if target not in rec.attributes:
            raise ManifestError(f"sample {rec.id!r} missing attribute {target!r}")
        if attribute not in rec.attributes:
            raise ManifestError(f"sample {rec.id!r} missing attribute {attribute!r}")
        cells[(int(rec.attributes[target]), int(rec.attributes[attribute]))].append(rec)

    for cell, members in cells.items():
        if not members:
            raise ManifestError(f"cell (target={cell[0]}, attribute={cell[1]}) is empty")

    n = min(len(members) for members in cells.values())
    keep = set()
    for members in cells.values():
        chosen = sorted(members, key=lambda rec: _draw_key(seed, rec.id))[:n]
        keep.update(rec.id for rec in chosen)

    return Manifest(
        height=manifest.height,
        width=manifest.width,
        region_table=manifest.region_table,
        samples=[rec for rec in manifest.samples if rec.id in keep],
        base_dir=manifest.base_dir,
    )
