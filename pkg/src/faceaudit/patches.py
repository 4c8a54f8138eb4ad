"""High-impact patch mining.

Images are tiled into Z x Z patches; a patch's score for a region is the
attribution mass falling on that region inside the patch. The globally
best-scoring patches per region are kept with a bounded selector so the full
score list is never materialized.
"""

import heapq
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np
from PIL import Image

from .interchange import Manifest, SampleRecord, load_attribution, load_mask


@dataclass(frozen=True)
class PatchGrid:
    """Uniform Z x Z tiling of an H x W image; Z must divide both sides."""

    patch_size: int
    rows: int
    cols: int

    @classmethod
    def for_shape(cls, height: int, width: int, patch_size: int) -> "PatchGrid":
        if patch_size < 1:
            raise ValueError(f"patch size must be >= 1, got {patch_size}")
        if height % patch_size or width % patch_size:
            raise ValueError(
                f"patch size {patch_size} does not tile {height}x{width} exactly; "
                f"re-extract grids at a resolution divisible by {patch_size}"
            )
        return cls(patch_size=patch_size, rows=height // patch_size, cols=width // patch_size)

    @property
    def patch_count(self) -> int:
        return self.rows * self.cols

    def bbox(self, patch_index: int) -> Tuple[int, int, int, int]:
        row, col = divmod(patch_index, self.cols)
        return (row * self.patch_size, col * self.patch_size, self.patch_size, self.patch_size)


@dataclass(frozen=True)
class PatchRecord:
    sample_id: str
    patch_index: int
    region: int
    score: float
    bbox: Tuple[int, int, int, int]  # (row_off, col_off, height, width)


@dataclass
class TopKSet:
    region: int
    k: int
    records: List[PatchRecord] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.records)


def score_patches(
    attribution: np.ndarray, mask: np.ndarray, grid: PatchGrid, region: int
) -> np.ndarray:
    """Attribution mass of `region` in each patch, patch-index (row-major) order."""
    if attribution.shape != mask.shape:
        raise ValueError(
            f"attribution {attribution.shape} and mask {mask.shape} dimensions differ"
        )
    h, w = attribution.shape
    if grid.rows * grid.patch_size != h or grid.cols * grid.patch_size != w:
        raise ValueError(f"grid {grid} does not match {h}x{w} maps")
    if region < 0:
        raise ValueError(f"invalid region label {region}")
    z = grid.patch_size
    masked = np.where(mask == region, attribution.astype(np.float64), 0.0)
    return masked.reshape(grid.rows, z, grid.cols, z).sum(axis=(1, 3)).ravel()


class BoundedTopK:
    """Streaming best-k selector over (score, sample position, patch index).

    Candidates are totally ordered: higher score wins, then earlier manifest
    position, then lower patch index, so any merge tree of partial selectors
    yields the same final set. Zero scores are never admitted.
    """

    def __init__(self, k: int):
        if k < 1:
            raise ValueError(f"k must be >= 1, got {k}")
        self.k = k
        self._heap: List[Tuple[Tuple[float, int, int], str]] = []

    def offer(self, score: float, sample_pos: int, patch_index: int, sample_id: str) -> None:
        if score <= 0.0:
            return
        key = (float(score), -sample_pos, -patch_index)
        if len(self._heap) < self.k:
            heapq.heappush(self._heap, (key, sample_id))
        elif key > self._heap[0][0]:
            heapq.heapreplace(self._heap, (key, sample_id))

    def merge(self, other: "BoundedTopK") -> None:
        for key, sample_id in other._heap:
            score, neg_pos, neg_q = key
            self.offer(score, -neg_pos, -neg_q, sample_id)

    def ranked(self) -> List[Tuple[float, int, int, str]]:
        """(score, sample_pos, patch_index, sample_id), best first."""
        ordered = sorted(self._heap, key=lambda item: item[0], reverse=True)
        return [(key[0], -key[1], -key[2], sid) for key, sid in ordered]


def topk_patches(manifest: Manifest, region: int, patch_size: int, k: int) -> TopKSet:
    """Globally highest-scoring patches for one region across all samples."""
    if region < 0 or region >= len(manifest.region_table):
        raise ValueError(f"region {region} outside table of size {len(manifest.region_table)}")
    grid = PatchGrid.for_shape(manifest.height, manifest.width, patch_size)
    selector = BoundedTopK(k)
    for pos, record in enumerate(manifest.samples):
        attribution = load_attribution(record, manifest)
        mask = load_mask(record, manifest)
        scores = score_patches(attribution, mask, grid, region)
        for q in np.flatnonzero(scores):
            selector.offer(float(scores[q]), pos, int(q), record.id)
    return topk_from_selector(selector, region, grid, k)


def topk_from_selector(selector: BoundedTopK, region: int, grid: PatchGrid, k: int) -> TopKSet:
    records = [
        PatchRecord(
            sample_id=sample_id,
            patch_index=q,
            region=region,
            score=score,
            bbox=grid.bbox(q),
        )
        for score, _pos, q, sample_id in selector.ranked()
    ]
    return TopKSet(region=region, k=k, records=records)


def extract_patch_pixels(record: PatchRecord, manifest: Manifest) -> np.ndarray:
    """Crop the patch's pixels from its source image as (Z, Z, 3) uint8."""
    sample = _find_sample(manifest, record.sample_id)
    path = manifest.resolve(sample.image_path)
    if not path.exists():
        raise FileNotFoundError(f"image for sample {record.sample_id!r} missing: {path}")
    with Image.open(path) as img:
        pixels = np.asarray(img.convert("RGB"))
    if pixels.shape[:2] != manifest.shape:
        raise ValueError(
            f"image for sample {record.sample_id!r} is {pixels.shape[1]}x{pixels.shape[0]}, "
            f"manifest says {manifest.width}x{manifest.height}"
        )
    r, c, h, w = record.bbox
    return pixels[r : r + h, c : c + w]


def build_mosaic(
    topk: TopKSet, manifest: Manifest, per_row: int = 10, separator: int = 2
) -> Optional[Image.Image]:
    """Patches laid out in rank order, `per_row` per row, black separators.

    Returns None when the set is empty.
    """
    if not topk.records:
        return None
    z = topk.records[0].bbox[2]
    n = len(topk.records)
    cols = min(per_row, n)
    rows = (n + per_row - 1) // per_row
    width = cols * z + (cols - 1) * separator
    height = rows * z + (rows - 1) * separator
    canvas = np.zeros((height, width, 3), dtype=np.uint8)
    for rank, record in enumerate(topk.records):
        row, col = divmod(rank, per_row)
        y = row * (z + separator)
        x = col * (z + separator)
        canvas[y : y + z, x : x + z] = extract_patch_pixels(record, manifest)
    return Image.fromarray(canvas)


def _find_sample(manifest: Manifest, sample_id: str) -> SampleRecord:
    for record in manifest.samples:
        if record.id == sample_id:
            return record
    raise KeyError(f"sample {sample_id!r} not in manifest")
