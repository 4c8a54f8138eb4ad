import json
from pathlib import Path

import numpy as np
import pytest
from PIL import Image

from faceaudit.interchange import (
    Manifest,
    RegionTable,
    SampleRecord,
    save_attribution,
    save_mask,
    write_manifest,
)


def write_bundle(root: Path, grids, height, width, attrs=None, table=None) -> Path:
    """Write a complete on-disk dataset: manifest + images + grids.

    `grids` is a list of (sample_id, attribution HxW float array, mask HxW
    uint8 array). Returns the manifest path.
    """
    table = table or RegionTable.default()
    attrs = attrs or {}
    root.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(7)
    samples = []
    for sample_id, attribution, mask in grids:
        save_attribution(np.asarray(attribution, dtype=np.float32), root / f"{sample_id}.f32")
        save_mask(np.asarray(mask, dtype=np.uint8), root / f"{sample_id}.lbl", table)
        pixels = rng.integers(0, 256, size=(height, width, 3), dtype=np.uint8)
        Image.fromarray(pixels).save(root / f"{sample_id}.png")
        samples.append(
            SampleRecord(
                id=sample_id,
                image_path=f"{sample_id}.png",
                attribution_path=f"{sample_id}.f32",
                mask_path=f"{sample_id}.lbl",
                attributes=dict(attrs.get(sample_id, {})),
            )
        )
    manifest = Manifest(
        height=height, width=width, region_table=table, samples=samples, base_dir=root
    )
    path = root / "manifest.json"
    write_manifest(manifest, path)
    return path


def biased_grids(n, height, width, hot_region, regions=(1, 10, 11, 17), seed=0):
    """Synthetic samples whose attribution mass concentrates in `hot_region`.

    The image rows are split evenly among `regions` (hot_region must be one
    of them); attribution is ~0.9 on the hot region and ~0.05 elsewhere.
    """
    assert hot_region in regions
    rng = np.random.default_rng(seed)
    band = height // len(regions)
    mask = np.zeros((height, width), dtype=np.uint8)
    for i, r in enumerate(regions):
        top = i * band
        bottom = height if i == len(regions) - 1 else (i + 1) * band
        mask[top:bottom] = r
    grids = []
    for i in range(n):
        attribution = rng.uniform(0.0, 0.1, size=(height, width)).astype(np.float32)
        hot = mask == hot_region
        attribution[hot] = rng.uniform(0.8, 1.0, size=int(hot.sum())).astype(np.float32)
        grids.append((f"s{i:03d}", attribution, mask))
    return grids


@pytest.fixture
def default_table():
    return RegionTable.default()


@pytest.fixture
def tiny_manifest(tmp_path):
    """Three 4x4 samples over skin/hair with simple deterministic grids."""
    mask = np.array(
        [[1, 1, 17, 17]] * 4, dtype=np.uint8
    )
    grids = [
        ("a", np.full((4, 4), 0.5, dtype=np.float32), mask),
        ("b", np.full((4, 4), 0.25, dtype=np.float32), mask),
        ("c", np.zeros((4, 4), dtype=np.float32), mask),
    ]
    return write_bundle(tmp_path / "tiny", grids, 4, 4)


def read_json(path):
    return json.loads(Path(path).read_text(encoding="utf-8"))
