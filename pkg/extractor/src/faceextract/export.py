"""Writers for the audit engine's interchange formats.

Deliberately self-contained: the byte-level contracts (JSON manifest,
raw little-endian float32 attribution grids, raw uint8 label grids) are
re-implemented here so the producer and the consumer only share the files.
"""

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional

import numpy as np
from PIL import Image

FORMAT_VERSION = 1

REGION_NAMES = (
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


class ExportError(ValueError):
    pass


@dataclass
class ExportSample:
    sample_id: str
    image: np.ndarray  # (H, W, 3) uint8
    attribution: np.ndarray  # (H, W) float in [0, 1]
    mask: np.ndarray  # (H, W) integer region labels
    attributes: Dict[str, int] = field(default_factory=dict)
    label: Optional[int] = None
    prediction: Optional[int] = None


def _check_sample(sample: ExportSample, shape) -> None:
    if sample.image.shape[:2] != shape or sample.image.shape[2:] != (3,):
        raise ExportError(f"{sample.sample_id}: image shape {sample.image.shape} != {shape}+RGB")
    if sample.attribution.shape != shape:
        raise ExportError(
            f"{sample.sample_id}: attribution shape {sample.attribution.shape} != {shape}"
        )
    if sample.mask.shape != shape:
        raise ExportError(f"{sample.sample_id}: mask shape {sample.mask.shape} != {shape}")
    if not np.isfinite(sample.attribution).all():
        raise ExportError(f"{sample.sample_id}: attribution contains non-finite values")
    if sample.attribution.min() < 0.0 or sample.attribution.max() > 1.0:
        raise ExportError(f"{sample.sample_id}: attribution values outside [0,1]")
    if sample.mask.min() < 0 or sample.mask.max() >= len(REGION_NAMES):
        raise ExportError(f"{sample.sample_id}: mask labels outside the region table")


def export_manifest(samples: List[ExportSample], out_dir) -> Path:
    """Write images, grids, and the manifest; returns the manifest path."""
    if not samples:
        raise ExportError("nothing to export")
    shape = samples[0].attribution.shape
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    records = []
    for sample in samples:
        _check_sample(sample, shape)
        sid = sample.sample_id
        Image.fromarray(sample.image).save(out_dir / f"{sid}.png")
        attribution = sample.attribution.astype("<f4")
        (out_dir / f"{sid}.f32").write_bytes(attribution.tobytes(order="C"))
        (out_dir / f"{sid}.lbl").write_bytes(sample.mask.astype(np.uint8).tobytes(order="C"))
        record = {
            "id": sid,
            "image_path": f"{sid}.png",
            "attribution_path": f"{sid}.f32",
            "mask_path": f"{sid}.lbl",
            "attributes": sample.attributes,
        }
        if sample.label is not None:
            record["label"] = sample.label
        if sample.prediction is not None:
            record["prediction"] = sample.prediction
        records.append(record)
    doc = {
        "format_version": FORMAT_VERSION,
        "height": shape[0],
        "width": shape[1],
        "region_table": [{"id": i, "name": n} for i, n in enumerate(REGION_NAMES)],
        "samples": records,
    }
    path = out_dir / "manifest.json"
    path.write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")
    return path
