"""Abstract face drawing used as the canvas for the region heatmap.

The built-in template covers every non-background region of the default
region table with one closed SVG path. Custom templates may be loaded from
JSON as long as they keep one path per required region name.
"""

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Tuple

from .interchange import RegionTable


@dataclass(frozen=True)
class PrototypeTemplate:
    canvas: Tuple[int, int]  # (width, height) in abstract units
    shapes: Dict[str, str]  # region name -> closed SVG path data
    legend_box: Tuple[int, int, int, int]  # (x, y, width, height)

    def require_regions(self, table: RegionTable) -> None:
        missing = [name for _id, name in table.entries[1:] if name not in self.shapes]
        if missing:
            raise ValueError(f"template missing region paths: {', '.join(missing)}")


def _ellipse(cx, cy, rx, ry) -> str:
    return (
        f"M {cx - rx} {cy} "
        f"A {rx} {ry} 0 1 0 {cx + rx} {cy} "
        f"A {rx} {ry} 0 1 0 {cx - rx} {cy} Z"
    )


def _rect(x, y, w, h) -> str:
    return f"M {x} {y} H {x + w} V {y + h} H {x} Z"


# Stylized frontal face on a 400x560 canvas. Geometry is schematic; only the
# stable region-name ids matter to consumers.
_DEFAULT_SHAPES = {
    "hat": _rect(110, 20, 180, 60),
    "hair": (
        "M 80 220 C 80 90 320 90 320 220 L 320 180 "
        "C 330 110 280 60 200 60 C 120 60 70 110 80 180 Z"
    ),
    "skin": _ellipse(200, 230, 110, 130),
    "l_brow": _rect(130, 185, 55, 12),
    "r_brow": _rect(215, 185, 55, 12),
    "l_eye": _ellipse(157, 220, 26, 14),
    "r_eye": _ellipse(243, 220, 26, 14),
    "eye_g": (
        "M 120 205 H 195 V 240 H 120 Z "
        "M 205 205 H 280 V 240 H 205 Z "
        "M 195 218 H 205 V 224 H 195 Z"
    ),
    "nose": "M 200 235 L 182 292 H 218 Z",
    "l_ear": _ellipse(85, 245, 16, 30),
    "r_ear": _ellipse(315, 245, 16, 30),
    "ear_r": _ellipse(85, 288, 8, 10) + " " + _ellipse(315, 288, 8, 10),
    "mouth": _ellipse(200, 318, 42, 10),
    "u_lip": "M 158 312 Q 200 296 242 312 Q 200 306 158 312 Z",
    "l_lip": "M 158 326 Q 200 346 242 326 Q 200 336 158 326 Z",
    "neck": _rect(165, 352, 70, 60),
    "neck_l": _ellipse(200, 420, 40, 10),
    "cloth": "M 90 560 L 110 440 Q 200 412 290 440 L 310 560 Z",
}

_DEFAULT_CANVAS = (400, 560)
_DEFAULT_LEGEND = (40, 500, 120, 40)


def default_template() -> PrototypeTemplate:
    return PrototypeTemplate(
        canvas=_DEFAULT_CANVAS, shapes=dict(_DEFAULT_SHAPES), legend_box=_DEFAULT_LEGEND
    )


def load_template(path) -> PrototypeTemplate:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    return PrototypeTemplate(
        canvas=tuple(doc["canvas"]),
        shapes=dict(doc["shapes"]),
        legend_box=tuple(doc["legend_box"]),
    )
