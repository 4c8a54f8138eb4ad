"""Static artifacts: region heatmap (SVG) and the combined audit report (HTML).

Fill colors run from blue (low) to red (high) along the HSL hue circle.
Display values are min-max normalized over the rendered regions by default
so small absolute scores still produce visible contrast; raw values are kept
in path metadata and the legend.
"""

import base64
from dataclasses import dataclass
from math import floor
from typing import Dict, Iterable, List, Optional, Tuple

from .aggregation import IoRSummary
from .interchange import RegionTable
from .template import PrototypeTemplate

NO_DATA_FILL = "rgb(204,204,204)"


@dataclass(frozen=True)
class ColorScale:
    """Linear hue ramp at full saturation, 50% lightness."""

    low_hue: float = 240.0  # blue
    high_hue: float = 0.0  # red


def _sig9(x: float) -> str:
    return f"{x:.9g}"


def color_of(v: float, scale: ColorScale = ColorScale()) -> Tuple[int, int, int]:
    """8-bit RGB for a normalized value via HSL hue interpolation."""
    if not 0.0 <= v <= 1.0:
        raise ValueError(f"display value {v} outside [0,1]")
    hue = scale.low_hue + (scale.high_hue - scale.low_hue) * v
    # HSL -> RGB with S=1, L=0.5: chroma 1, pure hue.
    h = (hue % 360.0) / 60.0
    x = 1.0 - abs(h % 2.0 - 1.0)
    sector = int(h) % 6
    rgb1 = [(1, x, 0), (x, 1, 0), (0, 1, x), (0, x, 1), (x, 0, 1), (1, 0, x)][sector]
    return tuple(int(floor(c * 255.0 + 0.5)) for c in rgb1)


def normalize_for_display(
    summary: IoRSummary,
    rendered_regions: Iterable[int],
    mode: str = "relative",
) -> Dict[int, Optional[float]]:
    """Map each rendered region to a [0,1] display value, or None if absent.

    Relative mode rescales min-max over the present rendered regions (all 0.5
    when they coincide); absolute mode passes raw means through.
    """
    if mode not in ("relative", "absolute"):
        raise ValueError(f"unknown normalization mode {mode!r}")
    rendered = list(rendered_regions)
    present = {r: summary.per_region[r][0] for r in rendered if r in summary.per_region}
    if not present:
        raise ValueError("no rendered region is present in the summary")
    if mode == "absolute":
        values: Dict[int, Optional[float]] = {r: v for r, v in present.items()}
    else:
        lo, hi = min(present.values()), max(present.values())
        if hi == lo:
            values = {r: 0.5 for r in present}
        else:
            values = {r: (v - lo) / (hi - lo) for r, v in present.items()}
    for r in rendered:
        values.setdefault(r, None)
    return values


def render_heatmap(
    summary: IoRSummary,
    table: RegionTable,
    template: Optional[PrototypeTemplate] = None,
    scale: ColorScale = ColorScale(),
    include_background: bool = False,
    mode: str = "relative",
) -> str:
    """SVG document with one filled path per rendered region."""
    from .template import default_template

    template = template or default_template()
    template.require_regions(table)
    labels = table.labels() if include_background else table.foreground_labels()
    labels = [r for r in labels if table.name_of(r) in template.shapes]
    display = normalize_for_display(summary, labels, mode=mode)
    raw = {r: summary.per_region[r][0] for r in labels if r in summary.per_region}

    w, h = template.canvas
    lines = [
        f'<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {w} {h}" '
        f'width="{w}" height="{h}">',
        "<defs>",
        '<pattern id="nodata" width="8" height="8" patternUnits="userSpaceOnUse" '
        'patternTransform="rotate(45)">'
        f'<rect width="8" height="8" fill="{NO_DATA_FILL}"/>'
        '<line x1="0" y1="0" x2="0" y2="8" stroke="rgb(150,150,150)" stroke-width="2"/>'
        "</pattern>",
        '<linearGradient id="ramp" x1="0" y1="0" x2="1" y2="0">',
    ]
    for i in range(5):
        v = i / 4.0
        r, g, b = color_of(v, scale)
        lines.append(f'<stop offset="{v}" stop-color="rgb({r},{g},{b})"/>')
    lines.append("</linearGradient>")
    lines.append("</defs>")

    for label in labels:
        name = table.name_of(label)
        path = template.shapes[name]
        v = display[label]
        if v is None:
            lines.append(
                f'<path d="{path}" fill="url(#nodata)" stroke="black" stroke-width="1" '
                f'data-region="{name}" data-status="no-data">'
                f"<title>{name}: no data</title></path>"
            )
        else:
            r, g, b = color_of(v, scale)
            ior = _sig9(raw[label])
            lines.append(
                f'<path d="{path}" fill="rgb({r},{g},{b})" stroke="black" stroke-width="1" '
                f'data-region="{name}" data-ior="{ior}">'
                f"<title>{name}: {ior}</title></path>"
            )

    lx, ly, lw, lh = template.legend_box
    lo, hi = min(raw.values()), max(raw.values())
    lines.append(
        f'<rect x="{lx}" y="{ly}" width="{lw}" height="{lh // 2}" fill="url(#ramp)" '
        'stroke="black" stroke-width="1"/>'
    )
    lines.append(
        f'<text x="{lx}" y="{ly + lh}" font-size="12" font-family="sans-serif">'
        f"{_sig9(lo)}</text>"
    )
    lines.append(
        f'<text x="{lx + lw}" y="{ly + lh}" font-size="12" font-family="sans-serif" '
        f'text-anchor="end">{_sig9(hi)}</text>'
    )
    lines.append("</svg>")
    return "\n".join(lines) + "\n"


def render_report(
    summary_doc: dict,
    ranking_doc: dict,
    patch_docs: List[dict],
    mosaics: Dict[str, Optional[bytes]],
    heatmap_svg: str,
    config: dict,
) -> str:
    """Self-contained HTML report; all images embedded, no external fetches."""
    manifest_hash = summary_doc.get("manifest_hash")
    for doc, what in [(ranking_doc, "ranking")] + [(d, "patch report") for d in patch_docs]:
        if doc.get("manifest_hash") != manifest_hash:
            raise ValueError(
                f"{what} was produced from a different manifest "
                f"({doc.get('manifest_hash')} != {manifest_hash})"
            )

    rows = []
    for entry in ranking_doc["ranking"]:
        rows.append(
            f"<tr><td>{entry['rank']}</td><td>{entry['name']}</td>"
            f"<td>{_sig9(entry['ior'])}</td><td>{entry['count']}</td></tr>"
        )

    mosaic_sections = []
    for doc in patch_docs:
        name = doc["region"]
        png = mosaics.get(name)
        if png is None or not doc["patches"]:
            body = "<p><em>no activated patches</em></p>"
        else:
            b64 = base64.b64encode(png).decode("ascii")
            body = f'<img alt="top patches: {name}" src="data:image/png;base64,{b64}"/>'
        mosaic_sections.append(f"<h3>{name}</h3>\n{body}")

    config_rows = "".join(
        f"<tr><td>{key}</td><td>{config[key]}</td></tr>" for key in sorted(config)
    )

    return f"""<!DOCTYPE html>
<html lang="en">
<head>
<meta charset="utf-8"/>
<title>Region attribution audit: {summary_doc['class_of_interest']}</title>
<style>
body {{ font-family: sans-serif; margin: 2em; max-width: 60em; }}
table {{ border-collapse: collapse; }}
td, th {{ border: 1px solid #999; padding: 0.3em 0.8em; }}
img {{ image-rendering: pixelated; max-width: 100%; }}
</style>
</head>
<body>
<h1>Region attribution audit</h1>
<p>Class of interest: <strong>{summary_doc['class_of_interest']}</strong>,
samples: {summary_doc['sample_count']}, manifest: <code>{manifest_hash}</code></p>
<h2>Region heatmap</h2>
{heatmap_svg}
<h2>Region ranking</h2>
<table>
<tr><th>Rank</th><th>Region</th><th>Mean IoR</th><th>Samples</th></tr>
{''.join(rows)}
</table>
<h2>High-impact patches</h2>
{''.join(mosaic_sections)}
<h2>Run configuration</h2>
<table>{config_rows}</table>
</body>
</html>
"""
