"""Region-level summary explanations for face attribute classifiers.

Turns per-sample attribution maps and facial-region label maps into
per-region importance scores, rankings, high-impact patches, prototype
heatmaps, and bias-audit reports.
"""

from .interchange import (
    DEFAULT_REGION_NAMES,
    GridSizeError,
    GridValueError,
    InterchangeError,
    LabelRangeError,
    Manifest,
    ManifestError,
    RegionTable,
    SampleRecord,
    balance_subset,
    load_attribution,
    load_mask,
    manifest_digest,
    read_manifest,
    save_attribution,
    save_mask,
    write_manifest,
)
from .aggregation import IoRSummary, SampleIoR, aggregate, rank_regions, sample_ior
from .patches import (
    BoundedTopK,
    PatchGrid,
    PatchRecord,
    TopKSet,
    build_mosaic,
    extract_patch_pixels,
    score_patches,
    topk_patches,
)
from .evaluation import (
    DEFAULT_ATTRIBUTE_REGIONS,
    UNRANKED,
    AttributeRegionMapping,
    ExperimentSpec,
    RankingResult,
    evaluate_experiment,
    mean_ranking,
    ranking_position,
)
from .rendering import ColorScale, color_of, normalize_for_display, render_heatmap, render_report
from .template import PrototypeTemplate, default_template, load_template

__version__ = "0.1.0"
