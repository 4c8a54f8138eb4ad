"""Command-line entry point.

Subcommands cover the full audit flow over a manifest: validate, subset,
aggregate, patches, rank, render, report, and the all-in-one pipeline.
Exit codes: 0 success, 1 validation failure, 2 usage error, 3 internal error.
"""

import argparse
import json
import shutil
import sys
import tempfile
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import numpy as np

from . import aggregation, evaluation, interchange, patches, rendering
from .interchange import (
    InterchangeError,
    Manifest,
    ManifestError,
    RegionTable,
    balance_subset,
    load_attribution,
    load_mask,
    manifest_digest,
    read_manifest,
    write_manifest,
)
from .template import default_template, load_template

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_USAGE = 2
EXIT_INTERNAL = 3


@dataclass
class RunConfig:
    manifest_path: str
    output_dir: str
    class_of_interest: str = "positive"
    patch_size: Optional[int] = None  # default: height // 8
    top_k: int = 20
    include_background: bool = False
    normalization_mode: str = "relative"
    mapping_path: Optional[str] = None
    seed: int = 0
    workers: int = 1

    def __post_init__(self):
        if self.patch_size is not None and self.patch_size < 1:
            raise ValueError("patch size must be >= 1")
        if self.top_k < 1:
            raise ValueError("top-k must be >= 1")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")
        if self.normalization_mode not in ("relative", "absolute"):
            raise ValueError(f"unknown normalization mode {self.normalization_mode!r}")


def _sig9(x: float) -> float:
    return float(f"{x:.9g}")


def _read_manifest_or_exit(path: str) -> Manifest:
    try:
        return read_manifest(path)
    except ManifestError as exc:
        print(f"error: {exc}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


# ---------------------------------------------------------------------------
# validate

def collect_findings(manifest: Manifest) -> List[dict]:
    """File-level checks for every sample: existence, sizes, value ranges."""
    findings = []
    for rec in manifest.samples:
        if not manifest.resolve(rec.image_path).exists():
            findings.append(
                {"sample_id": rec.id, "kind": "missing-image", "detail": rec.image_path}
            )
        for kind, loader in (("attribution", load_attribution), ("mask", load_mask)):
            try:
                loader(rec, manifest)
            except InterchangeError as exc:
                findings.append({"sample_id": rec.id, "kind": kind, "detail": str(exc)})
    return findings


def cmd_validate(args) -> int:
    manifest = _read_manifest_or_exit(args.manifest)
    findings = collect_findings(manifest)
    print(json.dumps({"findings": findings}, indent=2))
    return EXIT_OK if not findings else EXIT_VALIDATION


# ---------------------------------------------------------------------------
# subset

def cmd_subset(args) -> int:
    manifest = _read_manifest_or_exit(args.manifest)
    try:
        balanced = balance_subset(manifest, args.target, args.attribute, args.seed)
    except ManifestError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    write_manifest(balanced, args.out)
    print(f"kept {len(balanced.samples)} of {len(manifest.samples)} samples")
    return EXIT_OK


# ---------------------------------------------------------------------------
# core computation shared by aggregate / patches / pipeline

def _patch_index_map(height: int, width: int, z: int) -> np.ndarray:
    rows = np.arange(height) // z
    cols = np.arange(width) // z
    return (rows[:, None] * (width // z) + cols[None, :]).astype(np.int64)


def _process_sample(
    manifest: Manifest, pos: int, patchmap: np.ndarray, n_regions: int
) -> Tuple[aggregation.SampleIoR, np.ndarray]:
    rec = manifest.samples[pos]
    attribution = load_attribution(rec, manifest)
    mask = load_mask(rec, manifest)
    ior = aggregation.sample_ior(attribution, mask, sample_id=rec.id)
    q_count = int(patchmap.max()) + 1
    combined = mask.astype(np.int64) * q_count + patchmap
    sums = np.bincount(
        combined.ravel(), weights=attribution.ravel().astype(np.float64),
        minlength=n_regions * q_count,
    ).reshape(n_regions, q_count)
    return ior, sums


def run_engine(
    manifest: Manifest, config: RunConfig
) -> Tuple[aggregation.IoRSummary, Dict[int, patches.TopKSet]]:
    """One pass over all samples: region means plus per-region top-k patches.

    Workers parallelize per-sample work; the reduction happens in manifest
    order on this thread, so results are identical for any worker count.
    """
    z = config.patch_size or max(1, manifest.height // 8)
    grid = patches.PatchGrid.for_shape(manifest.height, manifest.width, z)
    patchmap = _patch_index_map(manifest.height, manifest.width, z)
    n_regions = len(manifest.region_table)
    selectors = {r: patches.BoundedTopK(config.top_k) for r in range(n_regions)}

    def task(pos):
        return _process_sample(manifest, pos, patchmap, n_regions)

    positions = range(len(manifest.samples))
    if config.workers > 1:
        with ThreadPoolExecutor(max_workers=config.workers) as pool:
            results = pool.map(task, positions)
            iors = _reduce(manifest, results, selectors)
    else:
        iors = _reduce(manifest, map(task, positions), selectors)

    summary = aggregation.aggregate(iors, config.class_of_interest)
    topk = {
        r: patches.topk_from_selector(selectors[r], r, grid, config.top_k)
        for r in range(n_regions)
    }
    return summary, topk


def _reduce(manifest, results, selectors) -> List[aggregation.SampleIoR]:
    iors = []
    for pos, (ior, sums) in enumerate(results):
        iors.append(ior)
        sample_id = manifest.samples[pos].id
        for r, selector in selectors.items():
            row = sums[r]
            for q in np.flatnonzero(row):
                selector.offer(float(row[q]), pos, int(q), sample_id)
    return iors


# ---------------------------------------------------------------------------
# document builders

def summary_document(summary: aggregation.IoRSummary, manifest: Manifest) -> dict:
    regions = [
        {
            "id": r,
            "name": manifest.region_table.name_of(r),
            "ior": _sig9(mean),
            "count": count,
        }
        for r, (mean, count) in sorted(summary.per_region.items())
    ]
    absent = [
        {"id": r, "name": name}
        for r, name in manifest.region_table.entries
        if r not in summary.per_region
    ]
    return {
        "class_of_interest": summary.class_of_interest,
        "sample_count": summary.sample_count,
        "regions": regions,
        "absent_regions": absent,
        "manifest_hash": manifest_digest(manifest),
    }


def ranking_document(
    summary: aggregation.IoRSummary, manifest: Manifest, include_background: bool
) -> dict:
    ranking = aggregation.rank_regions(summary, include_background=include_background)
    return {
        "class_of_interest": summary.class_of_interest,
        "include_background": include_background,
        "ranking": [
            {
                "rank": i,
                "id": r,
                "name": manifest.region_table.name_of(r),
                "ior": _sig9(mean),
                "count": summary.per_region[r][1],
            }
            for i, (r, mean) in enumerate(ranking, start=1)
        ],
        "manifest_hash": manifest_digest(manifest),
    }


def patch_document(topk: patches.TopKSet, manifest: Manifest, z: int) -> dict:
    return {
        "region": manifest.region_table.name_of(topk.region),
        "region_id": topk.region,
        "k": topk.k,
        "Z": z,
        "patches": [
            {
                "sample_id": rec.sample_id,
                "patch_index": rec.patch_index,
                "score": _sig9(rec.score),
                "bbox": list(rec.bbox),
            }
            for rec in topk.records
        ],
        "manifest_hash": manifest_digest(manifest),
    }


def _table_from_summary_doc(doc: dict) -> RegionTable:
    entries = {e["id"]: e["name"] for e in doc["regions"]}
    entries.update({e["id"]: e["name"] for e in doc.get("absent_regions", [])})
    if 0 not in entries:
        entries[0] = "background"
    return RegionTable(tuple(sorted(entries.items())))


def _summary_from_doc(doc: dict) -> aggregation.IoRSummary:
    return aggregation.IoRSummary(
        per_region={e["id"]: (e["ior"], e["count"]) for e in doc["regions"]},
        sample_count=doc["sample_count"],
        class_of_interest=doc["class_of_interest"],
    )


# ---------------------------------------------------------------------------
# aggregate / patches / render / report

def _write_json(path: Path, doc: dict) -> None:
    path.write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")


def cmd_aggregate(args) -> int:
    manifest = _read_manifest_or_exit(args.manifest)
    config = _config_from_args(args)
    if not manifest.samples:
        print("error: no samples in manifest", file=sys.stderr)
        return EXIT_VALIDATION
    iors = []
    for rec in manifest.samples:
        iors.append(
            aggregation.sample_ior(
                load_attribution(rec, manifest), load_mask(rec, manifest), sample_id=rec.id
            )
        )
    summary = aggregation.aggregate(iors, config.class_of_interest)
    _write_json(Path(args.out), summary_document(summary, manifest))
    _print_ranking(summary, manifest, config.include_background)
    return EXIT_OK


def cmd_patches(args) -> int:
    manifest = _read_manifest_or_exit(args.manifest)
    z = args.patch_size or max(1, manifest.height // 8)
    region = manifest.region_table.label_of(args.region)
    topk = patches.topk_patches(manifest, region, z, args.top_k)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _write_json(out / f"{args.region}.json", patch_document(topk, manifest, z))
    if topk.records:
        mosaic = patches.build_mosaic(topk, manifest)
        mosaic.save(out / f"{args.region}.png")
    else:
        print(f"warning: no activated patches for region {args.region}", file=sys.stderr)
    return EXIT_OK


def cmd_render(args) -> int:
    doc = json.loads(Path(args.summary).read_text(encoding="utf-8"))
    table = _table_from_summary_doc(doc)
    summary = _summary_from_doc(doc)
    template = load_template(args.template) if args.template else default_template()
    svg = rendering.render_heatmap(
        summary,
        table,
        template=template,
        include_background=args.include_background,
        mode=args.norm,
    )
    Path(args.out).write_text(svg, encoding="utf-8")
    return EXIT_OK


def cmd_report(args) -> int:
    bundle = Path(args.bundle)
    summary_doc = json.loads((bundle / "summary.json").read_text(encoding="utf-8"))
    ranking_doc = json.loads((bundle / "ranking.json").read_text(encoding="utf-8"))
    by_region = {}
    for path in sorted((bundle / "patches").glob("*.json")):
        doc = json.loads(path.read_text(encoding="utf-8"))
        by_region[doc["region"]] = doc
    # Present patch sections in ranking order, matching the pipeline output.
    ranked_names = [e["name"] for e in ranking_doc["ranking"] if e["name"] in by_region]
    ranked_names += sorted(set(by_region) - set(ranked_names))
    patch_docs = [by_region[name] for name in ranked_names]
    mosaics = {}
    for name in ranked_names:
        png = bundle / "mosaics" / f"{name}.png"
        mosaics[name] = png.read_bytes() if png.exists() else None
    heatmap = (bundle / "heatmap.svg").read_text(encoding="utf-8")
    config = json.loads((bundle / "config.json").read_text(encoding="utf-8"))
    html = rendering.render_report(summary_doc, ranking_doc, patch_docs, mosaics, heatmap, config)
    (bundle / "report.html").write_text(html, encoding="utf-8")
    return EXIT_OK


# ---------------------------------------------------------------------------
# rank

def _load_mapping(path: Optional[str], table: RegionTable) -> evaluation.AttributeRegionMapping:
    if path is None:
        return evaluation.AttributeRegionMapping.default(table)
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    return evaluation.AttributeRegionMapping.from_names(table, doc)


def cmd_rank(args) -> int:
    summary_doc = json.loads(Path(args.summary).read_text(encoding="utf-8"))
    spec_doc = json.loads(Path(args.spec).read_text(encoding="utf-8"))
    summary = _summary_from_doc(summary_doc)
    labels_by_name = {e["name"]: e["id"] for e in summary_doc["regions"]}
    labels_by_name.update(
        {e["name"]: e["id"] for e in summary_doc.get("absent_regions", [])}
    )
    explicit = "mapping" in spec_doc
    names = spec_doc.get("mapping", evaluation.DEFAULT_ATTRIBUTE_REGIONS)
    unknown = {
        n for regions in names.values() for n in regions if n not in labels_by_name
    }
    if explicit and unknown:
        print(
            f"error: mapping names regions unknown to the summary: {sorted(unknown)}",
            file=sys.stderr,
        )
        return EXIT_USAGE
    # Regions the summary has never seen cannot appear in any ranking; map
    # them to an impossible label so the attribute comes back as unranked.
    mapping = evaluation.AttributeRegionMapping(
        {
            attr: frozenset(labels_by_name.get(n, -1) for n in regions)
            for attr, regions in names.items()
        }
    )

    experiments = []
    rp1s, rp2s = [], []
    any_unranked = False
    for exp in spec_doc["experiments"]:
        spec = evaluation.ExperimentSpec(
            target=exp["target"],
            biased_attributes=tuple(exp["attributes"]),
            mapping=mapping,
        )
        result = evaluation.evaluate_experiment(
            summary, spec, include_background=args.include_background
        )

        def pos_doc(p):
            return "unranked" if p is evaluation.UNRANKED else p

        if result.rp1 is evaluation.UNRANKED or result.rp2 is evaluation.UNRANKED:
            any_unranked = True
        else:
            rp1s.append(result.rp1)
            if result.rp2 is not None:
                rp2s.append(result.rp2)
        experiments.append(
            {
                "target": spec.target,
                "attributes": list(spec.biased_attributes),
                "rp": {a: pos_doc(p) for a, p in result.per_attribute.items()},
                "rp1": pos_doc(result.rp1),
                "rp2": pos_doc(result.rp2) if result.rp2 is not None else None,
                "tied": result.tied,
            }
        )

    doc = {
        "experiments": experiments,
        "mean_rp1": evaluation.mean_ranking(rp1s) if rp1s else None,
        "mean_rp2": evaluation.mean_ranking(rp2s) if rp2s else None,
    }
    if args.out:
        _write_json(Path(args.out), doc)
    print(f"{'target':<16} {'attributes':<40} {'rp1':>4} {'rp2':>4}")
    for exp in experiments:
        rp2 = exp["rp2"] if exp["rp2"] is not None else "-"
        print(f"{exp['target']:<16} {', '.join(exp['attributes']):<40} {exp['rp1']:>4} {rp2:>4}")
    if doc["mean_rp1"] is not None:
        mean2 = f" mean rp2 {doc['mean_rp2']:.2f}" if doc["mean_rp2"] is not None else ""
        print(f"mean rp1 {doc['mean_rp1']:.2f}{mean2}")
    if any_unranked:
        print("warning: some attributes map only to regions absent from every sample",
              file=sys.stderr)
        return EXIT_VALIDATION
    return EXIT_OK


# ---------------------------------------------------------------------------
# pipeline

def _print_ranking(summary, manifest, include_background) -> None:
    print(f"{'rank':<5} {'region':<12} {'ior':>12} {'count':>6}")
    for i, (r, mean) in enumerate(
        aggregation.rank_regions(summary, include_background=include_background), start=1
    ):
        name = manifest.region_table.name_of(r)
        print(f"{i:<5} {name:<12} {_sig9(mean):>12.9g} {summary.per_region[r][1]:>6}")


def cmd_pipeline(args) -> int:
    manifest = _read_manifest_or_exit(args.manifest)
    config = _config_from_args(args)
    if not manifest.samples:
        print("error: no samples in manifest", file=sys.stderr)
        return EXIT_VALIDATION
    findings = collect_findings(manifest)
    if findings:
        print(json.dumps({"findings": findings}, indent=2))
        return EXIT_VALIDATION

    z = config.patch_size or max(1, manifest.height // 8)
    summary, topk_by_region = run_engine(manifest, config)

    out_dir = Path(config.output_dir)
    out_dir.parent.mkdir(parents=True, exist_ok=True)
    tmp_dir = Path(tempfile.mkdtemp(prefix=out_dir.name + ".", dir=out_dir.parent))
    try:
        _write_json(tmp_dir / "summary.json", summary_document(summary, manifest))
        ranking_doc = ranking_document(summary, manifest, config.include_background)
        _write_json(tmp_dir / "ranking.json", ranking_doc)

        # Run configuration embedded in the bundle: semantic knobs only, so
        # reruns (any worker count, any path) are byte-identical.
        config_doc = {
            "class_of_interest": config.class_of_interest,
            "patch_size": z,
            "top_k": config.top_k,
            "include_background": config.include_background,
            "normalization_mode": config.normalization_mode,
            "seed": config.seed,
            "manifest_hash": manifest_digest(manifest),
        }
        _write_json(tmp_dir / "config.json", config_doc)

        (tmp_dir / "patches").mkdir()
        (tmp_dir / "mosaics").mkdir()
        patch_docs = []
        mosaics = {}
        ranked_labels = [e["id"] for e in ranking_doc["ranking"]]
        for r in ranked_labels:
            name = manifest.region_table.name_of(r)
            topk = topk_by_region[r]
            doc = patch_document(topk, manifest, z)
            patch_docs.append(doc)
            _write_json(tmp_dir / "patches" / f"{name}.json", doc)
            if topk.records:
                mosaic = patches.build_mosaic(topk, manifest)
                mosaic.save(tmp_dir / "mosaics" / f"{name}.png")
                mosaics[name] = (tmp_dir / "mosaics" / f"{name}.png").read_bytes()
            else:
                mosaics[name] = None

        svg = rendering.render_heatmap(
            summary,
            manifest.region_table,
            include_background=config.include_background,
            mode=config.normalization_mode,
        )
        (tmp_dir / "heatmap.svg").write_text(svg, encoding="utf-8")

        html = rendering.render_report(
            summary_document(summary, manifest), ranking_doc, patch_docs, mosaics, svg, config_doc
        )
        (tmp_dir / "report.html").write_text(html, encoding="utf-8")

        if out_dir.exists():
            shutil.rmtree(out_dir)
        tmp_dir.rename(out_dir)
    except BaseException:
        shutil.rmtree(tmp_dir, ignore_errors=True)
        raise

    _print_ranking(summary, manifest, config.include_background)
    return EXIT_OK


# ---------------------------------------------------------------------------
# argument parsing

def _config_from_args(args) -> RunConfig:
    defaults = {}
    if getattr(args, "config", None):
        defaults = json.loads(Path(args.config).read_text(encoding="utf-8"))
    merged = dict(
        manifest_path=args.manifest,
        output_dir=getattr(args, "out", "."),
        class_of_interest=getattr(args, "class_of_interest", None)
        or defaults.get("class_of_interest", "positive"),
        patch_size=getattr(args, "patch_size", None) or defaults.get("patch_size"),
        top_k=getattr(args, "top_k", None) or defaults.get("top_k", 20),
        include_background=getattr(args, "include_background", False)
        or defaults.get("include_background", False),
        normalization_mode=getattr(args, "norm", None)
        or defaults.get("normalization_mode", "relative"),
        mapping_path=getattr(args, "mapping", None) or defaults.get("mapping_path"),
        seed=getattr(args, "seed", None) if getattr(args, "seed", None) is not None
        else defaults.get("seed", 0),
        workers=getattr(args, "workers", None) or defaults.get("workers", 1),
    )
    return RunConfig(**merged)


def _add_common(parser, out_required=True):
    parser.add_argument("--manifest", required=True, help="path to the dataset manifest")
    parser.add_argument("--out", required=out_required, help="output path")
    parser.add_argument("--config", help="JSON config file; flags override its values")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="faceaudit",
        description="Summarize a face attribute classifier's region attribution.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check every sample's files")
    p.add_argument("--manifest", required=True)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("subset", help="balance the manifest over (target, attribute) cells")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--target", required=True)
    p.add_argument("--attribute", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_subset)

    p = sub.add_parser("aggregate", help="compute the region summary document")
    _add_common(p)
    p.add_argument("--class", dest="class_of_interest", default="positive")
    p.add_argument("--include-background", action="store_true")
    p.set_defaults(func=cmd_aggregate)

    p = sub.add_parser("patches", help="top-k patch report and mosaic for one region")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--region", required=True, help="region name, e.g. hair")
    p.add_argument("--patch-size", type=int)
    p.add_argument("--top-k", type=int, default=20)
    p.set_defaults(func=cmd_patches)

    p = sub.add_parser("rank", help="ranking-position metrics from a summary")
    p.add_argument("--summary", required=True)
    p.add_argument("--spec", required=True, help="JSON experiment spec")
    p.add_argument("--out")
    p.add_argument("--include-background", action="store_true")
    p.set_defaults(func=cmd_rank)

    p = sub.add_parser("render", help="render the region heatmap from a summary")
    p.add_argument("--summary", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--template", help="custom prototype template (JSON)")
    p.add_argument("--include-background", action="store_true")
    p.add_argument("--norm", choices=["relative", "absolute"], default="relative")
    p.set_defaults(func=cmd_render)

    p = sub.add_parser("report", help="assemble report.html inside a pipeline bundle")
    p.add_argument("--bundle", required=True)
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("pipeline", help="validate, aggregate, mine patches, render, report")
    _add_common(p)
    p.add_argument("--class", dest="class_of_interest", default="positive")
    p.add_argument("--patch-size", type=int)
    p.add_argument("--top-k", type=int, default=20)
    p.add_argument("--include-background", action="store_true")
    p.add_argument("--norm", choices=["relative", "absolute"], default="relative")
    p.add_argument("--mapping")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_pipeline)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    except (ValueError, OSError, KeyError) as exc:
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
