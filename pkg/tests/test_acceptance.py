"""Acceptance gate: one test per release criterion, each printing a verdict.

Run with `pytest -s tests/test_acceptance.py` to see the per-criterion lines.
"""

import time

import numpy as np
import pytest

from faceaudit.aggregation import SampleIoR, aggregate, sample_ior
from faceaudit.cli import main
from faceaudit.evaluation import mean_ranking
from faceaudit.interchange import (
    GridSizeError,
    GridValueError,
    LabelRangeError,
    RegionTable,
    load_attribution,
    load_mask,
    read_manifest,
    save_attribution,
    save_mask,
    write_manifest,
)
from faceaudit.patches import PatchGrid, score_patches, topk_patches
from faceaudit.rendering import color_of, normalize_for_display, render_heatmap

from conftest import biased_grids, read_json, write_bundle
from test_aggregation import naive_sample_ior
from test_patches import brute_force_topk
from test_rendering import region_fills, summary_of


def verdict(ok, name):
    print(f"{'PASS' if ok else 'FAIL'}: {name}")
    assert ok, name


def test_ior_oracle_equivalence():
    rng = np.random.default_rng(1234)
    start = time.monotonic()
    worst = 0.0
    for _ in range(1000):
        h, w = rng.integers(1, 17, size=2)
        attribution = rng.random((h, w)).astype(np.float32)
        mask = rng.integers(0, 19, size=(h, w)).astype(np.uint8)
        got = sample_ior(attribution, mask).values
        expected = naive_sample_ior(attribution, mask)
        assert got.keys() == expected.keys()
        worst = max(worst, max(abs(got[r] - expected[r]) for r in expected))
    elapsed = time.monotonic() - start
    verdict(
        worst <= 1e-6 and elapsed < 5.0,
        f"IoR oracle equivalence (max diff {worst:.2e}, {elapsed:.2f}s)",
    )


def test_presence_count_divisor():
    samples = [
        SampleIoR("a", {1: 0.1, 18: 0.9}),
        SampleIoR("b", {1: 0.2}),
        SampleIoR("c", {1: 0.3}),
    ]
    summary = aggregate(samples, "p")
    verdict(summary.per_region[18] == (0.9, 1), "divide-by-presence-count contract")


def test_patch_partition_completeness():
    rng = np.random.default_rng(77)
    worst = 0.0
    for _ in range(200):
        z = int(rng.choice([2, 4, 8]))
        h = z * int(rng.integers(1, 5))
        w = z * int(rng.integers(1, 5))
        attribution = rng.random((h, w)).astype(np.float32)
        mask = rng.integers(0, 19, size=(h, w)).astype(np.uint8)
        grid = PatchGrid.for_shape(h, w, z)
        region = int(rng.integers(0, 19))
        total = score_patches(attribution, mask, grid, region).sum()
        expected = attribution[mask == region].astype(np.float64).sum()
        worst = max(worst, abs(total - expected))
    verdict(worst <= 1e-6, f"patch partition completeness (max diff {worst:.2e})")


def test_topk_bruteforce_equivalence(tmp_path):
    rng = np.random.default_rng(55)
    grids = []
    mask = rng.integers(0, 19, size=(8, 8)).astype(np.uint8)
    for i in range(8):
        attribution = rng.random((8, 8)).astype(np.float32)
        # Duplicate attributions across samples to force score ties.
        grids.append((f"s{i}", attribution if i % 2 else grids[i - 1][1] if i else attribution, mask))
    manifest = read_manifest(write_bundle(tmp_path / "d", grids, 8, 8))
    grid = PatchGrid.for_shape(8, 8, 2)
    ok = True
    for region in range(19):
        all_scores = [
            (pos, sid, score_patches(a, m, grid, region))
            for pos, (sid, a, m) in enumerate(grids)
        ]
        for k in (1, 5, 16, 200):
            expected = [
                (sid, q) for _, _, q, sid in brute_force_topk(all_scores, k)
            ]
            got = [
                (r.sample_id, r.patch_index)
                for r in topk_patches(manifest, region, 2, k).records
            ]
            ok = ok and got == expected
    verdict(ok, "top-k matches brute-force sort incl. tie-break order")


def test_paper_table_arithmetic():
    single = mean_ranking([3, 6, 1, 5, 1, 2, 2, 3, 1, 1, 1, 1])
    rp1 = mean_ranking([1, 1, 1, 4, 1, 1, 1, 1, 1, 1, 1, 1])
    rp2 = mean_ranking([11, 11, 2, 7, 2, 12, 10, 6, 4, 2, 11, 2])
    ok = single == 2.25 and round(rp1, 2) == 1.25 and round(rp2, 2) == 6.67
    verdict(ok, f"table arithmetic (means {single}, {rp1:.2f}, {rp2:.2f})")


def test_synthetic_end_to_end_bias_detection(tmp_path, capsys):
    targets = {17: "hair", 1: "skin", 11: "mouth", 10: "nose", 18: "hat"}
    start = time.monotonic()
    ok = True
    for hot, name in targets.items():
        grids = biased_grids(
            50, 16, 16, hot_region=hot, regions=(1, 10, 11, 17, 18), seed=hot
        )
        manifest_path = write_bundle(tmp_path / f"b{hot}", grids, 16, 16)
        out = tmp_path / f"out{hot}"
        code = main(
            ["pipeline", "--manifest", str(manifest_path), "--out", str(out),
             "--patch-size", "4"]
        )
        ranking = read_json(out / "ranking.json")["ranking"]
        ok = ok and code == 0 and ranking[0]["name"] == name
    elapsed = time.monotonic() - start
    capsys.readouterr()
    verdict(ok and elapsed < 10.0, f"end-to-end bias detection x5 ({elapsed:.2f}s)")


def test_worker_count_determinism(tmp_path, capsys):
    grids = biased_grids(30, 16, 16, hot_region=17, regions=(1, 10, 11, 17), seed=9)
    manifest_path = write_bundle(tmp_path / "b", grids, 16, 16)
    outs = []
    for workers in (1, 4):
        out = tmp_path / f"out-w{workers}"
        code = main(
            ["pipeline", "--manifest", str(manifest_path), "--out", str(out),
             "--patch-size", "4", "--workers", str(workers)]
        )
        assert code == 0
        outs.append(out)
    capsys.readouterr()
    files = [sorted(p.relative_to(o) for p in o.rglob("*") if p.is_file()) for o in outs]
    ok = files[0] == files[1] and all(
        (outs[0] / rel).read_bytes() == (outs[1] / rel).read_bytes() for rel in files[0]
    )
    verdict(ok, "bundle byte-identical for workers 1 and 4")


def test_color_endpoints_and_heatmap_fills(default_table):
    endpoints = (
        color_of(0.0) == (0, 0, 255)
        and color_of(1.0) == (255, 0, 0)
        and color_of(0.5) == (0, 255, 0)
    )
    summary = summary_of({17: 0.73, 1: 0.21, 11: 0.05, 18: 0.64})
    svg = render_heatmap(summary, default_table)
    fills = region_fills(svg)
    display = normalize_for_display(summary, default_table.foreground_labels())
    fills_ok = all(
        fills[default_table.name_of(r)]
        == ("url(#nodata)" if v is None else "rgb(%d,%d,%d)" % color_of(v))
        for r, v in display.items()
    )
    verdict(endpoints and fills_ok, "color endpoints exact; heatmap fills match color_of")


def test_interchange_roundtrip_and_malformed_errors(tmp_path):
    table = RegionTable.default()
    rng = np.random.default_rng(3)
    grids = [
        (f"s{i}", rng.random((4, 4)).astype(np.float32),
         rng.integers(0, 19, size=(4, 4)).astype(np.uint8))
        for i in range(3)
    ]
    manifest_path = write_bundle(tmp_path / "d", grids, 4, 4)
    manifest = read_manifest(manifest_path)

    round_trip = tmp_path / "copy.json"
    write_manifest(manifest, round_trip)
    ok = manifest_path.read_bytes() == round_trip.read_bytes()
    for rec, (sid, attribution, mask) in zip(manifest.samples, grids):
        a2 = tmp_path / f"{sid}.f32"
        m2 = tmp_path / f"{sid}.lbl"
        save_attribution(load_attribution(rec, manifest), a2)
        save_mask(load_mask(rec, manifest), m2, table)
        ok = ok and a2.read_bytes() == (tmp_path / "d" / f"{sid}.f32").read_bytes()
        ok = ok and m2.read_bytes() == (tmp_path / "d" / f"{sid}.lbl").read_bytes()

    root = manifest_path.parent
    truncated = root / "s0.f32"
    truncated.write_bytes(truncated.read_bytes()[:-1])
    with pytest.raises(GridSizeError):
        load_attribution(manifest.samples[0], manifest)

    bad_label = bytearray((root / "s1.lbl").read_bytes())
    bad_label[3] = 200
    (root / "s1.lbl").write_bytes(bytes(bad_label))
    with pytest.raises(LabelRangeError):
        load_mask(manifest.samples[1], manifest)

    nan_grid = np.zeros((4, 4), dtype="<f4")
    nan_grid[2, 2] = np.nan
    (root / "s2.f32").write_bytes(nan_grid.tobytes())
    with pytest.raises(GridValueError):
        load_attribution(manifest.samples[2], manifest)

    verdict(ok, "interchange round-trip bit-exact; malformed fixtures raise distinct errors")
