import json
from pathlib import Path

import numpy as np
import pytest

from faceaudit.cli import main

from conftest import biased_grids, read_json, write_bundle


def run(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


@pytest.fixture
def hair_bundle(tmp_path):
    grids = biased_grids(6, 8, 8, hot_region=17)
    return write_bundle(tmp_path / "bundle", grids, 8, 8)


class TestValidate:
    def test_clean_manifest(self, capsys, hair_bundle):
        code, out, _ = run(capsys, "validate", "--manifest", str(hair_bundle))
        assert code == 0
        assert json.loads(out)["findings"] == []

    def test_truncated_attribution(self, capsys, hair_bundle):
        f32 = hair_bundle.parent / "s001.f32"
        f32.write_bytes(f32.read_bytes()[:-1])
        code, out, _ = run(capsys, "validate", "--manifest", str(hair_bundle))
        assert code == 1
        findings = json.loads(out)["findings"]
        assert findings[0]["sample_id"] == "s001"
        assert findings[0]["kind"] == "attribution"

    def test_out_of_range_label(self, capsys, hair_bundle):
        lbl = hair_bundle.parent / "s002.lbl"
        raw = bytearray(lbl.read_bytes())
        raw[0] = 200
        lbl.write_bytes(bytes(raw))
        code, out, _ = run(capsys, "validate", "--manifest", str(hair_bundle))
        assert code == 1
        findings = json.loads(out)["findings"]
        assert findings[0]["kind"] == "mask"
        assert "200" in findings[0]["detail"]

    def test_unreadable_manifest(self, capsys, tmp_path):
        code, _, err = run(capsys, "validate", "--manifest", str(tmp_path / "nope.json"))
        assert code == 2
        assert "error" in err


class TestSubset:
    def test_balanced_output(self, capsys, tmp_path):
        grids = biased_grids(12, 8, 8, hot_region=17)
        attrs = {
            f"s{i:03d}": {"T": i % 2, "A": (i // 2) % 2} for i in range(12)
        }
        manifest_path = write_bundle(tmp_path / "b", grids, 8, 8, attrs=attrs)
        out = tmp_path / "balanced.json"
        code, stdout, _ = run(
            capsys,
            "subset",
            "--manifest", str(manifest_path),
            "--out", str(out),
            "--target", "T",
            "--attribute", "A",
            "--seed", "3",
        )
        assert code == 0
        assert "kept 12 of 12" in stdout
        assert out.exists()


class TestPipeline:
    def test_hair_ranked_first(self, capsys, hair_bundle, tmp_path):
        out = tmp_path / "out"
        code, stdout, _ = run(
            capsys,
            "pipeline",
            "--manifest", str(hair_bundle),
            "--out", str(out),
            "--patch-size", "2",
            "--top-k", "5",
        )
        assert code == 0
        first_row = stdout.splitlines()[1]
        assert first_row.split()[1] == "hair"
        ranking = read_json(out / "ranking.json")
        assert ranking["ranking"][0]["name"] == "hair"
        for name in ("summary.json", "heatmap.svg", "report.html", "config.json"):
            assert (out / name).exists()
        assert (out / "patches" / "hair.json").exists()
        assert (out / "mosaics" / "hair.png").exists()

    def test_rerun_is_byte_identical(self, capsys, hair_bundle, tmp_path):
        args = [
            "pipeline",
            "--manifest", str(hair_bundle),
            "--patch-size", "2",
            "--top-k", "5",
        ]
        out1, out2 = tmp_path / "o1", tmp_path / "o2"
        assert run(capsys, *args, "--out", str(out1))[0] == 0
        assert run(capsys, *args, "--out", str(out2))[0] == 0
        files1 = sorted(p.relative_to(out1) for p in out1.rglob("*") if p.is_file())
        files2 = sorted(p.relative_to(out2) for p in out2.rglob("*") if p.is_file())
        assert files1 == files2
        for rel in files1:
            assert (out1 / rel).read_bytes() == (out2 / rel).read_bytes(), rel

    def test_empty_manifest_fails(self, capsys, tmp_path):
        path = write_bundle(tmp_path / "e", [], 4, 4)
        code, _, err = run(capsys, "pipeline", "--manifest", str(path), "--out", str(tmp_path / "o"))
        assert code == 1
        assert "no samples" in err

    def test_validation_failure_aborts_without_output(self, capsys, hair_bundle, tmp_path):
        (hair_bundle.parent / "s000.f32").unlink()
        out = tmp_path / "out"
        code, _, _ = run(capsys, "pipeline", "--manifest", str(hair_bundle), "--out", str(out))
        assert code == 1
        assert not out.exists()


class TestRank:
    def make_summary_doc(self, tmp_path, iors):
        names = {1: "skin", 11: "mouth", 17: "hair", 12: "u_lip", 13: "l_lip"}
        doc = {
            "class_of_interest": "p",
            "sample_count": 5,
            "regions": [
                {"id": r, "name": names[r], "ior": v, "count": 5} for r, v in iors.items()
            ],
            "absent_regions": [],
            "manifest_hash": "x",
        }
        path = tmp_path / "summary.json"
        path.write_text(json.dumps(doc))
        return path

    def make_spec(self, tmp_path, experiments):
        path = tmp_path / "spec.json"
        path.write_text(json.dumps({"experiments": experiments}))
        return path

    def test_two_attribute_positions(self, capsys, tmp_path):
        summary = self.make_summary_doc(tmp_path, {17: 0.9, 11: 0.8, 1: 0.1})
        spec = self.make_spec(
            tmp_path, [{"target": "Gender", "attributes": ["Blond_Hair", "Smiling"]}]
        )
        out = tmp_path / "rank.json"
        code, stdout, _ = run(
            capsys, "rank", "--summary", str(summary), "--spec", str(spec), "--out", str(out)
        )
        assert code == 0
        doc = read_json(out)
        exp = doc["experiments"][0]
        assert (exp["rp1"], exp["rp2"]) == (1, 2)
        assert doc["mean_rp1"] == 1.0
        assert "mean rp1 1.00" in stdout

    def test_single_attribute_rp2_absent(self, capsys, tmp_path):
        summary = self.make_summary_doc(tmp_path, {17: 0.9, 1: 0.1})
        spec = self.make_spec(tmp_path, [{"target": "Gender", "attributes": ["Blond_Hair"]}])
        out = tmp_path / "rank.json"
        code, _, _ = run(
            capsys, "rank", "--summary", str(summary), "--spec", str(spec), "--out", str(out)
        )
        assert code == 0
        exp = read_json(out)["experiments"][0]
        assert exp["rp1"] == 1
        assert exp["rp2"] is None

    def test_unranked_surfaces_as_warning_status(self, capsys, tmp_path):
        summary = self.make_summary_doc(tmp_path, {17: 0.9, 1: 0.1})
        spec = self.make_spec(tmp_path, [{"target": "Gender", "attributes": ["Eyeglasses"]}])
        code, _, err = run(capsys, "rank", "--summary", str(summary), "--spec", str(spec))
        assert code == 1
        assert "warning" in err


class TestRenderAndReport:
    def test_render_from_summary(self, capsys, hair_bundle, tmp_path):
        out = tmp_path / "out"
        run(capsys, "pipeline", "--manifest", str(hair_bundle), "--out", str(out),
            "--patch-size", "2")
        svg_path = tmp_path / "heatmap.svg"
        code, _, _ = run(
            capsys, "render", "--summary", str(out / "summary.json"), "--out", str(svg_path)
        )
        assert code == 0
        assert svg_path.read_text() == (out / "heatmap.svg").read_text()

    def test_report_rebuild_matches(self, capsys, hair_bundle, tmp_path):
        out = tmp_path / "out"
        run(capsys, "pipeline", "--manifest", str(hair_bundle), "--out", str(out),
            "--patch-size", "2")
        original = (out / "report.html").read_bytes()
        code, _, _ = run(capsys, "report", "--bundle", str(out))
        assert code == 0
        assert (out / "report.html").read_bytes() == original


class TestUsageErrors:
    def test_unknown_command_exits_2(self, capsys):
        assert main(["frobnicate"]) == 2

    def test_missing_required_flag_exits_2(self, capsys):
        assert main(["validate"]) == 2
