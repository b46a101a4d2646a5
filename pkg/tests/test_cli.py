"""CLI subcommands: exit codes, outputs, determinism."""

import json

import pytest

from scorpid.cli import main
from scorpid.corpus import load_manifest, save_manifest

from conftest import (classification_corpus, detection_corpus, manifest_line,
                      write_corpus_images)


def write_paper_manifest(path):
    lines = []
    for i in range(612):
        lines.append(manifest_line(
            f"pos{i:04d}", boxes=[{"x": 10, "y": 10, "w": 30, "h": 20, "label": "scorpion"}]))
    for i in range(197):
        lines.append(manifest_line(f"neg{i:04d}"))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


class TestSplit:
    def test_paper_sizes_and_exit_zero(self, tmp_path, capsys):
        manifest = write_paper_manifest(tmp_path / "m.jsonl")
        out = tmp_path / "split.jsonl"
        code = main(["split", "--manifest", str(manifest), "--ratios", "0.7,0.2,0.1",
                     "--seed", "42", "--out", str(out)])
        assert code == 0
        text = capsys.readouterr().out
        assert "train=566" in text and "valid=162" in text and "test=81" in text

    def test_bad_ratios_exit_two(self, tmp_path):
        manifest = write_paper_manifest(tmp_path / "m.jsonl")
        code = main(["split", "--manifest", str(manifest), "--ratios", "0.7,0.2",
                     "--out", str(tmp_path / "o.jsonl")])
        assert code == 2
        code = main(["split", "--manifest", str(manifest), "--ratios", "0.5,0.2,0.1",
                     "--out", str(tmp_path / "o.jsonl")])
        assert code == 2

    def test_missing_manifest_exit_one(self, tmp_path):
        code = main(["split", "--manifest", str(tmp_path / "absent.jsonl"),
                     "--out", str(tmp_path / "o.jsonl")])
        assert code == 1

    def test_byte_identical_reruns(self, tmp_path):
        manifest = write_paper_manifest(tmp_path / "m.jsonl")
        out1, out2 = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
        for out in (out1, out2):
            assert main(["split", "--manifest", str(manifest), "--seed", "7",
                         "--out", str(out)]) == 0
        assert out1.read_bytes() == out2.read_bytes()


class TestAugment:
    def test_classification_counts(self, tmp_path, capsys):
        corpus = classification_corpus({"Tityus": 105, "Bothriurus": 113, "None": 60},
                                       split="unassigned")
        manifest = tmp_path / "cls.jsonl"
        save_manifest(corpus, manifest)
        out_dir = tmp_path / "aug"
        code = main(["augment", "--manifest", str(manifest), "--k", "2",
                     "--seed", "1", "--out-dir", str(out_dir), "--no-images"])
        assert code == 0
        expanded = load_manifest(out_dir / "manifest.jsonl")
        counts = {}
        for rec in expanded:
            counts[rec.class_label] = counts.get(rec.class_label, 0) + 1
        assert counts == {"Tityus": 315, "Bothriurus": 339, "None": 180}
        ledger = [json.loads(l) for l in
                  (out_dir / "transforms.jsonl").read_text().splitlines()]
        assert len(ledger) == 556

    def test_k_zero_keeps_manifest(self, tmp_path):
        corpus = classification_corpus({"Tityus": 3, "Bothriurus": 2, "None": 2})
        manifest = tmp_path / "cls.jsonl"
        save_manifest(corpus, manifest)
        out_dir = tmp_path / "aug"
        assert main(["augment", "--manifest", str(manifest), "--k", "0",
                     "--out-dir", str(out_dir), "--no-images"]) == 0
        expanded = load_manifest(out_dir / "manifest.jsonl")
        assert len(expanded) == len(corpus)

    def test_unreadable_image_exit_one_names_path(self, tmp_path, capsys):
        corpus = classification_corpus({"Tityus": 1, "Bothriurus": 1, "None": 1})
        manifest = tmp_path / "cls.jsonl"
        save_manifest(corpus, manifest)
        code = main(["augment", "--manifest", str(manifest), "--k", "1",
                     "--out-dir", str(tmp_path / "aug")])
        assert code == 1
        assert "tityus0000.png" in capsys.readouterr().err

    def test_writes_images_and_replayable_ledger(self, tmp_path):
        corpus = classification_corpus({"Tityus": 2, "Bothriurus": 1, "None": 1})
        write_corpus_images(corpus, tmp_path)
        manifest = tmp_path / "cls.jsonl"
        save_manifest(corpus, manifest)
        out_dir = tmp_path / "aug"
        assert main(["augment", "--manifest", str(manifest), "--k", "1",
                     "--seed", "3", "--out-dir", str(out_dir)]) == 0
        expanded = load_manifest(out_dir / "manifest.jsonl")
        variants = [r for r in expanded if r.origin == "augmented"]
        assert len(variants) == 4
        for rec in variants:
            assert (out_dir / rec.path).is_file()


class TestEval:
    def fixture(self, tmp_path):
        corpus = detection_corpus(8, 5)
        manifest = tmp_path / "det.jsonl"
        save_manifest(corpus, manifest)
        preds = tmp_path / "preds.jsonl"
        lines = []
        for rec in corpus:
            for box in rec.boxes:
                lines.append(json.dumps({
                    "image_id": rec.id, "x": box.x, "y": box.y, "w": box.w,
                    "h": box.h, "score": 1.0, "label": box.label}))
        preds.write_text("\n".join(lines) + "\n", encoding="utf-8")
        return manifest, preds

    def test_perfect_predictions(self, tmp_path, capsys):
        manifest, preds = self.fixture(tmp_path)
        report = tmp_path / "report.json"
        code = main(["eval", "--mode", "detect", "--truth", str(manifest),
                     "--predictions", str(preds), "--report", str(report),
                     "--roc-csv", str(tmp_path / "roc.csv"),
                     "--roc-svg", str(tmp_path / "roc.svg")])
        assert code == 0
        doc = json.loads(report.read_text())
        assert doc["metrics"]["accuracy"] == 1.0
        assert doc["roc"]["auc"] == 1.0
        csv = (tmp_path / "roc.csv").read_text().splitlines()
        assert csv[0] == "threshold,fpr,tpr"
        assert (tmp_path / "roc.svg").read_text().startswith("<svg")

    def test_rerun_byte_identical(self, tmp_path):
        manifest, preds = self.fixture(tmp_path)
        r1, r2 = tmp_path / "r1.json", tmp_path / "r2.json"
        for r in (r1, r2):
            assert main(["eval", "--mode", "detect", "--truth", str(manifest),
                         "--predictions", str(preds), "--report", str(r)]) == 0
        assert r1.read_bytes() == r2.read_bytes()

    def test_mode_mismatch_exit_two(self, tmp_path):
        manifest, preds = self.fixture(tmp_path)
        code = main(["eval", "--mode", "classify", "--truth", str(manifest),
                     "--predictions", str(preds), "--report", str(tmp_path / "r.json")])
        assert code == 2

    def test_missing_classify_prediction_exit_one_lists_ids(self, tmp_path, capsys):
        corpus = classification_corpus({"Tityus": 2, "Bothriurus": 1, "None": 1})
        manifest = tmp_path / "cls.jsonl"
        save_manifest(corpus, manifest)
        preds = tmp_path / "preds.jsonl"
        preds.write_text(json.dumps({
            "image_id": "tityus0000",
            "probs": {"Tityus": 1.0, "Bothriurus": 0.0, "None": 0.0}}) + "\n",
            encoding="utf-8")
        code = main(["eval", "--mode", "classify", "--truth", str(manifest),
                     "--predictions", str(preds), "--report", str(tmp_path / "r.json")])
        assert code == 1
        assert "tityus0001" in capsys.readouterr().err

    def test_backend_descriptor_eval(self, tmp_path, capsys):
        corpus = detection_corpus(6, 4)
        manifest = tmp_path / "det.jsonl"
        save_manifest(corpus, manifest)
        report = tmp_path / "r.json"
        code = main(["eval", "--mode", "detect", "--truth", str(manifest),
                     "--backend", f"reference:{manifest}:0.0:1",
                     "--report", str(report)])
        assert code == 0
        assert json.loads(report.read_text())["roc"]["auc"] == 1.0


class TestReconstruct:
    def test_detector_table_row_one(self, capsys):
        code = main(["reconstruct", "--metrics", "0.88,0.93,0.90,0.92", "--n", "81"])
        assert code == 0
        out = capsys.readouterr().out
        assert "tp=56 tn=15 fp=4 fn=6" in out
        assert "solutions" in out

    def test_detector_table_row_two(self, capsys):
        code = main(["reconstruct", "--metrics", "0.91,0.92,0.97,0.94", "--n", "81"])
        assert code == 0
        assert "tp=58 tn=16 fp=5 fn=2" in capsys.readouterr().out

    def test_contradictory_targets_report_infeasible_exit_zero(self, capsys):
        code = main(["reconstruct", "--metrics", "0.0,1.0,1.0,1.0", "--n", "20"])
        assert code == 0
        assert "infeasible" in capsys.readouterr().out

    def test_malformed_targets_exit_two(self, capsys):
        assert main(["reconstruct", "--metrics", "0.88,0.93", "--n", "81"]) == 2
        assert main(["reconstruct", "--metrics", "a,b,c,d", "--n", "81"]) == 2

    def test_multiclass_infeasible_at_126(self, capsys):
        code = main(["reconstruct", "--kind", "multi", "--n", "126",
                     "--per-class", "Tityus:0.97,0.96,0.96,0.96",
                     "--per-class", "Bothriurus:0.96,0.96,0.94,0.95",
                     "--per-class", "None:0.99,1.00,0.96,0.98"])
        assert code == 0
        out = capsys.readouterr().out
        assert "status: infeasible" in out

    def test_multiclass_feasible_diagonal(self, capsys):
        code = main(["reconstruct", "--kind", "multi", "--n", "6",
                     "--per-class", "a:1,1,1,1", "--per-class", "b:1,1,1,1",
                     "--per-class", "c:1,1,1,1"])
        assert code == 0
        out = capsys.readouterr().out
        assert "status: feasible" in out and "10 solutions" in out


class TestReport:
    def test_render_stored_report(self, tmp_path, capsys):
        corpus = detection_corpus(4, 3)
        manifest = tmp_path / "det.jsonl"
        save_manifest(corpus, manifest)
        report = tmp_path / "r.json"
        main(["eval", "--mode", "detect", "--truth", str(manifest),
              "--backend", f"reference:{manifest}:0.0:1", "--report", str(report)])
        capsys.readouterr()
        code = main(["report", "--input", str(report),
                     "--roc-csv", str(tmp_path / "roc.csv")])
        assert code == 0
        out = capsys.readouterr().out
        assert "auc" in out and "confusion" in out
        assert (tmp_path / "roc.csv").read_text().startswith("threshold,fpr,tpr")

    def test_missing_input_exit_one(self, tmp_path):
        assert main(["report", "--input", str(tmp_path / "nope.json")]) == 1


class TestUsage:
    def test_help_for_every_subcommand(self, capsys):
        for sub in ("split", "augment", "eval", "reconstruct", "serve", "report"):
            with pytest.raises(SystemExit) as exc:
                main([sub, "--help"])
            assert exc.value.code == 0
            assert "usage" in capsys.readouterr().out

    def test_unknown_flag_exit_two(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["split", "--bogus"])
        assert exc.value.code == 2

    def test_no_subcommand_exit_two(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main([])
        assert exc.value.code == 2
