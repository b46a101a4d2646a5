"""The scorpid command line: split, augment, eval, reconstruct, serve, report.

Every subcommand is deterministic for a given input set and seed; artifacts
(manifests, reports, CSV, SVG) are byte-stable across re-runs. Exit codes:
0 success, 1 operational failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import replace as dc_replace
from fractions import Fraction
from pathlib import Path

import numpy as np
from PIL import Image

from . import augment as aug
from .corpus import (Corpus, ManifestError, SplitRatios, corpus_stats,
                     load_manifest, save_manifest, split_corpus)
from .infer import BackendError, build_backend
from .metrics import (DEFAULT_TOL, MetricTargets, reconstruct_confusion,
                      reconstruct_multiclass)
from .reports import (EvaluationRequestError, roc_csv, roc_svg, run_evaluation,
                      write_report)

USAGE_ERROR = 2
FAILURE = 1


def _parse_ratios(text: str) -> SplitRatios:
    parts = text.split(",")
    if len(parts) != 3:
        raise ValueError("ratios must be three comma-separated numbers")
    return SplitRatios.of(*(Fraction(p.strip()) for p in parts))


def _parse_metrics(text: str) -> MetricTargets:
    parts = [p.strip() for p in text.split(",")]
    if len(parts) != 4:
        raise ValueError("metrics must be accuracy,precision,recall,f1")
    values = [None if p in ("", "-", "none") else p for p in parts]
    return MetricTargets.of(*values)


def _split_arg(value: str):
    return None if value == "all" else value


def cmd_split(args) -> int:
    try:
        ratios = _parse_ratios(args.ratios)
    except (ValueError, ZeroDivisionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE_ERROR
    try:
        corpus = load_manifest(args.manifest)
        assigned = split_corpus(
            corpus, ratios, args.seed,
            allow_reassign=args.allow_reassign, stratify=args.stratify,
        )
        save_manifest(assigned, args.out)
    except (FileNotFoundError, ManifestError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return FAILURE
    print(corpus_stats(assigned).summary())
    return 0


def cmd_augment(args) -> int:
    try:
        corpus = load_manifest(args.manifest)
    except (FileNotFoundError, ManifestError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return FAILURE
    out_dir = Path(args.out_dir)
    manifest_dir = Path(args.manifest).resolve().parent
    spec = aug.AugmentSpec(per_image_variants=args.k, seed=args.seed)

    def resolve(rec_path: str) -> Path:
        p = Path(rec_path)
        return p if p.is_absolute() else manifest_dir / p

    loader = writer = None
    if not args.no_images:
        def loader(rec):
            path = resolve(rec.path)
            try:
                with Image.open(path) as img:
                    return np.asarray(img.convert("RGB"))
            except (FileNotFoundError, OSError) as exc:
                raise FileNotFoundError(f"cannot read source image {path}: {exc}") from None

        def writer(rec, pixels):
            target = out_dir / Path(rec.path).name
            target.parent.mkdir(parents=True, exist_ok=True)
            Image.fromarray(pixels).save(target, format="PNG")

    try:
        result = aug.augment_corpus(corpus, spec, image_loader=loader, image_writer=writer)
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return FAILURE
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE_ERROR

    out_dir.mkdir(parents=True, exist_ok=True)
    # Keep originals loadable from the new manifest location; variant images
    # sit next to the manifest.
    rewritten = [
        dc_replace(rec, path=Path(rec.path).name) if rec.origin == "augmented"
        else dc_replace(rec, path=os.path.relpath(resolve(rec.path), out_dir))
        for rec in result.corpus
    ]
    save_manifest(Corpus(tuple(rewritten), result.corpus.kind), out_dir / "manifest.jsonl")
    with (out_dir / "transforms.jsonl").open("w", encoding="utf-8") as fh:
        for record in result.transforms:
            fh.write(json.dumps(record.to_json(), ensure_ascii=False) + "\n")
    print(f"records: {len(corpus)} -> {len(result.corpus)} "
          f"(+{len(result.transforms)} variants, {len(result.dropped)} dropped)")
    return 0


def cmd_eval(args) -> int:
    if args.predictions is None and args.backend is None and args.server is None:
        print("error: need --predictions, --backend, or --server", file=sys.stderr)
        return USAGE_ERROR
    split = _split_arg(args.split)

    if args.server is not None:
        import httpx

        request = {
            "manifest": str(Path(args.truth).resolve()),
            "mode": args.mode,
            "predictions_path": args.predictions,
            "iou_threshold": args.iou,
            "score_threshold": args.threshold,
            "split": split,
        }
        try:
            resp = httpx.post(args.server.rstrip("/") + "/evaluate",
                              json=request, timeout=60.0)
        except httpx.HTTPError as exc:
            print(f"error: evaluation request failed: {exc}", file=sys.stderr)
            return FAILURE
        if resp.status_code == 422:
            print(f"error: {resp.text}", file=sys.stderr)
            return USAGE_ERROR
        if resp.status_code != 200:
            print(f"error: service returned {resp.status_code}: {resp.text}",
                  file=sys.stderr)
            return FAILURE
        data = resp.content
        Path(args.report).parent.mkdir(parents=True, exist_ok=True)
        Path(args.report).write_bytes(data)
        report = json.loads(data)
    else:
        backend = None
        if args.backend is not None:
            try:
                backend = build_backend(args.backend)
            except (ValueError, FileNotFoundError, ManifestError) as exc:
                print(f"error: {exc}", file=sys.stderr)
                return USAGE_ERROR
        try:
            report = run_evaluation(
                manifest=args.truth,
                mode=args.mode,
                predictions_path=args.predictions,
                backend=backend,
                iou_threshold=args.iou,
                score_threshold=args.threshold,
                split=split,
            )
        except EvaluationRequestError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return USAGE_ERROR
        except (KeyError, ValueError, FileNotFoundError, ManifestError, BackendError) as exc:
            message = exc.args[0] if exc.args else exc
            print(f"error: {message}", file=sys.stderr)
            return FAILURE
        write_report(report, args.report)

    if args.roc_csv and report.get("roc"):
        Path(args.roc_csv).parent.mkdir(parents=True, exist_ok=True)
        Path(args.roc_csv).write_text(roc_csv(_roc_from_doc(report)), encoding="utf-8")
    if args.roc_svg and report.get("roc"):
        Path(args.roc_svg).parent.mkdir(parents=True, exist_ok=True)
        Path(args.roc_svg).write_text(roc_svg(_roc_from_doc(report)), encoding="utf-8")
    _print_report_summary(report)
    return 0


def _roc_from_doc(report: dict) -> dict:
    roc = dict(report["roc"])
    roc["points"] = [
        [_undo_inf(f), _undo_inf(t), _undo_inf(thr)] for f, t, thr in roc["points"]
    ]
    return roc


def _undo_inf(v):
    if v == "inf":
        return float("inf")
    if v == "-inf":
        return float("-inf")
    return float(v)


def _print_report_summary(report: dict) -> None:
    if report["mode"] == "detect":
        c = report["confusion"]
        m = report["metrics"]
        print(f"confusion: tp={c['tp']} tn={c['tn']} fp={c['fp']} fn={c['fn']}")
        print("metrics:   " + "  ".join(
            f"{k}={_fmt_metric(m[k])}"
            for k in ("accuracy", "precision", "recall", "f_measure")))
        print(f"auc:       {report['roc']['auc']:.4f}")
        print(f"localization_errors: {report['localization_errors']}")
    else:
        labels = report["confusion"]["labels"]
        print("confusion (rows true / columns predicted):")
        header = "            " + "  ".join(f"{l:>10}" for l in labels)
        print(header)
        for label, row in zip(labels, report["confusion"]["counts"]):
            print(f"{label:>10}  " + "  ".join(f"{v:>10}" for v in row))
        for label in labels:
            m = report["metrics"][label]
            print(f"{label}: " + "  ".join(
                f"{k}={_fmt_metric(m[k])}"
                for k in ("accuracy", "precision", "recall", "f_measure")))


def _fmt_metric(v) -> str:
    return "undefined" if v is None else f"{v:.4f}"


def cmd_reconstruct(args) -> int:
    tol = Fraction(args.tol) if args.tol else DEFAULT_TOL
    if args.kind == "binary":
        if not args.metrics:
            print("error: binary reconstruction needs --metrics a,p,r,f1", file=sys.stderr)
            return USAGE_ERROR
        try:
            targets = _parse_metrics(args.metrics)
        except (ValueError, ZeroDivisionError) as exc:
            print(f"error: {exc}", file=sys.stderr)
            return USAGE_ERROR
        solutions = reconstruct_confusion(targets, args.n, tol)
        for sol in solutions:
            print(f"tp={sol.tp} tn={sol.tn} fp={sol.fp} fn={sol.fn}")
        if solutions:
            print(f"{len(solutions)} solutions")
        else:
            print("infeasible")
        return 0

    if not args.per_class:
        print("error: multi reconstruction needs --per-class LABEL:a,p,r,f1 entries",
              file=sys.stderr)
        return USAGE_ERROR
    per_class = {}
    for entry in args.per_class:
        try:
            label, values = entry.split(":", 1)
            per_class[label] = _parse_metrics(values)
        except (ValueError, ZeroDivisionError) as exc:
            print(f"error: malformed --per-class entry {entry!r}: {exc}", file=sys.stderr)
            return USAGE_ERROR
    row_sums = None
    if args.row_sums:
        try:
            row_sums = [int(v) for v in args.row_sums.split(",")]
        except ValueError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return USAGE_ERROR
    result = reconstruct_multiclass(per_class, args.n, row_sums=row_sums,
                                    tol=tol, budget=args.budget)
    print(f"status: {result.status} ({result.examined} candidates examined)")
    for sol in result.solutions:
        print("  " + " | ".join(
            f"{label}: {' '.join(str(v) for v in row)}"
            for label, row in zip(sol.labels, sol.counts)))
    if result.status == "infeasible":
        print("infeasible")
    else:
        print(f"{len(result.solutions)} solutions")
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    try:
        app = create_app(
            backend_descriptor=args.backend,
            log_path=args.log_path,
            max_body_bytes=args.max_body_bytes,
        )
    except (ValueError, FileNotFoundError, ManifestError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE_ERROR
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


def cmd_report(args) -> int:
    try:
        report = json.loads(Path(args.input).read_text(encoding="utf-8"))
    except (FileNotFoundError, json.JSONDecodeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return FAILURE
    if args.roc_csv and report.get("roc"):
        Path(args.roc_csv).write_text(roc_csv(_roc_from_doc(report)), encoding="utf-8")
    if args.roc_svg and report.get("roc"):
        Path(args.roc_svg).write_text(roc_svg(_roc_from_doc(report)), encoding="utf-8")
    _print_report_summary(report)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="scorpid",
        description="Scorpion detection/classification pipeline toolkit",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("split", help="assign train/valid/test splits to a manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--ratios", default="0.7,0.2,0.1",
                   help="train,valid,test fractions (default 0.7,0.2,0.1)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--stratify", action="store_true",
                   help="apportion separately per class / per polarity")
    p.add_argument("--allow-reassign", action="store_true")
    p.set_defaults(func=cmd_split)

    p = sub.add_parser("augment", help="expand a corpus with seeded variants")
    p.add_argument("--manifest", required=True)
    p.add_argument("--k", type=int, default=2, help="variants per eligible record")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--no-images", action="store_true",
                   help="geometry and transform records only, no pixel output")
    p.set_defaults(func=cmd_augment)

    p = sub.add_parser("eval", help="evaluate predictions against a truth manifest")
    p.add_argument("--mode", choices=("detect", "classify"), required=True)
    p.add_argument("--truth", required=True, help="truth manifest path")
    p.add_argument("--predictions", help="predictions manifest path")
    p.add_argument("--backend", help="generate predictions from a backend descriptor")
    p.add_argument("--server", help="run the evaluation through a service URL")
    p.add_argument("--iou", type=float, default=0.5)
    p.add_argument("--threshold", type=float, default=0.5, help="score threshold")
    p.add_argument("--split", default="test",
                   choices=("train", "valid", "test", "all"))
    p.add_argument("--report", required=True, help="report JSON output path")
    p.add_argument("--roc-csv")
    p.add_argument("--roc-svg")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("reconstruct",
                       help="recover confusion matrices from rounded metric tables")
    p.add_argument("--kind", choices=("binary", "multi"), default="binary")
    p.add_argument("--metrics", help="binary targets: accuracy,precision,recall,f1")
    p.add_argument("--per-class", action="append",
                   help="multi targets: LABEL:a,p,r,f1 (repeatable)")
    p.add_argument("--n", type=int, required=True, help="total count")
    p.add_argument("--tol", help="matching tolerance (default 0.005)")
    p.add_argument("--row-sums", help="pin per-class row sums, comma separated")
    p.add_argument("--budget", type=int, default=20_000_000)
    p.set_defaults(func=cmd_reconstruct)

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--host", default=os.environ.get("SCORPID_HOST", "127.0.0.1"))
    p.add_argument("--port", type=int,
                   default=int(os.environ.get("SCORPID_PORT", "8080")))
    p.add_argument("--backend", default=os.environ.get("SCORPID_BACKEND"),
                   help="reference:<manifest>:<eps>:<seed> or a model runner URL")
    p.add_argument("--log-path", default=os.environ.get("SCORPID_LOG_PATH"))
    p.add_argument("--max-body-bytes", type=int,
                   default=int(os.environ.get("SCORPID_MAX_BODY_BYTES",
                                              str(16 * 1024 * 1024))))
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("report", help="render a stored report (summary, CSV, SVG)")
    p.add_argument("--input", required=True)
    p.add_argument("--roc-csv")
    p.add_argument("--roc-svg")
    p.set_defaults(func=cmd_report)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
