"""Command-line entry point: ``adspeech <command> [options]``.

Exit codes: 0 success, 1 usage or configuration error, 2 data error,
3 numerical failure. Failures also print one JSON object on stderr.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import json
import logging
import platform
import sys
from collections import defaultdict
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .config import DEFAULT_CONFIG, RunConfig, load_config, with_overrides
from .errors import AdSpeechError, DataError, InvalidSpec, NumericalFailure, UsageError
from .eval import (
    REFERENCE_DEPTH_TABLE,
    REFERENCE_LENGTH_4000,
    REFERENCE_LENGTH_ORACLE,
    DepthSweepReport,
    ExperimentReport,
    FoldResult,
    cross_validate,
    depth_sweep,
    feature_sweep,
    fmt,
    length_sweep,
    make_folds,
    qualitative_orderings,
    subject_table,
    write_orderings_csv,
)
from .lld import apply_functionals, row_names
from .lld.extract import LLDMatrix
from .lld.io import write_functionals_csv, write_lld_binary, write_lld_csv
from .nn_core import save_model
from .pipeline import build_examples, dataset_hash
from .smo import SmoPredictor
from .synth import CohortSpec, generate_cohort
from .train import train_model, write_history

log = logging.getLogger("adspeech")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def versions() -> dict:
    return {
        "adspeech": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
    }


def write_repro(out_dir: Path, command: str, cfg: RunConfig | None = None, seeds=None, data_hash=None, extra=None):
    doc = {
        "command": command,
        "config_hash": cfg.hash() if cfg else None,
        "config": cfg.to_dict() if cfg else None,
        "dataset_hash": data_hash,
        "seeds": seeds or {},
        "versions": versions(),
    }
    if extra:
        doc.update(extra)
    (out_dir / "reproducibility.json").write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def _examples(cfg: RunConfig, set_id=None, length_ms="cfg"):
    return build_examples(
        cfg.manifest,
        set_id or cfg.feature_set,
        cfg.length_ms if length_ms == "cfg" else length_ms,
        cfg.cache,
        cfg.threads,
    )


def _run_config(args) -> RunConfig:
    if args.config is None:
        raise UsageError("--config is required")
    cfg = load_config(args.config)
    cfg = with_overrides(
        cfg,
        arch=args.arch,
        depth=args.depth,
        seed=args.seed,
        feature_set=args.feature_set,
        length_ms=args.length_ms,
        threads=args.threads,
    )
    return cfg.validate()


def _fold_seeds(report: ExperimentReport) -> dict:
    return {f"{f.sweep_value}:{f.fold}": f.seed for f in report.folds if f.seed is not None}


# --------------------------------------------------------------------------
# commands


def cmd_synth(args) -> int:
    values = {}
    if args.spec:
        p = Path(args.spec)
        if not p.is_file():
            raise DataError(f"cohort spec not found: {p}")
        cp = configparser.ConfigParser()
        try:
            cp.read_string(p.read_text())
        except configparser.Error as exc:
            raise InvalidSpec(f"malformed cohort spec: {exc}") from exc
        if "synth" not in cp:
            raise InvalidSpec("cohort spec needs a [synth] section")
        values = dict(cp["synth"])
    for key in ("n_subjects", "effect_size", "seed"):
        v = getattr(args, key, None)
        if v is not None:
            values[key] = str(v)
    spec = CohortSpec.from_mapping(values)
    out = Path(args.out)
    manifest = generate_cohort(spec, out)
    write_repro(out, "synth", seeds={"cohort": spec.seed}, data_hash=dataset_hash(manifest), extra={"spec": spec.to_dict()})
    print(manifest)
    return 0


def cmd_extract(args) -> int:
    from .audio_io import read_manifest

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    manifest = Path(args.manifest)
    sessions = read_manifest(manifest)
    set_id = args.feature_set or "IS09"
    examples = build_examples(sessions, set_id, args.length_ms, args.cache_dir, args.threads or 1)
    names = row_names(set_id)
    lld_dir = out / "lld"
    lld_dir.mkdir(exist_ok=True)
    rows = []
    for ex in examples:
        times = 12.5 + 10.0 * np.arange(ex.n_frames)
        m = LLDMatrix(ex.features, list(names), times, set_id)
        stem = ex.utterance_id.replace("/", "__")
        if args.format == "csv":
            write_lld_csv(lld_dir / f"{stem}.csv", m, ex.utterance_id)
        else:
            write_lld_binary(lld_dir / f"{stem}.lld", m)
        rows.append((ex.utterance_id, apply_functionals(m), "AD" if ex.label == 1 else "control"))
    write_functionals_csv(out / "functionals.csv", rows)
    with (out / "utterances.csv").open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["utterance_id", "subject_id", "session_id", "label", "frames"])
        for ex in examples:
            w.writerow([ex.utterance_id, ex.subject_id, ex.session_id, ex.label, ex.n_frames])
    write_repro(out, "extract", data_hash=dataset_hash(manifest), extra={"feature_set": set_id, "length_ms": args.length_ms})
    return 0


def cmd_train(args) -> int:
    cfg = _run_config(args)
    out = cfg.output_dir / "train"
    out.mkdir(parents=True, exist_ok=True)
    examples = _examples(cfg)
    trained, history = train_model(examples, cfg.model, cfg.train)
    save_model(out / "model.bin", trained.model, trained.metadata())
    write_history(out / "history.csv", history)
    write_repro(out, "train", cfg, {"train": cfg.train.seed}, dataset_hash(cfg.manifest))
    return 0


def _fold_plan(cfg, examples):
    return make_folds(subject_table(examples), cfg.k, cfg.fold_seed)


def _write_plan(path, plan, examples):
    table = subject_table(examples)
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["fold", "subject_id", "label", "sessions"])
        for k, fold in enumerate(plan.folds):
            for s in fold:
                w.writerow([k, s, table[s][0], table[s][1]])


def cmd_cv(args) -> int:
    cfg = _run_config(args)
    out = cfg.output_dir / "cv"
    out.mkdir(parents=True, exist_ok=True)
    examples = _examples(cfg)
    plan = _fold_plan(cfg, examples)
    _write_plan(out / "folds_plan.csv", plan, examples)
    report = cross_validate(examples, cfg.model, cfg.train, plan, workers=cfg.threads, sweep_value=cfg.model.depth)
    report.sweep_name = "depth"
    report.write_folds_csv(out / "folds.csv")
    report.write_summary_csv(out / "summary.csv")
    report.write_subjects_csv(out / "subjects.csv")
    seeds = {"train": cfg.train.seed, "fold_plan": cfg.fold_seed, "folds": _fold_seeds(report)}
    write_repro(out, "cv", cfg, seeds, dataset_hash(cfg.manifest))
    u, s = report.utterance_accuracy, report.subject_accuracy
    print(f"utterance_acc={fmt(u)} subject_acc={fmt(s)}")
    return 0


def _smo(cfg):
    return SmoPredictor(cfg.sweep.smo_mode, seed=cfg.train.seed) if cfg.sweep.smo else None


def cmd_sweep(args) -> int:
    cfg = _run_config(args)
    kind = args.kind
    out = cfg.output_dir / f"sweep_{kind}"
    out.mkdir(parents=True, exist_ok=True)
    seeds = {"train": cfg.train.seed, "fold_plan": cfg.fold_seed}
    if kind == "depth":
        examples = _examples(cfg)
        plan = _fold_plan(cfg, examples)
        _write_plan(out / "folds_plan.csv", plan, examples)
        rep = depth_sweep(examples, cfg.sweep.archs, cfg.sweep.depths, cfg.model, cfg.train, plan, workers=cfg.threads)
        for arch, r in rep.per_arch.items():
            r.write_folds_csv(out / f"folds_{arch}.csv")
            r.write_summary_csv(out / f"summary_{arch}.csv")
            seeds[f"folds_{arch}"] = _fold_seeds(r)
        rep.write_table_csv(out / "table.csv")
        write_orderings_csv(out / "orderings.csv", qualitative_orderings(rep))
    elif kind == "length":
        rep = length_sweep(
            lambda length: _examples(cfg, length_ms=length),
            cfg.sweep.lengths_ms,
            cfg.sweep.length_depths,
            cfg.model,
            cfg.train,
            cfg.fold_seed,
            cfg.k,
            workers=cfg.threads,
        )
        rep.write_folds_csv(out / "folds.csv")
        rep.write_summary_csv(out / "summary.csv")
        write_orderings_csv(out / "orderings.csv", qualitative_orderings(None, rep))
        seeds["folds"] = _fold_seeds(rep)
    elif kind == "features":
        rep = feature_sweep(
            lambda fs: _examples(cfg, set_id=fs),
            cfg.sweep.feature_sets,
            cfg.sweep.depths,
            cfg.model,
            cfg.train,
            cfg.fold_seed,
            cfg.k,
            smo_predictor=_smo(cfg),
            workers=cfg.threads,
        )
        rep.write_folds_csv(out / "folds.csv")
        rep.write_summary_csv(out / "summary.csv")
        seeds["folds"] = _fold_seeds(rep)
    else:
        raise UsageError(f"unknown sweep kind {kind!r}")
    write_repro(out, f"sweep {kind}", cfg, seeds, dataset_hash(cfg.manifest))
    return 0


# --------------------------------------------------------------------------
# report


def read_folds_csv(path, sweep_name="sweep_value") -> ExperimentReport:
    rep = ExperimentReport(sweep_name=sweep_name)
    with Path(path).open(newline="") as fh:
        for row in csv.DictReader(fh):
            rep.folds.append(
                FoldResult(row["sweep_value"], int(row["fold"]), float(row["utterance_acc"]), float(row["subject_acc"]), 0, 0)
            )
    return rep


def _write_dat(path, header: str, rows) -> None:
    with Path(path).open("w") as fh:
        fh.write(f"# {header}\n")
        for r in rows:
            fh.write(" ".join(fmt(v) for v in r) + "\n")


def cmd_report(args) -> int:
    run = Path(args.run_dir)
    if not run.is_dir():
        raise DataError(f"run directory not found: {run}")
    out = run / "report"
    out.mkdir(exist_ok=True)
    wrote = []
    depth_rep = length_rep = None

    d = run / "sweep_depth"
    per_arch = {a: read_folds_csv(d / f"folds_{a}.csv", "depth") for a in ("cnn", "gcnn") if (d / f"folds_{a}.csv").is_file()}
    if per_arch:
        depths = []
        for r in per_arch.values():
            depths += [int(v) for v, _, _ in r.rows() if int(v) not in depths]
        depth_rep = DepthSweepReport(per_arch, tuple(sorted(depths)))
        depth_rep.write_table_csv(out / "table1.csv", with_reference=True)
        for arch, r in per_arch.items():
            _write_dat(out / f"depth_{arch}.dat", "depth utterance_acc subject_acc", [(int(v), u, s) for v, u, s in r.rows()])
        wrote.append("table1.csv")

    f = run / "sweep_length" / "folds.csv"
    if f.is_file():
        length_rep = read_folds_csv(f, "length_ms:depth")
        series = defaultdict(list)
        for v, u, s in length_rep.rows():
            length, depth = v.split(":")
            series[int(depth)].append((float(length), u, s))
        for depth, pts in sorted(series.items()):
            _write_dat(out / f"length_gcnn{depth}.dat", "length_ms utterance_acc subject_acc", sorted(pts))
        with (out / "length_reference.csv").open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["depth", "ref_subject_4000ms", "ref_subject_oracle"])
            for depth in sorted(REFERENCE_LENGTH_4000):
                w.writerow([depth, fmt(REFERENCE_LENGTH_4000[depth]), fmt(REFERENCE_LENGTH_ORACLE[depth])])
        wrote.append("length")

    f = run / "sweep_features" / "folds.csv"
    if f.is_file():
        feat = read_folds_csv(f, "feature_set:model")
        series = defaultdict(list)
        smo_rows = []
        for v, u, s in feat.rows():
            fs, model = v.split(":")
            if model == "smo":
                smo_rows.append((fs, s))
            else:
                series[fs].append((int(model[3:]), u, s))
        for fs, pts in sorted(series.items()):
            _write_dat(out / f"features_{fs}_cnn.dat", "depth utterance_acc subject_acc", sorted(pts))
        with (out / "features_smo.csv").open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["feature_set", "subject_acc"])
            for fs, s in smo_rows:
                w.writerow([fs, fmt(s)])
        wrote.append("features")

    if not wrote:
        raise DataError(f"no sweep results found under {run}")
    write_orderings_csv(out / "orderings.csv", qualitative_orderings(depth_rep, length_rep))
    ref = [{"depth": k, "cnn_utterance": v[0], "cnn_subject": v[1], "gcnn_utterance": v[2], "gcnn_subject": v[3]}
           for k, v in sorted(REFERENCE_DEPTH_TABLE.items())]
    write_repro(out, "report", extra={"sources": wrote, "reference_depth_table": ref})
    return 0


# --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", help="run configuration (INI)")
    common.add_argument("--seed", type=int, help="overrides the training and fold seeds")
    common.add_argument("--threads", type=int, help="worker processes (folds, extraction)")
    common.add_argument("--feature-set", choices=("IS09", "IS10"))
    common.add_argument("--arch", choices=("cnn", "gcnn"))
    common.add_argument("--depth", type=int)
    common.add_argument("--length-ms", type=float, help="fixed segment length instead of transcript utterances")
    common.add_argument("-v", "--verbose", action="store_true")

    p = _Parser(prog="adspeech", description="Paralinguistic AD detection with gated CNNs.")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    s = sub.add_parser("synth", parents=[common], help="generate a synthetic cohort")
    s.add_argument("--spec", help="INI file with a [synth] section")
    s.add_argument("--out", required=True)
    s.add_argument("--n-subjects", type=int, dest="n_subjects")
    s.add_argument("--effect-size", type=float, dest="effect_size")
    s.set_defaults(func=cmd_synth)

    s = sub.add_parser("extract", parents=[common], help="extract LLD matrices and functionals")
    s.add_argument("--manifest", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--format", choices=("binary", "csv"), default="binary")
    s.add_argument("--cache-dir")
    s.set_defaults(func=cmd_extract)

    for name, func, helptext in (
        ("train", cmd_train, "train one network on the whole dataset"),
        ("cv", cmd_cv, "10-fold subject-disjoint cross-validation"),
    ):
        s = sub.add_parser(name, parents=[common], help=helptext)
        s.set_defaults(func=func)

    s = sub.add_parser("sweep", parents=[common], help="depth, segment-length or feature-set sweep")
    s.add_argument("--kind", choices=("depth", "length", "features"), required=True)
    s.set_defaults(func=cmd_sweep)

    s = sub.add_parser("report", parents=[common], help="summary tables and plot-ready series")
    s.add_argument("--run-dir", required=True)
    s.set_defaults(func=cmd_report)

    s = sub.add_parser("init-config", help="print the default configuration")
    s.set_defaults(func=lambda a: (sys.stdout.write(DEFAULT_CONFIG), 0)[1])
    return p


def _fail(exc: Exception, code: int) -> int:
    line = {"error": type(exc).__name__, "message": str(exc), "exit_code": code}
    print(json.dumps(line, sort_keys=True), file=sys.stderr)
    return code


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise UsageError("a command is required (synth, extract, train, cv, sweep, report)")
        logging.basicConfig(
            level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
            format="%(levelname)s %(name)s: %(message)s",
        )
        if getattr(args, "threads", None) is not None and args.threads < 1:
            raise UsageError("--threads must be >= 1")
        return int(args.func(args))
    except AdSpeechError as exc:
        return _fail(exc, exc.exit_code)
    except FloatingPointError as exc:
        return _fail(NumericalFailure(str(exc)), 3)


if __name__ == "__main__":
    sys.exit(main())
