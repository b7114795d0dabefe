"""``gentext`` command-line interface.

Exit codes: 0 success, 2 input/validation error, 3 runtime/training error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import shutil
import sys
import tempfile
from pathlib import Path

import numpy as np

from . import __version__
from .classifiers import model_from_dict
from .config import RunConfig
from .corpus import (
    Dataset,
    FoldAssignment,
    LabelSpace,
    assign_folds,
    concat,
    fold_class_counts,
    load_dataset,
)
from .errors import GentextError, InputError, TrainingError
from .evaluation import (
    compare_report,
    evaluate,
    format_evaluation,
    read_predictions,
    read_probabilities,
)
from .features import FeatureConfig, extract
from .ngram_lm import DEFAULT_BIN_EDGES, NGramModel, rank_histogram, train_lm
from .stacking import (
    BaseLearnerSpec,
    EnsembleModel,
    OofMatrix,
    ensemble_predict,
    fit_ensemble,
    learner_from_dict,
    predict_single,
    train_single,
)

MANIFEST_VERSION = 1


def _load_tsv(path: str | Path, space: LabelSpace) -> Dataset:
    """Load a dataset, treating the ``label`` column as optional."""
    path = Path(path)
    if not path.is_file():
        raise InputError(f"file not found: {path}")
    first = path.read_text(encoding="utf-8").split("\n", 1)[0]
    has_labels = "label" in [h.strip() for h in first.rstrip("\r").split("\t")]
    return load_dataset(path, space, has_labels)


def _edges(text: str) -> tuple[int, ...]:
    return tuple(int(v) for v in text.split(",") if v.strip())


def _write(path: Path, content: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(content, encoding="utf-8")


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _json(data) -> str:
    return json.dumps(data, ensure_ascii=False, sort_keys=True, indent=2) + "\n"


# -- split-folds -------------------------------------------------------------

def cmd_split_folds(args) -> int:
    space = LabelSpace.for_task(args.task)
    data = _load_tsv(args.input, space)
    if not data.is_labeled:
        raise InputError("fold assignment requires labels")
    folds = assign_folds(data, args.k, args.seed)
    _write(Path(args.output), folds.to_csv())
    counts = fold_class_counts(data, folds)
    print("classes " + "/".join(space.names))
    for f, row in enumerate(counts):
        print(f"fold {f} " + "/".join(str(int(v)) for v in row))
    return 0


# -- train-lm / featurize ----------------------------------------------------

def cmd_train_lm(args) -> int:
    space = LabelSpace.for_task(args.task)
    data = _load_tsv(args.input, space)
    docs = data.documents
    if args.label is not None:
        if not data.is_labeled:
            raise InputError("--label needs a labelled input file")
        wanted = space.index(args.label)
        docs = [d for d, y in zip(data.documents, data.labels) if y == wanted]
    lm = train_lm([d.text for d in docs], order=args.order, add_k=args.add_k,
                  min_count=args.min_count)
    _write(Path(args.output), lm.dumps())
    print(f"vocab {len(lm.vocab)} contexts {len(lm.counts)} documents {len(docs)}")
    return 0


def cmd_featurize(args) -> int:
    space = LabelSpace.for_task(args.task)
    data = _load_tsv(args.input, space)
    config = FeatureConfig(kind=args.features, bin_edges=_edges(args.bin_edges))
    human_lm = machine_lm = None
    if config.uses_lm:
        if not (args.human_lm and args.machine_lm):
            raise InputError("lm features need --human-lm and --machine-lm")
        human_lm = _load_lm(args.human_lm)
        machine_lm = _load_lm(args.machine_lm)
    matrix = extract(data.documents, config, human_lm, machine_lm)
    _write(Path(args.output), matrix.to_csv())
    print(f"rows {len(matrix.ids)} features {len(matrix.names)}")
    return 0


def _load_lm(path) -> NGramModel:
    if not Path(path).is_file():
        raise InputError(f"file not found: {path}")
    return NGramModel.load(path)


# -- train -------------------------------------------------------------------

def cmd_train(args) -> int:
    overrides = dict(_parse_set(args.set))
    for key in ("output", "seed", "k", "threads"):
        value = getattr(args, key)
        if value is not None:
            overrides[key] = str(value)
    cfg = RunConfig.load(args.config, overrides)
    if cfg.get("output") is None:
        raise InputError("no output directory: set 'output' or pass --output")
    output = Path(cfg.get("output"))
    output.parent.mkdir(parents=True, exist_ok=True)
    stage = Path(tempfile.mkdtemp(prefix=".gentext-", dir=output.parent))
    try:
        log = _train_into(cfg, stage)
        output.mkdir(exist_ok=True)
        for item in sorted(stage.iterdir()):
            target = output / item.name
            if target.is_dir():
                shutil.rmtree(target)
            elif target.exists():
                target.unlink()
            item.rename(target)
    finally:
        shutil.rmtree(stage, ignore_errors=True)
    print("\n".join(log))
    return 0


def _parse_set(items):
    for item in items or ():
        if "=" not in item:
            raise InputError(f"--set expects key=value, got {item!r}")
        key, value = item.split("=", 1)
        yield key.strip(), value.strip()


def _train_into(cfg: RunConfig, out: Path) -> list[str]:
    space = cfg.space
    specs = cfg.learner_specs()
    train = load_dataset(cfg.get("train"), space, has_labels=True)
    log = [
        f"gentext {__version__}",
        f"config_hash {cfg.config_hash()}",
        f"task {cfg.task}",
        f"mode {cfg.mode}",
        f"seed {cfg.seed}",
        f"train_size {len(train)}",
    ]
    if cfg.get("validation"):
        validation = load_dataset(cfg.get("validation"), space, has_labels=True)
        log.append(f"validation_size {len(validation)}")
        if cfg.task == "binary":
            train = concat(train, validation)
            log.append(f"combined_size {len(train)}")
        else:
            log.append("validation not merged (multiclass task uses train as is)")
    for spec in specs:
        log.append(f"learner {spec.name} kind={spec.kind} features={spec.features} "
                   f"seed={spec.param('seed')}")

    manifest = {
        "version": MANIFEST_VERSION,
        "gentext_version": __version__,
        "task": cfg.task,
        "mode": cfg.mode,
        "label_space": space.to_dict(),
        "config_hash": cfg.config_hash(),
        "seed": cfg.seed,
        "learners": [s.to_dict() for s in specs],
    }
    files: list[Path] = []
    if cfg.mode == "single":
        manifest["single_models"] = {}
        for spec in specs:
            model = train_single(spec, train)
            rel = Path("single") / f"{spec.name}.json"
            _write(out / rel, model.dumps())
            manifest["single_models"][spec.name] = rel.as_posix()
            files.append(rel)
    else:
        folds = assign_folds(train, cfg.k, cfg.seed)
        _write(out / "folds.csv", folds.to_csv())
        files.append(Path("folds.csv"))
        manifest.update({"k": cfg.k, "folds_file": "folds.csv", "fold_models": {}})
        ensemble, oof = fit_ensemble(specs, train, folds, cfg.meta_config(), threads=cfg.threads)
        y = np.asarray(train.labels)
        fold_idx = folds.folds_for(train)
        for spec, block in zip(specs, oof.blocks):
            paths = []
            for f, model in enumerate(ensemble.fold_models[spec.name]):
                rel = Path("folds") / spec.name / f"fold{f}.json"
                _write(out / rel, model.dumps())
                paths.append(rel.as_posix())
                files.append(rel)
            manifest["fold_models"][spec.name] = paths
            hits = block.probs.argmax(axis=1) == y
            per_fold = [float(hits[fold_idx == f].mean()) for f in range(cfg.k)]
            log.append(f"oof {spec.name} accuracy {hits.mean():.5f} "
                       f"fold_stddev {np.std(per_fold):.5f}")
        _write(out / "oof.csv", oof.to_csv())
        _write(out / "meta.json", json.dumps(ensemble.meta.to_dict(), sort_keys=True))
        files += [Path("oof.csv"), Path("meta.json")]
        manifest["oof"] = "oof.csv"
        manifest["meta_model"] = "meta.json"
        meta_acc = float(np.mean(ensemble.meta.predict_proba(oof.values).argmax(axis=1) == y))
        log.append(f"meta epochs {ensemble.meta.epochs_run} train_accuracy {meta_acc:.5f}")
    manifest["files"] = {rel.as_posix(): _sha256(out / rel) for rel in files}
    _write(out / "manifest.json", _json(manifest))
    log.append(f"manifest_sha256 {_sha256(out / 'manifest.json')}")
    _write(out / "run.log", "\n".join(log) + "\n")
    return log


# -- predict -----------------------------------------------------------------

def _read_json(path: Path) -> dict:
    if not path.is_file():
        raise InputError(f"missing model file: {path}")
    return json.loads(path.read_text(encoding="utf-8"))


def load_manifest(path: str | Path) -> tuple[dict, Path]:
    path = Path(path)
    manifest = _read_json(path)
    if manifest.get("version") != MANIFEST_VERSION:
        raise InputError(f"unsupported manifest version {manifest.get('version')!r}")
    return manifest, path.parent


def load_ensemble(manifest: dict, root: Path) -> EnsembleModel:
    space = LabelSpace.from_dict(manifest["label_space"])
    specs = tuple(BaseLearnerSpec.from_dict(s) for s in manifest["learners"])
    fold_models = {
        name: [learner_from_dict(_read_json(root / rel)) for rel in paths]
        for name, paths in manifest["fold_models"].items()
    }
    columns = [f"{s.name}.{c}" for s in specs for c in space.names]
    meta = model_from_dict(_read_json(root / manifest["meta_model"]), columns)
    folds_path = root / manifest["folds_file"]
    if not folds_path.is_file():
        raise InputError(f"missing folds file: {folds_path}")
    folds = FoldAssignment.from_csv(folds_path.read_text(encoding="utf-8"), manifest["k"],
                                    manifest["seed"])
    return EnsembleModel(specs, fold_models, meta, space, folds)


def cmd_predict(args) -> int:
    manifest, root = load_manifest(args.manifest)
    space = LabelSpace.from_dict(manifest["label_space"])
    test = _load_tsv(args.test, space)
    if manifest["mode"] == "single":
        name = args.learner or manifest["learners"][0]["name"]
        if name not in manifest["single_models"]:
            raise InputError(f"manifest has no single model named {name!r}")
        model = learner_from_dict(_read_json(root / manifest["single_models"][name]))
        preds = predict_single(model, test)
    else:
        preds = ensemble_predict(load_ensemble(manifest, root), test)
    out = Path(args.output)
    out.mkdir(parents=True, exist_ok=True)
    preds.write(out / "predictions.csv", out / "probabilities.csv")
    print(f"predicted {len(preds)} documents -> {out / 'predictions.csv'}")
    return 0


# -- evaluate / report --------------------------------------------------------

def cmd_evaluate(args) -> int:
    space = LabelSpace.for_task(args.task)
    preds = read_predictions(args.predictions, space)
    gold = load_dataset(args.gold, space, has_labels=True)
    report = evaluate(preds, gold)
    sys.stdout.write(format_evaluation(report))
    if args.csv:
        _write(Path(args.csv), compare_report([(args.name, report)], fmt="csv"))
    return 0


def cmd_report(args) -> int:
    from . import plotting

    space = LabelSpace.for_task(args.task)
    gold = load_dataset(args.gold, space, has_labels=True)
    runs = []
    for item in args.run:
        if "=" not in item:
            raise InputError(f"--run expects NAME=PREDICTIONS.csv, got {item!r}")
        name, path = item.split("=", 1)
        runs.append((name, evaluate(read_predictions(path, space), gold)))
    out = Path(args.output)
    out.mkdir(parents=True, exist_ok=True)
    table = compare_report(runs, fmt=args.format)
    _write(out / ("report.csv" if args.format == "csv" else "report.txt"), table)
    sys.stdout.write(table)
    figures = [plotting.plot_accuracy(runs, out / "accuracy.png")]
    for name, rep in runs:
        figures.append(plotting.plot_confusion(rep, out / f"confusion_{name}.png", name))
    if args.rank_lm:
        lm = _load_lm(args.rank_lm)
        edges = _edges(args.bin_edges)
        hists = {}
        for c, cname in enumerate(space.names):
            docs = [d for d, y in zip(gold.documents, gold.labels) if y == c]
            if docs:
                hists[cname] = np.mean([rank_histogram(lm, d.text, edges) for d in docs], axis=0)
        labels = [f"<={e}" for e in edges] + [f">{edges[-1]}"]
        figures.append(plotting.plot_rank_histograms(hists, labels, out / "rank_histogram.png"))
    for fig in figures:
        print(f"figure {fig}")
    return 0


# -- verify ------------------------------------------------------------------

def _check_simplex(probs: np.ndarray, what: str) -> list[str]:
    problems = []
    if probs.size and (np.any(probs < 0) or not np.all(np.isfinite(probs))):
        problems.append(f"{what}: negative or non-finite probability")
    sums = probs.sum(axis=1) if probs.size else np.zeros(0)
    bad = np.flatnonzero(np.abs(sums - 1.0) > 1e-9)
    if bad.size:
        problems.append(f"{what}: {bad.size} rows do not sum to 1 within 1e-9")
    return problems


def cmd_verify(args) -> int:
    space = LabelSpace.for_task(args.task)
    checks: list[tuple[str, list[str]]] = []
    for path in args.probabilities or ():
        preds = read_probabilities(path, space)
        checks.append((f"probabilities {path}", _check_simplex(preds.probs, "probabilities")))
    for path in args.oof or ():
        oof = OofMatrix.from_csv(Path(path).read_text(encoding="utf-8"), space)
        problems = []
        for block in oof.blocks:
            problems += _check_simplex(block.probs, f"block {block.learner}")
        checks.append((f"oof {path}", problems))
    for path in args.folds or ():
        problems = []
        try:
            folds = FoldAssignment.from_csv(Path(path).read_text(encoding="utf-8"))
            sizes = np.bincount(list(folds.fold_of.values()), minlength=folds.k)
            if sizes.size and sizes.max() - sizes.min() > 1:
                problems.append(f"fold sizes {sizes.tolist()} differ by more than 1")
        except GentextError as err:
            problems.append(str(err))
        checks.append((f"folds {path}", problems))
    for path in args.manifest or ():
        manifest, root = load_manifest(path)
        problems = []
        for rel, digest in manifest.get("files", {}).items():
            target = root / rel
            if not target.is_file():
                problems.append(f"missing {target}")
            elif _sha256(target) != digest:
                problems.append(f"checksum mismatch {target}")
        checks.append((f"manifest {path}", problems))
    for path in args.lm or ():
        lm = _load_lm(path)
        rng = np.random.default_rng(0)
        worst = 0.0
        for _ in range(100):
            history = rng.integers(0, len(lm.vocab), size=max(lm.order - 1, 0)).tolist()
            worst = max(worst, abs(lm.distribution(history).sum() - 1.0))
        checks.append((f"lm {path}", [] if worst <= 1e-9 else [f"normalisation error {worst}"]))
    if not checks:
        raise InputError("nothing to verify")
    failed = False
    for what, problems in checks:
        if problems:
            failed = True
            for p in problems:
                print(f"FAIL {what}: {p}")
        else:
            print(f"ok {what}")
    return 2 if failed else 0


# -- entry point ---------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gentext", description="Generated-text detection toolkit")
    parser.add_argument("--version", action="version", version=f"gentext {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def task_arg(p):
        p.add_argument("--task", choices=["binary", "multiclass"], default="binary")

    p = sub.add_parser("split-folds", help="write a stratified id,fold CSV")
    p.add_argument("--input", required=True)
    task_arg(p)
    p.add_argument("--k", type=int, default=5)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--output", required=True)
    p.set_defaults(func=cmd_split_folds)

    p = sub.add_parser("train-lm", help="train an n-gram language model")
    p.add_argument("--input", required=True)
    task_arg(p)
    p.add_argument("--label", help="only use documents with this class name")
    p.add_argument("--order", type=int, default=3)
    p.add_argument("--add-k", type=float, default=0.1)
    p.add_argument("--min-count", type=int, default=1)
    p.add_argument("--output", required=True)
    p.set_defaults(func=cmd_train_lm)

    p = sub.add_parser("featurize", help="write a feature CSV")
    p.add_argument("--input", required=True)
    task_arg(p)
    p.add_argument("--features", choices=["surface", "lm", "both"], default="surface")
    p.add_argument("--human-lm")
    p.add_argument("--machine-lm")
    p.add_argument("--bin-edges", default=",".join(map(str, DEFAULT_BIN_EDGES)))
    p.add_argument("--output", required=True)
    p.set_defaults(func=cmd_featurize)

    p = sub.add_parser("train", help="run the training pipeline from a config file")
    p.add_argument("--config")
    p.add_argument("--output")
    p.add_argument("--seed", type=int)
    p.add_argument("--k", type=int)
    p.add_argument("--threads", type=int)
    p.add_argument("--set", action="append", metavar="KEY=VALUE",
                   help="override a config key (repeatable)")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", help="predict a TSV with a trained manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--test", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--learner", help="single-mode learner to use (default: first)")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("evaluate", help="score an Id,Class file against gold labels")
    p.add_argument("--predictions", required=True)
    p.add_argument("--gold", required=True)
    task_arg(p)
    p.add_argument("--name", default="run")
    p.add_argument("--csv")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("report", help="comparison table plus figures for several runs")
    p.add_argument("--gold", required=True)
    task_arg(p)
    p.add_argument("--run", action="append", required=True, metavar="NAME=PREDICTIONS")
    p.add_argument("--format", choices=["text", "csv"], default="text")
    p.add_argument("--rank-lm", help="LM used to draw per-class rank histograms")
    p.add_argument("--bin-edges", default=",".join(map(str, DEFAULT_BIN_EDGES)))
    p.add_argument("--output", required=True)
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("verify", help="check invariants of artifact files")
    task_arg(p)
    p.add_argument("--probabilities", action="append")
    p.add_argument("--oof", action="append")
    p.add_argument("--folds", action="append")
    p.add_argument("--manifest", action="append")
    p.add_argument("--lm", action="append")
    p.set_defaults(func=cmd_verify)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except InputError as err:
        fold = f" (fold {err.fold})" if err.fold is not None else ""
        print(f"error{fold}: {err}", file=sys.stderr)
        return 2
    except TrainingError as err:
        fold = f" (fold {err.fold})" if err.fold is not None else ""
        print(f"training error{fold}: {err}", file=sys.stderr)
        return 3
    except (OSError, UnicodeDecodeError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
