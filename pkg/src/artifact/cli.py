"""Command-line entry point.

Subcommands: stats, specificity, chd, train, predict, inject, evaluate,
pipeline, make-fixture. Exit codes: 0 ok, 1 stage failure, 2 usage or
parse error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import shutil
import sys
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import yaml

from artifact import __version__
from artifact.classify import (
    ClassifierConfig, LabelError, ModelFormatError, PredictionSet, TargetModels, labeled_corpus, load_model,
    predict_target, save_model, train_target,
)
from artifact.classify.ensemble import train_embeddings
from artifact.classify.features import doc_forms
from artifact.classify.vote import VOTERS
from artifact.corpus_io import (
    Corpus, CorpusFormatError, VariableCollisionError, corpus_stats, inject_variables, read_corpus,
    write_starred_corpus,
)
from artifact.evalreport import SplitSpec, composition, eval_csv, evaluate, split
from artifact.reinert import chd, class_term_profile, class_variable_profile, export_dendrogram
from artifact.specificity import specificity_table
from artifact.text_prep import (
    PrepConfig, build_document_dtm, build_dtm, bundled_french_lemmas, bundled_french_stopwords,
    load_lemma_table, load_stopwords, segment,
)

EXIT_OK, EXIT_STAGE, EXIT_USAGE = 0, 1, 2
PIPELINE_ARTIFACTS = (
    "predictions.csv", "injected_corpus.txt", "specificity.csv", "dendrogram.dot", "assignment.csv",
    "class_profiles.csv", "variable_profiles.csv", "eval.csv", "composition.csv",
)


class UsageError(Exception):
    pass


class StageError(Exception):
    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"stage {stage!r} failed: {cause}")
        self.stage = stage


# ---------------------------------------------------------------- config


@dataclass
class ChdConfig:
    max_terminal_classes: int = 10
    min_class_size: int = 5
    k_terms: int = 8


@dataclass
class PipelineConfig:
    labeled: str | None = None
    target: str | None = None
    out: str | None = None
    targets: list[str] = field(default_factory=list)
    seed: int = 0
    prefix: str = "pred_"
    jobs: int = 1
    train_fraction: float = 0.7
    stratified: bool = True
    support_class: str | None = None
    banner: int | None = None
    prep: dict = field(default_factory=dict)
    classifiers: dict = field(default_factory=dict)
    chd: dict = field(default_factory=dict)

    def prep_config(self) -> PrepConfig:
        return prep_from_dict(self.prep)

    def classifier_config(self) -> ClassifierConfig:
        try:
            return ClassifierConfig.from_dict(self.classifiers)
        except TypeError as exc:
            raise UsageError(f"bad classifiers section: {exc}") from None

    def chd_config(self) -> ChdConfig:
        try:
            return ChdConfig(**self.chd)
        except TypeError as exc:
            raise UsageError(f"bad chd section: {exc}") from None

    def split_spec(self) -> SplitSpec:
        return SplitSpec(self.train_fraction, self.seed, self.stratified)


def prep_from_dict(d: dict | None) -> PrepConfig:
    d = dict(d or {})
    lemmas = d.pop("lemma_table", None)
    stops = d.pop("stopword_list", None)
    if lemmas == "bundled-fr":
        d["lemma_table"] = bundled_french_lemmas()
    elif lemmas:
        d["lemma_table"] = load_lemma_table(lemmas)
    if stops == "bundled-fr":
        d["stopword_list"] = bundled_french_stopwords()
    elif stops:
        d["stopword_list"] = load_stopwords(stops)
    try:
        return PrepConfig(**d)
    except (TypeError, ValueError) as exc:
        raise UsageError(f"bad prep section: {exc}") from None


def load_config(path: str | None) -> PipelineConfig:
    if path is None:
        return PipelineConfig()
    p = Path(path)
    try:
        raw = yaml.safe_load(p.read_text(encoding="utf-8")) or {}
    except (OSError, yaml.YAMLError) as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from None
    if not isinstance(raw, dict):
        raise UsageError("config must be a mapping")
    known = {f.name for f in fields(PipelineConfig)}
    unknown = sorted(set(raw) - known)
    if unknown:
        raise UsageError(f"unknown config keys: {unknown}")
    # Relative paths are resolved against the config file's directory.
    for key in ("labeled", "target", "out"):
        if raw.get(key) is not None:
            raw[key] = str((p.parent / raw[key]).resolve())
    prep = dict(raw.get("prep") or {})
    for key in ("lemma_table", "stopword_list"):
        if prep.get(key) not in (None, "bundled-fr"):
            prep[key] = str((p.parent / prep[key]).resolve())
    raw["prep"] = prep
    if isinstance(raw.get("targets"), str):
        raw["targets"] = [raw["targets"]]
    return PipelineConfig(**raw)


def _merged(args) -> PipelineConfig:
    cfg = load_config(args.config)
    over = {}
    for key in ("seed", "out", "jobs"):
        val = getattr(args, key, None)
        if val is not None:
            over[key] = str(Path(val).resolve()) if key == "out" else val
    for key in ("labeled", "target"):
        val = getattr(args, key, None)
        if val is not None:
            over[key] = str(Path(val).resolve())
    if getattr(args, "targets", None):
        over["targets"] = list(args.targets)
    if getattr(args, "prefix", None) is not None:
        over["prefix"] = args.prefix
    cfg = replace(cfg, **over)
    if cfg.jobs < 1:
        raise UsageError("--jobs must be >= 1")
    return cfg


# ---------------------------------------------------------------- helpers


def _read(path: str) -> Corpus:
    try:
        return read_corpus(path)
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc}") from None
    except CorpusFormatError as exc:
        raise UsageError(f"{path}: {exc}") from None


def _emit(out: str | None, name: str, text: str | bytes) -> None:
    if out is None:
        sys.stdout.write(text if isinstance(text, str) else text.decode())
        return
    d = Path(out)
    d.mkdir(parents=True, exist_ok=True)
    data = text.encode("utf-8") if isinstance(text, str) else text
    (d / name).write_bytes(data)


def _sha256(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def _stage(name: str, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except (UsageError, StageError):
        raise
    except Exception as exc:  # noqa: BLE001 - reported with the stage name
        raise StageError(name, exc) from exc


def _specificity_csv(corpus: Corpus, variables: list[str], prep: PrepConfig, banner: int | None) -> str:
    """One table per variable, parts named ``variable_modality``."""
    chunks = []
    for var in variables:
        docs = [d for d in corpus if var in d.variables]
        sub = Corpus(docs)
        dtm = build_document_dtm(sub, prep)
        table = specificity_table(dtm, [f"{var}_{d.variables[var]}" for d in sub])
        text = table.to_csv(banner)
        chunks.append(text if not chunks else text.split("\n", 1)[1])
    return "".join(chunks)


def _chd_outputs(corpus: Corpus, prep: PrepConfig, cc: ChdConfig) -> dict[str, str]:
    units = segment(corpus, prep)
    dtm = build_dtm(units, prep)
    tree = chd(dtm, cc.max_terminal_classes, cc.min_class_size)
    dot, tables = export_dendrogram(tree, class_term_profile(tree, dtm), class_variable_profile(tree, corpus),
                                    k_terms=cc.k_terms)
    return {"dendrogram.dot": dot, **tables}


def _train_all(labeled: Corpus, target: Corpus | None, cfg: PipelineConfig, evaluate_split: bool):
    """Embeddings on all available text, then the three voters per target.

    With ``evaluate_split`` the voters are trained on the training slice and
    evaluated on the held-out slice; otherwise on every labeled document.
    """
    prep, ccfg = cfg.prep_config(), cfg.classifier_config()
    texts = doc_forms(labeled, prep) + (doc_forms(target, prep) if target is not None else [])
    emb = _stage("embeddings", train_embeddings, texts, ccfg.embedding, cfg.seed)
    models, reports = {}, {}
    for t in cfg.targets:
        lc = _stage(f"labels:{t}", labeled_corpus, labeled, t, prep)
        if evaluate_split:
            train, test = _stage(f"split:{t}", split, lc, cfg.split_spec())
        else:
            train, test = lc, None
        m = _stage(f"train:{t}", train_target, train, emb, ccfg, cfg.seed)
        models[t] = m
        if test is not None:
            ps = _stage(f"eval-predict:{t}", predict_target, m, emb, test.doc_ids, test.forms, cfg.jobs)
            for voter in VOTERS + ("vote",):
                got = ps.voter_labels(voter)[t]
                reports[f"{t}/{voter}"] = evaluate([got[d] for d in test.doc_ids], test.labels, lc.modalities)
    return emb, models, reports


def _predict_all(models: dict[str, TargetModels], emb, target: Corpus, cfg: PipelineConfig) -> PredictionSet:
    prep = cfg.prep_config()
    forms = doc_forms(target, prep)
    ids = [d.id for d in target]
    ps = PredictionSet()
    for t, m in models.items():
        ps = ps.merge(_stage(f"predict:{t}", predict_target, m, emb, ids, forms, cfg.jobs))
    return ps


def _check_targets(cfg: PipelineConfig) -> None:
    if not cfg.targets:
        raise UsageError("no targets given (use --target or the 'targets' config key)")


# ---------------------------------------------------------------- commands


def cmd_stats(args) -> int:
    cfg = _merged(args)
    corpus = _read(args.corpus)
    _emit(cfg.out, "stats.csv", corpus_stats(corpus, cfg.prep_config()).to_csv())
    return EXIT_OK


def cmd_specificity(args) -> int:
    cfg = _merged(args)
    corpus = _read(args.corpus)
    if args.variable not in corpus.variable_catalog:
        raise UsageError(f"variable {args.variable!r} not found in {args.corpus}")
    banner = args.banner if args.banner is not None else cfg.banner
    text = _stage("specificity", _specificity_csv, corpus, [args.variable], cfg.prep_config(), banner)
    _emit(cfg.out, "specificity.csv", text)
    return EXIT_OK


def cmd_chd(args) -> int:
    cfg = _merged(args)
    cc = cfg.chd_config()
    if args.max_classes is not None:
        cc.max_terminal_classes = args.max_classes
    if args.min_size is not None:
        cc.min_class_size = args.min_size
    corpus = _read(args.corpus)
    outputs = _stage("chd", _chd_outputs, corpus, cfg.prep_config(), cc)
    if cfg.out is None:
        _emit(None, "dendrogram.dot", outputs["dendrogram.dot"])
    else:
        for name in sorted(outputs):
            _emit(cfg.out, name, outputs[name])
    return EXIT_OK


def cmd_train(args) -> int:
    cfg = _merged(args)
    _check_targets(cfg)
    if cfg.out is None:
        raise UsageError("train needs --out DIR for the model files")
    labeled = _read(args.labeled)
    target = _read(args.unlabeled) if args.unlabeled else None
    emb, models, _ = _train_all(labeled, target, cfg, evaluate_split=False)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    save_model(emb, out / "embeddings.bin")
    for t, m in models.items():
        save_model(m.nb, out / f"{t}.nb.json")
        save_model(m.lr, out / f"{t}.logreg.json")
        save_model(m.centroid, out / f"{t}.centroid.json")
    (out / "targets.json").write_text(json.dumps(sorted(models), indent=1) + "\n", encoding="utf-8")
    return EXIT_OK


def _load_models(directory: str) -> tuple[object, dict[str, TargetModels]]:
    d = Path(directory)
    try:
        targets = json.loads((d / "targets.json").read_text(encoding="utf-8"))
        emb = load_model(d / "embeddings.bin")
        models = {t: TargetModels(t, load_model(d / f"{t}.nb.json"), load_model(d / f"{t}.logreg.json"),
                                  load_model(d / f"{t}.centroid.json")) for t in targets}
    except (OSError, ValueError, ModelFormatError) as exc:
        raise UsageError(f"cannot load models from {directory}: {exc}") from None
    return emb, models


def cmd_predict(args) -> int:
    cfg = _merged(args)
    emb, models = _load_models(args.models)
    corpus = _read(args.corpus)
    ps = _predict_all(models, emb, corpus, cfg)
    _emit(cfg.out, "predictions.csv", ps.to_csv())
    return EXIT_OK


def cmd_inject(args) -> int:
    cfg = _merged(args)
    corpus = _read(args.corpus)
    try:
        ps = PredictionSet.from_csv(Path(args.predictions).read_text(encoding="utf-8"))
    except (OSError, ValueError) as exc:
        raise UsageError(f"cannot read predictions {args.predictions}: {exc}") from None
    injected = _stage("inject", inject_variables, corpus, ps, cfg.prefix)
    _emit(cfg.out, "injected_corpus.txt", write_starred_corpus(injected))
    return EXIT_OK


def cmd_evaluate(args) -> int:
    cfg = _merged(args)
    _check_targets(cfg)
    labeled = _read(args.labeled)
    _, _, reports = _train_all(labeled, None, cfg, evaluate_split=True)
    _emit(cfg.out, "eval.csv", eval_csv(reports, cfg.support_class))
    return EXIT_OK


def run_pipeline(cfg: PipelineConfig) -> dict[str, str]:
    """Run every stage and write the artifacts plus ``manifest.json`` into
    ``cfg.out``. Returns the artifact hashes. On a stage failure the partial
    outputs are moved to ``cfg.out/failed/`` and the error is re-raised."""
    _check_targets(cfg)
    for key in ("labeled", "target", "out"):
        if getattr(cfg, key) is None:
            raise UsageError(f"pipeline needs '{key}'")
    paths = [Path(cfg.labeled).resolve(), Path(cfg.target).resolve(), Path(cfg.out).resolve()]
    if len(set(paths)) != 3:
        raise UsageError("labeled, target and out paths must be distinct")
    cfg.prep_config(), cfg.classifier_config(), cfg.chd_config()
    labeled, target = _read(cfg.labeled), _read(cfg.target)
    missing = [t for t in cfg.targets if t not in labeled.variable_catalog]
    if missing:
        raise UsageError(f"targets absent from the labeled corpus: {missing}")

    out = Path(cfg.out)
    staging = out / ".partial"
    if staging.exists():
        shutil.rmtree(staging)
    staging.mkdir(parents=True)
    written: dict[str, bytes] = {}

    def put(name: str, text: str) -> None:
        data = text.encode("utf-8")
        (staging / name).write_bytes(data)
        written[name] = data

    try:
        prep = cfg.prep_config()
        emb, models, reports = _train_all(labeled, target, cfg, evaluate_split=True)
        ps = _predict_all(models, emb, target, cfg)
        put("predictions.csv", ps.to_csv())
        injected = _stage("inject", inject_variables, target, ps, cfg.prefix)
        put("injected_corpus.txt", write_starred_corpus(injected))
        pseudo = [cfg.prefix + t for t in cfg.targets]
        put("specificity.csv", _stage("specificity", _specificity_csv, injected, pseudo, prep, cfg.banner))
        for name, text in _stage("chd", _chd_outputs, injected, prep, cfg.chd_config()).items():
            put(name, text)
        put("eval.csv", eval_csv(reports, cfg.support_class))
        comp = _stage("composition", composition, ps.final_labels(), cfg.targets,
                      {t: models[t].labels for t in cfg.targets})
        put("composition.csv", comp.to_csv())
    except BaseException as exc:
        failed = out / "failed"
        if failed.exists():
            shutil.rmtree(failed)
        staging.rename(failed)
        stage = exc.stage if isinstance(exc, StageError) else "unknown"
        (failed / "error.txt").write_text(f"{stage}: {exc}\n", encoding="utf-8")
        raise

    failed = out / "failed"
    if failed.exists():
        shutil.rmtree(failed)
    hashes = {}
    for name in PIPELINE_ARTIFACTS:
        (staging / name).replace(out / name)
        hashes[name] = _sha256(written[name])
    staging.rmdir()
    manifest = {
        "version": __version__,
        "seed": cfg.seed,
        "targets": list(cfg.targets),
        "artifacts": [{"name": n, "sha256": hashes[n], "bytes": len(written[n])} for n in PIPELINE_ARTIFACTS],
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=1, sort_keys=True) + "\n", encoding="utf-8")
    return hashes


def cmd_pipeline(args) -> int:
    run_pipeline(_merged(args))
    return EXIT_OK


FIXTURE_CONFIG = {
    "labeled": "labeled.txt",
    "target": "target.txt",
    "out": "run",
    "targets": ["sexe", "age", "gj"],
    "seed": 0,
    "prep": {"target_unit_length": 40, "min_form_freq": 2},
    "classifiers": {"embedding": {"dim": 20, "epochs": 5}},
    "chd": {"max_terminal_classes": 6, "min_class_size": 10},
    "banner": 30,
}


def cmd_make_fixture(args) -> int:
    from artifact.corpus_io import write_corpus
    from artifact.fixtures import debate_fixture

    if args.out is None:
        raise UsageError("make-fixture needs --out DIR")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    fx = debate_fixture(seed=args.seed if args.seed is not None else 0)
    write_corpus(fx.labeled, out / "labeled.txt")
    write_corpus(fx.target, out / "target.txt")
    (out / "config.yaml").write_text(yaml.safe_dump(FIXTURE_CONFIG, sort_keys=False), encoding="utf-8")
    return EXIT_OK


# ---------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="YAML configuration file")
    common.add_argument("--seed", type=int, help="random seed (overrides the config)")
    common.add_argument("--out", metavar="DIR", help="output directory (stdout when omitted, where possible)")
    common.add_argument("--jobs", type=int, help="worker threads for prediction")

    parser = argparse.ArgumentParser(prog="artifact", description=__doc__.split("\n\n")[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("stats", parents=[common], help="corpus size counts")
    p.add_argument("corpus")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("specificity", parents=[common], help="specificity of forms per modality")
    p.add_argument("corpus")
    p.add_argument("--variable", required=True, help="starred variable defining the parts")
    p.add_argument("--banner", type=int, help="keep the N strongest rows per part")
    p.set_defaults(func=cmd_specificity)

    p = sub.add_parser("chd", parents=[common], help="descending hierarchical classification")
    p.add_argument("corpus")
    p.add_argument("--max-classes", type=int)
    p.add_argument("--min-size", type=int)
    p.set_defaults(func=cmd_chd)

    p = sub.add_parser("train", parents=[common], help="train the three classifiers per target")
    p.add_argument("labeled")
    p.add_argument("--target", dest="targets", action="append", metavar="VAR")
    p.add_argument("--unlabeled", help="extra corpus used only for the embeddings")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", parents=[common], help="predict with trained models")
    p.add_argument("corpus")
    p.add_argument("--models", required=True, metavar="DIR")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("inject", parents=[common], help="add predicted variables to a corpus")
    p.add_argument("corpus")
    p.add_argument("--predictions", required=True, metavar="CSV")
    p.add_argument("--prefix")
    p.set_defaults(func=cmd_inject)

    p = sub.add_parser("evaluate", parents=[common], help="held-out evaluation of the classifiers")
    p.add_argument("labeled")
    p.add_argument("--target", dest="targets", action="append", metavar="VAR")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("pipeline", parents=[common], help="train, predict, inject and analyse")
    p.add_argument("--labeled")
    p.add_argument("--target-corpus", dest="target")
    p.add_argument("--target", dest="targets", action="append", metavar="VAR")
    p.add_argument("--prefix")
    p.set_defaults(func=cmd_pipeline)

    p = sub.add_parser("make-fixture", parents=[common], help="write the bundled synthetic fixture")
    p.set_defaults(func=cmd_make_fixture)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except StageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_STAGE
    except (LabelError, VariableCollisionError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_STAGE


if __name__ == "__main__":
    sys.exit(main())
