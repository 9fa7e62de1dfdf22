"""``lexdomain`` command line: ingest, stats, evaluate, train, score.

Exit codes: 0 success, 1 runtime or data error, 2 usage or config error.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import classifiers, evaluator, featurizer, ingestion, normalizer
from .classifiers import ALGORITHMS, HyperParams

CONFIG_KEYS = {
    "keywords": str,
    "substitutions": str,
    "feed": str,
    "feed_format": str,
    "threats": str,
    "threshold": int,
    "benign_fraction": float,
    "augment": "bool",
    "seed": int,
    "folds": int,
    "algorithms": str,
    "ablation": "bool",
    "parity": "bool",
    "workers": int,
    "out_dir": str,
    "strict": "bool",
}
DEFAULTS = {
    "feed_format": "plain",
    "threshold": ingestion.DEFAULT_THREAT_THRESHOLD,
    "benign_fraction": 0.2,
    "augment": True,
    "seed": 0,
    "folds": 10,
    "algorithms": ",".join(ALGORITHMS),
    "ablation": True,
    "parity": False,
    "workers": 1,
    "out_dir": ".",
    "strict": False,
}


class UsageError(Exception):
    pass


class StageError(Exception):
    def __init__(self, stage, exc):
        super().__init__(f"{stage}: {exc}")


def _parse_bool(text: str) -> bool:
    value = text.strip().lower()
    if value in ("1", "true", "yes", "on"):
        return True
    if value in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def load_config(path: str | Path) -> dict:
    """Read a ``key = value`` file (``#`` comments) into typed settings."""
    out = {}
    try:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise UsageError(f"--config: cannot read {path}: {exc.strerror}") from None
    for no, line in enumerate(lines, 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = (part.strip() for part in line.partition("="))
        key = key.replace("-", "_")
        if not sep or key not in CONFIG_KEYS:
            raise UsageError(f"{path}:{no}: unknown or malformed setting {line!r}")
        conv = CONFIG_KEYS[key]
        try:
            out[key] = _parse_bool(value) if conv == "bool" else conv(value)
        except ValueError as exc:
            raise UsageError(f"{path}:{no}: {exc}") from None
    return out


def _settings(args) -> dict:
    cfg = dict(DEFAULTS)
    if getattr(args, "config", None):
        cfg.update(load_config(args.config))
    for key in CONFIG_KEYS:
        value = getattr(args, key, None)
        if value is not None:
            cfg[key] = value
    if cfg["folds"] < 2:
        raise UsageError("--folds must be at least 2")
    if not 0 < cfg["benign_fraction"] < 1:
        raise UsageError("--benign-fraction must lie in (0, 1)")
    algos = [a.strip() for a in str(cfg["algorithms"]).split(",") if a.strip()]
    bad = [a for a in algos if a not in ALGORITHMS]
    if bad or not algos:
        raise UsageError(f"--algorithms: unsupported {bad or 'empty list'}; choose from {','.join(ALGORITHMS)}")
    cfg["algorithms"] = algos
    return cfg


def _out_path(cfg, explicit, default_name) -> Path:
    path = Path(explicit) if explicit else Path(cfg["out_dir"]) / default_name
    path.parent.mkdir(parents=True, exist_ok=True)
    return path


def _stage(name, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except (OSError, ValueError) as exc:
        raise StageError(name, exc) from exc


def cmd_ingest(args, out=sys.stdout) -> int:
    cfg = _settings(args)
    if not cfg.get("feed"):
        raise UsageError("--feed is required (or feed= in the config file)")
    if not cfg.get("threats"):
        raise UsageError("--threats is required (or threats= in the config file)")
    ks = _stage(
        "keywords", normalizer.load_keyword_set, cfg.get("keywords"), cfg.get("substitutions")
    )
    records, rejects = [], []
    for path in str(cfg["feed"]).split(","):
        read = _stage("read-feed", ingestion.read_feed, path.strip(), cfg["feed_format"])
        records += read.records
        rejects += read.rejects
    threats = _stage("read-threats", ingestion.read_threat_list, cfg["threats"], cfg["threshold"])
    kept = _stage("filter", ingestion.filter_campaign, records, ks, cfg["strict"])
    ds = _stage("label", ingestion.label_by_matching, kept, threats, ks, cfg["augment"], cfg["strict"])
    labelled = ds.class_counts()
    ds = _stage("balance", ingestion.balance, ds, cfg["benign_fraction"], cfg["seed"])
    path = _out_path(cfg, getattr(args, "output", None), "dataset.csv")
    _stage("write", ingestion.write_dataset, ds, path)

    final = ds.class_counts()
    print(f"feed: {len(records)} records, {len(rejects)} rejected lines", file=out)
    print(threats.summary(), file=out)
    print(f"filter: {kept.summary()} ({len(kept.unparseable)} unparseable)", file=out)
    print(f"labelled: {labelled[0]} benign, {labelled[1]} malicious", file=out)
    print(f"balanced: {final[0]} benign, {final[1]} malicious -> {path}", file=out)
    return 0


def cmd_stats(args, out=sys.stdout) -> int:
    _settings(args)
    ds = _stage("read-dataset", ingestion.read_dataset, args.dataset)
    stats = _stage("stats", featurizer.dataset_stats, ds)
    out.write(featurizer.render_stats(stats))
    return 0


def _hyper(name, cfg, args) -> HyperParams:
    fields = {k: getattr(args, k) for k in ("k", "c", "ridge", "rounds", "max_iters", "tolerance") if getattr(args, k, None) is not None}
    try:
        return HyperParams(name, seed=cfg["seed"], **fields)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def cmd_evaluate(args, out=sys.stdout) -> int:
    cfg = _settings(args)
    ds = _stage("read-dataset", ingestion.read_dataset, args.dataset)
    hyper = {a: _hyper(a, cfg, args) for a in cfg["algorithms"]}
    report = _stage(
        "evaluate",
        evaluator.compare_report,
        ds,
        cfg["algorithms"],
        seed=cfg["seed"],
        k=cfg["folds"],
        hyper=hyper,
        ablation=cfg["ablation"],
        parity=cfg["parity"],
        workers=cfg["workers"],
    )
    text_path = _out_path(cfg, None, "report.txt")
    text_path.write_text(report.render_text(), encoding="utf-8")
    (text_path.parent / "report.csv").write_text(report.render_csv(), encoding="utf-8")
    (text_path.parent / "report.meta").write_text(f"timestamp={report.timestamp}\n", encoding="utf-8")
    out.write(report.render_text())
    return 0


def cmd_train(args, out=sys.stdout) -> int:
    cfg = _settings(args)
    ds = _stage("read-dataset", ingestion.read_dataset, args.dataset)
    fs = featurizer.FeatureSetConfig(not args.no_entropy)
    model = _stage("train", classifiers.train, ds, _hyper(args.algorithm, cfg, args), fs)
    path = _out_path(cfg, args.output, f"{args.algorithm}.model")
    classifiers.save_model(model, path)
    print(f"trained {args.algorithm} on {len(ds)} rows ({fs.dimension} features) -> {path}", file=out)
    return 0


def cmd_score(args, out=sys.stdout) -> int:
    cfg = _settings(args)
    model = _stage("load-model", classifiers.load_model, args.model)
    domains = list(args.domains)
    if args.file:
        lines = _stage("read-domains", lambda p: Path(p).read_text(encoding="utf-8").splitlines(), args.file)
        domains += [ln.strip() for ln in lines if ln.strip() and not ln.lstrip().startswith("#")]
    if not domains:
        raise UsageError("supply at least one domain or --file")
    errors = 0
    for raw in domains:
        try:
            nd = normalizer.normalize(raw, strict=cfg["strict"])
            fv = featurizer.extract_features(nd)
        except (normalizer.NormalizationError, ValueError):
            errors += 1
            print(f"{raw}\t-\tERROR", file=out)
            continue
        s = classifiers.score(model, fv)
        verdict = "malicious" if s > model.threshold else "benign"
        print(f"{raw}\t{s:.6f}\t{verdict}", file=out)
    return 1 if errors and cfg["strict"] else 0


def _global_options(parser, suppress):
    default = argparse.SUPPRESS if suppress else None
    parser.add_argument("--config", default=default, help="key=value settings file")
    parser.add_argument("--seed", type=int, default=default, help="master RNG seed")
    parser.add_argument("--out-dir", dest="out_dir", default=default, help="directory for outputs")
    parser.add_argument("--strict", action="store_const", const=True, default=default,
                        help="strict domain validation; score exits 1 on unparseable input")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lexdomain", description=__doc__.splitlines()[0])
    _global_options(parser, suppress=False)
    common = argparse.ArgumentParser(add_help=False)
    _global_options(common, suppress=True)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", parents=[common], help="build a labelled, balanced dataset")
    p.add_argument("--feed", help="newly-registered-domain feed file(s), comma separated")
    p.add_argument("--feed-format", dest="feed_format", choices=ingestion.FEED_FORMATS)
    p.add_argument("--threats", help="threat list file of domain,risk_rating rows")
    p.add_argument("--threshold", type=int, help="minimum risk rating counted as malicious")
    p.add_argument("--keywords", help="keyword file, one per line")
    p.add_argument("--substitutions", help="obfuscation map file of letter=stand-ins lines")
    p.add_argument("--benign-fraction", dest="benign_fraction", type=float)
    p.add_argument("--no-augment", dest="augment", action="store_const", const=False,
                   help="do not append threat-list domains missing from the feed")
    p.add_argument("-o", "--output", help="dataset path (default OUT_DIR/dataset.csv)")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("stats", parents=[common], help="per-class feature means")
    p.add_argument("dataset")
    p.set_defaults(func=cmd_stats)

    def hyper_options(p):
        p.add_argument("--k", type=int)
        p.add_argument("--c", type=float)
        p.add_argument("--ridge", type=float)
        p.add_argument("--rounds", type=int)
        p.add_argument("--max-iters", dest="max_iters", type=int)
        p.add_argument("--tolerance", type=float)

    p = sub.add_parser("evaluate", parents=[common], help="cross-validated with/without-entropy comparison")
    p.add_argument("dataset")
    p.add_argument("--algorithms", help=f"comma separated subset of {','.join(ALGORITHMS)}")
    p.add_argument("--folds", type=int)
    p.add_argument("--no-ablation", dest="ablation", action="store_const", const=False)
    p.add_argument("--parity", action="store_const", const=True,
                   help="downsample the larger class to parity before folding")
    p.add_argument("--workers", type=int)
    hyper_options(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("train", parents=[common], help="fit one model on a whole dataset")
    p.add_argument("dataset")
    p.add_argument("--algorithm", choices=ALGORITHMS, default="knn")
    p.add_argument("--no-entropy", action="store_true")
    p.add_argument("-o", "--output", help="model path (default OUT_DIR/<algorithm>.model)")
    hyper_options(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("score", parents=[common], help="score domains with a saved model")
    p.add_argument("model")
    p.add_argument("domains", nargs="*")
    p.add_argument("--file", help="file with one domain per line")
    p.set_defaults(func=cmd_score)
    return parser


def main(argv=None, out=None) -> int:
    out = out or sys.stdout
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args, out=out)
    except UsageError as exc:
        print(f"lexdomain: error: {exc}", file=sys.stderr)
        return 2
    except StageError as exc:
        print(f"lexdomain: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
