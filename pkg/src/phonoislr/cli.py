"""Command-line entry point.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import experiment as ex
from .checkpoint import load_checkpoint
from .errors import DataError, NumericalError
from .inventory import load_inventory
from .lexicon import load_lexicon
from .metrics import aggregate_seeds, format_table
from .network import gradcheck_grid
from .utility import compute_utility, format_results, pairwise_utility, select_optimal_subset, utility_sweep

EXIT_USAGE, EXIT_DATA, EXIT_NUMERICAL = 1, 2, 3

log = logging.getLogger("phonoislr")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def int_list(text: str) -> list[int]:
    return [int(x) for x in text.split(",") if x.strip()]


def common_flags() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--config", help="JSON experiment config; flags override it")
    p.add_argument("--out", help="output directory")
    p.add_argument("--seed", type=int, help="single seed (shorthand for --seeds N)")
    p.add_argument("--seeds", type=int_list, help="comma-separated seeds")
    p.add_argument("--format", choices=("text", "json"), default="text")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def data_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--lexicon", help="lexicon table (gloss + one column per phoneme type)")
    p.add_argument("--metadata", help="WLASL-style metadata JSON")
    p.add_argument("--pose-dir", dest="pose_dir", help="directory of <video_id>.pose files")
    p.add_argument("--delimiter", help="lexicon delimiter (default: sniffed comma/tab)")
    p.add_argument("--gloss-column", dest="gloss_column")
    p.add_argument("--phoneme-columns", dest="phoneme_columns", type=lambda s: s.split(","))
    p.add_argument("--expect-asllex", dest="expect_asllex", action="store_true", default=None,
                   help="fail unless the inventory matches ASL-LEX 2.0 sizes")


def model_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("model")
    g.add_argument("--embed-dim", dest="embed_dim", type=int)
    g.add_argument("--pooling", choices=("attention", "mean"))
    g.add_argument("--lr", type=float)
    g.add_argument("--batch-size", dest="batch_size", type=int)
    g.add_argument("--max-epochs", dest="max_epochs", type=int)
    g.add_argument("--patience", type=int)
    g.add_argument("--frames", dest="T_model", type=int, help="frames after resampling")


def synth_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("synthetic data")
    g.add_argument("--glosses", type=int)
    g.add_argument("--cardinalities", type=int_list)
    g.add_argument("--videos-per-gloss", dest="videos_per_gloss", type=int)
    g.add_argument("--clip-frames", dest="frames", type=int)
    g.add_argument("--noise", type=float)
    g.add_argument("--coverage", type=float)
    g.add_argument("--collision-rate", dest="collision_rate", type=float)


MODEL_KEYS = ("embed_dim", "pooling", "lr", "batch_size", "max_epochs", "patience", "T_model")
SYNTH_KEYS = ("glosses", "cardinalities", "videos_per_gloss", "frames", "noise", "coverage", "collision_rate")
CONFIG_KEYS = ("lexicon", "metadata", "pose_dir", "out", "subset", "selection_method", "sweep", "comparisons",
               "expect_asllex", "delimiter", "gloss_column", "phoneme_columns",
               "baseline_checkpoint", "full_checkpoint")


def build_config(args) -> ex.ExperimentConfig:
    data = {}
    if args.config:
        try:
            data = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config {args.config}: {exc}") from exc
    v = vars(args)
    for key in CONFIG_KEYS:
        if v.get(key) is not None:
            data[key] = v[key]
    if args.seeds is not None:
        data["seeds"] = args.seeds
    elif args.seed is not None:
        data["seeds"] = [args.seed]
    model = dict(data.get("model", {}))
    model.update({k: v[k] for k in MODEL_KEYS if v.get(k) is not None})
    data["model"] = model
    synth = dict(data.get("synth", {}))
    synth.update({k: v[k] for k in SYNTH_KEYS if v.get(k) is not None})
    if args.seed is not None and "seed" not in synth and getattr(args, "command", None) == "synth":
        synth["seed"] = args.seed
    data["synth"] = synth
    try:
        return ex.ExperimentConfig.from_dict(data)
    except (TypeError, ValueError) as exc:
        raise UsageError(str(exc)) from exc


def emit(args, data, text: str) -> None:
    if args.format == "json":
        print(json.dumps(data, indent=2, sort_keys=True))
    else:
        print(text)


def run_synth(args, cfg):
    if cfg.out is None:
        raise UsageError("synth needs --out")
    result = ex.cmd_synth(cfg)
    emit(args, result, f"wrote {result['videos']} videos of {result['glosses']} glosses to {result['out']} "
                       f"(lexicon: {result['lexicon_signs']} signs, coverage {100 * result['coverage']:.1f}%)")


def run_join(args, cfg):
    summary = ex.cmd_join(cfg)
    emit(args, summary, ex.format_summary(summary))


def run_describe(args, cfg):
    inv = load_inventory(cfg.lexicon, cfg.delimiter) if cfg.gloss_column is None and cfg.phoneme_columns is None \
        else ex.load_lexicon_from(cfg).inventory
    if cfg.expect_asllex:
        inv.check_asllex()
    lines = []
    for t in inv.types:
        lines.append(f"{t.id:>2}  {t.name:<24} {t.cardinality:>3}  " + ", ".join(t.values))
    emit(args, inv.to_dict(), "\n".join(lines))


def run_lexicon(args, cfg):
    stats = ex.load_lexicon_from(cfg).stats()
    lines = [f"signs: {stats['signs']}"]
    for c in stats["types"]:
        lines.append(f"  {c['name']:<24} {c['cardinality']:>3} values, {100 * c['missing_rate']:.1f}% missing")
    emit(args, stats, "\n".join(lines))


def run_utility(args, cfg):
    lex = ex.load_lexicon_from(cfg)
    subset = lex.inventory.full_subset() if args.types in (None, "all") else lex.inventory.subset(args.types.split(","))
    result = compute_utility(lex, subset)
    data = result.to_dict()
    text = format_results([result])
    if args.pairwise:
        data["pairwise"] = pairwise_utility(lex, subset)
        text += f"\npairwise form: {data['pairwise']:.4f}"
    emit(args, data, text)


def run_select(args, cfg):
    lex = ex.load_lexicon_from(cfg)
    if args.sweep is not None:
        results = utility_sweep(lex, args.sweep, cfg.selection_method)
    else:
        results = [select_optimal_subset(lex, args.n, cfg.selection_method)]
    emit(args, [r.to_dict() for r in results], format_results(results))


def run_train(args, cfg):
    lexicon, sample_set = ex.load_data(cfg)
    subset, how = ex.resolve_subset(cfg.subset, lexicon, cfg.selection_method)
    out = Path(cfg.out)
    results = {}
    for seed in cfg.seeds:
        state, model_config = ex.train_one(sample_set, subset, seed, cfg.model, out)
        results[seed] = {"checkpoint": str(out / f"seed{seed}.ckpt"), "epochs": state.epoch,
                         "best_epoch": state.best_epoch, "best_val_acc1": state.best_val_accuracy}
    ex.write_json(out / "config.json", {**cfg.to_dict(), "resolved_subset": how})
    emit(args, results, "\n".join(f"seed {s}: best val A@1 {r['best_val_acc1']:.3f} at epoch {r['best_epoch']} "
                                  f"-> {r['checkpoint']}" for s, r in results.items()))


def run_eval(args, cfg):
    _, sample_set = ex.load_data(cfg)
    reports = []
    for path in args.checkpoint:
        params, model_config, _ = load_checkpoint(path)
        reports.append(ex.evaluate_model(params, model_config, sample_set, args.split))
    if len(reports) >= 2:
        agg = aggregate_seeds(reports)
    else:
        agg = {"seeds": 1, "mean": reports[0], "sd": None, "per_seed": reports}
    if cfg.out:
        ex.write_json(Path(cfg.out) / "eval.json", agg)
    sd = agg["sd"] or _null_like(agg["mean"])
    emit(args, agg, format_table({"model": {"mean": agg["mean"], "sd": sd}}))


def _null_like(report):
    return {"populations": {p: {k: None for k in v} for p, v in report["populations"].items()}}


def _load_report_set(spec: str) -> dict:
    path, _, label = spec.partition(":")
    data = json.loads(Path(path).read_text())
    if "models" in data:
        if not label:
            raise UsageError(f"{path} holds several models; pick one with {path}:<label>")
        return data["models"][label]
    return data


def run_compare(args, cfg):
    a, b = _load_report_set(args.a), _load_report_set(args.b)
    result = ex.compare_models(b, a, args.m, args.population)
    lines = [f"{'metric':<6}{'t':>9}{'df':>8}{'p':>10}  significant at {0.05 / args.m:.4f}"]
    for m, r in result.items():
        def f(v, w, d):
            return f"{'nan':>{w}}" if v is None else f"{v:>{w}.{d}f}"
        flag = "degenerate" if r["degenerate"] else ("yes" if r["significant"] else "no")
        lines.append(f"{m:<6}{f(r['t'], 9, 3)}{f(r['df'], 8, 2)}{f(r['p'], 10, 5)}  {flag}")
    emit(args, result, "\n".join(lines))


def run_gradcheck(args, cfg):
    rows = gradcheck_grid(tolerance=args.tolerance)
    data = [{**c, "max_error": r.max_error, "passed": r.passed} for c, r in rows]
    text = "\n".join(f"{d['pooling']:<10}{d['heads']:>3} heads  {d['masking']:<12}{d['max_error']:.2e}  "
                     f"{'ok' if d['passed'] else 'FAIL'}" for d in data)
    emit(args, data, text)
    if not all(d["passed"] for d in data):
        raise NumericalError("gradient check failed")


def run_experiment(args, cfg):
    metrics = ex.cmd_experiment(cfg)
    emit(args, metrics, ex.format_experiment(metrics))


def run_probe(args, cfg):
    result = ex.cmd_probe(cfg)
    emit(args, result, ex.format_probe(result))


def build_parser() -> argparse.ArgumentParser:
    common = common_flags()
    parser = _Parser(prog="phonoislr", description="Phonology-aware isolated sign recognition toolkit")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("synth", parents=[common], help="generate a synthetic dataset")
    synth_flags(p)
    p.set_defaults(func=run_synth)

    p = sub.add_parser("join", parents=[common], help="join benchmark metadata with a lexicon")
    data_flags(p)
    p.set_defaults(func=run_join)

    p = sub.add_parser("describe-inventory", parents=[common], help="list phoneme types and values")
    data_flags(p)
    p.set_defaults(func=run_describe)

    p = sub.add_parser("lexicon", parents=[common], help="lexicon tools")
    lsub = p.add_subparsers(dest="lexicon_command", required=True, parser_class=_Parser)
    q = lsub.add_parser("stats", parents=[common], help="sign count, cardinalities, missing rates")
    data_flags(q)
    q.set_defaults(func=run_lexicon)

    p = sub.add_parser("utility", parents=[common], help="utility of one phoneme-type subset")
    data_flags(p)
    p.add_argument("--types", help="comma-separated type names (default: all)")
    p.add_argument("--pairwise", action="store_true", help="also print the pair-counting form")
    p.set_defaults(func=run_utility)

    p = sub.add_parser("select", parents=[common], help="best phoneme-type subset of size n")
    data_flags(p)
    p.add_argument("--n", type=int, default=2)
    p.add_argument("--sweep", type=int_list, help="several sizes, e.g. 0,2,5,9,16")
    p.add_argument("--method", dest="selection_method", choices=("exact", "greedy"))
    p.set_defaults(func=run_select)

    for name, func, helptext in (("train", run_train, "train models"),
                                 ("experiment", run_experiment, "baseline vs auxiliary over seeds"),
                                 ("probe", run_probe, "phoneme heads vs linear probes vs majority")):
        p = sub.add_parser(name, parents=[common], help=helptext)
        data_flags(p)
        model_flags(p)
        synth_flags(p)
        p.add_argument("--subset", help="none | all | optimal:n | Name,Name")
        p.add_argument("--method", dest="selection_method", choices=("exact", "greedy"))
        if name == "experiment":
            p.add_argument("--sweep", type=int_list, help="subset sizes to sweep, e.g. 0,2,5,9,16")
            p.add_argument("--comparisons", type=int, help="Bonferroni family size (default 3)")
        if name == "probe":
            p.add_argument("--baseline-checkpoint", dest="baseline_checkpoint")
            p.add_argument("--full-checkpoint", dest="full_checkpoint")
        p.set_defaults(func=func)

    p = sub.add_parser("eval", parents=[common], help="evaluate checkpoints")
    data_flags(p)
    synth_flags(p)
    p.add_argument("--checkpoint", nargs="+", required=True)
    p.add_argument("--split", default="test", choices=("train", "val", "test"))
    p.set_defaults(func=run_eval)

    p = sub.add_parser("compare", parents=[common], help="Welch t-test between two report sets")
    p.add_argument("a", help="report JSON (or metrics.json:<model label>)")
    p.add_argument("b", help="reference report JSON (or metrics.json:<model label>)")
    p.add_argument("--m", type=int, default=3, help="number of comparisons for Bonferroni")
    p.add_argument("--population", default="all", choices=("all", "with_P", "without_P"))
    p.set_defaults(func=run_compare)

    p = sub.add_parser("gradcheck", parents=[common], help="finite-difference check of the backward pass")
    p.add_argument("--tolerance", type=float, default=1e-4)
    p.set_defaults(func=run_gradcheck)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = build_config(args)
        args.func(args, cfg)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (ValueError, KeyError, TypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    return 0


if __name__ == "__main__":
    sys.exit(main())
