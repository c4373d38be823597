"""Command line front end.

Every pipeline stage is independently invocable: `synth` writes fixture
corpora, `sample` draws data sets, `split` partitions one data set,
`train`/`eval` handle a single model, `analyze` summarizes a score grid,
and `run`/`report` drive the whole protocol from a JSON config.

Exit codes: 0 success, 2 bad configuration or input, 3 nothing feasible
to do, 4 job failure or incomplete run.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from fractions import Fraction
from pathlib import Path

from .analysis import summarize_setting
from .corpus import load_corpus, parse_word_list, save_corpus
from .experiment import (
    ConfigError,
    InfeasibleRunError,
    JobError,
    load_config,
    load_model,
    run_experiment,
    save_model,
    train_model,
)
from .metrics import METRIC_NAMES, eval_corpus
from .sampling import (
    DataSet,
    InfeasibleSizeError,
    SamplingStrategy,
    make_random_splits,
    sample_datasets,
)
from .splits import Split, adversarial_split, heuristic_split
from .synth import SyntheticSpec, generate_synthetic_corpus


def _write_words(words, path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(
        "".join(f"{w.surface}\t{' '.join(w.morphs)}\n" for w in words),
        encoding="utf-8",
    )


def _load_words(path) -> tuple:
    return parse_word_list(Path(path).read_text(encoding="utf-8"))


def _parse_params(pairs) -> dict:
    params = {}
    for pair in pairs or ():
        key, sep, value = pair.partition("=")
        if not sep or not key:
            raise ConfigError(f"--param expects key=value, got {pair!r}")
        try:
            params[key] = json.loads(value)
        except json.JSONDecodeError:
            params[key] = value
    return params


# --------------------------------------------------------------------------
# Subcommand implementations


def cmd_run(args, report_only: bool = False) -> int:
    config = load_config(args.config)
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.jobs is not None:
        overrides["jobs"] = args.jobs
    if overrides:
        config = dataclasses.replace(config, **overrides)
    result = run_experiment(
        config, out_dir=args.out, only=args.only, report_only=report_only
    )
    for setting_id, reason in result.skipped:
        print(f"skipped {setting_id}: {reason}", file=sys.stderr)
    for path in result.report_paths:
        print(path)
    return 0


def cmd_report(args) -> int:
    return cmd_run(args, report_only=True)


def cmd_synth(args) -> int:
    kwargs = {}
    if args.slots is not None:
        inventories = tuple(
            tuple(m for m in slot.split(",") if m) for slot in args.slots.split(";")
        )
        kwargs["slot_inventories"] = inventories
        kwargs["max_slots"] = len(inventories)
    if args.max_slots is not None:
        kwargs["max_slots"] = args.max_slots
    spec = SyntheticSpec(
        n_stems=args.stems,
        seed=args.seed,
        language_tag=args.language,
        **kwargs,
    )
    corpus = generate_synthetic_corpus(spec)
    save_corpus(corpus, args.out)
    print(f"wrote {len(corpus)} types to {args.out}")
    return 0


def cmd_sample(args) -> int:
    corpus = load_corpus(args.corpus, language_tag=args.language)
    strategy = SamplingStrategy(args.strategy)
    datasets = sample_datasets(corpus, args.size, strategy, args.count, args.seed)
    out = Path(args.out)
    for ds in datasets:
        _write_words(ds.tokens, out / f"{ds.id}.tsv")
    print(f"wrote {len(datasets)} data sets of size {args.size} to {out}")
    return 0


def cmd_split(args) -> int:
    tokens = _load_words(args.dataset)
    dataset = DataSet(id=args.dataset_id, tokens=tokens)
    train_fraction = Fraction(args.train_fraction)
    if not 0 < train_fraction < 1:
        raise ConfigError(f"train fraction must be in (0,1), got {train_fraction}")
    test_fraction = 1 - train_fraction

    splits: list[Split] = []
    if args.method == "random":
        splits = list(
            make_random_splits(dataset, train_fraction, args.replicates, args.seed)
        )
    elif args.method == "heuristic":
        split = heuristic_split(dataset, test_fraction)
        if split is None:
            print(
                "heuristic split not applicable: no morph-count threshold "
                "lands within tolerance of the target test fraction",
                file=sys.stderr,
            )
            return 3
        splits = [split]
    else:
        splits = [adversarial_split(dataset, test_fraction, seed=args.seed)]

    out = Path(args.out)
    for split in splits:
        split_dir = out / str(split.replicate)
        _write_words(split.train, split_dir / "train.tsv")
        _write_words(split.test, split_dir / "test.tsv")
        meta = {
            "method": split.method.value,
            "replicate": split.replicate,
            "n_train": len(split.train),
            "n_test": len(split.test),
        }
        (split_dir / "meta.json").write_text(
            json.dumps(meta, sort_keys=True, indent=2) + "\n", encoding="utf-8"
        )
        print(
            f"{split.method.value} split {split.replicate}: "
            f"{len(split.train)} train / {len(split.test)} test -> {split_dir}"
        )
    return 0


def cmd_train(args) -> int:
    words = _load_words(args.train)
    model = train_model(args.model, words, args.seed, _parse_params(args.param))
    save_model(model, args.out)
    print(f"trained {args.model} on {len(words)} words -> {args.out}")
    return 0


def cmd_eval(args) -> int:
    model = load_model(args.model_file)
    words = _load_words(args.test)
    predictions = [model.segment(w.surface) for w in words]
    evaluation = eval_corpus([(p, w.morphs) for p, w in zip(predictions, words)])
    if args.predictions:
        _write_words(
            [_Pred(w.surface, p) for w, p in zip(words, predictions)],
            Path(args.predictions),
        )
    payload = json.dumps(evaluation.as_dict(), sort_keys=True, indent=2)
    if args.out:
        Path(args.out).write_text(payload + "\n", encoding="utf-8")
    print(payload)
    return 0


class _Pred:
    """Minimal surface+morphs carrier for writing prediction TSVs.

    Predictions need not satisfy the Word concat invariant (a model can
    emit UNK placeholders), so Word itself cannot hold them.
    """

    __slots__ = ("surface", "morphs")

    def __init__(self, surface, morphs):
        self.surface = surface
        self.morphs = morphs


def cmd_analyze(args) -> int:
    raw = json.loads(Path(args.grid).read_text(encoding="utf-8"))
    if not isinstance(raw, dict) or not raw:
        raise ConfigError(f"{args.grid}: expected a model -> score-grid object")
    scores = {
        model: [
            [{m: float(v) for m, v in cell.items()} for cell in row] for row in grid
        ]
        for model, grid in raw.items()
    }
    metrics = [args.metric] if args.metric else list(METRIC_NAMES)
    out = {}
    for metric in metrics:
        s = summarize_setting(scores, metric)
        out[metric] = {
            "models": [
                {
                    "model": m.model,
                    "first_dataset_avg": m.first_dataset_avg,
                    "all_datasets_avg": m.all_datasets_avg,
                    "score_min": m.score_min,
                    "score_max": m.score_max,
                    "score_std": m.score_std,
                    "pct_best": m.pct_best,
                }
                for m in s.models
            ],
            "best_model_consistency": s.best_model_consistency,
            "ranking_consistency": s.ranking_consistency,
            "tied_datasets": list(s.tied_datasets),
        }
    print(json.dumps(out, sort_keys=True, indent=2))
    return 0


# --------------------------------------------------------------------------
# Parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="segbench",
        description="Benchmark morphological segmenters on sampled data sets.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute the full protocol from a config")
    p_run.add_argument("--config", required=True, help="run config JSON")
    p_run.add_argument("--seed", type=int, default=None, help="override config seed")
    p_run.add_argument("--jobs", type=int, default=None, help="parallel workers")
    p_run.add_argument("--out", default=None, help="output directory")
    p_run.add_argument(
        "--only", default=None, help="restrict to settings whose id contains this"
    )
    p_run.set_defaults(func=cmd_run)

    p_report = sub.add_parser(
        "report", help="rebuild reports from a completed run (trains nothing)"
    )
    for flag, kwargs in (
        ("--config", {"required": True}),
        ("--seed", {"type": int, "default": None}),
        ("--jobs", {"type": int, "default": None}),
        ("--out", {"default": None}),
        ("--only", {"default": None}),
    ):
        p_report.add_argument(flag, **kwargs)
    p_report.set_defaults(func=cmd_report)

    p_synth = sub.add_parser("synth", help="generate a synthetic gold corpus")
    p_synth.add_argument("--out", required=True, help="corpus TSV to write")
    p_synth.add_argument("--stems", type=int, default=60)
    p_synth.add_argument(
        "--slots",
        default=None,
        help="suffix inventories, e.g. 'ta,li;na,si;a,i' (slots ; morphs ,)",
    )
    p_synth.add_argument("--max-slots", type=int, default=None)
    p_synth.add_argument("--seed", type=int, default=0)
    p_synth.add_argument("--language", default="syn")
    p_synth.set_defaults(func=cmd_synth)

    p_sample = sub.add_parser("sample", help="sample data sets from a corpus")
    p_sample.add_argument("--corpus", required=True)
    p_sample.add_argument("--language", default=None)
    p_sample.add_argument("--size", type=int, required=True)
    p_sample.add_argument(
        "--strategy",
        choices=[s.value for s in SamplingStrategy],
        default=SamplingStrategy.WITH_REPLACEMENT.value,
    )
    p_sample.add_argument("--count", type=int, default=1)
    p_sample.add_argument("--seed", type=int, default=0)
    p_sample.add_argument("--out", required=True, help="directory for <id>.tsv files")
    p_sample.set_defaults(func=cmd_sample)

    p_split = sub.add_parser("split", help="split one data set into train/test")
    p_split.add_argument("--dataset", required=True, help="data set TSV")
    p_split.add_argument("--dataset-id", type=int, default=0)
    p_split.add_argument(
        "--method", choices=["random", "heuristic", "adversarial"], default="random"
    )
    p_split.add_argument(
        "--train-fraction", default="3/5", help="fraction as p/q, default 3/5"
    )
    p_split.add_argument(
        "--replicates", type=int, default=1, help="random splits to draw (random only)"
    )
    p_split.add_argument("--seed", type=int, default=0)
    p_split.add_argument("--out", required=True, help="directory for <replicate>/")
    p_split.set_defaults(func=cmd_split)

    p_train = sub.add_parser("train", help="train one model on a train TSV")
    p_train.add_argument(
        "--model", required=True, help="lexicon, 0-crf .. 4-crf, or seq2seq"
    )
    p_train.add_argument("--train", required=True, help="training TSV")
    p_train.add_argument("--out", required=True, help="model file to write")
    p_train.add_argument("--seed", type=int, default=0)
    p_train.add_argument(
        "--param",
        action="append",
        default=None,
        metavar="KEY=VALUE",
        help="hyperparameter override, JSON-decoded value (repeatable)",
    )
    p_train.set_defaults(func=cmd_train)

    p_eval = sub.add_parser("eval", help="segment a test TSV and score it")
    p_eval.add_argument("--model-file", required=True, help="saved model file")
    p_eval.add_argument("--test", required=True, help="gold test TSV")
    p_eval.add_argument("--out", default=None, help="metrics JSON to write")
    p_eval.add_argument(
        "--predictions", default=None, help="optional predictions TSV to write"
    )
    p_eval.set_defaults(func=cmd_eval)

    p_analyze = sub.add_parser(
        "analyze", help="summarize a model -> dataset -> split score grid"
    )
    p_analyze.add_argument(
        "--grid",
        required=True,
        help="JSON: {model: [[{metric: score} per split] per dataset]}",
    )
    p_analyze.add_argument(
        "--metric", default=None, choices=list(METRIC_NAMES), help="default: all"
    )
    p_analyze.set_defaults(func=cmd_analyze)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except InfeasibleRunError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except InfeasibleSizeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except JobError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4
    except (ValueError, OSError) as exc:
        # ConfigError, CorpusError, and friends are ValueErrors.
        print(f"error: {exc}", file=sys.stderr)
        return 2


def entrypoint() -> None:
    sys.exit(main(sys.argv[1:]))


if __name__ == "__main__":
    entrypoint()
