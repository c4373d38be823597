"""Experiment orchestration: run layout, job execution, resume, reports.

A run expands to independent (setting, dataset, split, model) jobs. Each
job trains one segmenter on its split's train half, segments the test
surfaces, and persists predictions plus metrics with a sha256 sidecar;
completed jobs whose checksums validate are skipped on resume. Jobs may
execute in parallel, but results are merged in canonical (setting,
dataset, split, model) order and every job is a pure function of its
inputs, so reports come out byte-identical at any parallelism degree.
Reports carry no timestamps or absolute paths for the same reason.

Run directory layout:

    runs/<setting>/datasets/<d>/dataset.tsv
    runs/<setting>/datasets/<d>/splits/<r>/{train,test}.tsv, meta.json
    runs/<setting>/datasets/<d>/splits/<r>/models/<model>/{predictions.tsv,metrics.json}
    runs/<setting>/datasets/<d>/newtests/<size>/<i>.tsv
    reports/{summary.json,summary.csv,characteristics.csv,
             regression.json,regression.csv}
"""

from __future__ import annotations

import csv
import hashlib
import json
import re
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Any, Mapping, Sequence

from .analysis import (
    CHARACTERISTIC_NAMES,
    CharacteristicsVector,
    RankDeficiencyError,
    RegressionRow,
    build_design,
    compute_characteristics,
    drop_constant_columns,
    ols_regression,
    significance_stars,
    summarize_setting,
)
from .corpus import Corpus, Word, load_corpus
from .crf import CrfModel, load_crf, save_crf, train_crf
from .lexicon import MorphLexicon, Segmenter, load_lexicon, save_lexicon, train_lexicon
from .metrics import METRIC_NAMES, eval_corpus
from .sampling import (
    DataSet,
    ExperimentalSetting,
    SamplingStrategy,
    build_newtest_pool,
    make_random_splits,
    sample_datasets,
    sample_new_testsets,
)
from .seeds import mix_seed
from .seq2seq import (
    Seq2seqConfig,
    Seq2seqModel,
    load_seq2seq,
    save_seq2seq,
    train_seq2seq,
)
from .splits import Split

DEFAULT_MODELS = ("lexicon", "0-crf", "1-crf", "2-crf", "3-crf", "4-crf", "seq2seq")
CONFIG_FORMAT = "segbench-run-config"
_CRF_ID = re.compile(r"([0-4])-crf")


class ConfigError(ValueError):
    """The run configuration is malformed or inconsistent."""


class JobError(RuntimeError):
    """A training/evaluation job failed."""


class InfeasibleRunError(RuntimeError):
    """Every requested setting was infeasible; nothing ran."""


@dataclass(frozen=True)
class RunConfig:
    corpora: dict[str, str]
    sizes: tuple[int, ...]
    strategies: tuple[SamplingStrategy, ...]
    n_datasets: int = 50
    n_splits: int = 5
    newtest_sizes: tuple[int, ...] = ()
    n_newtests: int = 100
    models: tuple[str, ...] = DEFAULT_MODELS
    model_params: dict[str, dict[str, Any]] = field(default_factory=dict)
    seed: int = 0
    out_dir: str | None = None
    jobs: int = 1

    def __post_init__(self) -> None:
        if not self.corpora:
            raise ConfigError("no corpora configured")
        if not self.sizes or any(s < 1 for s in self.sizes):
            raise ConfigError("sizes must be positive")
        if not self.strategies:
            raise ConfigError("no sampling strategies configured")
        for count, name in (
            (self.n_datasets, "n_datasets"),
            (self.n_splits, "n_splits"),
            (self.n_newtests, "n_newtests"),
            (self.jobs, "jobs"),
        ):
            if count < 1:
                raise ConfigError(f"{name} must be >= 1")
        if not self.models:
            raise ConfigError("empty model roster")
        for model in self.models:
            if model != "lexicon" and model != "seq2seq" and not _CRF_ID.fullmatch(model):
                raise ConfigError(f"unknown model id: {model!r}")
        for model in self.model_params:
            if model not in self.models:
                raise ConfigError(f"model_params for unlisted model: {model!r}")


def load_config(path) -> RunConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if raw.get("format") != CONFIG_FORMAT or raw.get("version") != 1:
        raise ConfigError(f"{path}: expected {CONFIG_FORMAT} version 1")
    try:
        strategies = tuple(SamplingStrategy(s) for s in raw["strategies"])
        return RunConfig(
            corpora=dict(raw["corpora"]),
            sizes=tuple(int(s) for s in raw["sizes"]),
            strategies=strategies,
            n_datasets=int(raw.get("n_datasets", 50)),
            n_splits=int(raw.get("n_splits", 5)),
            newtest_sizes=tuple(int(s) for s in raw.get("newtest_sizes", ())),
            n_newtests=int(raw.get("n_newtests", 100)),
            models=tuple(raw.get("models", DEFAULT_MODELS)),
            model_params={k: dict(v) for k, v in raw.get("model_params", {}).items()},
            seed=int(raw.get("seed", 0)),
            out_dir=raw.get("out_dir"),
            jobs=int(raw.get("jobs", 1)),
        )
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"{path}: {exc}") from exc


# --------------------------------------------------------------------------
# Model dispatch


def train_model(
    model_id: str,
    words: Sequence[Word],
    seed: int,
    params: Mapping[str, Any] | None = None,
) -> Segmenter:
    """Train the roster model `model_id` on the words.

    CRF ids are "<k>-crf" for k in 0..4. seq2seq trains at the desk preset
    unless params override dimensions; full-size dims are a params choice,
    not a default, because desk scale is what the test suite and
    sampled-data runs are sized for.
    """
    params = dict(params or {})
    if model_id == "lexicon":
        return train_lexicon(words, seed=seed)
    match = _CRF_ID.fullmatch(model_id)
    if match:
        return train_crf(words, k=int(match.group(1)), seed=seed, **params)
    if model_id == "seq2seq":
        config = Seq2seqConfig.desk(seed=seed, **params)
        return train_seq2seq(words, config)
    raise ConfigError(f"unknown model id: {model_id!r}")


def save_model(model: Segmenter, path) -> None:
    if isinstance(model, MorphLexicon):
        save_lexicon(model, path)
    elif isinstance(model, CrfModel):
        save_crf(model, path)
    elif isinstance(model, Seq2seqModel):
        save_seq2seq(model, path)
    else:
        raise TypeError(f"no serializer for {type(model).__name__}")


def load_model(path) -> Segmenter:
    """Load any saved segmenter, sniffing the format from the file head."""
    with open(path, "rb") as fh:
        head = fh.read(32)
    if head[:4] == b"PK\x03\x04":  # zip container = npz
        return load_seq2seq(path)
    text = head.decode("utf-8", errors="replace")
    if text.startswith("segbench-lexicon"):
        return load_lexicon(path)
    return load_crf(path)


# --------------------------------------------------------------------------
# Persistence helpers


def _sha_path(path: Path) -> Path:
    return path.with_name(path.name + ".sha256")


def _write_with_checksum(path: Path, data: str) -> None:
    raw = data.encode("utf-8")
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(raw)
    digest = hashlib.sha256(raw).hexdigest()
    _sha_path(path).write_text(f"{digest}  {path.name}\n", encoding="utf-8")


def _checksum_valid(path: Path) -> bool:
    sha = _sha_path(path)
    if not path.is_file() or not sha.is_file():
        return False
    recorded = sha.read_text(encoding="utf-8").split()
    if not recorded:
        return False
    return hashlib.sha256(path.read_bytes()).hexdigest() == recorded[0]


def _corpus_text(words: Sequence[Word]) -> str:
    return "".join(f"{w.surface}\t{' '.join(w.morphs)}\n" for w in words)


# --------------------------------------------------------------------------
# Jobs


@dataclass(frozen=True)
class _Job:
    setting_id: str
    dataset_id: int
    replicate: int
    model_id: str
    seed: int
    params: dict[str, Any]
    train: tuple[Word, ...]
    test: tuple[Word, ...]
    out_dir: str  # job directory, relative layout fixed


def _metrics_path(job_dir: Path) -> Path:
    return job_dir / "metrics.json"


def _run_job(job: _Job) -> dict[str, float]:
    """Train, segment the test half, persist, return the metric dict."""
    job_dir = Path(job.out_dir)
    model = train_model(job.model_id, job.train, job.seed, job.params)
    predictions = [model.segment(w.surface) for w in job.test]
    evaluation = eval_corpus(
        [(pred, w.morphs) for pred, w in zip(predictions, job.test)]
    )
    pred_text = "".join(
        f"{w.surface}\t{' '.join(pred)}\n" for pred, w in zip(predictions, job.test)
    )
    _write_with_checksum(job_dir / "predictions.tsv", pred_text)
    metrics = evaluation.as_dict()
    payload = {
        "model": job.model_id,
        "metrics": metrics,
        "n_test": len(job.test),
    }
    _write_with_checksum(
        _metrics_path(job_dir),
        json.dumps(payload, sort_keys=True, ensure_ascii=False, indent=2) + "\n",
    )
    return metrics


def _load_job_metrics(job_dir: Path) -> dict[str, float] | None:
    path = _metrics_path(job_dir)
    if not _checksum_valid(path) or not _checksum_valid(job_dir / "predictions.tsv"):
        return None
    payload = json.loads(path.read_text(encoding="utf-8"))
    metrics = payload.get("metrics")
    if not isinstance(metrics, dict) or set(metrics) != set(METRIC_NAMES):
        return None
    return {name: float(metrics[name]) for name in METRIC_NAMES}


# --------------------------------------------------------------------------
# The runner


@dataclass
class RunResult:
    out_dir: Path
    report_paths: tuple[Path, ...]
    skipped: tuple[tuple[str, str], ...]  # (setting id, reason)
    n_jobs: int


def run_experiment(
    config: RunConfig,
    out_dir=None,
    only: str | None = None,
    report_only: bool = False,
) -> RunResult:
    """Execute the full protocol for every feasible setting.

    Infeasible settings (sampling more distinct types than the corpus has)
    are skipped with a recorded reason. Raises InfeasibleRunError when
    nothing at all is feasible, JobError when a job fails. With
    report_only the run must already hold validated metrics for every
    job; nothing is trained and only the reports are rewritten.
    """
    target = out_dir or config.out_dir
    if target is None:
        raise ConfigError("no output directory given (config out_dir or --out)")
    out = Path(target)
    runs = out / "runs"

    corpora: dict[str, Corpus] = {}
    for tag, path in config.corpora.items():
        corpora[tag] = load_corpus(path, language_tag=tag)

    settings = [
        ExperimentalSetting(language_tag=tag, dataset_size=size, strategy=strategy)
        for tag in config.corpora
        for size in config.sizes
        for strategy in config.strategies
    ]
    if only is not None:
        settings = [s for s in settings if only in s.id]
        if not settings:
            raise ConfigError(f"--only {only!r} matched no setting")

    skipped: list[tuple[str, str]] = []
    jobs: list[_Job] = []
    job_dirs: dict[tuple[str, int, int, str], Path] = {}
    setting_layout: dict[str, dict[str, Any]] = {}

    for setting in settings:
        corpus = corpora[setting.language_tag]
        n_types = len(corpus.words)
        if (
            setting.strategy is SamplingStrategy.WITHOUT_REPLACEMENT
            and setting.dataset_size > n_types
        ):
            skipped.append(
                (
                    setting.id,
                    f"without-replacement size {setting.dataset_size} exceeds "
                    f"{n_types} corpus types",
                )
            )
            continue

        setting_dir = runs / setting.id
        datasets = sample_datasets(
            corpus,
            setting.dataset_size,
            setting.strategy,
            config.n_datasets,
            mix_seed(config.seed, setting.id, "datasets"),
        )
        splits_by_dataset: list[list[Split]] = []
        newtest_notes: list[dict[str, Any]] = []
        for ds in datasets:
            ds_dir = setting_dir / "datasets" / str(ds.id)
            _write_with_checksum(ds_dir / "dataset.tsv", _corpus_text(ds.tokens))
            splits = make_random_splits(
                ds,
                Fraction(3, 5),
                config.n_splits,
                mix_seed(config.seed, setting.id, "splits"),
            )
            splits_by_dataset.append(splits)
            for split in splits:
                split_dir = ds_dir / "splits" / str(split.replicate)
                _write_with_checksum(split_dir / "train.tsv", _corpus_text(split.train))
                _write_with_checksum(split_dir / "test.tsv", _corpus_text(split.test))
                meta = {
                    "method": split.method.value,
                    "replicate": split.replicate,
                    "n_train": len(split.train),
                    "n_test": len(split.test),
                }
                _write_with_checksum(
                    split_dir / "meta.json",
                    json.dumps(meta, sort_keys=True, indent=2) + "\n",
                )
                for model_id in config.models:
                    job_dir = split_dir / "models" / model_id
                    key = (setting.id, ds.id, split.replicate, model_id)
                    job_dirs[key] = job_dir
                    jobs.append(
                        _Job(
                            setting_id=setting.id,
                            dataset_id=ds.id,
                            replicate=split.replicate,
                            model_id=model_id,
                            seed=mix_seed(
                                config.seed,
                                setting.id,
                                ds.id,
                                split.replicate,
                                model_id,
                            ),
                            params=dict(config.model_params.get(model_id, {})),
                            train=split.train,
                            test=split.test,
                            out_dir=str(job_dir),
                        )
                    )
            if config.newtest_sizes:
                pool = build_newtest_pool(corpus, ds)
                for nt_size in config.newtest_sizes:
                    if nt_size > len(pool):
                        newtest_notes.append(
                            {
                                "dataset": ds.id,
                                "size": nt_size,
                                "reason": f"pool has only {len(pool)} unseen types",
                            }
                        )
                        continue
                    testsets = sample_new_testsets(
                        pool,
                        nt_size,
                        config.n_newtests,
                        mix_seed(config.seed, setting.id, "newtests", ds.id, nt_size),
                    )
                    for i, ts in enumerate(testsets):
                        _write_with_checksum(
                            ds_dir / "newtests" / str(nt_size) / f"{i}.tsv",
                            _corpus_text(ts),
                        )
        setting_layout[setting.id] = {
            "setting": setting,
            "splits": splits_by_dataset,
            "newtest_skipped": newtest_notes,
        }

    if not setting_layout:
        raise InfeasibleRunError(
            "all settings infeasible: " + "; ".join(f"{s}: {r}" for s, r in skipped)
        )

    pending = [job for job in jobs if _load_job_metrics(Path(job.out_dir)) is None]
    if report_only and pending:
        raise JobError(
            f"run incomplete: {len(pending)} of {len(jobs)} jobs lack "
            "validated metrics (first missing: "
            f"{pending[0].setting_id}/{pending[0].dataset_id}/"
            f"{pending[0].replicate}/{pending[0].model_id})"
        )
    if pending and config.jobs > 1:
        with ProcessPoolExecutor(max_workers=config.jobs) as pool:
            submitted = [(job, pool.submit(_run_job, job)) for job in pending]
            for job, future in submitted:
                try:
                    future.result()
                except Exception as exc:
                    raise JobError(
                        f"job failed: {job.setting_id} dataset {job.dataset_id} "
                        f"split {job.replicate} model {job.model_id}: {exc}"
                    ) from exc
    else:
        for job in pending:
            try:
                _run_job(job)
            except Exception as exc:
                raise JobError(
                    f"job failed: {job.setting_id} dataset {job.dataset_id} "
                    f"split {job.replicate} model {job.model_id}: {exc}"
                ) from exc

    # Canonical merge: config order for settings/models, index order for the rest.
    results: dict[str, dict[str, list[list[dict[str, float]]]]] = {}
    for setting_id, layout in setting_layout.items():
        per_model: dict[str, list[list[dict[str, float]]]] = {}
        for model_id in config.models:
            grid: list[list[dict[str, float]]] = []
            for ds_index, splits in enumerate(layout["splits"]):
                row = []
                for split in splits:
                    key = (setting_id, ds_index, split.replicate, model_id)
                    metrics = _load_job_metrics(job_dirs[key])
                    if metrics is None:
                        raise JobError(f"missing metrics for {key}")
                    row.append(metrics)
                grid.append(row)
            per_model[model_id] = grid
        results[setting_id] = per_model

    report_paths = write_reports(
        out, config, setting_layout, results, skipped
    )
    return RunResult(
        out_dir=out,
        report_paths=tuple(report_paths),
        skipped=tuple(skipped),
        n_jobs=len(jobs),
    )


# --------------------------------------------------------------------------
# Reports


def _split_characteristics(layout: Mapping[str, Any]) -> list[list[dict[str, float | None]]]:
    setting: ExperimentalSetting = layout["setting"]
    with_overlap = setting.strategy is SamplingStrategy.WITH_REPLACEMENT
    out = []
    for splits in layout["splits"]:
        row = []
        for split in splits:
            vec = compute_characteristics(split, with_word_overlap=with_overlap)
            row.append(vec.as_dict())
        out.append(row)
    return out


def write_reports(
    out: Path,
    config: RunConfig,
    setting_layout: Mapping[str, Mapping[str, Any]],
    results: Mapping[str, Mapping[str, Sequence[Sequence[Mapping[str, float]]]]],
    skipped: Sequence[tuple[str, str]],
) -> list[Path]:
    reports = out / "reports"
    reports.mkdir(parents=True, exist_ok=True)

    characteristics = {
        setting_id: _split_characteristics(layout)
        for setting_id, layout in setting_layout.items()
    }

    summary: dict[str, Any] = {
        "format": "segbench-summary",
        "version": 1,
        "master_seed": config.seed,
        "models": list(config.models),
        "metrics": list(METRIC_NAMES),
        "skipped_settings": [{"setting": s, "reason": r} for s, r in skipped],
        "settings": {},
    }
    for setting_id, layout in setting_layout.items():
        setting: ExperimentalSetting = layout["setting"]
        per_metric = {}
        for metric in METRIC_NAMES:
            s = summarize_setting(results[setting_id], metric)
            per_metric[metric] = {
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
        summary["settings"][setting_id] = {
            "language": setting.language_tag,
            "dataset_size": setting.dataset_size,
            "strategy": setting.strategy.value,
            "scores": results[setting_id],
            "summaries": per_metric,
            "characteristics": characteristics[setting_id],
            "newtest_skipped": layout["newtest_skipped"],
        }

    summary_json = reports / "summary.json"
    _write_with_checksum(
        summary_json,
        json.dumps(summary, sort_keys=True, ensure_ascii=False, indent=2) + "\n",
    )

    summary_csv = reports / "summary.csv"
    with open(summary_csv, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            [
                "setting",
                "metric",
                "model",
                "first_dataset_avg",
                "all_datasets_avg",
                "score_min",
                "score_max",
                "score_std",
                "pct_best",
                "best_model_consistency",
                "ranking_consistency",
            ]
        )
        for setting_id in setting_layout:
            for metric in METRIC_NAMES:
                block = summary["settings"][setting_id]["summaries"][metric]
                for row in block["models"]:
                    writer.writerow(
                        [
                            setting_id,
                            metric,
                            row["model"],
                            repr(row["first_dataset_avg"]),
                            repr(row["all_datasets_avg"]),
                            repr(row["score_min"]),
                            repr(row["score_max"]),
                            repr(row["score_std"]),
                            repr(row["pct_best"]),
                            repr(block["best_model_consistency"]),
                            repr(block["ranking_consistency"]),
                        ]
                    )

    chars_csv = reports / "characteristics.csv"
    with open(chars_csv, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["setting", "dataset", "split", *CHARACTERISTIC_NAMES])
        for setting_id, grid in characteristics.items():
            for ds_id, row in enumerate(grid):
                for r, vec in enumerate(row):
                    writer.writerow(
                        [
                            setting_id,
                            ds_id,
                            r,
                            *(
                                "" if vec[name] is None else repr(vec[name])
                                for name in CHARACTERISTIC_NAMES
                            ),
                        ]
                    )

    regression = _regression_reports(config, setting_layout, results, characteristics)
    regression_json = reports / "regression.json"
    _write_with_checksum(
        regression_json,
        json.dumps(regression, sort_keys=True, ensure_ascii=False, indent=2) + "\n",
    )
    regression_csv = reports / "regression.csv"
    with open(regression_csv, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["language", "predictor", "coefficient", "std_error", "t", "p", "stars"]
        )
        for language in sorted(regression["languages"]):
            block = regression["languages"][language]
            if "error" in block:
                continue
            for name, cell in block["coefficients"].items():
                writer.writerow(
                    [
                        language,
                        name,
                        repr(cell["coef"]),
                        repr(cell["se"]),
                        repr(cell["t"]),
                        repr(cell["p"]),
                        cell["stars"],
                    ]
                )

    return [summary_json, summary_csv, chars_csv, regression_json, regression_csv]


def build_regression_rows(
    config: RunConfig,
    setting_layout: Mapping[str, Mapping[str, Any]],
    results: Mapping[str, Mapping[str, Sequence[Sequence[Mapping[str, float]]]]],
    characteristics: Mapping[str, Sequence[Sequence[Mapping[str, float | None]]]],
    language: str,
) -> list[RegressionRow]:
    """One row per (setting, dataset, split, model, metric) for a language."""
    rows: list[RegressionRow] = []
    for setting_id, layout in setting_layout.items():
        setting: ExperimentalSetting = layout["setting"]
        if setting.language_tag != language:
            continue
        for model_id in config.models:
            grid = results[setting_id][model_id]
            for ds_id, split_cells in enumerate(grid):
                for r, cell in enumerate(split_cells):
                    vec_dict = characteristics[setting_id][ds_id][r]
                    vec = CharacteristicsVector(**vec_dict)
                    for metric in METRIC_NAMES:
                        rows.append(
                            RegressionRow(
                                score=cell[metric],
                                model=model_id,
                                metric=metric,
                                strategy=setting.strategy.value,
                                size=setting.dataset_size,
                                characteristics=vec,
                            )
                        )
    return rows


def _regression_reports(config, setting_layout, results, characteristics) -> dict[str, Any]:
    languages = sorted({layout["setting"].language_tag for layout in setting_layout.values()})
    out: dict[str, Any] = {
        "format": "segbench-regression",
        "version": 1,
        "languages": {},
    }
    for language in languages:
        rows = build_regression_rows(
            config, setting_layout, results, characteristics, language
        )
        try:
            y, X, names = build_design(rows)
            X, names, dropped = drop_constant_columns(X, names)
            result = ols_regression(y, X, names)
        except (ValueError, RankDeficiencyError) as exc:
            out["languages"][language] = {"error": str(exc), "n_rows": len(rows)}
            continue
        out["languages"][language] = {
            "n_rows": len(rows),
            "df_resid": result.df_resid,
            "r_squared": result.r_squared,
            "dropped_columns": dropped,
            "coefficients": {
                name: {
                    "coef": result.coefficients[i],
                    "se": result.std_errors[i],
                    "t": result.t_stats[i],
                    "p": result.p_values[i],
                    "stars": significance_stars(result.p_values[i]),
                }
                for i, name in enumerate(result.predictors)
            },
        }
    return out
