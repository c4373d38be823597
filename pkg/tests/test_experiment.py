import json
from pathlib import Path

import pytest

from segbench.corpus import Word
from segbench.crf import CrfModel, train_crf
from segbench.experiment import (
    DEFAULT_MODELS,
    ConfigError,
    InfeasibleRunError,
    JobError,
    RunConfig,
    load_config,
    load_model,
    run_experiment,
    save_model,
    train_model,
)
from segbench.lexicon import MorphLexicon, train_lexicon
from segbench.metrics import METRIC_NAMES
from segbench.sampling import SamplingStrategy
from segbench.seq2seq import Seq2seqModel, train_seq2seq, Seq2seqConfig
from segbench.synth import SyntheticSpec, generate_synthetic_corpus


@pytest.fixture(scope="module")
def corpus_file(tmp_path_factory) -> Path:
    corpus = generate_synthetic_corpus(SyntheticSpec(n_stems=3, seed=0))
    path = tmp_path_factory.mktemp("data") / "syn.tsv"
    path.write_text(
        "".join(f"{w.surface}\t{' '.join(w.morphs)}\n" for w in corpus.words),
        encoding="utf-8",
    )
    return path


def small_config(corpus_file: Path, **overrides) -> RunConfig:
    base = dict(
        corpora={"syn": str(corpus_file)},
        sizes=(12,),
        strategies=(SamplingStrategy.WITHOUT_REPLACEMENT,),
        n_datasets=2,
        n_splits=2,
        models=("lexicon", "0-crf"),
        seed=7,
    )
    base.update(overrides)
    return RunConfig(**base)


class TestConfig:
    def test_defaults(self, corpus_file):
        cfg = RunConfig(
            corpora={"syn": str(corpus_file)},
            sizes=(10,),
            strategies=(SamplingStrategy.WITH_REPLACEMENT,),
        )
        assert cfg.n_datasets == 50 and cfg.n_splits == 5
        assert cfg.models == DEFAULT_MODELS

    @pytest.mark.parametrize(
        "overrides",
        [
            dict(corpora={}),
            dict(sizes=()),
            dict(sizes=(0,)),
            dict(strategies=()),
            dict(n_datasets=0),
            dict(n_splits=0),
            dict(jobs=0),
            dict(models=()),
            dict(models=("5-crf",)),
            dict(models=("lexicon",), model_params={"seq2seq": {}}),
        ],
    )
    def test_validation(self, corpus_file, overrides):
        with pytest.raises(ConfigError):
            small_config(corpus_file, **overrides)

    def test_load_roundtrip(self, corpus_file, tmp_path):
        payload = {
            "format": "segbench-run-config",
            "version": 1,
            "corpora": {"syn": str(corpus_file)},
            "sizes": [12],
            "strategies": ["without_replacement"],
            "n_datasets": 2,
            "n_splits": 2,
            "models": ["lexicon"],
            "seed": 3,
        }
        path = tmp_path / "run.json"
        path.write_text(json.dumps(payload))
        cfg = load_config(path)
        assert cfg.sizes == (12,)
        assert cfg.strategies == (SamplingStrategy.WITHOUT_REPLACEMENT,)
        assert cfg.seed == 3

    def test_load_rejects_bad_format(self, tmp_path):
        path = tmp_path / "run.json"
        path.write_text('{"format": "other", "version": 1}')
        with pytest.raises(ConfigError):
            load_config(path)

    def test_load_rejects_bad_strategy(self, corpus_file, tmp_path):
        path = tmp_path / "run.json"
        path.write_text(
            json.dumps(
                {
                    "format": "segbench-run-config",
                    "version": 1,
                    "corpora": {"syn": str(corpus_file)},
                    "sizes": [5],
                    "strategies": ["sideways"],
                }
            )
        )
        with pytest.raises(ConfigError):
            load_config(path)

    def test_load_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            load_config(tmp_path / "absent.json")


WORDS = [
    Word("tana", ("ta", "na")),
    Word("ta", ("ta",)),
    Word("nata", ("na", "ta")),
    Word("na", ("na",)),
]


class TestModelDispatch:
    def test_lexicon(self):
        model = train_model("lexicon", WORDS, seed=0)
        assert isinstance(model, MorphLexicon)

    def test_crf_orders(self):
        model = train_model("2-crf", WORDS, seed=0, params={"max_iter": 10})
        assert isinstance(model, CrfModel)
        assert model.k == 2

    def test_seq2seq_desk_params(self):
        model = train_model(
            "seq2seq",
            WORDS,
            seed=0,
            params={"embedding_dim": 4, "hidden_dim": 4, "max_epochs": 1},
        )
        assert isinstance(model, Seq2seqModel)
        assert model.config.embedding_dim == 4

    def test_unknown_id(self):
        with pytest.raises(ConfigError):
            train_model("tagger", WORDS, seed=0)

    def test_sniffing_roundtrip(self, tmp_path):
        models = [
            train_lexicon(WORDS),
            train_crf(WORDS, k=1, max_iter=10),
            train_seq2seq(
                WORDS,
                Seq2seqConfig(embedding_dim=4, hidden_dim=4, batch_size=2, max_epochs=1),
            ),
        ]
        for i, model in enumerate(models):
            path = tmp_path / f"m{i}"
            save_model(model, path)
            back = load_model(path)
            assert type(back) is type(model)
            assert back.segment("tana") == model.segment("tana")

    def test_save_unknown_type(self, tmp_path):
        with pytest.raises(TypeError):
            save_model(object(), tmp_path / "x")


class TestRunExperiment:
    def test_layout_and_reports(self, corpus_file, tmp_path):
        cfg = small_config(corpus_file, newtest_sizes=(5,), n_newtests=3)
        result = run_experiment(cfg, out_dir=tmp_path / "out")
        assert result.n_jobs == 1 * 2 * 2 * 2  # settings x datasets x splits x models
        assert result.skipped == ()

        setting_dir = tmp_path / "out" / "runs" / "syn-12-without_replacement"
        for ds in ("0", "1"):
            ds_dir = setting_dir / "datasets" / ds
            assert (ds_dir / "dataset.tsv").is_file()
            assert (ds_dir / "dataset.tsv.sha256").is_file()
            assert (ds_dir / "newtests" / "5" / "2.tsv").is_file()
            for r in ("0", "1"):
                split_dir = ds_dir / "splits" / r
                assert (split_dir / "train.tsv").is_file()
                assert (split_dir / "test.tsv").is_file()
                meta = json.loads((split_dir / "meta.json").read_text())
                assert meta["method"] == "random"
                assert meta["n_train"] == 7 and meta["n_test"] == 5
                for model in ("lexicon", "0-crf"):
                    job = split_dir / "models" / model
                    assert (job / "predictions.tsv").is_file()
                    assert (job / "metrics.json").is_file()

        report_names = {p.name for p in result.report_paths}
        assert report_names == {
            "summary.json",
            "summary.csv",
            "characteristics.csv",
            "regression.json",
            "regression.csv",
        }
        summary = json.loads((tmp_path / "out" / "reports" / "summary.json").read_text())
        assert summary["format"] == "segbench-summary" and summary["version"] == 1
        block = summary["settings"]["syn-12-without_replacement"]
        grid = block["scores"]["lexicon"]
        assert len(grid) == 2 and len(grid[0]) == 2
        assert set(grid[0][0]) == set(METRIC_NAMES)
        assert len(block["characteristics"]) == 2

    def test_split_halves_partition_dataset(self, corpus_file, tmp_path):
        run_experiment(small_config(corpus_file), out_dir=tmp_path / "out")
        ds_dir = (
            tmp_path / "out" / "runs" / "syn-12-without_replacement" / "datasets" / "0"
        )
        dataset = sorted((ds_dir / "dataset.tsv").read_text().splitlines())
        for r in ("0", "1"):
            train = (ds_dir / "splits" / r / "train.tsv").read_text().splitlines()
            test = (ds_dir / "splits" / r / "test.tsv").read_text().splitlines()
            assert sorted(train + test) == dataset

    def test_reruns_are_byte_identical(self, corpus_file, tmp_path):
        cfg = small_config(corpus_file)
        run_experiment(cfg, out_dir=tmp_path / "a")
        run_experiment(cfg, out_dir=tmp_path / "b")
        for name in ("summary.json", "summary.csv", "regression.json", "regression.csv"):
            assert (tmp_path / "a" / "reports" / name).read_bytes() == (
                tmp_path / "b" / "reports" / name
            ).read_bytes(), name

    def test_resume_recomputes_only_invalid_jobs(self, corpus_file, tmp_path):
        cfg = small_config(corpus_file)
        out = tmp_path / "out"
        run_experiment(cfg, out_dir=out)
        job_dir = (
            out / "runs" / "syn-12-without_replacement" / "datasets" / "0"
            / "splits" / "0" / "models" / "lexicon"
        )
        good_metrics = (job_dir / "metrics.json").read_bytes()
        (job_dir / "metrics.json").write_text("{tampered")
        other_job = (
            out / "runs" / "syn-12-without_replacement" / "datasets" / "1"
            / "splits" / "1" / "models" / "0-crf"
        )
        before = (other_job / "predictions.tsv").stat().st_mtime_ns

        summary_before = (out / "reports" / "summary.json").read_bytes()
        run_experiment(cfg, out_dir=out)
        assert (job_dir / "metrics.json").read_bytes() == good_metrics
        assert (other_job / "predictions.tsv").stat().st_mtime_ns == before
        assert (out / "reports" / "summary.json").read_bytes() == summary_before

    def test_report_only_requires_complete_run(self, corpus_file, tmp_path):
        cfg = small_config(corpus_file)
        with pytest.raises(JobError):
            run_experiment(cfg, out_dir=tmp_path / "out", report_only=True)

    def test_report_only_on_complete_run(self, corpus_file, tmp_path):
        cfg = small_config(corpus_file)
        out = tmp_path / "out"
        first = run_experiment(cfg, out_dir=out)
        (out / "reports" / "summary.json").unlink()
        again = run_experiment(cfg, out_dir=out, report_only=True)
        assert (out / "reports" / "summary.json").is_file()
        assert again.n_jobs == first.n_jobs

    def test_infeasible_setting_skipped(self, corpus_file, tmp_path):
        cfg = small_config(corpus_file, sizes=(12, 100000))
        result = run_experiment(cfg, out_dir=tmp_path / "out")
        assert len(result.skipped) == 1
        setting_id, reason = result.skipped[0]
        assert setting_id == "syn-100000-without_replacement"
        assert "exceeds" in reason
        summary = json.loads((tmp_path / "out" / "reports" / "summary.json").read_text())
        assert summary["skipped_settings"][0]["setting"] == setting_id
        assert "syn-100000-without_replacement" not in summary["settings"]

    def test_all_infeasible_raises(self, corpus_file, tmp_path):
        cfg = small_config(corpus_file, sizes=(100000,))
        with pytest.raises(InfeasibleRunError):
            run_experiment(cfg, out_dir=tmp_path / "out")

    def test_infeasible_newtest_size_recorded(self, corpus_file, tmp_path):
        # corpus has ~123 types; pool after a 12-type dataset is ~111
        cfg = small_config(corpus_file, newtest_sizes=(400,))
        run_experiment(cfg, out_dir=tmp_path / "out")
        summary = json.loads((tmp_path / "out" / "reports" / "summary.json").read_text())
        notes = summary["settings"]["syn-12-without_replacement"]["newtest_skipped"]
        assert len(notes) == 2  # one per dataset
        assert notes[0]["size"] == 400

    def test_only_filter(self, corpus_file, tmp_path):
        cfg = small_config(
            corpus_file,
            strategies=(
                SamplingStrategy.WITHOUT_REPLACEMENT,
                SamplingStrategy.WITH_REPLACEMENT,
            ),
        )
        result = run_experiment(cfg, out_dir=tmp_path / "out", only="with_replacement")
        assert result.n_jobs == 8  # the without_replacement sibling is ruled out
        runs = tmp_path / "out" / "runs"
        assert (runs / "syn-12-with_replacement").is_dir()
        assert not (runs / "syn-12-without_replacement").exists()

    def test_only_no_match(self, corpus_file, tmp_path):
        with pytest.raises(ConfigError):
            run_experiment(
                small_config(corpus_file), out_dir=tmp_path / "out", only="nosuch"
            )

    def test_missing_out_dir(self, corpus_file):
        with pytest.raises(ConfigError):
            run_experiment(small_config(corpus_file))

    def test_tiny_grid_regression_error_is_recorded(self, corpus_file, tmp_path):
        # 2 datasets x 2 splits gives 4 characteristic cells; intercept plus
        # 4 varying characteristics over 4 cells cannot be full rank, so the
        # regression must fail gracefully and the run still completes
        run_experiment(small_config(corpus_file), out_dir=tmp_path / "out")
        regression = json.loads(
            (tmp_path / "out" / "reports" / "regression.json").read_text()
        )
        block = regression["languages"]["syn"]
        assert "error" in block
        assert block["n_rows"] == 2 * 2 * 2 * len(METRIC_NAMES)
