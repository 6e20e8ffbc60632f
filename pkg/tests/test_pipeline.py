import json

import numpy as np
import pytest

from painsift.corpus import (
    Task,
    demo_synthetic_spec,
    generate_synthetic_corpus,
    stratified_split,
    with_texts,
)
from painsift.errors import ConfigError
from painsift.pipeline import (
    SEED_OFFSETS,
    PipelineConfig,
    load_artifact,
    run_evaluate,
    run_predict,
    run_report,
    run_train,
    save_artifact,
)

FAST_LDA = {
    "lda_topics": 2,
    "lda_iterations": 60,
    "lda_infer_iterations": 40,
    "lda_alpha": 0.5,
}


def fast_config(**overrides):
    config = PipelineConfig()
    config.apply({
        "task": "relevance", "features": "combined", "model": "dt",
        "chi2_k": 60, "forest_trees": 10, "ffnn_epochs": 30,
        "lr_epochs": 80, "seed": 5, **FAST_LDA, **overrides,
    })
    return config


def small_corpus(task=Task.RELEVANCE, per_class=20, noise=0.3, seed=11):
    spec = demo_synthetic_spec(task, per_class=per_class, noise_rate=noise)
    return generate_synthetic_corpus(spec, seed=seed)


class TestConfig:
    def test_file_parsing_and_overrides(self, tmp_path):
        path = tmp_path / "run.conf"
        path.write_text(
            "# demo config\n"
            "task = change\n"
            "model = rf\n"
            "chi2_k = 123\n"
            "smote = off\n"
            "lda_alpha = none\n"
            "forest_bootstrap = false\n"
        )
        config = PipelineConfig.from_file(str(path))
        assert config.task == "change"
        assert config.model == "rf"
        assert config.chi2_k == 123
        assert config.smote is False
        assert config.lda_alpha is None
        assert config.forest_bootstrap is False

    def test_unknown_key_rejected(self, tmp_path):
        path = tmp_path / "bad.conf"
        path.write_text("no_such_knob = 3\n")
        with pytest.raises(ConfigError, match="no_such_knob"):
            PipelineConfig.from_file(str(path))

    def test_topical_without_k_source_fails_before_work(self):
        config = fast_config(features="topical")
        config.lda_topics = None
        config.lda_k_range = ""
        with pytest.raises(ConfigError, match="lda_k_range"):
            run_train(config, corpus=small_corpus())

    def test_k_range_syntax(self):
        config = PipelineConfig()
        config.lda_k_range = "2..5"
        assert config.k_range_values() == [2, 3, 4, 5]
        config.lda_k_range = "2,4,9"
        assert config.k_range_values() == [2, 4, 9]

    def test_validation_catches_bad_values(self):
        for key, value in (("task", "bogus"), ("model", "svm"),
                           ("test_fraction", 1.5), ("ngram_max", 9)):
            config = fast_config()
            setattr(config, key, value)
            with pytest.raises(ConfigError):
                config.validate()


class TestRunTrain:
    def test_artifact_and_report_deterministic(self, tmp_path):
        corpus = small_corpus()
        blobs = []
        for run in range(2):
            result = run_train(fast_config(), corpus=corpus)
            a_path = tmp_path / f"model-{run}.json"
            r_path = tmp_path / f"report-{run}.json"
            save_artifact(result.artifact, str(a_path))
            r_path.write_text(result.report.to_json())
            blobs.append((a_path.read_bytes(), r_path.read_bytes()))
        assert blobs[0][0] == blobs[1][0]
        assert blobs[0][1] == blobs[1][1]

    def test_different_seed_changes_artifact(self, tmp_path):
        corpus = small_corpus()
        a = run_train(fast_config(), corpus=corpus)
        b = run_train(fast_config(seed=6), corpus=corpus)
        assert a.artifact.to_dict() != b.artifact.to_dict()

    def test_no_leakage_from_test_texts(self):
        corpus = small_corpus(per_class=25)
        config = fast_config()
        _, test_split = stratified_split(
            corpus, config.test_fraction, config.seed + SEED_OFFSETS["split"]
        )
        mutated = with_texts(
            corpus, {n.id: "perturbed text entirely different" for n in test_split.notes}
        )
        original = run_train(config, corpus=corpus)
        perturbed = run_train(config, corpus=mutated)
        assert json.dumps(original.artifact.to_dict(), sort_keys=True) == json.dumps(
            perturbed.artifact.to_dict(), sort_keys=True
        )

    def test_full_corpus_lda_flag_does_leak(self):
        # the documented compatibility switch trades leak-safety for fidelity
        corpus = small_corpus(per_class=15)
        config = fast_config(lda_on_full_corpus=True)
        _, test_split = stratified_split(
            corpus, config.test_fraction, config.seed + SEED_OFFSETS["split"]
        )
        mutated = with_texts(corpus, {n.id: "changed utterly" for n in test_split.notes})
        original = run_train(config, corpus=corpus)
        perturbed = run_train(config, corpus=mutated)
        assert original.artifact.to_dict() != perturbed.artifact.to_dict()

    def test_feature_sets_shape_the_layout(self):
        corpus = small_corpus(per_class=15)
        lin = run_train(fast_config(features="linguistic"), corpus=corpus)
        assert [name for name, _ in lin.artifact.model.feature_layout] == ["linguistic"]
        top = run_train(fast_config(features="topical"), corpus=corpus)
        assert [name for name, _ in top.artifact.model.feature_layout] == ["topical"]
        both = run_train(fast_config(), corpus=corpus)
        assert [name for name, _ in both.artifact.model.feature_layout] == [
            "linguistic", "topical",
        ]

    def test_all_model_kinds_run(self):
        corpus = small_corpus(per_class=15)
        for kind in ("lr", "dt", "rf", "ffnn"):
            result = run_train(fast_config(model=kind), corpus=corpus)
            assert result.report.metadata["model"] == kind

    def test_change_task_graded_metrics_present(self):
        corpus = small_corpus(task=Task.CHANGE, per_class=12)
        result = run_train(fast_config(task="change"), corpus=corpus)
        assert result.report.graded is not None
        assert 0.0 <= result.report.graded["f_measure"] <= 1.0

    def test_smote_flag_recorded(self):
        corpus = small_corpus(per_class=15)
        on = run_train(fast_config(), corpus=corpus)
        off = run_train(fast_config(smote=False), corpus=corpus)
        assert on.report.metadata["smote"] is True
        assert off.report.metadata["smote"] is False

    def test_smote_engages_on_imbalanced_corpus(self):
        from painsift.corpus import SyntheticSpec, generate_synthetic_corpus
        from painsift.corpus import DEMO_POOLS

        pools = DEMO_POOLS[Task.RELEVANCE]
        spec = SyntheticSpec(
            task=Task.RELEVANCE,
            counts={"yes": 40, "no": 10},
            class_pools=pools["classes"],
            noise_pool=pools["noise"],
            noise_rate=0.3,
        )
        corpus = generate_synthetic_corpus(spec, seed=21)
        with_smote = run_train(fast_config(model="lr"), corpus=corpus)
        without = run_train(fast_config(model="lr", smote=False), corpus=corpus)
        # the rebalanced training matrix must actually change the fit
        assert with_smote.artifact.to_dict()["model"] != without.artifact.to_dict()["model"]
        assert with_smote.report.weighted["f_measure"] >= 0.9


class TestArtifactRoundTrip:
    def test_predictions_survive_serialization(self, tmp_path):
        corpus = small_corpus(per_class=20)
        for kind in ("lr", "dt", "rf", "ffnn"):
            result = run_train(fast_config(model=kind), corpus=corpus)
            path = tmp_path / f"{kind}.json"
            save_artifact(result.artifact, str(path))
            loaded = load_artifact(str(path))
            probe = generate_synthetic_corpus(
                demo_synthetic_spec(Task.RELEVANCE, per_class=50, noise_rate=0.5), seed=77
            )
            mem = run_predict(result.artifact, probe.notes)
            disk = run_predict(loaded, probe.notes)
            assert [p.label for p in mem] == [p.label for p in disk]
            for a, b in zip(mem, disk):
                np.testing.assert_allclose(a.probabilities, b.probabilities, atol=1e-12)

    def test_train_notes_reproduce_recorded_accuracy(self):
        corpus = small_corpus(per_class=20)
        config = fast_config()
        result = run_train(config, corpus=corpus)
        train_split, _ = stratified_split(
            corpus, config.test_fraction, config.seed + SEED_OFFSETS["split"]
        )
        predictions = run_predict(result.artifact, train_split.notes)
        acc = sum(
            p.label == n.label(Task.RELEVANCE)
            for p, n in zip(predictions, train_split.notes)
        ) / len(train_split.notes)
        assert acc == pytest.approx(result.train_accuracy, abs=1e-12)

    def test_pain_keywords_predict_relevant(self):
        from painsift.corpus import ClinicalNote

        corpus = small_corpus(per_class=25)
        result = run_train(fast_config(), corpus=corpus)
        note = ClinicalNote(id="probe", patient_id="p9",
                            text="patient pain increased 9/10 toradol")
        pred = run_predict(result.artifact, [note])[0]
        assert pred.label == "yes"

    def test_empty_note_predicts_without_crash(self):
        from painsift.corpus import ClinicalNote

        corpus = small_corpus(per_class=15)
        result = run_train(fast_config(), corpus=corpus)
        blank = ClinicalNote(id="blank", patient_id="p0", text="")
        pred = run_predict(result.artifact, [blank])[0]
        assert pred.label in result.artifact.model.label_map
        assert sum(pred.probabilities) == pytest.approx(1.0, abs=1e-9)

    def test_version_gate(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text(json.dumps({"format": "painsift-model-v999"}))
        from painsift.errors import DataError

        with pytest.raises(DataError, match="painsift-model-v1"):
            load_artifact(str(path))


class TestEvaluate:
    def test_evaluate_matches_training_report_on_same_split(self):
        corpus = small_corpus(per_class=20)
        config = fast_config()
        result = run_train(config, corpus=corpus)
        _, test_split = stratified_split(
            corpus, config.test_fraction, config.seed + SEED_OFFSETS["split"]
        )
        report = run_evaluate(result.artifact, test_split)
        assert report.weighted == result.report.weighted

    def test_task_mismatch_rejected(self):
        corpus = small_corpus(per_class=15)
        result = run_train(fast_config(), corpus=corpus)
        other = small_corpus(task=Task.CHANGE, per_class=5)
        with pytest.raises(ConfigError, match="task"):
            run_evaluate(result.artifact, other)


class TestReports:
    def test_ngrams_report_shape(self, tmp_path):
        corpus = small_corpus(per_class=12)
        out = tmp_path / "ngrams.tsv"
        tsv = run_report(corpus, "ngrams", fast_config(), out_path=str(out))
        lines = [l for l in tsv.splitlines() if not l.startswith("#")]
        header = lines[0].split("\t")
        assert header[:3] == ["term", "class_profile", "chi2"]
        assert "doc_freq:no" in header and "doc_freq:yes" in header
        assert out.exists()
        assert (tmp_path / "ngrams.png").exists()

    def test_ngrams_single_class_all_exclusive(self):
        from painsift.corpus import ClinicalNote, Corpus, PainRelevance

        notes = tuple(
            ClinicalNote(f"n{i}", "p0", "pain pca plan", relevance=PainRelevance.RELEVANT)
            for i in range(3)
        )
        corpus = Corpus(notes=notes, task=Task.RELEVANCE)
        tsv = run_report(corpus, "ngrams", fast_config(), out_path=None)
        rows = [l.split("\t") for l in tsv.splitlines() if not l.startswith("#")][1:]
        assert rows
        assert all(row[1] == "exclusive:yes" for row in rows)

    def test_coherence_report_rows_match_range(self, tmp_path):
        corpus = small_corpus(per_class=10)
        config = fast_config()
        config.lda_topics = None
        config.lda_k_range = "2..4"
        config.lda_iterations = 40
        out = tmp_path / "coherence.tsv"
        tsv = run_report(corpus, "coherence", config, out_path=str(out))
        rows = [l for l in tsv.splitlines() if not l.startswith("#")][1:]
        assert len(rows) == 3
        assert [int(r.split("\t")[0]) for r in rows] == [2, 3, 4]
        assert (tmp_path / "coherence.png").exists()

    def test_topics_report_two_topics_eight_words(self, tmp_path):
        corpus = small_corpus(task=Task.CHANGE, per_class=10)
        config = fast_config(task="change")
        config.lda_topics = 2
        config.lda_top_m = 8
        out = tmp_path / "topics.tsv"
        tsv = run_report(corpus, "topics", config, out_path=str(out))
        rows = [l.split("\t") for l in tsv.splitlines() if not l.startswith("#")][1:]
        classes = {r[0] for r in rows}
        assert classes == {"pain increase", "pain uncertain", "pain unchanged", "pain decrease"}
        for c in classes:
            topics = {r[1] for r in rows if r[0] == c}
            assert topics == {"0", "1"}
            for t in topics:
                assert sum(1 for r in rows if r[0] == c and r[1] == t) == 8
        assert (tmp_path / "topics.png").exists()

    def test_figures_can_be_disabled(self, tmp_path):
        corpus = small_corpus(per_class=8)
        out = tmp_path / "ngrams.tsv"
        run_report(corpus, "ngrams", fast_config(), out_path=str(out), figures=False)
        assert out.exists()
        assert not (tmp_path / "ngrams.png").exists()

    def test_unknown_kind_rejected(self):
        with pytest.raises(ConfigError, match="unknown report kind"):
            run_report(small_corpus(per_class=8), "wordcloud", fast_config())

    def test_reports_embed_config_and_seed(self):
        corpus = small_corpus(per_class=8)
        config = fast_config(seed=123)
        tsv = run_report(corpus, "ngrams", config, out_path=None)
        head = tsv.splitlines()[0]
        assert "seed=123" in head
        assert "# config" in tsv.splitlines()[1]
