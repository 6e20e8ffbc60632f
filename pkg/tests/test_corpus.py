import json
import math

import numpy as np
import pytest

from painsift.corpus import (
    ClinicalNote,
    Corpus,
    PainChange,
    PainRelevance,
    SyntheticSpec,
    Task,
    change_from_string,
    change_to_string,
    demo_synthetic_spec,
    generate_synthetic_corpus,
    load_corpus,
    relevance_from_string,
    relevance_to_string,
    stratified_split,
)
from painsift.errors import DataError


def _write_jsonl(path, records):
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec) + "\n")


def _rec(i, text="pain note", relevance="yes", change=None, patient="p1"):
    return {"id": f"n{i}", "patient_id": patient, "text": text,
            "relevance": relevance, "change": change}


class TestLabels:
    def test_relevance_round_trip(self):
        for s in ("yes", "no"):
            assert relevance_to_string(relevance_from_string(s)) == s

    def test_change_round_trip(self):
        for s in ("pain increase", "pain uncertain", "pain unchanged", "pain decrease"):
            assert change_to_string(change_from_string(s)) == s

    def test_change_encoding_is_ordinal(self):
        assert PainChange.DECREASE == 0
        assert PainChange.UNCHANGED == 1
        assert PainChange.UNCERTAIN == 2
        assert PainChange.INCREASE == 3
        assert PainChange.DECREASE < PainChange.UNCHANGED < PainChange.UNCERTAIN < PainChange.INCREASE

    def test_unknown_labels_rejected(self):
        with pytest.raises(DataError):
            relevance_from_string("maybe")
        with pytest.raises(DataError):
            change_from_string("pain worse")


class TestLoadCorpus:
    def test_two_line_jsonl(self, tmp_path):
        path = tmp_path / "corpus.jsonl"
        _write_jsonl(path, [_rec(0, relevance="yes"), _rec(1, relevance="no")])
        corpus = load_corpus(str(path), "jsonl", Task.RELEVANCE)
        assert len(corpus) == 2
        assert corpus.labels() == ["yes", "no"]

    def test_change_implies_relevance(self, tmp_path):
        path = tmp_path / "corpus.jsonl"
        _write_jsonl(path, [_rec(0, relevance=None, change="pain decrease")])
        with pytest.raises(DataError, match="implies relevance"):
            load_corpus(str(path), "jsonl", Task.CHANGE)

    def test_unknown_change_label(self, tmp_path):
        path = tmp_path / "corpus.jsonl"
        _write_jsonl(path, [_rec(0, change="pain worse")])
        with pytest.raises(DataError, match="pain worse"):
            load_corpus(str(path), "jsonl", Task.CHANGE)

    def test_parse_error_reports_line(self, tmp_path):
        path = tmp_path / "corpus.jsonl"
        path.write_text('{"id": "a", "patient_id": "p", "text": "t", "relevance": "yes"}\n{broken\n')
        with pytest.raises(DataError, match=":2"):
            load_corpus(str(path), "jsonl", Task.RELEVANCE)

    def test_duplicate_id(self, tmp_path):
        path = tmp_path / "corpus.jsonl"
        _write_jsonl(path, [_rec(0), _rec(0)])
        with pytest.raises(DataError, match="duplicate"):
            load_corpus(str(path), "jsonl", Task.RELEVANCE)

    def test_missing_label_for_task(self, tmp_path):
        path = tmp_path / "corpus.jsonl"
        _write_jsonl(path, [_rec(0, relevance="yes", change=None)])
        with pytest.raises(DataError, match="no pain-change label"):
            load_corpus(str(path), "jsonl", Task.CHANGE)

    def test_csv_round_trip(self, tmp_path):
        path = tmp_path / "corpus.csv"
        path.write_text(
            "id,patient_id,text,relevance,change\n"
            "a,p1,pain up,yes,pain increase\n"
            "b,p2,pain down,yes,pain decrease\n"
        )
        corpus = load_corpus(str(path), "csv", Task.CHANGE)
        assert corpus.labels() == ["pain increase", "pain decrease"]

    def test_csv_needs_header(self, tmp_path):
        path = tmp_path / "corpus.csv"
        path.write_text("a,p1,pain,yes,\n")
        with pytest.raises(DataError):
            load_corpus(str(path), "csv", Task.RELEVANCE)


def _make_corpus(counts, task=Task.RELEVANCE):
    notes = []
    i = 0
    for lab, n in counts.items():
        for _ in range(n):
            if task is Task.RELEVANCE:
                notes.append(ClinicalNote(f"n{i}", "p0", "text", relevance_from_string(lab)))
            else:
                notes.append(
                    ClinicalNote(f"n{i}", "p0", "text", PainRelevance.RELEVANT,
                                 change_from_string(lab))
                )
            i += 1
    return Corpus(notes=tuple(notes), task=task)


class TestStratifiedSplit:
    def test_exact_stratification(self):
        corpus = _make_corpus({"yes": 5, "no": 5})
        train, test = stratified_split(corpus, 0.2, seed=0)
        assert len(train) == 8 and len(test) == 2
        assert train.class_counts() == {"yes": 4, "no": 4}
        assert test.class_counts() == {"yes": 1, "no": 1}

    def test_determinism(self):
        corpus = _make_corpus({"yes": 7, "no": 13})
        a = stratified_split(corpus, 0.3, seed=42)
        b = stratified_split(corpus, 0.3, seed=42)
        assert [n.id for n in a[0].notes] == [n.id for n in b[0].notes]
        assert [n.id for n in a[1].notes] == [n.id for n in b[1].notes]

    def test_424_note_rounding(self):
        # oracle: per-class test count is floor(c*f + 0.5) clamped to [1, c-1]
        def expected_test_size(class_counts, fraction):
            return sum(
                min(max(math.floor(c * fraction + 0.5), 1), c - 1)
                for c in class_counts
            )

        for counts in ({"yes": 300, "no": 124}, {"yes": 212, "no": 212}, {"yes": 423 - 99, "no": 100}):
            corpus = _make_corpus(counts)
            train, test = stratified_split(corpus, 0.2, seed=1)
            want = expected_test_size(counts.values(), 0.2)
            assert len(test) == want
            assert len(train) + len(test) == sum(counts.values())
            assert want in (84, 85)

    def test_partition_property(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            counts = {"yes": int(rng.integers(2, 40)), "no": int(rng.integers(2, 40))}
            fraction = float(rng.uniform(0.05, 0.95))
            seed = int(rng.integers(0, 10_000))
            corpus = _make_corpus(counts)
            train, test = stratified_split(corpus, fraction, seed)
            train_ids = {n.id for n in train.notes}
            test_ids = {n.id for n in test.notes}
            assert train_ids | test_ids == {n.id for n in corpus.notes}
            assert not train_ids & test_ids

    def test_proportion_deviation_bound(self):
        rng = np.random.default_rng(7)
        for _ in range(20):
            counts = {"yes": int(rng.integers(2, 60)), "no": int(rng.integers(2, 60))}
            fraction = float(rng.uniform(0.1, 0.9))
            corpus = _make_corpus(counts)
            _, test = stratified_split(corpus, fraction, int(rng.integers(10_000)))
            test_counts = test.class_counts()
            for lab, c in counts.items():
                deviation = abs(test_counts.get(lab, 0) / c - fraction)
                assert deviation < 1.0 / c

    def test_small_class_rejected(self):
        corpus = _make_corpus({"yes": 1, "no": 5})
        with pytest.raises(DataError, match="at least 2"):
            stratified_split(corpus, 0.2, seed=0)


class TestSyntheticCorpus:
    def test_zero_noise_stays_in_class_pool(self):
        spec = demo_synthetic_spec(Task.RELEVANCE, per_class=20, noise_rate=0.0)
        corpus = generate_synthetic_corpus(spec, seed=5)
        for note in corpus.notes:
            pool = set(spec.class_pools[note.label(Task.RELEVANCE)])
            assert set(note.text.split()) <= pool

    def test_full_noise_is_indistinguishable(self):
        spec = demo_synthetic_spec(Task.RELEVANCE, per_class=10, noise_rate=1.0)
        corpus = generate_synthetic_corpus(spec, seed=5)
        noise = set(spec.noise_pool)
        for note in corpus.notes:
            assert set(note.text.split()) <= noise

    def test_determinism(self):
        spec = demo_synthetic_spec(Task.CHANGE, per_class=15, noise_rate=0.4)
        a = generate_synthetic_corpus(spec, seed=9)
        b = generate_synthetic_corpus(spec, seed=9)
        assert a == b

    def test_change_notes_are_relevant(self):
        spec = demo_synthetic_spec(Task.CHANGE, per_class=5, noise_rate=0.2)
        corpus = generate_synthetic_corpus(spec, seed=1)
        assert all(n.relevance is PainRelevance.RELEVANT for n in corpus.notes)
        assert corpus.class_counts() == {lab: 5 for lab in spec.counts}

    def test_save_load_round_trip_keeps_all_change_labels(self, tmp_path):
        from painsift.corpus import save_notes

        spec = demo_synthetic_spec(Task.CHANGE, per_class=4, noise_rate=0.2)
        corpus = generate_synthetic_corpus(spec, seed=13)
        path = tmp_path / "change.jsonl"
        save_notes(corpus.notes, str(path))
        loaded = load_corpus(str(path), "jsonl", Task.CHANGE)
        # "pain decrease" encodes as 0; a truthiness bug would drop it here
        assert loaded.class_counts() == corpus.class_counts()
        assert [n.change for n in loaded.notes] == [n.change for n in corpus.notes]

    def test_overlapping_pools_rejected(self):
        with pytest.raises(DataError, match="overlap"):
            SyntheticSpec(
                task=Task.RELEVANCE,
                counts={"yes": 3, "no": 3},
                class_pools={"yes": ["pain", "pca"], "no": ["home", "pain"]},
                noise_pool=["note"],
                noise_rate=0.1,
            )
