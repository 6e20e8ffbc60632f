"""End-to-end orchestration: split, fit features, rebalance, train, evaluate.

All stage seeds derive from one master seed via fixed documented offsets, so
a run is reproducible end to end and stages can be re-run independently.
Everything fit (vocabulary, chi-squared selection, topic model, SMOTE, model
weights) sees the training split only; the documented ``lda_on_full_corpus``
switch restores whole-corpus topic training for comparability at the cost of
leaking test text into features.
"""

from __future__ import annotations

import dataclasses
import json
import os
from dataclasses import dataclass
from typing import Mapping, Optional, Sequence

import numpy as np

from . import models as models_mod
from .balance import LabeledMatrix, smote
from .corpus import (
    ClinicalNote,
    Corpus,
    Task,
    change_from_string,
    load_corpus,
    task_labels,
)
from .errors import ConfigError, DataError
from .evaluation import EvalReport, build_report
from .features import (
    FeatureVector,
    Vocabulary,
    concat_features,
    ngram_class_report,
    select_top_k,
    vectorize,
)
from .textprep import Preprocessor, extract_ngrams
from .topics import TopicModel, infer_theta, select_topic_count, train_lda, topic_top_words

__all__ = [
    "PipelineConfig",
    "SEED_OFFSETS",
    "ARTIFACT_FORMAT",
    "ModelArtifact",
    "TrainResult",
    "run_train",
    "run_predict",
    "run_evaluate",
    "run_report",
    "save_artifact",
    "load_artifact",
]

ARTIFACT_FORMAT = "painsift-model-v1"

# Fixed per-stage offsets added to the master seed.
SEED_OFFSETS = {
    "split": 1,
    "lda": 2,
    "smote": 3,
    "model": 4,
    "synth": 5,
    "infer": 6,
}

FEATURE_SETS = ("linguistic", "topical", "combined")

_BOOL_STRINGS = {
    "on": True, "off": False, "true": True, "false": False,
    "1": True, "0": False, "yes": True, "no": False,
}


def _parse_bool(value: str, key: str) -> bool:
    try:
        return _BOOL_STRINGS[value.strip().lower()]
    except KeyError:
        raise ConfigError(f"{key}: expected on/off, got {value!r}") from None


def _parse_k_range(text: str) -> list[int]:
    """K range syntax: 'a..b' (inclusive) or a comma list like '2,4,8'."""
    text = text.strip()
    if not text:
        return []
    try:
        if ".." in text:
            lo, hi = text.split("..", 1)
            return list(range(int(lo), int(hi) + 1))
        return [int(part) for part in text.split(",")]
    except ValueError:
        raise ConfigError(f"cannot parse K range {text!r} (use 'a..b' or 'k1,k2,...')") from None


@dataclass
class PipelineConfig:
    """Every knob of the pipeline; see README for the config-file key table."""

    task: str = "relevance"
    features: str = "combined"
    model: str = "dt"
    corpus: str = ""
    corpus_format: str = "jsonl"
    test_fraction: float = 0.2
    seed: int = 0
    ngram_min: int = 1
    ngram_max: int = 2
    chi2_k: int = 500
    lda_topics: Optional[int] = None
    lda_k_range: str = "2..10"
    lda_alpha: Optional[float] = None  # None applies the 50/K rule
    lda_beta: float = 0.01
    lda_iterations: int = 1000
    lda_infer_iterations: int = 100
    lda_top_m: int = 8
    lda_on_full_corpus: bool = False
    smote: bool = True
    smote_k: int = 5
    lr_learning_rate: float = 0.1
    lr_epochs: int = 300
    lr_l2: float = 1e-4
    tree_max_depth: int = 20
    tree_min_leaf: int = 2
    forest_trees: int = 100
    forest_feature_fraction: Optional[float] = None  # None uses ceil(sqrt(d))
    forest_bootstrap: bool = True
    ffnn_hidden: int = 64
    ffnn_learning_rate: float = 0.05
    ffnn_epochs: int = 200
    ffnn_batch: int = 16
    stopwords_path: Optional[str] = None
    stemmer_rules_path: Optional[str] = None
    report_top: int = 0  # 0 keeps every row in the n-gram report

    @classmethod
    def field_names(cls) -> tuple[str, ...]:
        return tuple(f.name for f in dataclasses.fields(cls))

    @classmethod
    def from_file(cls, path: str) -> "PipelineConfig":
        config = cls()
        try:
            with open(path, encoding="utf-8") as fh:
                lines = fh.readlines()
        except OSError as exc:
            raise ConfigError(f"cannot read config file {path}: {exc}") from None
        overrides = {}
        for lineno, line in enumerate(lines, start=1):
            stripped = line.split("#", 1)[0].strip()
            if not stripped:
                continue
            if "=" not in stripped:
                raise ConfigError(f"{path}:{lineno}: expected key=value")
            key, value = (part.strip() for part in stripped.split("=", 1))
            overrides[key] = value
        config.apply(overrides)
        return config

    def apply(self, overrides: Mapping[str, object]) -> None:
        """Set fields from string or typed values; unknown keys are errors."""
        types = {f.name: f.type for f in dataclasses.fields(self)}
        for key, value in overrides.items():
            if key not in types:
                raise ConfigError(f"unknown config key {key!r}")
            if value is None or not isinstance(value, str):
                setattr(self, key, value)
                continue
            text = value.strip()
            current = getattr(type(self)(), key)
            optional = key in (
                "lda_topics", "lda_alpha", "forest_feature_fraction",
                "stopwords_path", "stemmer_rules_path",
            )
            if optional and text.lower() in ("", "none"):
                setattr(self, key, None)
                continue
            try:
                if key in ("lda_on_full_corpus", "smote", "forest_bootstrap"):
                    setattr(self, key, _parse_bool(text, key))
                elif key in ("lda_topics",):
                    setattr(self, key, int(text))
                elif key in ("lda_alpha", "forest_feature_fraction"):
                    setattr(self, key, float(text))
                elif isinstance(current, bool):
                    setattr(self, key, _parse_bool(text, key))
                elif isinstance(current, int):
                    setattr(self, key, int(text))
                elif isinstance(current, float):
                    setattr(self, key, float(text))
                else:
                    setattr(self, key, text)
            except ValueError:
                raise ConfigError(f"{key}: cannot parse value {value!r}") from None

    def validate(self) -> None:
        if self.task not in ("relevance", "change"):
            raise ConfigError(f"task must be 'relevance' or 'change', got {self.task!r}")
        if self.features not in FEATURE_SETS:
            raise ConfigError(f"features must be one of {FEATURE_SETS}, got {self.features!r}")
        if self.model not in models_mod.MODEL_KINDS:
            raise ConfigError(f"model must be one of {models_mod.MODEL_KINDS}, got {self.model!r}")
        if not 0.0 < self.test_fraction < 1.0:
            raise ConfigError(f"test_fraction must be in (0,1), got {self.test_fraction}")
        if not 1 <= self.ngram_min <= self.ngram_max <= 3:
            raise ConfigError(f"invalid n-gram range {self.ngram_min}..{self.ngram_max}")
        if self.chi2_k < 1:
            raise ConfigError("chi2_k must be >= 1")
        if self.features in ("topical", "combined"):
            if self.lda_topics is None and not _parse_k_range(self.lda_k_range):
                raise ConfigError(
                    "topical features need lda_topics or a non-empty lda_k_range"
                )
            if self.lda_topics is not None and self.lda_topics < 1:
                raise ConfigError("lda_topics must be >= 1")
        if self.smote_k < 1:
            raise ConfigError("smote_k must be >= 1")
        for key in ("lda_iterations", "lda_infer_iterations", "lda_top_m",
                    "lr_epochs", "tree_min_leaf", "forest_trees",
                    "ffnn_hidden", "ffnn_epochs", "ffnn_batch"):
            if getattr(self, key) < 1:
                raise ConfigError(f"{key} must be >= 1")
        if self.forest_feature_fraction is not None and not 0.0 < self.forest_feature_fraction <= 1.0:
            raise ConfigError("forest_feature_fraction must be in (0,1]")

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @property
    def task_enum(self) -> Task:
        return Task(self.task)

    def k_range_values(self) -> list[int]:
        return _parse_k_range(self.lda_k_range)

    def preprocessor(self) -> Preprocessor:
        return Preprocessor.create(
            stopwords_path=self.stopwords_path,
            stemmer_rules_path=self.stemmer_rules_path,
            n_min=self.ngram_min,
            n_max=self.ngram_max,
        )


def _infer_seed(master_seed: int, ordinal: int) -> int:
    return (master_seed + SEED_OFFSETS["infer"]) * 1_000_003 + ordinal


def _note_features(
    tokens: Sequence[str],
    config: PipelineConfig,
    vocab: Optional[Vocabulary],
    topic_model: Optional[TopicModel],
    ordinal: int,
) -> FeatureVector:
    parts = []
    if config.features in ("linguistic", "combined"):
        bag = extract_ngrams(tokens, config.ngram_min, config.ngram_max)
        parts.append(vectorize(bag, vocab))
    if config.features in ("topical", "combined"):
        theta = infer_theta(
            topic_model,
            tokens,
            iterations=config.lda_infer_iterations,
            seed=_infer_seed(config.seed, ordinal),
        )
        parts.append(FeatureVector(values=theta, layout=(("topical", topic_model.k),)))
    if len(parts) == 2:
        return concat_features(parts[0], parts[1])
    return parts[0]


@dataclass(frozen=True)
class ModelArtifact:
    """Self-contained model bundle: everything needed to score unseen notes."""

    config: PipelineConfig
    vocab: Optional[Vocabulary]
    topic_model: Optional[TopicModel]
    model: models_mod.TrainedModel
    selected_k: Optional[int]
    coherence_curve: Optional[tuple[tuple[int, float], ...]]

    def to_dict(self) -> dict:
        return {
            "format": ARTIFACT_FORMAT,
            "config": self.config.to_dict(),
            "vocabulary": list(self.vocab.terms) if self.vocab is not None else None,
            "topic_model": _serialize_topic_model(self.topic_model),
            "model": _serialize_model(self.model),
            "selected_k": self.selected_k,
            "coherence_curve": (
                [[k, s] for k, s in self.coherence_curve]
                if self.coherence_curve is not None
                else None
            ),
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "ModelArtifact":
        fmt = data.get("format")
        if fmt != ARTIFACT_FORMAT:
            raise DataError(
                f"unsupported artifact format {fmt!r} (this build reads {ARTIFACT_FORMAT!r})"
            )
        config = PipelineConfig()
        config.apply(dict(data["config"]))
        vocab_terms = data.get("vocabulary")
        curve = data.get("coherence_curve")
        return cls(
            config=config,
            vocab=Vocabulary(terms=tuple(vocab_terms)) if vocab_terms is not None else None,
            topic_model=_deserialize_topic_model(data.get("topic_model")),
            model=_deserialize_model(data["model"]),
            selected_k=data.get("selected_k"),
            coherence_curve=tuple((int(k), float(s)) for k, s in curve) if curve else None,
        )


def _serialize_topic_model(tm: Optional[TopicModel]) -> Optional[dict]:
    if tm is None:
        return None
    return {
        "k": tm.k,
        "alpha": tm.alpha,
        "beta": tm.beta,
        "iterations": tm.iterations,
        "seed": tm.seed,
        "vocabulary": list(tm.vocab.terms),
        "phi": tm.phi.tolist(),
    }


def _deserialize_topic_model(data: Optional[Mapping]) -> Optional[TopicModel]:
    if data is None:
        return None
    return TopicModel(
        k=int(data["k"]),
        phi=np.array(data["phi"], dtype=np.float64),
        alpha=float(data["alpha"]),
        beta=float(data["beta"]),
        vocab=Vocabulary(terms=tuple(data["vocabulary"])),
        seed=int(data["seed"]),
        iterations=int(data["iterations"]),
    )


def _serialize_tree(node: models_mod.TreeNode) -> dict:
    if node.is_leaf:
        return {"hist": node.histogram.tolist()}
    return {
        "feature": node.feature,
        "threshold": node.threshold,
        "left": _serialize_tree(node.left),
        "right": _serialize_tree(node.right),
    }


def _deserialize_tree(data: Mapping) -> models_mod.TreeNode:
    if "hist" in data:
        return models_mod.TreeNode(histogram=np.array(data["hist"], dtype=np.float64))
    return models_mod.TreeNode(
        feature=int(data["feature"]),
        threshold=float(data["threshold"]),
        left=_deserialize_tree(data["left"]),
        right=_deserialize_tree(data["right"]),
    )


def _serialize_model(model: models_mod.TrainedModel) -> dict:
    base = {
        "kind": model.kind,
        "label_map": list(model.label_map),
        "feature_layout": [[name, n] for name, n in model.feature_layout],
        "seed": model.seed,
    }
    p = model.params
    if model.kind == "lr":
        base["params"] = {
            "W": p.W.tolist(), "b": p.b.tolist(),
            "learning_rate": p.learning_rate, "epochs": p.epochs, "l2": p.l2,
            "loss_history": list(p.loss_history),
        }
    elif model.kind == "dt":
        base["params"] = {
            "root": _serialize_tree(p.root),
            "max_depth": p.max_depth, "min_leaf": p.min_leaf,
        }
    elif model.kind == "rf":
        base["params"] = {
            "roots": [_serialize_tree(r) for r in p.roots],
            "n_trees": p.n_trees, "max_depth": p.max_depth, "min_leaf": p.min_leaf,
            "feature_fraction": p.feature_fraction, "bootstrap": p.bootstrap,
        }
    elif model.kind == "ffnn":
        base["params"] = {
            "W1": p.W1.tolist(), "b1": p.b1.tolist(),
            "W2": p.W2.tolist(), "b2": p.b2.tolist(),
            "hidden_size": p.hidden_size, "learning_rate": p.learning_rate,
            "epochs": p.epochs, "batch_size": p.batch_size,
            "loss_history": list(p.loss_history),
        }
    else:
        raise DataError(f"cannot serialize model kind {model.kind!r}")
    return base


def _deserialize_model(data: Mapping) -> models_mod.TrainedModel:
    kind = data["kind"]
    p = data["params"]
    if kind == "lr":
        params = models_mod.LogRegParams(
            W=np.array(p["W"], dtype=np.float64), b=np.array(p["b"], dtype=np.float64),
            learning_rate=float(p["learning_rate"]), epochs=int(p["epochs"]),
            l2=float(p["l2"]), loss_history=tuple(p["loss_history"]),
        )
    elif kind == "dt":
        params = models_mod.TreeParams(
            root=_deserialize_tree(p["root"]),
            max_depth=p["max_depth"], min_leaf=int(p["min_leaf"]),
        )
    elif kind == "rf":
        params = models_mod.ForestParams(
            roots=tuple(_deserialize_tree(r) for r in p["roots"]),
            n_trees=int(p["n_trees"]), max_depth=p["max_depth"],
            min_leaf=int(p["min_leaf"]), feature_fraction=p["feature_fraction"],
            bootstrap=bool(p["bootstrap"]),
        )
    elif kind == "ffnn":
        params = models_mod.FFNNParams(
            W1=np.array(p["W1"], dtype=np.float64), b1=np.array(p["b1"], dtype=np.float64),
            W2=np.array(p["W2"], dtype=np.float64), b2=np.array(p["b2"], dtype=np.float64),
            hidden_size=int(p["hidden_size"]), learning_rate=float(p["learning_rate"]),
            epochs=int(p["epochs"]), batch_size=int(p["batch_size"]),
            loss_history=tuple(p["loss_history"]),
        )
    else:
        raise DataError(f"unsupported model kind {kind!r} in artifact")
    return models_mod.TrainedModel(
        kind=kind,
        params=params,
        label_map=tuple(data["label_map"]),
        feature_layout=tuple((name, int(n)) for name, n in data["feature_layout"]),
        seed=int(data["seed"]),
    )


def save_artifact(artifact: ModelArtifact, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps(artifact.to_dict(), sort_keys=True, indent=1) + "\n")


def load_artifact(path: str) -> ModelArtifact:
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except OSError as exc:
        raise DataError(f"cannot read artifact {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise DataError(f"artifact {path} is not valid JSON: {exc.msg}") from None
    return ModelArtifact.from_dict(data)


def _train_one_model(config: PipelineConfig, X: np.ndarray, y: Sequence[str],
                     layout) -> models_mod.TrainedModel:
    seed = config.seed + SEED_OFFSETS["model"]
    if config.model == "lr":
        return models_mod.train_logreg(
            X, y, learning_rate=config.lr_learning_rate, epochs=config.lr_epochs,
            l2=config.lr_l2, seed=seed, feature_layout=layout,
        )
    if config.model == "dt":
        return models_mod.train_tree(
            X, y, max_depth=config.tree_max_depth, min_leaf=config.tree_min_leaf,
            seed=seed, feature_layout=layout,
        )
    if config.model == "rf":
        return models_mod.train_forest(
            X, y, n_trees=config.forest_trees, max_depth=config.tree_max_depth,
            min_leaf=config.tree_min_leaf, feature_fraction=config.forest_feature_fraction,
            bootstrap=config.forest_bootstrap, seed=seed, feature_layout=layout,
        )
    return models_mod.train_ffnn(
        X, y, hidden_size=config.ffnn_hidden, learning_rate=config.ffnn_learning_rate,
        epochs=config.ffnn_epochs, batch_size=config.ffnn_batch,
        seed=seed, feature_layout=layout,
    )


@dataclass(frozen=True)
class TrainResult:
    artifact: ModelArtifact
    report: EvalReport
    train_accuracy: float


def _ordinal_encoding(task: Task) -> Optional[dict[str, int]]:
    if task is not Task.CHANGE:
        return None
    return {lab: int(change_from_string(lab)) for lab in task_labels(task)}


def run_train(config: PipelineConfig, corpus: Optional[Corpus] = None) -> TrainResult:
    """Full training run per the pipeline diagram; deterministic per master seed."""
    config.validate()
    task = config.task_enum
    if corpus is None:
        if not config.corpus:
            raise ConfigError("no corpus path configured")
        corpus = load_corpus(config.corpus, config.corpus_format, task)
    elif corpus.task is not task:
        raise ConfigError(f"corpus task {corpus.task.value!r} does not match config task {config.task!r}")

    train_c, test_c = _split(config, corpus)
    prep = config.preprocessor()
    train_tokens = [prep.tokens(n.text) for n in train_c.notes]
    train_labels = train_c.labels()

    vocab = None
    if config.features in ("linguistic", "combined"):
        bags = [extract_ngrams(toks, config.ngram_min, config.ngram_max) for toks in train_tokens]
        vocab = select_top_k(bags, train_labels, config.chi2_k)

    topic_model = None
    selected_k = None
    curve = None
    if config.features in ("topical", "combined"):
        if config.lda_on_full_corpus:
            lda_docs = [prep.tokens(n.text) for n in corpus.notes]
        else:
            lda_docs = train_tokens
        lda_seed = config.seed + SEED_OFFSETS["lda"]
        if config.lda_topics is not None:
            k = config.lda_topics
        else:
            k, curve_list = select_topic_count(
                lda_docs, config.k_range_values(), alpha=config.lda_alpha,
                beta=config.lda_beta, iterations=config.lda_iterations,
                seed=lda_seed, top_m=config.lda_top_m,
            )
            selected_k = k
            curve = tuple((int(kk), float(s)) for kk, s in curve_list)
        topic_model = train_lda(
            lda_docs, k, alpha=config.lda_alpha, beta=config.lda_beta,
            iterations=config.lda_iterations, seed=lda_seed,
        )

    train_vectors = [
        _note_features(toks, config, vocab, topic_model, i)
        for i, toks in enumerate(train_tokens)
    ]
    layout = train_vectors[0].layout
    X_train = np.vstack([fv.values for fv in train_vectors])
    y_train = np.array(train_labels)

    if config.smote:
        balanced = smote(
            LabeledMatrix.from_data(X_train, y_train),
            k=config.smote_k, seed=config.seed + SEED_OFFSETS["smote"],
        )
        X_fit, y_fit = balanced.X, balanced.y
    else:
        X_fit, y_fit = X_train, y_train

    model = _train_one_model(config, X_fit, y_fit, layout)

    train_preds = [models_mod.predict(model, fv)[0] for fv in train_vectors]
    train_accuracy = float(
        sum(p == t for p, t in zip(train_preds, train_labels)) / len(train_labels)
    )

    test_tokens = [prep.tokens(n.text) for n in test_c.notes]
    test_vectors = [
        _note_features(toks, config, vocab, topic_model, i)
        for i, toks in enumerate(test_tokens)
    ]
    test_preds = [models_mod.predict(model, fv)[0] for fv in test_vectors]

    metadata = {
        "model": config.model,
        "features": config.features,
        "smote": config.smote,
        "seed": config.seed,
        "task": config.task,
        "averaging": "weighted",
        "train_accuracy": train_accuracy,
        "selected_k": selected_k,
        "config": config.to_dict(),
    }
    report = build_report(
        test_c.labels(), test_preds, task_labels(task),
        ordinal_encoding=_ordinal_encoding(task), metadata=metadata,
    )
    artifact = ModelArtifact(
        config=config, vocab=vocab, topic_model=topic_model, model=model,
        selected_k=selected_k, coherence_curve=curve,
    )
    return TrainResult(artifact=artifact, report=report, train_accuracy=train_accuracy)


def _split(config: PipelineConfig, corpus: Corpus):
    from .corpus import stratified_split

    return stratified_split(corpus, config.test_fraction, config.seed + SEED_OFFSETS["split"])


@dataclass(frozen=True)
class Prediction:
    note_id: str
    label: str
    probabilities: tuple[float, ...]  # parallel to the artifact's label_map


def run_predict(artifact: ModelArtifact, notes: Sequence[ClinicalNote]) -> list[Prediction]:
    """Score notes with a stored artifact; the artifact is never mutated."""
    config = artifact.config
    prep = config.preprocessor()
    out = []
    for i, note in enumerate(notes):
        tokens = prep.tokens(note.text)
        fv = _note_features(tokens, config, artifact.vocab, artifact.topic_model, i)
        label, probs = models_mod.predict(artifact.model, fv)
        out.append(Prediction(note_id=note.id, label=label, probabilities=tuple(probs.tolist())))
    return out


def run_evaluate(artifact: ModelArtifact, corpus: Corpus,
                 metadata: Optional[Mapping[str, object]] = None) -> EvalReport:
    """Evaluate a stored artifact against a labeled corpus."""
    task = artifact.config.task_enum
    if corpus.task is not task:
        raise ConfigError(
            f"corpus task {corpus.task.value!r} does not match artifact task {task.value!r}"
        )
    predictions = run_predict(artifact, corpus.notes)
    meta = {
        "model": artifact.config.model,
        "features": artifact.config.features,
        "smote": artifact.config.smote,
        "seed": artifact.config.seed,
        "task": artifact.config.task,
        "averaging": "weighted",
        "config": artifact.config.to_dict(),
    }
    meta.update(metadata or {})
    return build_report(
        corpus.labels(),
        [p.label for p in predictions],
        task_labels(task),
        ordinal_encoding=_ordinal_encoding(task),
        metadata=meta,
    )


# ---------------------------------------------------------------------------
# reports
# ---------------------------------------------------------------------------

REPORT_KINDS = ("ngrams", "topics", "coherence")


def _report_header(config: PipelineConfig, kind: str) -> list[str]:
    snapshot = json.dumps(config.to_dict(), sort_keys=True)
    return [f"# painsift report kind={kind} seed={config.seed}", f"# config {snapshot}"]


def _tsv(rows: Sequence[Sequence[object]], header: Sequence[str],
         comments: Sequence[str]) -> str:
    lines = list(comments)
    lines.append("\t".join(header))
    for row in rows:
        lines.append("\t".join(str(v) for v in row))
    return "\n".join(lines) + "\n"


def _format_float(x: float) -> str:
    return f"{x:.6f}"


def report_ngrams(corpus: Corpus, config: PipelineConfig) -> tuple[str, list]:
    """Chi-squared / exclusivity table over the corpus n-grams."""
    prep = config.preprocessor()
    bags = [prep.ngrams(n.text) for n in corpus.notes]
    report = ngram_class_report(bags, corpus.labels())
    rows = []
    fig_rows = []
    limit = config.report_top if config.report_top > 0 else len(report.rows)
    for row in report.rows[:limit]:
        rows.append(
            (row.term, row.profile, _format_float(row.chi2), *row.doc_freq)
        )
        fig_rows.append((row.term, row.profile, row.chi2))
    header = ["term", "class_profile", "chi2"] + [f"doc_freq:{c}" for c in report.classes]
    return _tsv(rows, header, _report_header(config, "ngrams")), fig_rows


def report_topics(corpus: Corpus, config: PipelineConfig) -> tuple[str, list]:
    """Per-class topic tables: top words with class-exclusivity flags.

    Each class gets its own topic model (topic count fixed by lda_topics or
    chosen by coherence within lda_k_range); a word is flagged exclusive when
    it never occurs in any other class's notes.
    """
    if config.lda_topics is None and not config.k_range_values():
        raise ConfigError("topics report needs lda_topics or a non-empty lda_k_range")
    prep = config.preprocessor()
    labels = corpus.labels()
    classes = sorted(set(labels))
    tokens_by_class = {
        c: [prep.tokens(n.text) for n, lab in zip(corpus.notes, labels) if lab == c]
        for c in classes
    }
    words_by_class = {c: {t for doc in docs for t in doc} for c, docs in tokens_by_class.items()}
    lda_seed = config.seed + SEED_OFFSETS["lda"]
    rows = []
    panels = []
    for c in classes:
        docs = tokens_by_class[c]
        if config.lda_topics is not None:
            k = config.lda_topics
        else:
            k, _ = select_topic_count(
                docs, config.k_range_values(), alpha=config.lda_alpha,
                beta=config.lda_beta, iterations=config.lda_iterations,
                seed=lda_seed, top_m=config.lda_top_m,
            )
        model = train_lda(
            docs, k, alpha=config.lda_alpha, beta=config.lda_beta,
            iterations=config.lda_iterations, seed=lda_seed,
        )
        other_words = set()
        for other, words in words_by_class.items():
            if other != c:
                other_words |= words
        for topic in range(model.k):
            words = topic_top_words(model, topic, config.lda_top_m)
            panel_words = []
            for rank, word in enumerate(words, start=1):
                phi_w = float(model.phi[topic, model.vocab.index[word]])
                exclusive = word not in other_words
                rows.append(
                    (c, topic, rank, word, _format_float(phi_w),
                     "yes" if exclusive else "no")
                )
                panel_words.append((word, phi_w))
            panels.append((c, topic, panel_words))
    header = ["class", "topic", "rank", "word", "phi", "exclusive"]
    return _tsv(rows, header, _report_header(config, "topics")), panels


def report_coherence(corpus: Corpus, config: PipelineConfig) -> tuple[str, list, int]:
    """The coherence-vs-K curve over the whole corpus."""
    ks = config.k_range_values()
    if not ks:
        raise ConfigError("coherence report needs a non-empty lda_k_range")
    prep = config.preprocessor()
    docs = [prep.tokens(n.text) for n in corpus.notes]
    best_k, curve = select_topic_count(
        docs, ks, alpha=config.lda_alpha, beta=config.lda_beta,
        iterations=config.lda_iterations, seed=config.seed + SEED_OFFSETS["lda"],
        top_m=config.lda_top_m,
    )
    rows = [(k, _format_float(score)) for k, score in curve]
    comments = _report_header(config, "coherence") + [f"# selected_k {best_k}"]
    return _tsv(rows, ["k", "coherence"], comments), curve, best_k


def run_report(
    corpus: Corpus,
    kind: str,
    config: PipelineConfig,
    out_path: Optional[str] = None,
    figures: bool = True,
) -> str:
    """Emit a report TSV; when writing to a file, render its figure alongside."""
    from . import plots

    if kind == "ngrams":
        tsv, fig_rows = report_ngrams(corpus, config)
        fig_fn = lambda path: plots.save_ngram_figure(fig_rows, path)
    elif kind == "topics":
        tsv, panels = report_topics(corpus, config)
        fig_fn = lambda path: plots.save_topics_figure(panels, path)
    elif kind == "coherence":
        tsv, curve, best_k = report_coherence(corpus, config)
        fig_fn = lambda path: plots.save_coherence_figure(curve, path, selected_k=best_k)
    else:
        raise ConfigError(f"unknown report kind {kind!r} (expected one of {REPORT_KINDS})")

    if out_path:
        with open(out_path, "w", encoding="utf-8") as fh:
            fh.write(tsv)
        if figures:
            stem, _ = os.path.splitext(out_path)
            fig_fn(stem + ".png")
    return tsv
