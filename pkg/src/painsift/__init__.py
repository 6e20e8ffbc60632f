"""painsift: pain relevance and pain change classification for clinical notes.

A library plus CLI covering the full pipeline: text normalization, n-gram
chi-squared feature selection, LDA topical features with coherence-based
topic-count selection, SMOTE rebalancing, four from-scratch classifier
families, and graded ordinal evaluation.
"""

from .corpus import (
    ClinicalNote,
    Corpus,
    PainChange,
    PainRelevance,
    SyntheticSpec,
    Task,
    generate_synthetic_corpus,
    load_corpus,
    stratified_split,
)
from .errors import ConfigError, DataError, PainsiftError
from .pipeline import (
    ModelArtifact,
    PipelineConfig,
    load_artifact,
    run_evaluate,
    run_predict,
    run_report,
    run_train,
    save_artifact,
)

__version__ = "0.1.0"

__all__ = [
    "ClinicalNote",
    "Corpus",
    "PainChange",
    "PainRelevance",
    "SyntheticSpec",
    "Task",
    "generate_synthetic_corpus",
    "load_corpus",
    "stratified_split",
    "ConfigError",
    "DataError",
    "PainsiftError",
    "ModelArtifact",
    "PipelineConfig",
    "load_artifact",
    "run_evaluate",
    "run_predict",
    "run_report",
    "run_train",
    "save_artifact",
    "__version__",
]
