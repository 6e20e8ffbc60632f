"""Note collections: label encodings, loading, stratified splitting, synthesis.

Label strings are fixed and lowercase: "yes"/"no" for pain relevance,
"pain increase" / "pain uncertain" / "pain unchanged" / "pain decrease" for
pain change. The PainChange integer encoding (decrease=0 .. increase=3) is
the single source of truth for the ordinal graded metrics.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, replace
from enum import Enum, IntEnum
from typing import Mapping, Optional, Sequence

import numpy as np

from .errors import DataError

__all__ = [
    "PainRelevance",
    "PainChange",
    "Task",
    "ClinicalNote",
    "Corpus",
    "load_corpus",
    "load_notes",
    "save_notes",
    "stratified_split",
    "SyntheticSpec",
    "generate_synthetic_corpus",
]


class PainRelevance(Enum):
    IRRELEVANT = "no"
    RELEVANT = "yes"


class PainChange(IntEnum):
    """Ordinal severity encoding: increase > uncertain > unchanged > decrease."""

    DECREASE = 0
    UNCHANGED = 1
    UNCERTAIN = 2
    INCREASE = 3


class Task(Enum):
    RELEVANCE = "relevance"
    CHANGE = "change"


_RELEVANCE_STRINGS = {"yes": PainRelevance.RELEVANT, "no": PainRelevance.IRRELEVANT}
_CHANGE_STRINGS = {
    "pain decrease": PainChange.DECREASE,
    "pain unchanged": PainChange.UNCHANGED,
    "pain uncertain": PainChange.UNCERTAIN,
    "pain increase": PainChange.INCREASE,
}
_CHANGE_TO_STRING = {v: k for k, v in _CHANGE_STRINGS.items()}


def relevance_from_string(s: str) -> PainRelevance:
    try:
        return _RELEVANCE_STRINGS[s]
    except KeyError:
        raise DataError(f"unknown relevance label {s!r} (expected 'yes' or 'no')") from None


def relevance_to_string(v: PainRelevance) -> str:
    return v.value


def change_from_string(s: str) -> PainChange:
    try:
        return _CHANGE_STRINGS[s]
    except KeyError:
        valid = ", ".join(sorted(_CHANGE_STRINGS))
        raise DataError(f"unknown change label {s!r} (expected one of: {valid})") from None


def change_to_string(v: PainChange) -> str:
    return _CHANGE_TO_STRING[v]


def task_labels(task: Task) -> tuple[str, ...]:
    """All label strings of a task, in a fixed documented order."""
    if task is Task.RELEVANCE:
        return ("yes", "no")
    return tuple(_CHANGE_TO_STRING[PainChange(i)] for i in range(4))


@dataclass(frozen=True)
class ClinicalNote:
    """One clinical note with optional gold labels.

    A pain-change label is only defined for pain-relevant notes, so
    ``change`` present requires ``relevance`` == RELEVANT.
    """

    id: str
    patient_id: str
    text: str
    relevance: Optional[PainRelevance] = None
    change: Optional[PainChange] = None

    def __post_init__(self):
        if self.change is not None and self.relevance is not PainRelevance.RELEVANT:
            raise DataError(
                f"note {self.id!r}: a pain-change label implies relevance 'yes'"
            )

    def label(self, task: Task) -> str:
        """The note's label string for the given task."""
        if task is Task.RELEVANCE:
            if self.relevance is None:
                raise DataError(f"note {self.id!r} has no relevance label")
            return relevance_to_string(self.relevance)
        if self.change is None:
            raise DataError(f"note {self.id!r} has no pain-change label")
        return change_to_string(self.change)


@dataclass(frozen=True)
class Corpus:
    notes: tuple[ClinicalNote, ...]
    task: Task

    def __post_init__(self):
        if not self.notes:
            raise DataError("corpus is empty")
        seen = set()
        for note in self.notes:
            if note.id in seen:
                raise DataError(f"duplicate note id {note.id!r}")
            seen.add(note.id)
        for note in self.notes:
            note.label(self.task)  # raises if the task label is missing

    def labels(self) -> list[str]:
        return [n.label(self.task) for n in self.notes]

    def class_counts(self) -> dict[str, int]:
        counts: dict[str, int] = {}
        for lab in self.labels():
            counts[lab] = counts.get(lab, 0) + 1
        return counts

    def __len__(self) -> int:
        return len(self.notes)


def _note_from_record(rec: Mapping[str, object], where: str) -> ClinicalNote:
    for key in ("id", "patient_id", "text"):
        if rec.get(key) in (None, ""):
            raise DataError(f"{where}: missing required field {key!r}")
    rel_raw = rec.get("relevance")
    chg_raw = rec.get("change")
    relevance = relevance_from_string(str(rel_raw)) if rel_raw not in (None, "") else None
    change = change_from_string(str(chg_raw)) if chg_raw not in (None, "") else None
    return ClinicalNote(
        id=str(rec["id"]),
        patient_id=str(rec["patient_id"]),
        text=str(rec["text"]),
        relevance=relevance,
        change=change,
    )


def _read_records(path: str, fmt: str) -> list[ClinicalNote]:
    notes = []
    if fmt == "jsonl":
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                if not line.strip():
                    continue
                try:
                    rec = json.loads(line)
                except json.JSONDecodeError as exc:
                    raise DataError(f"{path}:{lineno}: invalid JSON ({exc.msg})") from None
                if not isinstance(rec, dict):
                    raise DataError(f"{path}:{lineno}: expected a JSON object")
                notes.append(_note_from_record(rec, f"{path}:{lineno}"))
    elif fmt == "csv":
        with open(path, encoding="utf-8", newline="") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames is None or "id" not in reader.fieldnames:
                raise DataError(f"{path}: CSV header row with an 'id' column is required")
            for rec in reader:
                notes.append(_note_from_record(rec, f"{path}:{reader.line_num}"))
    else:
        raise DataError(f"unknown corpus format {fmt!r} (expected 'jsonl' or 'csv')")
    if not notes:
        raise DataError(f"{path}: no notes found")
    return notes


def load_notes(path: str, fmt: str = "jsonl") -> list[ClinicalNote]:
    """Read notes with whatever labels they carry; used for prediction input."""
    return _read_records(path, fmt)


def load_corpus(path: str, fmt: str, task: Task) -> Corpus:
    """Read a labeled corpus and validate it against the task's label contract."""
    return Corpus(notes=tuple(_read_records(path, fmt)), task=task)


def save_notes(notes: Sequence[ClinicalNote], path: str) -> None:
    """Write notes as JSONL with the documented keys."""
    with open(path, "w", encoding="utf-8") as fh:
        for n in notes:
            # identity checks: PainChange.DECREASE encodes as 0 and is falsy
            rec = {
                "id": n.id,
                "patient_id": n.patient_id,
                "text": n.text,
                "relevance": relevance_to_string(n.relevance) if n.relevance is not None else None,
                "change": change_to_string(n.change) if n.change is not None else None,
            }
            fh.write(json.dumps(rec) + "\n")


def stratified_split(
    corpus: Corpus, test_fraction: float, seed: int
) -> tuple[Corpus, Corpus]:
    """Split into train/test keeping per-class proportions.

    Per-class test count is round-half-up(count * test_fraction), then
    clamped so neither split is empty for any class. Deterministic per seed.
    """
    if not 0.0 < test_fraction < 1.0:
        raise DataError(f"test_fraction must be in (0,1), got {test_fraction}")
    labels = corpus.labels()
    by_class: dict[str, list[int]] = {}
    for i, lab in enumerate(labels):
        by_class.setdefault(lab, []).append(i)
    for lab, idxs in sorted(by_class.items()):
        if len(idxs) < 2:
            raise DataError(f"class {lab!r} has {len(idxs)} instance(s); need at least 2 to split")

    rng = np.random.default_rng(seed)
    test_idx: set[int] = set()
    for lab in sorted(by_class):
        idxs = by_class[lab]
        n = len(idxs)
        n_test = math.floor(n * test_fraction + 0.5)
        n_test = min(max(n_test, 1), n - 1)
        chosen = rng.permutation(n)[:n_test]
        test_idx.update(idxs[j] for j in chosen)

    train_notes = tuple(n for i, n in enumerate(corpus.notes) if i not in test_idx)
    test_notes = tuple(n for i, n in enumerate(corpus.notes) if i in test_idx)
    return (
        Corpus(notes=train_notes, task=corpus.task),
        Corpus(notes=test_notes, task=corpus.task),
    )


@dataclass(frozen=True)
class SyntheticSpec:
    """Recipe for a planted synthetic corpus.

    ``class_pools`` maps each label string of the task to a disjoint keyword
    pool; notes get their tokens from their class pool, except that each
    token is independently replaced by a noise-pool token with probability
    ``noise_rate``.
    """

    task: Task
    counts: Mapping[str, int]
    class_pools: Mapping[str, Sequence[str]]
    noise_pool: Sequence[str]
    noise_rate: float
    note_length: tuple[int, int] = (8, 14)
    patients: int = 10

    def __post_init__(self):
        valid = set(task_labels(self.task))
        if set(self.counts) != set(self.class_pools):
            raise DataError("counts and class_pools must cover the same labels")
        unknown = set(self.counts) - valid
        if unknown:
            raise DataError(f"labels {sorted(unknown)} are not valid for task {self.task.value}")
        if not self.noise_pool:
            raise DataError("noise pool is empty")
        for lab, pool in self.class_pools.items():
            if not pool:
                raise DataError(f"keyword pool for class {lab!r} is empty")
        pools = sorted(self.class_pools.items())
        for i, (lab_a, pool_a) in enumerate(pools):
            for lab_b, pool_b in pools[i + 1 :]:
                overlap = set(pool_a) & set(pool_b)
                if overlap:
                    raise DataError(
                        f"class pools {lab_a!r} and {lab_b!r} overlap: {sorted(overlap)}"
                    )
        if not 0.0 <= self.noise_rate <= 1.0:
            raise DataError(f"noise_rate must be in [0,1], got {self.noise_rate}")
        lo, hi = self.note_length
        if not 1 <= lo <= hi:
            raise DataError(f"invalid note_length range {self.note_length}")
        if self.patients < 1:
            raise DataError("patients must be >= 1")


def generate_synthetic_corpus(spec: SyntheticSpec, seed: int) -> Corpus:
    """Build a labeled corpus from the planted recipe; deterministic per seed."""
    rng = np.random.default_rng(seed)
    lo, hi = spec.note_length
    notes = []
    serial = 0
    for lab in sorted(spec.counts):
        pool = list(spec.class_pools[lab])
        noise = list(spec.noise_pool)
        for _ in range(spec.counts[lab]):
            length = int(rng.integers(lo, hi + 1))
            tokens = []
            for _ in range(length):
                if spec.noise_rate > 0 and rng.random() < spec.noise_rate:
                    tokens.append(noise[int(rng.integers(len(noise)))])
                else:
                    tokens.append(pool[int(rng.integers(len(pool)))])
            if spec.task is Task.RELEVANCE:
                relevance = relevance_from_string(lab)
                change = None
            else:
                relevance = PainRelevance.RELEVANT
                change = change_from_string(lab)
            notes.append(
                ClinicalNote(
                    id=f"syn-{serial:05d}",
                    patient_id=f"p{serial % spec.patients:03d}",
                    text=" ".join(tokens),
                    relevance=relevance,
                    change=change,
                )
            )
            serial += 1
    return Corpus(notes=tuple(notes), task=spec.task)


def with_texts(corpus: Corpus, texts: Mapping[str, str]) -> Corpus:
    """Copy of the corpus with the given note texts replaced (by note id)."""
    notes = tuple(
        replace(n, text=texts[n.id]) if n.id in texts else n for n in corpus.notes
    )
    return Corpus(notes=notes, task=corpus.task)


# Built-in clinically flavored keyword pools so the CLI can demo the whole
# pipeline without real data. Class pools are pairwise disjoint; the noise
# pool holds vocabulary shared across classes ("pain" is deliberately noise
# for the change task, where it appears in every class).
DEMO_POOLS = {
    Task.RELEVANCE: {
        "classes": {
            "yes": ["pain", "pca", "toradol", "morphine", "chest", "crisis",
                    "dose", "medication", "severe", "8/10"],
            "no": ["home", "discharge", "wheelchair", "parent", "school",
                   "transport", "paperwork", "routine", "bedside", "visit"],
        },
        "noise": ["patient", "nurse", "note", "day", "plan", "status",
                  "today", "room", "staff", "update"],
    },
    Task.CHANGE: {
        "classes": {
            "pain increase": ["increase", "worsening", "escalate", "spike",
                              "breakthrough", "uncontrolled", "higher", "intensify"],
            "pain uncertain": ["uncertain", "unclear", "fluctuate", "variable",
                               "ambiguous", "inconsistent", "wavering", "indeterminate"],
            "pain unchanged": ["unchanged", "stable", "persist", "constant",
                               "steady", "plateau", "ongoing", "baseline"],
            "pain decrease": ["decrease", "improve", "relief", "subside",
                              "diminish", "resolve", "comfortable", "milder"],
        },
        "noise": ["pain", "patient", "medication", "nurse", "note", "plan",
                  "dose", "assess", "status", "day"],
    },
}


def demo_synthetic_spec(
    task: Task,
    per_class: int = 50,
    noise_rate: float = 0.3,
    note_length: tuple[int, int] = (8, 14),
    patients: int = 10,
) -> SyntheticSpec:
    """SyntheticSpec built from the bundled demo pools."""
    pools = DEMO_POOLS[task]
    return SyntheticSpec(
        task=task,
        counts={lab: per_class for lab in pools["classes"]},
        class_pools=pools["classes"],
        noise_pool=pools["noise"],
        noise_rate=noise_rate,
        note_length=note_length,
        patients=patients,
    )
