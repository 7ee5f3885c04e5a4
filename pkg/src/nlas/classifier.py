"""Scheme classification baseline.

A linear model over TF-IDF features (lowercased word unigrams and bigrams)
predicts the scheme acronym from the argument text, which is the concatenated
component texts without role labels. Two evaluation designs:

- homogeneous: stratified 80/10/10 split per class (counts within one of the
  exact fractions via largest remainder);
- topic-wise: the 50 topics are shuffled once per protocol seed, then 5 folds
  rotate 10 held-out topics each (5 dev + 5 test), so no topic appears in both
  train and test of a fold and every topic is held out exactly once per run.

Metrics are computed here by hand: per-class precision = tp/(tp+fp), recall =
tp/(tp+fn), F1 = 2PR/(P+R) (0 where undefined); macro values are unweighted
means over the classes. The model artifact is a self-describing .npz with a
JSON header (format version, vocabulary, idf, classes, weights), reloadable
without unpickling arbitrary code.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np
from sklearn.feature_extraction.text import TfidfVectorizer
from sklearn.linear_model import LogisticRegression

from .errors import (
    EmptyCorpus,
    EmptySplit,
    EmptyTrain,
    NlasError,
    SingleClass,
    TooFewItemsPerClass,
)
from .records import NlasRecord
from .registry import Registry

SPLIT_TRAIN = "train"
SPLIT_DEV = "dev"
SPLIT_TEST = "test"
SPLITS = (SPLIT_TRAIN, SPLIT_DEV, SPLIT_TEST)
SPLIT_FRACTIONS = {SPLIT_TRAIN: 0.8, SPLIT_DEV: 0.1, SPLIT_TEST: 0.1}


@dataclass(frozen=True)
class DatasetItem:
    record_id: str
    text: str
    label: str
    topic_id: str
    language: str


@dataclass(frozen=True)
class Dataset:
    items: tuple[DatasetItem, ...]
    assignment: Mapping[str, str]  # record_id -> split name

    def split(self, name: str) -> list[DatasetItem]:
        if name not in SPLITS:
            raise NlasError(f"unknown split: {name}")
        return [it for it in self.items if self.assignment[it.record_id] == name]


def build_items(records: Sequence[NlasRecord],
                languages: Sequence[str] | None = None) -> list[DatasetItem]:
    chosen = [r for r in records if languages is None or r.key.language in languages]
    if not chosen:
        raise EmptyCorpus("no records selected for the dataset")
    return [
        DatasetItem(
            record_id=r.id,
            text=r.full_text,
            label=r.key.scheme,
            topic_id=r.key.topic_id,
            language=r.key.language,
        )
        for r in chosen
    ]


def _largest_remainder(n: int) -> dict[str, int]:
    """Split n into train/dev/test counts summing to n, each within 1 of exact."""
    exact = {s: n * f for s, f in SPLIT_FRACTIONS.items()}
    base = {s: int(exact[s]) for s in SPLITS}
    rest = n - sum(base.values())
    order = sorted(SPLITS, key=lambda s: exact[s] - base[s], reverse=True)
    for s in order[:rest]:
        base[s] += 1
    return base


def make_homogeneous_split(items: Sequence[DatasetItem], seed: int = 0) -> Dataset:
    by_class: dict[str, list[DatasetItem]] = {}
    for it in items:
        by_class.setdefault(it.label, []).append(it)
    if len(by_class) < 2:
        raise SingleClass("homogeneous split needs at least two classes")
    assignment: dict[str, str] = {}
    for label in sorted(by_class):
        group = sorted(by_class[label], key=lambda it: it.record_id)
        if len(group) < 3:
            raise TooFewItemsPerClass(f"class {label} has only {len(group)} items")
        rng = random.Random((seed, label).__repr__())
        rng.shuffle(group)
        counts = _largest_remainder(len(group))
        i = 0
        for split in SPLITS:
            for it in group[i:i + counts[split]]:
                assignment[it.record_id] = split
            i += counts[split]
    return Dataset(items=tuple(items), assignment=assignment)


def make_topicwise_split(items: Sequence[DatasetItem], registry: Registry,
                         fold: int, seed: int = 0) -> Dataset:
    """Fold k of 5: 40 train topics, 10 held out (5 dev + 5 test), rotating."""
    if not 1 <= fold <= 5:
        raise NlasError(f"fold must be 1..5, got {fold}")
    topics = [t.id for t in registry.topics]
    rng = random.Random(seed)
    rng.shuffle(topics)
    held = topics[(fold - 1) * 10: fold * 10]
    dev_topics = set(held[:5])
    test_topics = set(held[5:])
    assignment: dict[str, str] = {}
    for it in items:
        if it.topic_id in dev_topics:
            assignment[it.record_id] = SPLIT_DEV
        elif it.topic_id in test_topics:
            assignment[it.record_id] = SPLIT_TEST
        else:
            assignment[it.record_id] = SPLIT_TRAIN
    return Dataset(items=tuple(items), assignment=assignment)


def assert_no_topic_leakage(dataset: Dataset) -> None:
    seen: dict[str, set[str]] = {SPLIT_TRAIN: set(), SPLIT_DEV: set(), SPLIT_TEST: set()}
    for it in dataset.items:
        seen[dataset.assignment[it.record_id]].add(it.topic_id)
    leaked = (seen[SPLIT_TRAIN] & seen[SPLIT_TEST]) | (seen[SPLIT_TRAIN] & seen[SPLIT_DEV])
    if leaked:
        raise NlasError(f"topic leakage across splits: {sorted(leaked)[:5]}")


# --- model ---------------------------------------------------------------------

ARTIFACT_VERSION = 1


@dataclass
class SchemeClassifier:
    vectorizer: TfidfVectorizer
    model: LogisticRegression

    def predict(self, texts: Sequence[str]) -> list[str]:
        return list(self.model.predict(self.vectorizer.transform(texts)))


def train(dataset: Dataset, seed: int = 0, c: float = 1.0) -> SchemeClassifier:
    train_items = dataset.split(SPLIT_TRAIN)
    if not train_items:
        raise EmptyTrain("train split is empty")
    labels = sorted({it.label for it in train_items})
    if len(labels) < 2:
        raise SingleClass("training needs at least two classes")
    vectorizer = TfidfVectorizer(lowercase=True, ngram_range=(1, 2))
    x = vectorizer.fit_transform([it.text for it in train_items])
    y = [it.label for it in train_items]
    model = LogisticRegression(max_iter=2000, C=c, random_state=seed)
    model.fit(x, y)
    return SchemeClassifier(vectorizer=vectorizer, model=model)


@dataclass(frozen=True)
class ClassMetrics:
    precision: float
    recall: float
    f1: float
    support: int


@dataclass(frozen=True)
class EvalMetrics:
    split: str
    n: int
    accuracy: float
    per_class: Mapping[str, ClassMetrics]
    macro_precision: float
    macro_recall: float
    macro_f1: float

    def to_dict(self) -> dict:
        return {
            "split": self.split,
            "n": self.n,
            "accuracy": self.accuracy,
            "macro_precision": self.macro_precision,
            "macro_recall": self.macro_recall,
            "macro_f1": self.macro_f1,
            "per_class": {
                label: {"precision": m.precision, "recall": m.recall,
                        "f1": m.f1, "support": m.support}
                for label, m in sorted(self.per_class.items())
            },
        }


def evaluate(clf: SchemeClassifier, dataset: Dataset, split: str = SPLIT_TEST) -> EvalMetrics:
    items = dataset.split(split)
    if not items:
        raise EmptySplit(f"split {split!r} is empty")
    truth = [it.label for it in items]
    preds = clf.predict([it.text for it in items])
    classes = sorted(set(truth) | set(preds))
    per_class: dict[str, ClassMetrics] = {}
    for cls in classes:
        tp = sum(1 for t, p in zip(truth, preds) if t == cls and p == cls)
        fp = sum(1 for t, p in zip(truth, preds) if t != cls and p == cls)
        fn = sum(1 for t, p in zip(truth, preds) if t == cls and p != cls)
        precision = tp / (tp + fp) if tp + fp else 0.0
        recall = tp / (tp + fn) if tp + fn else 0.0
        f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
        per_class[cls] = ClassMetrics(precision=precision, recall=recall, f1=f1,
                                      support=truth.count(cls))
    macro_p = sum(m.precision for m in per_class.values()) / len(per_class)
    macro_r = sum(m.recall for m in per_class.values()) / len(per_class)
    macro_f = sum(m.f1 for m in per_class.values()) / len(per_class)
    accuracy = sum(1 for t, p in zip(truth, preds) if t == p) / len(items)
    return EvalMetrics(split=split, n=len(items), accuracy=accuracy, per_class=per_class,
                       macro_precision=macro_p, macro_recall=macro_r, macro_f1=macro_f)


# --- artifact ------------------------------------------------------------------------

def save_model(clf: SchemeClassifier, path: str | Path) -> None:
    vocab = clf.vectorizer.vocabulary_
    terms = [""] * len(vocab)
    for term, idx in vocab.items():
        terms[idx] = term
    header = {
        "format_version": ARTIFACT_VERSION,
        "feature_type": "tfidf",
        "ngram_range": list(clf.vectorizer.ngram_range),
        "lowercase": clf.vectorizer.lowercase,
        "classes": [str(c) for c in clf.model.classes_],
        "n_features": len(terms),
    }
    np.savez_compressed(
        Path(path),
        header=np.array(json.dumps(header)),
        terms=np.array(terms, dtype=object),
        idf=clf.vectorizer.idf_,
        coef=clf.model.coef_,
        intercept=clf.model.intercept_,
    )


def load_model(path: str | Path) -> SchemeClassifier:
    with np.load(Path(path), allow_pickle=True) as data:
        header = json.loads(str(data["header"]))
        if header.get("format_version") != ARTIFACT_VERSION:
            raise NlasError(f"unsupported model artifact version: {header.get('format_version')}")
        terms = [str(t) for t in data["terms"]]
        idf = np.asarray(data["idf"], dtype=float)
        coef = np.asarray(data["coef"], dtype=float)
        intercept = np.asarray(data["intercept"], dtype=float)
    vectorizer = TfidfVectorizer(
        lowercase=bool(header["lowercase"]),
        ngram_range=tuple(header["ngram_range"]),
        vocabulary={t: i for i, t in enumerate(terms)},
    )
    # The idf_ setter validates the fixed vocabulary and rebuilds the fitted state.
    vectorizer.idf_ = idf
    model = LogisticRegression()
    model.classes_ = np.array(header["classes"])
    model.coef_ = coef
    model.intercept_ = intercept
    return SchemeClassifier(vectorizer=vectorizer, model=model)


# --- protocols ------------------------------------------------------------------------

def run_homogeneous_protocol(records: Sequence[NlasRecord],
                             languages: Sequence[str] | None = None,
                             seeds: Sequence[int] = (0, 1, 2)) -> dict:
    """Train/evaluate once per seed on fresh stratified splits; report the mean."""
    items = build_items(records, languages)
    runs = []
    for seed in seeds:
        dataset = make_homogeneous_split(items, seed=seed)
        clf = train(dataset, seed=seed)
        runs.append(evaluate(clf, dataset, SPLIT_TEST))
    return {
        "protocol": "homogeneous",
        "seeds": list(seeds),
        "runs": [m.to_dict() for m in runs],
        "mean_macro_f1": sum(m.macro_f1 for m in runs) / len(runs),
        "mean_macro_precision": sum(m.macro_precision for m in runs) / len(runs),
        "mean_macro_recall": sum(m.macro_recall for m in runs) / len(runs),
        "mean_accuracy": sum(m.accuracy for m in runs) / len(runs),
    }


def run_topicwise_protocol(records: Sequence[NlasRecord], registry: Registry,
                           languages: Sequence[str] | None = None,
                           seed: int = 0) -> dict:
    """All five rotating folds; asserts zero topic leakage in every fold."""
    items = build_items(records, languages)
    runs = []
    for fold in range(1, 6):
        dataset = make_topicwise_split(items, registry, fold=fold, seed=seed)
        assert_no_topic_leakage(dataset)
        clf = train(dataset, seed=seed)
        runs.append(evaluate(clf, dataset, SPLIT_TEST))
    return {
        "protocol": "topicwise",
        "seed": seed,
        "folds": [m.to_dict() for m in runs],
        "per_fold_macro_f1": [m.macro_f1 for m in runs],
        "mean_macro_f1": sum(m.macro_f1 for m in runs) / len(runs),
        "mean_macro_precision": sum(m.macro_precision for m in runs) / len(runs),
        "mean_macro_recall": sum(m.macro_recall for m in runs) / len(runs),
        "mean_accuracy": sum(m.accuracy for m in runs) / len(runs),
    }
