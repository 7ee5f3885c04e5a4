"""Human annotation: task assignment, durable label storage, agreement stats.

Stance fidelity and content quality are judged by people, not machines, so this
module only moves labels around and measures agreement. Tasks are assigned
deterministically: a seeded sample of records (the overlap set) goes to every
annotator for inter-annotator agreement; the rest are split round-robin.

The store is a write-ahead JSONL log plus a tasks snapshot. A label is acked
only after the log line is flushed and fsynced, and reopening the store replays
the log, so a crashed server never loses acked labels.
"""

from __future__ import annotations

import csv
import json
import os
import random
import threading
from dataclasses import dataclass, field
from itertools import combinations
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .errors import (
    AlreadyLabeled,
    EmptyOverlap,
    IncompleteOverlap,
    MismatchedRecords,
    MissingReason,
    NlasError,
    NoAnnotators,
    UnknownTask,
    WrongAnnotator,
)
from .records import NlasRecord

VERDICT_VALID = "valid"
VERDICT_NON_VALID = "non_valid"
VERDICTS = (VERDICT_VALID, VERDICT_NON_VALID)
REASONS = ("structure", "topic", "stance")


@dataclass(frozen=True)
class AnnotationTask:
    task_id: str
    record_id: str
    language: str
    assigned_to: str
    overlap_group: str | None = None


@dataclass(frozen=True)
class AnnotationLabel:
    record_id: str
    annotator: str
    verdict: str
    reason: str | None = None

    def __post_init__(self) -> None:
        if self.verdict not in VERDICTS:
            raise NlasError(f"unknown verdict: {self.verdict!r}")
        if self.verdict == VERDICT_NON_VALID and not self.reason:
            raise MissingReason(f"non-valid verdict for {self.record_id} needs a reason")
        if self.reason is not None and self.reason not in REASONS:
            raise NlasError(f"unknown reason: {self.reason!r}")


def create_tasks(
    records: Sequence[NlasRecord],
    annotators: Sequence[str],
    overlap_fraction: float = 0.1,
    seed: int = 0,
) -> list[AnnotationTask]:
    """Deterministic assignment: overlap subset to everyone, the rest round-robin."""
    if not annotators:
        raise NoAnnotators("at least one annotator is required")
    if not 0.0 <= overlap_fraction <= 1.0:
        raise ValueError(f"overlap_fraction out of range: {overlap_fraction}")
    names = sorted(set(annotators))
    if len(names) != len(annotators):
        raise NlasError("duplicate annotator names")

    ordered = sorted(records, key=lambda r: r.id)
    rng = random.Random(seed)
    k = round(overlap_fraction * len(ordered))
    overlap_ids = set(rng.sample([r.id for r in ordered], k)) if k else set()

    tasks: list[AnnotationTask] = []
    seq = 0
    single_i = 0
    for rec in ordered:
        if rec.id in overlap_ids:
            for name in names:
                seq += 1
                tasks.append(AnnotationTask(
                    task_id=f"t{seq:06d}", record_id=rec.id,
                    language=rec.key.language, assigned_to=name,
                    overlap_group=f"iaa-{rec.key.language}",
                ))
        else:
            name = names[single_i % len(names)]
            single_i += 1
            seq += 1
            tasks.append(AnnotationTask(
                task_id=f"t{seq:06d}", record_id=rec.id,
                language=rec.key.language, assigned_to=name,
            ))
    return tasks


class LabelStore:
    """Task snapshot + append-only label log under one directory."""

    def __init__(self, root: str | Path):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self._tasks_path = self.root / "tasks.json"
        self._log_path = self.root / "labels.jsonl"
        self._lock = threading.Lock()
        self._tasks: dict[str, AnnotationTask] = {}
        self._labels: dict[tuple[str, str], AnnotationLabel] = {}
        self._load()

    # -- persistence -------------------------------------------------------------

    def _load(self) -> None:
        if self._tasks_path.exists():
            data = json.loads(self._tasks_path.read_text(encoding="utf-8"))
            for t in data:
                task = AnnotationTask(**t)
                self._tasks[task.task_id] = task
        if self._log_path.exists():
            with open(self._log_path, encoding="utf-8") as fh:
                for line in fh:
                    line = line.strip()
                    if not line:
                        continue
                    obj = json.loads(line)
                    label = AnnotationLabel(
                        record_id=obj["record_id"], annotator=obj["annotator"],
                        verdict=obj["verdict"], reason=obj.get("reason"),
                    )
                    self._labels[(label.record_id, label.annotator)] = label

    def set_tasks(self, tasks: Sequence[AnnotationTask]) -> None:
        with self._lock:
            self._tasks = {t.task_id: t for t in tasks}
            payload = [t.__dict__ for t in tasks]
            self._tasks_path.write_text(
                json.dumps(payload, ensure_ascii=False, indent=0), encoding="utf-8"
            )

    def _append(self, label: AnnotationLabel) -> None:
        line = json.dumps({
            "record_id": label.record_id, "annotator": label.annotator,
            "verdict": label.verdict, "reason": label.reason,
        }, ensure_ascii=False)
        with open(self._log_path, "a", encoding="utf-8") as fh:
            fh.write(line + "\n")
            fh.flush()
            os.fsync(fh.fileno())

    # -- access ------------------------------------------------------------------

    @property
    def tasks(self) -> list[AnnotationTask]:
        return sorted(self._tasks.values(), key=lambda t: t.task_id)

    @property
    def labels(self) -> list[AnnotationLabel]:
        return [self._labels[k] for k in sorted(self._labels)]

    def task(self, task_id: str) -> AnnotationTask:
        try:
            return self._tasks[task_id]
        except KeyError:
            raise UnknownTask(f"unknown task: {task_id}") from None

    def label_for(self, record_id: str, annotator: str) -> AnnotationLabel | None:
        return self._labels.get((record_id, annotator))

    def labels_by(self, annotator: str) -> list[AnnotationLabel]:
        return [l for l in self.labels if l.annotator == annotator]

    def next_task(self, annotator: str) -> AnnotationTask | None:
        for t in self.tasks:
            if t.assigned_to == annotator and (t.record_id, annotator) not in self._labels:
                return t
        return None

    def annotators(self) -> list[str]:
        return sorted({t.assigned_to for t in self._tasks.values()})

    # -- mutation ------------------------------------------------------------------

    def submit(self, task_id: str, annotator: str, verdict: str, reason: str | None = None) -> AnnotationLabel:
        """Validate, durably append, then ack. Double submissions raise AlreadyLabeled."""
        with self._lock:
            task = self.task(task_id)
            if task.assigned_to != annotator:
                raise WrongAnnotator(
                    f"task {task_id} belongs to {task.assigned_to}, not {annotator}"
                )
            if (task.record_id, annotator) in self._labels:
                raise AlreadyLabeled(f"{annotator} already labeled record {task.record_id}")
            label = AnnotationLabel(record_id=task.record_id, annotator=annotator,
                                    verdict=verdict, reason=reason)
            self._append(label)
            self._labels[(label.record_id, annotator)] = label
            return label

    def import_labels(self, labels: Iterable[AnnotationLabel], replace: bool = False) -> int:
        """Bulk import (CSV path); bypasses task assignment on purpose."""
        n = 0
        with self._lock:
            for label in labels:
                key = (label.record_id, label.annotator)
                if key in self._labels and not replace:
                    raise AlreadyLabeled(
                        f"{label.annotator} already labeled record {label.record_id}"
                    )
                self._append(label)
                self._labels[key] = label
                n += 1
        return n

    # -- progress ------------------------------------------------------------------

    def progress(self) -> dict:
        per: dict[str, dict[str, int]] = {}
        for t in self._tasks.values():
            d = per.setdefault(t.assigned_to, {"assigned": 0, "labeled": 0})
            d["assigned"] += 1
            if (t.record_id, t.assigned_to) in self._labels:
                d["labeled"] += 1
        total = {"assigned": sum(d["assigned"] for d in per.values()),
                 "labeled": sum(d["labeled"] for d in per.values())}
        return {"annotators": per, "total": total}


# --- CSV import -----------------------------------------------------------------

CSV_COLUMNS = ("record_id", "annotator", "verdict", "reason")


def read_labels_csv(path: str | Path) -> list[AnnotationLabel]:
    """Read labels from CSV with columns record_id, annotator, verdict, reason."""
    labels: list[AnnotationLabel] = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        missing = [c for c in CSV_COLUMNS[:3] if c not in (reader.fieldnames or [])]
        if missing:
            raise NlasError(f"label CSV missing columns: {', '.join(missing)}")
        for i, row in enumerate(reader, start=2):
            verdict = row["verdict"].strip().lower()
            reason = (row.get("reason") or "").strip().lower() or None
            try:
                labels.append(AnnotationLabel(
                    record_id=row["record_id"].strip(),
                    annotator=row["annotator"].strip(),
                    verdict=verdict, reason=reason,
                ))
            except NlasError as exc:
                raise NlasError(f"label CSV line {i}: {exc}") from None
    return labels


def write_labels_csv(labels: Sequence[AnnotationLabel], path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_COLUMNS)
        for l in labels:
            writer.writerow([l.record_id, l.annotator, l.verdict, l.reason or ""])


# --- agreement -----------------------------------------------------------------

@dataclass(frozen=True)
class KappaResult:
    annotator_a: str
    annotator_b: str
    n: int
    observed_agreement: float
    expected_agreement: float
    kappa: float


def cohens_kappa(labels_a: Sequence[AnnotationLabel], labels_b: Sequence[AnnotationLabel]) -> KappaResult:
    """Cohen's kappa over two label sets covering the same record ids.

    kappa = (p_o - p_e) / (1 - p_e), where p_o is the observed agreement rate
    and p_e the chance agreement from the per-annotator marginal verdict
    frequencies. Degenerate case: if both annotators use a single identical
    class, p_o = p_e = 1 and kappa is defined as 1.
    """
    by_a = {l.record_id: l for l in labels_a}
    by_b = {l.record_id: l for l in labels_b}
    if len(by_a) != len(labels_a) or len(by_b) != len(labels_b):
        raise NlasError("duplicate record ids within one annotator's labels")
    if set(by_a) != set(by_b):
        diff = sorted(set(by_a) ^ set(by_b))
        raise MismatchedRecords(f"label sets cover different records, e.g. {diff[:5]}")
    if not by_a:
        raise EmptyOverlap("no records in common to compare")

    ids = sorted(by_a)
    n = len(ids)
    agree = sum(1 for rid in ids if by_a[rid].verdict == by_b[rid].verdict)
    p_o = agree / n

    classes = sorted({l.verdict for l in labels_a} | {l.verdict for l in labels_b})
    p_e = 0.0
    for c in classes:
        fa = sum(1 for rid in ids if by_a[rid].verdict == c) / n
        fb = sum(1 for rid in ids if by_b[rid].verdict == c) / n
        p_e += fa * fb

    if p_e >= 1.0:
        kappa = 1.0 if p_o >= 1.0 else 0.0
    else:
        kappa = (p_o - p_e) / (1.0 - p_e)
    a_name = labels_a[0].annotator if labels_a else ""
    b_name = labels_b[0].annotator if labels_b else ""
    return KappaResult(annotator_a=a_name, annotator_b=b_name, n=n,
                       observed_agreement=p_o, expected_agreement=p_e, kappa=kappa)


def fleiss_kappa(label_sets: Mapping[str, Sequence[AnnotationLabel]]) -> float:
    """Fleiss' kappa over n annotators; computed alongside the pairwise mean."""
    names = sorted(label_sets)
    if len(names) < 2:
        raise NlasError("fleiss_kappa needs at least two annotators")
    by = {name: {l.record_id: l.verdict for l in label_sets[name]} for name in names}
    ids = sorted(set.intersection(*(set(v) for v in by.values())))
    if not ids:
        raise EmptyOverlap("no records labeled by every annotator")
    classes = sorted({v for m in by.values() for v in m.values()})
    n_raters = len(names)
    p_i = []
    totals = {c: 0 for c in classes}
    for rid in ids:
        counts = {c: 0 for c in classes}
        for name in names:
            counts[by[name][rid]] += 1
            totals[by[name][rid]] += 1
        s = sum(c * (c - 1) for c in counts.values())
        p_i.append(s / (n_raters * (n_raters - 1)))
    p_bar = sum(p_i) / len(ids)
    total = len(ids) * n_raters
    p_e = sum((totals[c] / total) ** 2 for c in classes)
    if p_e >= 1.0:
        return 1.0 if p_bar >= 1.0 else 0.0
    return (p_bar - p_e) / (1.0 - p_e)


@dataclass(frozen=True)
class AgreementReport:
    group: str
    n_records: int
    pairs: tuple[KappaResult, ...]
    mean_kappa: float
    fleiss: float


def agreement_report(store: LabelStore, group: str | None = None) -> AgreementReport:
    """Pairwise kappas over an overlap group; every pair must be fully labeled."""
    groups = sorted({t.overlap_group for t in store.tasks if t.overlap_group})
    if group is None:
        if not groups:
            raise EmptyOverlap("store has no overlap tasks")
        if len(groups) > 1:
            raise NlasError(f"specify an overlap group, found: {groups}")
        group = groups[0]
    tasks = [t for t in store.tasks if t.overlap_group == group]
    if not tasks:
        raise EmptyOverlap(f"no tasks in overlap group {group!r}")
    record_ids = sorted({t.record_id for t in tasks})
    annotators = sorted({t.assigned_to for t in tasks})

    missing = [(t.record_id, t.assigned_to) for t in tasks
               if store.label_for(t.record_id, t.assigned_to) is None]
    if missing:
        raise IncompleteOverlap(missing)

    label_sets = {
        name: [store.label_for(rid, name) for rid in record_ids]
        for name in annotators
    }
    pairs = tuple(
        cohens_kappa(label_sets[a], label_sets[b])
        for a, b in combinations(annotators, 2)
    )
    mean = sum(p.kappa for p in pairs) / len(pairs) if pairs else 1.0
    fl = fleiss_kappa(label_sets) if len(annotators) >= 2 else 1.0
    return AgreementReport(group=group, n_records=len(record_ids), pairs=pairs,
                           mean_kappa=mean, fleiss=fl)


def resolve_verdicts(store: LabelStore, primary: str | None = None) -> dict[str, str]:
    """Per-record verdicts: single-assignment labels win; overlap records use the
    designated primary annotator (defaults to the alphabetically first). Labels
    imported without a task assignment resolve the same way: primary first,
    otherwise the alphabetically first annotator who labeled the record."""
    annotators = store.annotators() or sorted({l.annotator for l in store.labels})
    if primary is None and annotators:
        primary = annotators[0]
    verdicts: dict[str, str] = {}
    tasked_records = set()
    for t in store.tasks:
        tasked_records.add(t.record_id)
        label = store.label_for(t.record_id, t.assigned_to)
        if label is None:
            continue
        if t.overlap_group is None:
            verdicts[t.record_id] = label.verdict
        elif t.assigned_to == primary:
            verdicts[t.record_id] = label.verdict
    for label in sorted(store.labels, key=lambda l: (l.record_id, l.annotator)):
        if label.record_id in tasked_records:
            continue
        if label.annotator == primary or label.record_id not in verdicts:
            verdicts[label.record_id] = label.verdict
    return verdicts
