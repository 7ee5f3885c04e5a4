"""Corpus analytics: inference counts, word counts, stance balance, conflicts.

Definitions:
- inferences(record) = number of premise components (the argument's conclusion
  is supported by that many inference steps in the template).
- conflicts are counted between opposite-stance arguments on the same topic,
  restricted to stance-bearing schemes. Two strategies exist because published
  totals do not spell the pairing out:
    * all_pairs:    every in-favour argument conflicts with every against
                    argument on the topic (count = F_t * A_t summed over topics).
    * same_scheme:  only arguments instantiating the same scheme conflict.
  A brute-force pair enumerator backs both as a test oracle, and
  compare_conflict_definitions reports every strategy side by side.

Standard deviation: population (denominator n) is the default; the sample
flavor (n - 1) is computed alongside.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from decimal import Decimal, ROUND_HALF_UP
from typing import Iterable, Mapping, Sequence

from .errors import NlasError
from .records import NlasRecord
from .registry import Registry, STANCE_AGAINST, STANCE_IN_FAVOUR

CONFLICT_STRATEGIES = ("all_pairs", "same_scheme")


def inferences(record: NlasRecord, registry: Registry) -> int:
    return registry.scheme(record.key.scheme).premise_count


def fmt1(x: float) -> str:
    """One-decimal display figure, rounding halves up (232.45 -> '232.5')."""
    return str(Decimal(repr(x)).quantize(Decimal("0.1"), rounding=ROUND_HALF_UP))


def _mean(xs: Sequence[float]) -> float:
    return sum(xs) / len(xs) if xs else 0.0


def _sd(xs: Sequence[float], sample: bool = False) -> float:
    n = len(xs)
    if n == 0 or (sample and n < 2):
        return 0.0
    m = _mean(xs)
    denom = (n - 1) if sample else n
    return math.sqrt(sum((x - m) ** 2 for x in xs) / denom)


@dataclass(frozen=True)
class GroupStats:
    """Per-scheme or per-topic quantity vectors with total / mean / sd rows."""
    labels: tuple[str, ...]
    values: Mapping[str, tuple[float, ...]]

    def total(self, column: str) -> float:
        return sum(self.values[column])

    def mean(self, column: str) -> float:
        return _mean(self.values[column])

    def sd(self, column: str, sample: bool = False) -> float:
        return _sd(self.values[column], sample=sample)


@dataclass(frozen=True)
class CorpusStats:
    language: str
    n_records: int
    total_inferences: int
    total_words: int
    stance_counts: Mapping[str, int]
    conflicts: int
    conflict_strategy: str
    per_scheme: GroupStats
    per_topic: GroupStats

    @property
    def stance_share_in_favour(self) -> float:
        total = sum(self.stance_counts.values())
        return self.stance_counts.get(STANCE_IN_FAVOUR, 0) / total if total else 0.0


def _select(records: Iterable[NlasRecord], language: str | None) -> list[NlasRecord]:
    out = [r for r in records if language is None or r.key.language == language]
    return out


def stance_balance(records: Sequence[NlasRecord], language: str | None = None) -> dict[str, int]:
    counts = {STANCE_IN_FAVOUR: 0, STANCE_AGAINST: 0}
    for r in _select(records, language):
        counts[r.key.stance] += 1
    return counts


def count_inferences(records: Sequence[NlasRecord], registry: Registry,
                     language: str | None = None) -> int:
    return sum(inferences(r, registry) for r in _select(records, language))


def _stance_grid(records: Sequence[NlasRecord], registry: Registry, language: str | None):
    """Counts of stance-bearing records per (topic, scheme, stance)."""
    grid: dict[tuple[str, str, str], int] = {}
    for r in _select(records, language):
        if not registry.scheme(r.key.scheme).stance_bearing:
            continue
        k = (r.key.topic_id, r.key.scheme, r.key.stance)
        grid[k] = grid.get(k, 0) + 1
    return grid


def count_conflicts(records: Sequence[NlasRecord], registry: Registry,
                    language: str | None = None, strategy: str = "all_pairs") -> int:
    """Closed-form conflict count under the chosen pairing strategy."""
    if strategy not in CONFLICT_STRATEGIES:
        raise NlasError(f"unknown conflict strategy: {strategy}")
    grid = _stance_grid(records, registry, language)
    topics = {t for t, _, _ in grid}
    total = 0
    if strategy == "all_pairs":
        for t in topics:
            f = sum(n for (tt, _, st), n in grid.items() if tt == t and st == STANCE_IN_FAVOUR)
            a = sum(n for (tt, _, st), n in grid.items() if tt == t and st == STANCE_AGAINST)
            total += f * a
    else:
        for (t, s, st), n in grid.items():
            if st == STANCE_IN_FAVOUR:
                total += n * grid.get((t, s, STANCE_AGAINST), 0)
    return total


def enumerate_conflict_pairs(records: Sequence[NlasRecord], registry: Registry,
                             language: str | None = None,
                             strategy: str = "all_pairs") -> list[tuple[str, str]]:
    """Brute-force pair enumeration; quadratic, kept as the oracle for the
    closed-form count."""
    if strategy not in CONFLICT_STRATEGIES:
        raise NlasError(f"unknown conflict strategy: {strategy}")
    pool = [r for r in _select(records, language)
            if registry.scheme(r.key.scheme).stance_bearing]
    pairs = []
    for i, a in enumerate(pool):
        for b in pool[i + 1:]:
            if a.key.topic_id != b.key.topic_id:
                continue
            if a.key.stance == b.key.stance:
                continue
            if strategy == "same_scheme" and a.key.scheme != b.key.scheme:
                continue
            pairs.append((a.id, b.id) if a.key.stance == STANCE_IN_FAVOUR else (b.id, a.id))
    return pairs


def compare_conflict_definitions(records: Sequence[NlasRecord], registry: Registry,
                                 language: str | None = None) -> dict[str, int]:
    return {s: count_conflicts(records, registry, language, s) for s in CONFLICT_STRATEGIES}


def compute_stats(records: Sequence[NlasRecord], registry: Registry,
                  language: str | None = None,
                  conflict_strategy: str = "all_pairs") -> CorpusStats:
    chosen = _select(records, language)
    if not chosen:
        raise NlasError(f"no records for language {language!r}")

    scheme_labels = tuple(s.acronym for s in registry.schemes)
    topic_labels = tuple(t.id for t in registry.topics)

    def zeros(labels):
        return {l: [0.0, 0.0, 0.0, 0.0] for l in labels}  # inferences, words, favour, against

    by_scheme = zeros(scheme_labels)
    by_topic = zeros(topic_labels)
    for r in chosen:
        inf = inferences(r, registry)
        stance_col = 2 if r.key.stance == STANCE_IN_FAVOUR else 3
        for bucket, label in ((by_scheme, r.key.scheme), (by_topic, r.key.topic_id)):
            row = bucket[label]
            row[0] += inf
            row[1] += r.words
            row[stance_col] += 1

    columns = ("inferences", "words", "in_favour", "against")

    def group(bucket, labels):
        return GroupStats(
            labels=labels,
            values={col: tuple(bucket[l][i] for l in labels) for i, col in enumerate(columns)},
        )

    per_topic = group(by_topic, topic_labels)
    conflicts_total = count_conflicts(chosen, registry, None, conflict_strategy)
    topic_conflicts = _per_topic_conflicts(chosen, registry, conflict_strategy, topic_labels)
    per_topic = GroupStats(
        labels=per_topic.labels,
        values={**per_topic.values, "conflicts": topic_conflicts},
    )

    return CorpusStats(
        language=language or "all",
        n_records=len(chosen),
        total_inferences=count_inferences(chosen, registry),
        total_words=sum(r.words for r in chosen),
        stance_counts=stance_balance(chosen),
        conflicts=conflicts_total,
        conflict_strategy=conflict_strategy,
        per_scheme=group(by_scheme, scheme_labels),
        per_topic=per_topic,
    )


def _per_topic_conflicts(records, registry, strategy, topic_labels):
    grid = _stance_grid(records, registry, None)
    out = []
    for t in topic_labels:
        if strategy == "all_pairs":
            f = sum(n for (tt, _, st), n in grid.items() if tt == t and st == STANCE_IN_FAVOUR)
            a = sum(n for (tt, _, st), n in grid.items() if tt == t and st == STANCE_AGAINST)
            out.append(float(f * a))
        else:
            out.append(float(sum(
                n * grid.get((t, s, STANCE_AGAINST), 0)
                for (tt, s, st), n in grid.items()
                if tt == t and st == STANCE_IN_FAVOUR
            )))
    return tuple(out)


# --- error distribution over pipeline reports -------------------------------------

def error_distribution(per_scheme_errors: Mapping[str, int]) -> list[tuple[str, int]]:
    """Scheme error histogram rows, most error-prone first, ties alphabetical."""
    return sorted(per_scheme_errors.items(), key=lambda kv: (-kv[1], kv[0]))


# --- report rendering -------------------------------------------------------------

def stats_to_dict(stats: CorpusStats) -> dict:
    def grp(g: GroupStats) -> dict:
        return {
            "labels": list(g.labels),
            "columns": {c: list(v) for c, v in g.values.items()},
            "totals": {c: g.total(c) for c in g.values},
            "means": {c: g.mean(c) for c in g.values},
            "sd_population": {c: g.sd(c) for c in g.values},
            "sd_sample": {c: g.sd(c, sample=True) for c in g.values},
        }

    return {
        "language": stats.language,
        "n_records": stats.n_records,
        "total_inferences": stats.total_inferences,
        "total_words": stats.total_words,
        "stance_counts": dict(stats.stance_counts),
        "stance_share_in_favour": stats.stance_share_in_favour,
        "conflicts": stats.conflicts,
        "conflict_strategy": stats.conflict_strategy,
        "per_scheme": grp(stats.per_scheme),
        "per_topic": grp(stats.per_topic),
    }


def summary_table(stats: CorpusStats, sample_sd: bool = False) -> str:
    """Aligned text tables mirroring the publication-style corpus summaries."""
    lines = [
        f"Corpus summary ({stats.language}) — {stats.n_records} arguments",
        "",
        "Per scheme (20 rows aggregated):",
    ]
    g = stats.per_scheme
    header = f"{'':8} {'Inferences':>12} {'Words':>12} {'In favour':>12} {'Against':>12}"
    lines.append(header)
    for row_name in ("Total", "Mean", "Sd"):
        cells = []
        for col in ("inferences", "words", "in_favour", "against"):
            if row_name == "Total":
                cells.append(f"{int(g.total(col)):>12}")
            elif row_name == "Mean":
                cells.append(f"{fmt1(g.mean(col)):>12}")
            else:
                cells.append(f"{fmt1(g.sd(col, sample=sample_sd)):>12}")
        lines.append(f"{row_name:8} " + " ".join(cells))
    lines += ["", "Per topic (50 rows aggregated):"]
    t = stats.per_topic
    lines.append(f"{'':8} {'Inferences':>12} {'Conflicts':>12} {'In favour':>12} {'Against':>12}")
    for row_name in ("Total", "Mean", "Sd"):
        cells = []
        for col in ("inferences", "conflicts", "in_favour", "against"):
            if row_name == "Total":
                cells.append(f"{int(t.total(col)):>12}")
            elif row_name == "Mean":
                cells.append(f"{fmt1(t.mean(col)):>12}")
            else:
                cells.append(f"{fmt1(t.sd(col, sample=sample_sd)):>12}")
        lines.append(f"{row_name:8} " + " ".join(cells))
    share = stats.stance_share_in_favour * 100.0
    lines += [
        "",
        f"Stance balance: {stats.stance_counts.get(STANCE_IN_FAVOUR, 0)} in favour / "
        f"{stats.stance_counts.get(STANCE_AGAINST, 0)} against ({fmt1(share)}% in favour)",
        f"Conflicts ({stats.conflict_strategy}): {stats.conflicts}",
    ]
    return "\n".join(lines)


def histogram_csv(per_scheme_errors: Mapping[str, int]) -> str:
    rows = ["scheme,errors"]
    rows += [f"{s},{n}" for s, n in error_distribution(per_scheme_errors)]
    return "\n".join(rows) + "\n"
