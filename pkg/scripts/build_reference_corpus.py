#!/usr/bin/env python3
"""Build the reference-corpus fixture used by the test suite.

The toolkit's analytics are checked against the aggregate figures reported for
the published bilingual corpus. That archive is not vendored here, so this
script constructs a stand-in with identical aggregate structure: the same
argument counts per scheme and stance, inference totals, per-topic conflict
counts, topic extrema, and word totals, for both languages. Records are
emitted in the external-archive flavour (alias field names, surface topic
strings, prose stance labels) so the import adapter is exercised end to end.

Every figure is asserted before the file is written; the output is
deterministic byte for byte. Run from the repository root:

    python3 scripts/build_reference_corpus.py [--out tests/fixtures/reference_corpus.json.gz]
"""

from __future__ import annotations

import argparse
import gzip
import io
import json
import sys
from collections import defaultdict
from dataclasses import dataclass
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from nlas.analytics import compute_stats
from nlas.records import (
    NlasRecord,
    RecordComponent,
    import_external_corpus,
    make_record,
    record_id_for,
    structural_validate,
)
from nlas.registry import (
    GenerationKey,
    Registry,
    STANCE_AGAINST,
    STANCE_IN_FAVOUR,
    load_registry,
)

# --------------------------------------------------------------------------------
# Published aggregate figures the fixture must reproduce exactly.
# --------------------------------------------------------------------------------

TARGETS = {
    "en": {
        "arguments": 1893,
        "in_favour": 941,
        "against": 952,
        "inferences": 3949,
        "words": 118493,
        "conflicts": 11626,
    },
    "es": {
        "arguments": 1917,
        "in_favour": 974,
        "against": 943,
        "inferences": 4015,
        "words": 135023,
        "conflicts": 12155,
    },
}

# Per-scheme rejects (grid slots with no valid argument), split (in_favour, against).
SCHEME_REJECTS = {
    "en": {
        "AFEX": (2, 1), "AFTH": (13, 9), "SS": (10, 8), "IC": (5, 4), "AFPR": (1, 1),
        "AFIG": (4, 4), "AFPO": (3, 3), "AFPP": (3, 3), "AFVC": (3, 3), "AFSI": (3, 2),
        "AFCE": (2, 2), "AFAN": (2, 2), "AFRL": (2, 2), "AFSC": (2, 2), "AFWS": (2, 1),
        "AFEO": (1, 1), "AFPK": (1, 0),
    },
    "es": {
        "AFBE": (0, 1), "AFTH": (2, 2), "SS": (5, 9), "IC": (11, 25), "AFPR": (1, 1),
        "AFIG": (1, 3), "AFPO": (1, 2), "AFPP": (1, 2), "AFVC": (1, 2), "AFSI": (0, 2),
        "AFCE": (1, 1), "AFAN": (1, 1), "AFRL": (0, 2), "AFSC": (1, 1), "AFWS": (0, 1),
        "AFEO": (0, 1), "AFPK": (0, 1),
    },
}

# Topic-level layout constraints.
PLAN = {
    "en": {
        # Topics with a full 84-inference grid (no rejects at all).
        "zero_topics": ("mandatory-vaccination-in-pandemic", "renewable-energy"),
        # Fixed reject placements (reproduce the published per-topic extrema).
        "fixed": {
            "physical-appearance-for-personal-success": {
                STANCE_IN_FAVOUR: ["AFTH", "SS", "AFIG", "AFEX"],
                STANCE_AGAINST: ["AFVC"],
            },
        },
        # Number of topics holding exactly one in-favour and one against reject
        # of stance-bearing schemes (conflict cross terms).
        "paired_topics": 7,
        "loss_cap": 10,        # max inference loss for any non-fixed topic
        "stance_cap": {STANCE_IN_FAVOUR: 3, STANCE_AGAINST: 3},
        "expected_cross": 10,  # sum over topics of f_t * a_t
    },
    "es": {
        "zero_topics": ("internet-censorship", "surrogacy"),
        "fixed": {
            "freedom-of-speech": {
                STANCE_IN_FAVOUR: ["AFCE"],
                STANCE_AGAINST: ["SS", "AFTH", "IC"],
            },
            "climate-change": {
                STANCE_IN_FAVOUR: [],
                STANCE_AGAINST: ["AFIG", "AFPO", "AFPP", "AFVC", "AFSI"],
            },
        },
        "paired_topics": 10,
        "loss_cap": 9,
        "stance_cap": {STANCE_IN_FAVOUR: 3, STANCE_AGAINST: 4},
        "expected_cross": 11,
    },
}

# Spot figures reported per scheme (argument or inference counts).
SCHEME_SPOT_FACTS = [
    # (scheme, column, language, value)
    ("AFEX", "arguments", "en", 97),
    ("AFEX", "arguments", "es", 100),
    ("DAH", "arguments", "en", 100),
    ("DAH", "arguments", "es", 100),
    ("AFBE", "inferences", "en", 300),
    ("AFBE", "inferences", "es", 297),
    ("AFWT", "inferences", "en", 300),
    ("AFWT", "inferences", "es", 300),
]

# Per-topic extrema reported alongside the aggregate tables.
TOPIC_EXTREMA = {
    "en": {
        "max_inferences": (84, {"mandatory-vaccination-in-pandemic", "renewable-energy"}),
        "min_inferences": (73, {"physical-appearance-for-personal-success"}),
        "min_in_favour": (16, {"physical-appearance-for-personal-success"}),
    },
    "es": {
        "max_inferences": (84, {"internet-censorship", "surrogacy"}),
        "min_inferences": (74, {"freedom-of-speech", "climate-change"}),
        "min_against": (15, {"climate-change"}),
    },
}

CREATED_AT = "2023-07-01T00:00:00Z"
MODEL_NAME = "reference-archive"

STANCE_LABELS = {
    "en": {STANCE_IN_FAVOUR: "in favour", STANCE_AGAINST: "against"},
    "es": {STANCE_IN_FAVOUR: "a favor", STANCE_AGAINST: "en contra"},
}
LANGUAGE_LABELS = {"en": "english", "es": "spanish"}

PAD_WORDS = {
    "en": ("the", "wider", "public", "debate", "continues", "and", "further",
           "careful", "deliberation", "remains", "clearly", "warranted"),
    "es": ("el", "debate", "público", "continúa", "y", "una", "reflexión",
           "más", "detenida", "sigue", "siendo", "necesaria"),
}

GENERIC_FILLS = {
    "en": ("a careful review of the evidence", "the relevant policy community",
           "recent independent assessments", "the documented track record",
           "a widely reported precedent", "the prevailing expert consensus",
           "current institutional practice", "the stated public objective"),
    "es": ("una revisión cuidadosa de la evidencia", "la comunidad especializada pertinente",
           "evaluaciones independientes recientes", "la trayectoria documentada",
           "un precedente ampliamente difundido", "el consenso experto predominante",
           "la práctica institucional vigente", "el objetivo público declarado"),
}


# --------------------------------------------------------------------------------
# Reject allocation
# --------------------------------------------------------------------------------

@dataclass
class Allocation:
    """Which grid slots are rejected, with per-topic accounting."""
    rejected: set  # {(scheme, topic_id, stance)}
    loss: dict     # topic_id -> lost inferences
    f_sb: dict     # topic_id -> stance-bearing in-favour rejects
    a_sb: dict     # topic_id -> stance-bearing against rejects


def allocate_rejects(language: str, registry: Registry) -> Allocation:
    plan = PLAN[language]
    vector = SCHEME_REJECTS[language]
    cost = {s.acronym: s.premise_count for s in registry.schemes}
    sb = set(registry.stance_bearing_schemes())

    remaining = {}
    for acr, (n_f, n_a) in vector.items():
        remaining[(acr, STANCE_IN_FAVOUR)] = n_f
        remaining[(acr, STANCE_AGAINST)] = n_a

    rejected: set = set()
    loss: dict = defaultdict(int)
    f_sb: dict = defaultdict(int)
    a_sb: dict = defaultdict(int)
    stance_count: dict = defaultdict(int)

    def take(acr: str, stance: str, topic_id: str) -> None:
        key = (acr, stance)
        assert remaining.get(key, 0) > 0, f"pool exhausted for {key}"
        assert (acr, topic_id, stance) not in rejected
        remaining[key] -= 1
        rejected.add((acr, topic_id, stance))
        loss[topic_id] += cost[acr]
        stance_count[(topic_id, stance)] += 1
        if acr in sb:
            (f_sb if stance == STANCE_IN_FAVOUR else a_sb)[topic_id] += 1

    # Pass 0: fixed placements.
    for topic_id, sides in plan["fixed"].items():
        for stance, acrs in sides.items():
            for acr in acrs:
                take(acr, stance, topic_id)

    ordinary = [t.id for t in registry.topics
                if t.id not in plan["zero_topics"] and t.id not in plan["fixed"]]

    def sb_pool(stance: str) -> list:
        """Stance-bearing units, costliest schemes first, then alphabetical."""
        units = []
        for acr in sorted(sb, key=lambda a: (-cost[a], a)):
            units.extend([acr] * remaining.get((acr, stance), 0))
        return units

    pool_f = sb_pool(STANCE_IN_FAVOUR)
    pool_a = sb_pool(STANCE_AGAINST)

    # Pass 1: paired topics take one stance-bearing reject per side.
    paired = ordinary[:plan["paired_topics"]]
    for topic_id in paired:
        take(pool_f.pop(0), STANCE_IN_FAVOUR, topic_id)
        take(pool_a.pop(0), STANCE_AGAINST, topic_id)

    # Pass 2: the rest of the stance-bearing rejects go to single-sided topics.
    singles = ordinary[plan["paired_topics"]:]

    def place_sb(units: list, stance: str, other_side: dict) -> None:
        for acr in units:
            for topic_id in singles:
                if (acr, topic_id, stance) in rejected:
                    continue  # each grid slot can be rejected only once
                if other_side[topic_id]:
                    continue  # keep the topic single-sided
                if stance_count[(topic_id, stance)] >= plan["stance_cap"][stance]:
                    continue
                if loss[topic_id] + cost[acr] > plan["loss_cap"]:
                    continue
                take(acr, stance, topic_id)
                break
            else:
                raise AssertionError(f"no room for stance-bearing reject {acr}/{stance}")

    place_sb(pool_f, STANCE_IN_FAVOUR, a_sb)
    place_sb(pool_a, STANCE_AGAINST, f_sb)

    # Pass 3: stance-free-scheme rejects; first one per empty topic so the
    # published full-grid topics stay unique, then spread the leftovers.
    non_sb_units = []
    for acr in sorted(set(vector) - sb, key=lambda a: (-cost[a], a)):
        for stance in (STANCE_IN_FAVOUR, STANCE_AGAINST):
            non_sb_units.extend([(acr, stance)] * remaining.get((acr, stance), 0))

    empties = [t for t in ordinary if loss[t] == 0]
    assert len(non_sb_units) >= len(empties), (
        f"{language}: {len(empties)} untouched topics but only "
        f"{len(non_sb_units)} stance-free rejects to seed them"
    )
    for topic_id in empties:
        acr, stance = non_sb_units.pop(0)
        take(acr, stance, topic_id)
    for acr, stance in non_sb_units:
        for topic_id in ordinary:
            if (acr, topic_id, stance) in rejected:
                continue
            if stance_count[(topic_id, stance)] >= plan["stance_cap"][stance]:
                continue
            if loss[topic_id] + cost[acr] > plan["loss_cap"]:
                continue
            take(acr, stance, topic_id)
            break
        else:
            raise AssertionError(f"no room for stance-free reject {acr}/{stance}")

    # -- verify the allocation before any record is built --------------------------
    assert all(v == 0 for v in remaining.values()), f"unplaced rejects: {remaining}"
    for topic_id in plan["zero_topics"]:
        assert loss[topic_id] == 0
    for topic_id in ordinary:
        assert 1 <= loss[topic_id] <= plan["loss_cap"], (topic_id, loss[topic_id])
    cross = sum(f_sb[t] * a_sb[t] for t in set(f_sb) | set(a_sb))
    assert cross == plan["expected_cross"], f"{language}: f*a cross sum {cross}"
    for topic_id in paired:
        assert f_sb[topic_id] == 1 and a_sb[topic_id] == 1
    for topic_id in singles:
        assert not (f_sb[topic_id] and a_sb[topic_id]), f"{topic_id} is double-sided"

    return Allocation(rejected=rejected, loss=dict(loss), f_sb=dict(f_sb), a_sb=dict(a_sb))


# --------------------------------------------------------------------------------
# Record construction
# --------------------------------------------------------------------------------

def instantiate(registry: Registry, key: GenerationKey) -> NlasRecord:
    """Fill the scheme pattern with deterministic, topic-anchored text."""
    scheme = registry.scheme(key.scheme)
    topic = registry.topic(key.topic_id)
    surface = topic.surface(key.language)
    topic_phrase = surface if key.language == "es" else surface[0].lower() + surface[1:]

    variables = scheme.variables(key.language)
    conclusion_vars = scheme.component("conclusion").variables_for(key.language)
    anchor = conclusion_vars[0] if conclusion_vars else variables[0]
    generic = GENERIC_FILLS[key.language]

    fills = {}
    for i, var in enumerate(variables):
        if var == anchor:
            if key.language == "en":
                fills[var] = f"the case for {topic_phrase}" \
                    if key.stance == STANCE_IN_FAVOUR else f"the case against {topic_phrase}"
            else:
                fills[var] = f"la defensa de {topic_phrase}" \
                    if key.stance == STANCE_IN_FAVOUR else f"el rechazo de {topic_phrase}"
        else:
            fills[var] = generic[i % len(generic)]

    components = []
    for comp in scheme.components:
        text = comp.pattern_for(key.language)
        for var in comp.variables_for(key.language):
            text = text.replace(f"[{var}]", fills[var])
        components.append(RecordComponent(role=comp.role, text=text))

    return make_record(
        key=key,
        components=components,
        model=MODEL_NAME,
        iteration=1,
        created_at=CREATED_AT,
        record_id=record_id_for(key, 1),
    )


def pad_record(record: NlasRecord, extra_words: int, language: str) -> NlasRecord:
    if extra_words <= 0:
        return record
    vocab = PAD_WORDS[language]
    tokens = [vocab[i % len(vocab)] for i in range(extra_words)]
    components = list(record.components)
    last = components[-1]
    components[-1] = RecordComponent(role=last.role, text=last.text + " " + " ".join(tokens) + ".")
    return make_record(
        key=record.key,
        components=components,
        model=record.model,
        iteration=record.iteration,
        created_at=record.created_at,
        record_id=record.id,
    )


def build_language(language: str, registry: Registry) -> list[NlasRecord]:
    allocation = allocate_rejects(language, registry)
    records = []
    for key in registry.enumerate_keys(languages=[language]):
        if (key.scheme, key.topic_id, key.stance) in allocation.rejected:
            continue
        records.append(instantiate(registry, key))
    records.sort(key=lambda r: r.id)

    # Pad word counts up to the published total, spread across all records.
    base = sum(r.words for r in records)
    deficit = TARGETS[language]["words"] - base
    assert deficit >= 0, f"{language}: base text already exceeds the word target by {-deficit}"
    q, r = divmod(deficit, len(records))
    return [pad_record(rec, q + (1 if i < r else 0), language) for i, rec in enumerate(records)]


# --------------------------------------------------------------------------------
# Verification against every published figure
# --------------------------------------------------------------------------------

def verify(records: list[NlasRecord], registry: Registry) -> list[str]:
    lines = []
    for language in ("en", "es"):
        t = TARGETS[language]
        stats = compute_stats(records, registry, language)
        assert stats.n_records == t["arguments"], (language, stats.n_records)
        assert stats.stance_counts[STANCE_IN_FAVOUR] == t["in_favour"]
        assert stats.stance_counts[STANCE_AGAINST] == t["against"]
        assert stats.total_inferences == t["inferences"], (language, stats.total_inferences)
        assert stats.total_words == t["words"], (language, stats.total_words)
        assert stats.conflicts == t["conflicts"], (language, stats.conflicts)

        per_scheme = stats.per_scheme
        for acr, column, lang, value in SCHEME_SPOT_FACTS:
            if lang != language:
                continue
            i = per_scheme.labels.index(acr)
            if column == "arguments":
                got = per_scheme.values["in_favour"][i] + per_scheme.values["against"][i]
            else:
                got = per_scheme.values["inferences"][i]
            assert got == value, (language, acr, column, got, value)

        per_topic = stats.per_topic
        inf = per_topic.values["inferences"]
        fav = per_topic.values["in_favour"]
        agn = per_topic.values["against"]
        extrema = TOPIC_EXTREMA[language]

        def holders(vector, value):
            return {per_topic.labels[i] for i, v in enumerate(vector) if v == value}

        value, who = extrema["max_inferences"]
        assert max(inf) == value and holders(inf, value) == who
        value, who = extrema["min_inferences"]
        assert min(inf) == value and holders(inf, value) == who
        if "min_in_favour" in extrema:
            value, who = extrema["min_in_favour"]
            assert min(fav) == value and holders(fav, value) == who
        if "min_against" in extrema:
            value, who = extrema["min_against"]
            assert min(agn) == value and holders(agn, value) == who

        lines.append(
            f"{language}: {stats.n_records} arguments "
            f"({stats.stance_counts[STANCE_IN_FAVOUR]} in favour / "
            f"{stats.stance_counts[STANCE_AGAINST]} against), "
            f"{stats.total_inferences} inferences, {stats.total_words} words, "
            f"{stats.conflicts} conflicts"
        )

    for record in records:
        verdict = structural_validate(record, registry)
        assert verdict.valid, (record.id, [c.name for c in verdict.checks if not c.passed])
        soft_failures = [c.name for c in verdict.checks if not c.hard and not c.passed]
        assert not soft_failures, (record.id, soft_failures)
    lines.append(f"all {len(records)} records pass structural validation")
    return lines


# --------------------------------------------------------------------------------
# External-archive serialization
# --------------------------------------------------------------------------------

def externalize(record: NlasRecord) -> dict:
    language = record.key.language
    return {
        "id": record.id,
        "argument_scheme": record.key.scheme,
        "topic": None,  # filled by caller with the surface string
        "stance": STANCE_LABELS[language][record.key.stance],
        "language": LANGUAGE_LABELS[language],
        "components": [{"role": c.role, "text": c.text} for c in record.components],
        "model": record.model,
        "created_at": record.created_at,
    }


def serialize(records: list[NlasRecord], registry: Registry) -> bytes:
    payload = []
    for record in sorted(records, key=lambda r: r.id):
        data = externalize(record)
        data["topic"] = registry.topic(record.key.topic_id).surface(record.key.language)
        payload.append(data)
    text = json.dumps(payload, ensure_ascii=False, sort_keys=True, separators=(",", ":"))
    buffer = io.BytesIO()
    with gzip.GzipFile(filename="", mode="wb", fileobj=buffer, mtime=0) as fh:
        fh.write(text.encode("utf-8"))
    return buffer.getvalue()


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument(
        "--out",
        default=str(Path(__file__).resolve().parents[1]
                    / "tests" / "fixtures" / "reference_corpus.json.gz"),
    )
    args = parser.parse_args(argv)

    registry = load_registry()
    records = build_language("en", registry) + build_language("es", registry)
    for line in verify(records, registry):
        print(line)

    blob = serialize(records, registry)

    # Round-trip check: the archive must import back to the same aggregates.
    out_path = Path(args.out)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    out_path.write_bytes(blob)
    reimported = import_external_corpus(out_path, registry)
    assert len(reimported) == len(records)
    for language in ("en", "es"):
        stats = compute_stats(reimported, registry, language)
        t = TARGETS[language]
        assert stats.n_records == t["arguments"]
        assert stats.total_words == t["words"]
        assert stats.conflicts == t["conflicts"]
    print(f"wrote {out_path} ({len(blob)} bytes)")
    return 0


if __name__ == "__main__":
    sys.exit(main())
