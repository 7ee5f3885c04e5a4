"""Argument records: response parsing, structural validation, serialization.

Corpus files are JSON arrays of record objects with the fields
id, scheme, topic_id, stance, language, components[{role, text}], model,
iteration (plus the derived fields words and created_at). Gzip-compressed
corpus files (.gz) load and save transparently.

The import adapter for externally published archives is tolerant by design:
field aliases (scheme/argument_scheme/type, topic/topic_id, stance spelled a
dozen ways, top-level component keys instead of a component list) are mapped
onto the native schema; unknown extra fields are dropped. Anything that cannot
be mapped raises rather than guessing silently.
"""

from __future__ import annotations

import gzip
import json
import re
import unicodedata
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .errors import (
    EmptyComponent,
    ExtraComponent,
    MissingComponent,
    NlasError,
    NotADocument,
)
from .gateway import RawResponse
from .registry import GenerationKey, Registry, SchemeTemplate

MOCK_CREATED_AT = "2024-01-01T00:00:00Z"

_TOKEN_RE = re.compile(r"\S+")
_BRACKET_RE = re.compile(r"[\[\]]")


def _is_punct(ch: str) -> bool:
    return unicodedata.category(ch).startswith("P")


def word_count(text: str) -> int:
    """Whitespace tokens that keep any content after stripping edge punctuation."""
    n = 0
    for run in _TOKEN_RE.findall(text):
        start, end = 0, len(run)
        while start < end and _is_punct(run[start]):
            start += 1
        while end > start and _is_punct(run[end - 1]):
            end -= 1
        if end > start:
            n += 1
    return n


@dataclass(frozen=True)
class RecordComponent:
    role: str
    text: str


@dataclass(frozen=True)
class NlasRecord:
    id: str
    key: GenerationKey
    components: tuple[RecordComponent, ...]
    model: str
    iteration: int
    words: int
    created_at: str

    @property
    def full_text(self) -> str:
        return "\n".join(c.text for c in self.components)

    def component(self, role: str) -> str:
        for c in self.components:
            if c.role == role:
                return c.text
        raise KeyError(role)


def record_id_for(key: GenerationKey, iteration: int) -> str:
    return f"{key.language}-{key.scheme.lower()}-{key.topic_id}-{key.stance}-i{iteration}"


def make_record(
    key: GenerationKey,
    components: Sequence[RecordComponent],
    model: str,
    iteration: int,
    created_at: str = MOCK_CREATED_AT,
    record_id: str | None = None,
) -> NlasRecord:
    comps = tuple(components)
    return NlasRecord(
        id=record_id or record_id_for(key, iteration),
        key=key,
        components=comps,
        model=model,
        iteration=iteration,
        words=sum(word_count(c.text) for c in comps),
        created_at=created_at,
    )


# --- response parsing ---------------------------------------------------------

def _extract_json_object(body: str) -> dict | None:
    """First JSON object found in the body; tolerates fences and surrounding prose."""
    decoder = json.JSONDecoder()
    idx = body.find("{")
    while idx != -1:
        try:
            obj, _ = decoder.raw_decode(body, idx)
        except ValueError:
            idx = body.find("{", idx + 1)
            continue
        if isinstance(obj, dict):
            return obj
        idx = body.find("{", idx + 1)
    return None


def parse_response(
    raw: RawResponse,
    scheme: SchemeTemplate,
    iteration: int = 1,
    created_at: str = MOCK_CREATED_AT,
) -> NlasRecord:
    """Turn a raw model response into a record, or raise a ParseError subclass."""
    obj = _extract_json_object(raw.body)
    if obj is None:
        raise NotADocument("no JSON object found in response body")

    normalized = {str(k).strip().lower(): v for k, v in obj.items()}
    expected = scheme.roles
    for key_name in normalized:
        if key_name not in expected:
            raise ExtraComponent(key_name)

    components: list[RecordComponent] = []
    for role in expected:
        if role not in normalized:
            raise MissingComponent(role)
        value = normalized[role]
        if isinstance(value, (int, float)) and not isinstance(value, bool):
            value = str(value)
        if not isinstance(value, str) or not value.strip():
            raise EmptyComponent(role)
        components.append(RecordComponent(role=role, text=value.strip()))

    return make_record(
        key=raw.key,
        components=components,
        model=raw.model_name,
        iteration=iteration,
        created_at=created_at,
    )


# --- structural validation -------------------------------------------------------

CHECK_COMPONENTS = "components_match_scheme"
CHECK_BRACKETS = "no_residual_variable"
CHECK_NONEMPTY = "components_nonempty"
CHECK_TOPIC = "topic_term_presence"
CHECK_VARIABLES = "variable_consistency"
HARD_CHECKS = (CHECK_COMPONENTS, CHECK_BRACKETS, CHECK_NONEMPTY)
SOFT_CHECKS = (CHECK_TOPIC, CHECK_VARIABLES)


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    hard: bool
    detail: str = ""


@dataclass(frozen=True)
class StructuralVerdict:
    record_id: str
    checks: tuple[CheckResult, ...]
    valid: bool

    def check(self, name: str) -> CheckResult:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)


_CONTENT_WORD_RE = re.compile(r"[^\W\d_]{3,}", re.UNICODE)


def _segments(pattern: str) -> tuple[list[str], list[str]]:
    """Split a pattern into fixed text segments and the variable names between them."""
    fixed = re.split(r"\[[^\[\]]+\]", pattern)
    variables = re.findall(r"\[([^\[\]]+)\]", pattern)
    return fixed, variables


def _extract_fills(pattern: str, text: str) -> dict[str, str] | None:
    """Best-effort recovery of variable instantiations by anchoring fixed segments.

    Returns None when the text paraphrases the template so the anchors cannot
    be located; callers treat that as not assessable rather than a failure.
    """
    fixed, variables = _segments(pattern)
    if not variables:
        return {}
    lowered = text.lower()
    pos = 0
    spans: list[tuple[int, int]] = []
    for i, seg in enumerate(fixed):
        seg_l = seg.lower()
        if seg_l:
            found = lowered.find(seg_l, pos)
            if found == -1:
                return None
            if i > 0:
                spans.append((pos, found))
            pos = found + len(seg_l)
        else:
            if i > 0:
                spans.append((pos, len(text)))
                pos = len(text)
    if len(spans) < len(variables):
        spans.append((pos, len(text)))
    fills: dict[str, str] = {}
    for var, (a, b) in zip(variables, spans):
        fills.setdefault(var, text[a:b].strip())
    return fills


def structural_validate(record: NlasRecord, registry: Registry) -> StructuralVerdict:
    """Hard checks decide validity; soft checks only annotate the verdict."""
    scheme = registry.scheme(record.key.scheme)
    topic = registry.topic(record.key.topic_id)
    lang = record.key.language
    checks: list[CheckResult] = []

    got_roles = tuple(c.role for c in record.components)
    ok = got_roles == scheme.roles
    checks.append(CheckResult(
        CHECK_COMPONENTS, ok, hard=True,
        detail="" if ok else f"expected {scheme.roles}, got {got_roles}",
    ))

    offenders = [c.role for c in record.components if _BRACKET_RE.search(c.text)]
    checks.append(CheckResult(
        CHECK_BRACKETS, not offenders, hard=True,
        detail="" if not offenders else f"brackets remain in: {', '.join(offenders)}",
    ))

    empties = [c.role for c in record.components if not c.text.strip()]
    checks.append(CheckResult(
        CHECK_NONEMPTY, not empties, hard=True,
        detail="" if not empties else f"empty components: {', '.join(empties)}",
    ))

    keywords = topic.keywords(lang)
    text_l = record.full_text.lower()
    hit = any(re.search(rf"\b{re.escape(kw)}", text_l) for kw in keywords)
    checks.append(CheckResult(
        CHECK_TOPIC, hit, hard=False,
        detail="" if hit else f"none of the topic terms {keywords} appear",
    ))

    # Variable consistency: reused variables should share a content word between
    # their first instantiation and each reuse site. Only assessable while the
    # fixed template segments survive in the text.
    seen: dict[str, str] = {}
    consistent = True
    detail = ""
    assessable = False
    for comp in record.components:
        try:
            pattern = scheme.component(comp.role).pattern_for(lang)
        except ValueError:
            continue
        fills = _extract_fills(pattern, comp.text)
        if fills is None:
            continue
        assessable = True
        for var, phrase in fills.items():
            words = set(_CONTENT_WORD_RE.findall(phrase.lower()))
            if var in seen:
                first_words = set(_CONTENT_WORD_RE.findall(seen[var].lower()))
                if first_words and words and not (first_words & words):
                    consistent = False
                    detail = f"variable {var} differs across components"
            else:
                seen[var] = phrase
    if not assessable:
        detail = "template anchors not found; not assessable"
    checks.append(CheckResult(CHECK_VARIABLES, consistent, hard=False, detail=detail))

    valid = all(c.passed for c in checks if c.hard)
    return StructuralVerdict(record_id=record.id, checks=tuple(checks), valid=valid)


# --- serialization -----------------------------------------------------------------

def record_to_dict(record: NlasRecord) -> dict:
    return {
        "id": record.id,
        "scheme": record.key.scheme,
        "topic_id": record.key.topic_id,
        "stance": record.key.stance,
        "language": record.key.language,
        "components": [{"role": c.role, "text": c.text} for c in record.components],
        "model": record.model,
        "iteration": record.iteration,
        "words": record.words,
        "created_at": record.created_at,
    }


def record_from_dict(data: Mapping) -> NlasRecord:
    try:
        key = GenerationKey(
            language=str(data["language"]),
            scheme=str(data["scheme"]),
            topic_id=str(data["topic_id"]),
            stance=str(data["stance"]),
        )
        components = tuple(
            RecordComponent(role=str(c["role"]), text=str(c["text"]))
            for c in data["components"]
        )
        record = NlasRecord(
            id=str(data["id"]),
            key=key,
            components=components,
            model=str(data.get("model", "")),
            iteration=int(data.get("iteration", 1)),
            words=int(data["words"]) if "words" in data
            else sum(word_count(c.text) for c in components),
            created_at=str(data.get("created_at", "")),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise NlasError(f"malformed record object: {exc}") from None
    return record


def _open_for_read(path: Path):
    if path.suffix == ".gz":
        return gzip.open(path, "rt", encoding="utf-8")
    return open(path, "r", encoding="utf-8")


def _open_for_write(path: Path):
    if path.suffix == ".gz":
        return gzip.open(path, "wt", encoding="utf-8")
    return open(path, "w", encoding="utf-8")


def save_corpus(records: Iterable[NlasRecord], path: str | Path) -> None:
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    with _open_for_write(p) as fh:
        json.dump([record_to_dict(r) for r in records], fh,
                  ensure_ascii=False, sort_keys=True, separators=(",", ":"))


def load_corpus(path: str | Path) -> list[NlasRecord]:
    p = Path(path)
    try:
        with _open_for_read(p) as fh:
            data = json.load(fh)
    except OSError as exc:
        raise NlasError(f"cannot read corpus {p}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise NlasError(f"corpus {p} is not valid JSON: {exc}") from None
    if not isinstance(data, list):
        raise NlasError(f"corpus {p}: top level must be an array of records")
    return [record_from_dict(item) for item in data]


# --- external archive import ---------------------------------------------------------

_STANCE_ALIASES = {
    "in_favour": "in_favour", "in favour": "in_favour", "in_favor": "in_favour",
    "in favor": "in_favour", "favour": "in_favour", "favor": "in_favour",
    "for": "in_favour", "pro": "in_favour", "a favor": "in_favour",
    "against": "against", "contra": "against", "en contra": "against",
    "con": "against", "anti": "against",
}
_LANGUAGE_ALIASES = {
    "en": "en", "eng": "en", "english": "en", "inglés": "en", "ingles": "en",
    "es": "es", "esp": "es", "spa": "es", "spanish": "es", "español": "es", "espanol": "es",
}


def _first(data: Mapping, *names: str):
    for name in names:
        if name in data and data[name] is not None:
            return data[name]
    return None


def import_external_record(data: Mapping, registry: Registry, fallback_id: str) -> NlasRecord:
    """Map one externally published record onto the native schema."""
    scheme_raw = _first(data, "scheme", "argument_scheme", "scheme_acronym", "type")
    if scheme_raw is None:
        raise NlasError(f"record {fallback_id}: no scheme field")
    acronym = str(scheme_raw).strip().upper()
    scheme = registry.scheme(acronym)

    topic_raw = _first(data, "topic_id", "topic")
    if topic_raw is None:
        raise NlasError(f"record {fallback_id}: no topic field")
    topic_text = str(topic_raw).strip()
    topic_id = None
    for t in registry.topics:
        if topic_text == t.id or topic_text.lower() in (t.en.lower(), t.es.lower()):
            topic_id = t.id
            break
    if topic_id is None:
        raise NlasError(f"record {fallback_id}: unknown topic {topic_text!r}")

    stance_raw = str(_first(data, "stance", "position", "side") or "").strip().lower()
    stance = _STANCE_ALIASES.get(stance_raw)
    if stance is None:
        raise NlasError(f"record {fallback_id}: unknown stance {stance_raw!r}")

    lang_raw = str(_first(data, "language", "lang") or "").strip().lower()
    language = _LANGUAGE_ALIASES.get(lang_raw)
    if language is None:
        raise NlasError(f"record {fallback_id}: unknown language {lang_raw!r}")

    raw_components = _first(data, "components")
    components: list[RecordComponent] = []
    if isinstance(raw_components, list):
        for c in raw_components:
            components.append(RecordComponent(role=str(c["role"]), text=str(c["text"]).strip()))
    else:
        for role in scheme.roles:
            value = _first(data, role, role.replace("_", " "), role.upper())
            if value is None:
                raise NlasError(f"record {fallback_id}: missing component {role}")
            components.append(RecordComponent(role=role, text=str(value).strip()))

    key = GenerationKey(language=language, scheme=acronym, topic_id=topic_id, stance=stance)
    return make_record(
        key=key,
        components=components,
        model=str(_first(data, "model", "model_name") or "imported"),
        iteration=int(_first(data, "iteration") or 1),
        created_at=str(_first(data, "created_at", "timestamp") or ""),
        record_id=str(_first(data, "id", "record_id") or fallback_id),
    )


def import_external_corpus(path: str | Path, registry: Registry) -> list[NlasRecord]:
    """Import an externally published archive: a JSON array, a dict of records,
    or a directory of *.json files."""
    p = Path(path)
    payloads: list[Mapping] = []
    if p.is_dir():
        for child in sorted(p.rglob("*.json")):
            with _open_for_read(child) as fh:
                data = json.load(fh)
            if isinstance(data, list):
                payloads.extend(data)
            elif isinstance(data, Mapping):
                payloads.append(data)
    else:
        with _open_for_read(p) as fh:
            data = json.load(fh)
        if isinstance(data, list):
            payloads = list(data)
        elif isinstance(data, Mapping):
            payloads = [v for v in data.values() if isinstance(v, Mapping)]
        else:
            raise NlasError(f"{p}: unsupported archive layout")
    records = []
    for i, item in enumerate(payloads):
        records.append(import_external_record(item, registry, fallback_id=f"imported-{i:05d}"))
    return records
