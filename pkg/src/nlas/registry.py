"""Scheme and topic registry.

Loads the versioned YAML registry document holding the 20 argumentation scheme
templates (explicit bracketed-variable style, English and Spanish surfaces) and
the 50 debate topics. All generation keys (scheme x topic x stance x language)
are enumerated from here in a deterministic order.

Component roles double as the JSON keys a generator must answer with:
major_premise, minor_premise, premise, premise_1..premise_n, conclusion.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Mapping, Sequence

import yaml

from .errors import InvariantViolation, MalformedRegistry, UnknownScheme, UnknownTopic

LANGUAGES = ("en", "es")
STANCE_IN_FAVOUR = "in_favour"
STANCE_AGAINST = "against"
STANCES = (STANCE_IN_FAVOUR, STANCE_AGAINST)

ROLE_CONCLUSION = "conclusion"
_ROLE_RE = re.compile(r"^(major_premise|minor_premise|premise|premise_[1-9][0-9]*|conclusion)$")
_VARIABLE_RE = re.compile(r"\[([^\[\]]+)\]")

_ROLE_LABELS = {
    "en": {
        "major_premise": "Major Premise",
        "minor_premise": "Minor Premise",
        "premise": "Premise",
        "conclusion": "Conclusion",
    },
    "es": {
        "major_premise": "Premisa Mayor",
        "minor_premise": "Premisa Menor",
        "premise": "Premisa",
        "conclusion": "Conclusión",
    },
}

# Words ignored when deriving per-topic keyword lists from the surface forms.
# "time" is ambient vocabulary of the scheme templates, not a topical term.
_STOPWORDS = {
    "the", "of", "in", "for", "to", "on", "by", "a", "an", "and", "or", "with", "from",
    "time",
    "la", "el", "los", "las", "de", "del", "en", "con", "para", "por", "y", "o", "un",
    "una", "que", "al", "lo", "su", "sus",
}


def role_label(role: str, language: str = "en") -> str:
    """Human-facing label for a component role, e.g. premise_2 -> 'Premise 2'."""
    labels = _ROLE_LABELS[language]
    if role in labels:
        return labels[role]
    if role.startswith("premise_"):
        return f"{labels['premise']} {role.split('_', 1)[1]}"
    raise ValueError(f"unknown role: {role}")


@dataclass(frozen=True)
class Component:
    role: str
    pattern: str
    pattern_es: str

    def pattern_for(self, language: str) -> str:
        return self.pattern if language == "en" else self.pattern_es

    def variables_for(self, language: str) -> list[str]:
        return _VARIABLE_RE.findall(self.pattern_for(language))


@dataclass(frozen=True)
class SchemeTemplate:
    acronym: str
    name: str
    name_es: str
    prompt_name: str
    prompt_name_es: str
    stance_bearing: bool
    components: tuple[Component, ...]

    @property
    def premise_count(self) -> int:
        return sum(1 for c in self.components if c.role != ROLE_CONCLUSION)

    @property
    def roles(self) -> tuple[str, ...]:
        return tuple(c.role for c in self.components)

    def variables(self, language: str = "en") -> list[str]:
        seen: list[str] = []
        for c in self.components:
            for v in c.variables_for(language):
                if v not in seen:
                    seen.append(v)
        return seen

    def component(self, role: str) -> Component:
        for c in self.components:
            if c.role == role:
                return c
        raise ValueError(f"{self.acronym} has no component {role}")


@dataclass(frozen=True)
class Topic:
    id: str
    en: str
    es: str

    def surface(self, language: str) -> str:
        return self.en if language == "en" else self.es

    def keywords(self, language: str) -> tuple[str, ...]:
        """Content words of the surface form, for the soft topic check."""
        words = re.findall(r"[^\W\d_]+", self.surface(language).lower(), re.UNICODE)
        keep = tuple(w for w in words if w not in _STOPWORDS and (len(w) >= 4 or w.isupper()))
        if keep:
            return keep
        return tuple(w for w in words if w not in _STOPWORDS) or tuple(words)


@dataclass(frozen=True, order=True)
class GenerationKey:
    """One unit of generation work; ordering is (language, scheme, topic, stance)."""
    language: str
    scheme: str
    topic_id: str
    stance: str

    def as_dict(self) -> dict[str, str]:
        return {
            "language": self.language,
            "scheme": self.scheme,
            "topic_id": self.topic_id,
            "stance": self.stance,
        }


class Registry:
    def __init__(self, schemes: Sequence[SchemeTemplate], topics: Sequence[Topic], version: int = 1):
        self.version = version
        self._schemes = {s.acronym: s for s in schemes}
        self._scheme_order = tuple(s.acronym for s in schemes)
        self._topics = {t.id: t for t in topics}
        self._topic_order = tuple(t.id for t in topics)

    # -- access ---------------------------------------------------------------

    @property
    def schemes(self) -> tuple[SchemeTemplate, ...]:
        return tuple(self._schemes[a] for a in self._scheme_order)

    @property
    def topics(self) -> tuple[Topic, ...]:
        return tuple(self._topics[t] for t in self._topic_order)

    def scheme(self, acronym: str) -> SchemeTemplate:
        try:
            return self._schemes[acronym]
        except KeyError:
            raise UnknownScheme(f"unknown scheme acronym: {acronym}") from None

    def topic(self, topic_id: str) -> Topic:
        try:
            return self._topics[topic_id]
        except KeyError:
            raise UnknownTopic(f"unknown topic id: {topic_id}") from None

    def stance_bearing_schemes(self) -> tuple[str, ...]:
        return tuple(s.acronym for s in self.schemes if s.stance_bearing)

    # -- rendering -------------------------------------------------------------

    def render_pattern(self, acronym: str, language: str = "en") -> str:
        """Byte-stable textual rendering of a scheme template, one component per line."""
        scheme = self.scheme(acronym)
        lines = [
            f"{role_label(c.role, language)}: {c.pattern_for(language)}"
            for c in scheme.components
        ]
        return "\n".join(lines)

    # -- enumeration -------------------------------------------------------------

    def enumerate_keys(
        self,
        languages: Sequence[str] = LANGUAGES,
        schemes: Sequence[str] | None = None,
        topics: Sequence[str] | None = None,
        stances: Sequence[str] = STANCES,
    ) -> list[GenerationKey]:
        """Deterministic full enumeration in (language, scheme, topic, stance) order."""
        for lang in languages:
            if lang not in LANGUAGES:
                raise ValueError(f"unknown language: {lang}")
        scheme_ids = tuple(schemes) if schemes is not None else self._scheme_order
        topic_ids = tuple(topics) if topics is not None else self._topic_order
        for a in scheme_ids:
            self.scheme(a)
        for t in topic_ids:
            self.topic(t)
        for st in stances:
            if st not in STANCES:
                raise ValueError(f"unknown stance: {st}")
        return [
            GenerationKey(language=lang, scheme=a, topic_id=t, stance=st)
            for lang in languages
            for a in scheme_ids
            for t in topic_ids
            for st in stances
        ]

    # -- serialization ------------------------------------------------------------

    def to_document(self) -> dict:
        return {
            "version": self.version,
            "schemes": [
                {
                    "acronym": s.acronym,
                    "name": s.name,
                    "name_es": s.name_es,
                    "prompt_name": s.prompt_name,
                    "prompt_name_es": s.prompt_name_es,
                    "stance_bearing": s.stance_bearing,
                    "components": [
                        {"role": c.role, "pattern": c.pattern, "pattern_es": c.pattern_es}
                        for c in s.components
                    ],
                }
                for s in self.schemes
            ],
            "topics": [{"id": t.id, "en": t.en, "es": t.es} for t in self.topics],
        }

    def save(self, path: str | Path) -> None:
        Path(path).write_text(
            yaml.safe_dump(self.to_document(), allow_unicode=True, sort_keys=False),
            encoding="utf-8",
        )


def bundled_registry_path() -> Path:
    return Path(__file__).parent / "data" / "registry.yaml"


def _check_brackets(text: str, where: str) -> None:
    depth = 0
    for ch in text:
        if ch == "[":
            depth += 1
            if depth > 1:
                raise InvariantViolation(f"{where}: nested '[' in pattern")
        elif ch == "]":
            depth -= 1
            if depth < 0:
                raise InvariantViolation(f"{where}: unbalanced ']' in pattern")
    if depth != 0:
        raise InvariantViolation(f"{where}: unbalanced '[' in pattern")
    for name in _VARIABLE_RE.findall(text):
        if not name.strip():
            raise InvariantViolation(f"{where}: empty variable name")


def _validate_scheme(s: SchemeTemplate) -> None:
    where = f"scheme {s.acronym}"
    if not s.components:
        raise InvariantViolation(f"{where}: no components")
    conclusions = [c for c in s.components if c.role == ROLE_CONCLUSION]
    if len(conclusions) != 1:
        raise InvariantViolation(f"{where}: expected exactly one conclusion, found {len(conclusions)}")
    if s.components[-1].role != ROLE_CONCLUSION:
        raise InvariantViolation(f"{where}: conclusion must be the last component")
    if s.premise_count < 1:
        raise InvariantViolation(f"{where}: needs at least one premise")
    seen_roles: set[str] = set()
    for c in s.components:
        if not _ROLE_RE.match(c.role):
            raise InvariantViolation(f"{where}: invalid role {c.role!r}")
        if c.role in seen_roles:
            raise InvariantViolation(f"{where}: duplicate role {c.role}")
        seen_roles.add(c.role)
        for lang, text in (("en", c.pattern), ("es", c.pattern_es)):
            if not text or not text.strip():
                raise InvariantViolation(f"{where}: empty {lang} pattern for {c.role}")
            _check_brackets(text, f"{where}/{c.role}/{lang}")
    # Variables used in the conclusion or a minor premise must be bound earlier.
    for lang in LANGUAGES:
        bound: set[str] = set()
        for c in s.components:
            used = set(c.variables_for(lang))
            if c.role in (ROLE_CONCLUSION, "minor_premise"):
                unbound = used - bound
                if unbound:
                    raise InvariantViolation(
                        f"{where}/{c.role}/{lang}: variables not bound earlier: {sorted(unbound)}"
                    )
            bound |= used
    if not s.variables("en") or not s.variables("es"):
        raise InvariantViolation(f"{where}: template has no variables")


def _load_document(doc: object, source: str) -> Registry:
    if not isinstance(doc, Mapping):
        raise MalformedRegistry(f"{source}: top level must be a mapping")
    for field_name in ("schemes", "topics"):
        if field_name not in doc:
            raise MalformedRegistry(f"{source}: missing top-level field {field_name!r}")
    raw_schemes = doc["schemes"]
    raw_topics = doc["topics"]
    if not isinstance(raw_schemes, list) or not isinstance(raw_topics, list):
        raise MalformedRegistry(f"{source}: 'schemes' and 'topics' must be lists")

    schemes: list[SchemeTemplate] = []
    for i, raw in enumerate(raw_schemes):
        if not isinstance(raw, Mapping):
            raise MalformedRegistry(f"{source}: schemes[{i}] is not a mapping")
        try:
            components = tuple(
                Component(
                    role=str(c["role"]),
                    pattern=str(c["pattern"]),
                    pattern_es=str(c.get("pattern_es", c["pattern"])),
                )
                for c in raw["components"]
            )
            scheme = SchemeTemplate(
                acronym=str(raw["acronym"]),
                name=str(raw["name"]),
                name_es=str(raw.get("name_es", raw["name"])),
                prompt_name=str(raw.get("prompt_name") or raw["name"].lower()),
                prompt_name_es=str(raw.get("prompt_name_es") or raw.get("name_es") or raw["name"]),
                stance_bearing=bool(raw["stance_bearing"]),
                components=components,
            )
        except KeyError as exc:
            raise MalformedRegistry(f"{source}: schemes[{i}] missing field {exc}") from None
        schemes.append(scheme)

    topics: list[Topic] = []
    for i, raw in enumerate(raw_topics):
        if not isinstance(raw, Mapping):
            raise MalformedRegistry(f"{source}: topics[{i}] is not a mapping")
        try:
            topics.append(Topic(id=str(raw["id"]), en=str(raw["en"]), es=str(raw["es"])))
        except KeyError as exc:
            raise MalformedRegistry(f"{source}: topics[{i}] missing field {exc}") from None

    if len(schemes) != 20:
        raise InvariantViolation(f"expected 20 schemes, found {len(schemes)}")
    acronyms = [s.acronym for s in schemes]
    dup = {a for a in acronyms if acronyms.count(a) > 1}
    if dup:
        raise InvariantViolation(f"duplicate scheme acronyms: {sorted(dup)}")
    for s in schemes:
        _validate_scheme(s)

    if len(topics) != 50:
        raise InvariantViolation(f"expected 50 topics, found {len(topics)}")
    ids = [t.id for t in topics]
    dup = {t for t in ids if ids.count(t) > 1}
    if dup:
        raise InvariantViolation(f"duplicate topic ids: {sorted(dup)}")
    for lang in LANGUAGES:
        surfaces = [t.surface(lang).strip().lower() for t in topics]
        dup = {x for x in surfaces if surfaces.count(x) > 1}
        if dup:
            raise InvariantViolation(f"duplicate {lang} topic surfaces: {sorted(dup)}")
        if any(not s for s in surfaces):
            raise InvariantViolation(f"empty {lang} topic surface")

    version = doc.get("version", 1)
    if not isinstance(version, int):
        raise MalformedRegistry(f"{source}: version must be an integer")
    return Registry(schemes, topics, version=version)


def load_registry(path: str | Path | None = None) -> Registry:
    """Load and validate a registry document; defaults to the bundled one."""
    p = Path(path) if path is not None else bundled_registry_path()
    try:
        text = p.read_text(encoding="utf-8")
    except OSError as exc:
        raise MalformedRegistry(f"cannot read registry {p}: {exc}") from None
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise MalformedRegistry(f"{p}: invalid YAML: {exc}") from None
    return _load_document(doc, str(p))
