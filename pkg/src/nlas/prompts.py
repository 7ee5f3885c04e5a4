"""Prompt construction.

A generation prompt has three parts, in a fixed order:

1. type specification: one sentence naming the scheme, the stance and the topic,
   e.g. "Provide a position to know argument in favour of euthanasia."
2. pattern block: the scheme template rendered verbatim from the registry.
3. output format block: instructions to answer with a single JSON object whose
   keys are the component roles of the scheme.

Spanish keys get fully Spanish prompts (name, pattern, instructions alike).
"""

from __future__ import annotations

from dataclasses import dataclass

from .registry import GenerationKey, Registry, SchemeTemplate, STANCE_IN_FAVOUR

STANCE_PHRASES = {
    "en": {STANCE_IN_FAVOUR: "in favour of", "against": "against"},
    "es": {STANCE_IN_FAVOUR: "a favor de", "against": "en contra de"},
}


@dataclass(frozen=True)
class PromptSpec:
    key: GenerationKey
    type_specification: str
    pattern_block: str
    output_format_block: str

    @property
    def rendered(self) -> str:
        return "\n\n".join(
            (self.type_specification, self.pattern_block, self.output_format_block)
        )

    def to_dict(self) -> dict:
        return {
            "key": self.key.as_dict(),
            "type_specification": self.type_specification,
            "pattern_block": self.pattern_block,
            "output_format_block": self.output_format_block,
            "rendered": self.rendered,
        }


def _embed_topic(surface: str) -> str:
    """Lowercase a leading capitalized word for mid-sentence use; acronyms survive."""
    if len(surface) >= 2 and surface[0].isupper() and surface[1].islower():
        return surface[0].lower() + surface[1:]
    return surface


def _article_en(noun_phrase: str) -> str:
    return "an" if noun_phrase[:1].lower() in "aeiou" else "a"


def build_type_specification(key: GenerationKey, registry: Registry) -> str:
    scheme = registry.scheme(key.scheme)
    topic = registry.topic(key.topic_id)
    stance_phrase = STANCE_PHRASES[key.language][key.stance]
    topic_text = _embed_topic(topic.surface(key.language))
    if key.language == "en":
        name = scheme.prompt_name
        return f"Provide {_article_en(name)} {name} argument {stance_phrase} {topic_text}."
    return f"Proporciona un argumento {scheme.prompt_name_es} {stance_phrase} {topic_text}."


def build_output_instructions(scheme: SchemeTemplate, language: str = "en") -> str:
    keys = [f'"{role}"' for role in scheme.roles]
    if language == "en":
        if len(keys) == 1:
            key_list = keys[0]
        else:
            key_list = ", ".join(keys[:-1]) + " and " + keys[-1]
        return (
            "Answer only with a single JSON object that keeps the structure of the "
            f"argumentation scheme above, using exactly the keys {key_list}. "
            "Write every value as natural language text, replacing each bracketed "
            "variable of the scheme with concrete content; no bracketed variable may "
            "remain in your answer."
        )
    if len(keys) == 1:
        key_list = keys[0]
    else:
        key_list = ", ".join(keys[:-1]) + " y " + keys[-1]
    return (
        "Responde únicamente con un solo objeto JSON que mantenga la estructura del "
        f"esquema argumentativo anterior, usando exactamente las claves {key_list}. "
        "Escribe cada valor como texto en lenguaje natural, sustituyendo cada variable "
        "entre corchetes del esquema por contenido concreto; ninguna variable entre "
        "corchetes puede quedar en tu respuesta."
    )


def build_prompt(key: GenerationKey, registry: Registry) -> PromptSpec:
    """Compose the three-part prompt for one generation key."""
    scheme = registry.scheme(key.scheme)
    return PromptSpec(
        key=key,
        type_specification=build_type_specification(key, registry),
        pattern_block=registry.render_pattern(key.scheme, key.language),
        output_format_block=build_output_instructions(scheme, key.language),
    )
