"""Toolkit for generating, validating and analysing natural-language
argumentation scheme corpora with instruction-following language models."""

__version__ = "0.1.0"

from .registry import (  # noqa: F401
    GenerationKey,
    Registry,
    load_registry,
    LANGUAGES,
    STANCES,
    STANCE_AGAINST,
    STANCE_IN_FAVOUR,
)
