"""Shared fixtures: registry, mock record factory, cached pipeline runs,
and the reference corpus (checked-in fixture, overridable via
NLAS_PUBLISHED_CORPUS for runs against the real archive)."""

from __future__ import annotations

import os
from pathlib import Path

import pytest

from nlas.calibration import clean_profile
from nlas.gateway import generate_mock
from nlas.pipeline import PipelineConfig, run_pipeline
from nlas.prompts import build_prompt
from nlas.records import import_external_corpus, parse_response
from nlas.registry import GenerationKey, load_registry

FIXTURE_DIR = Path(__file__).parent / "fixtures"
REFERENCE_CORPUS = FIXTURE_DIR / "reference_corpus.json.gz"


@pytest.fixture(scope="session")
def registry():
    return load_registry()


@pytest.fixture(scope="session")
def record_factory(registry):
    """Build one valid record for a key through the real generation path."""
    profile = clean_profile().first

    def factory(language="en", scheme="AFPK", topic_id="euthanasia",
                stance="in_favour", iteration=1):
        key = GenerationKey(language=language, scheme=scheme,
                            topic_id=topic_id, stance=stance)
        raw = generate_mock(profile, build_prompt(key, registry))
        return parse_response(raw, registry.scheme(scheme), iteration=iteration)

    return factory


@pytest.fixture(scope="session")
def small_corpus(registry, record_factory):
    """A handful of records spanning schemes, topics, stances, languages."""
    records = []
    topics = [t.id for t in registry.topics[:3]]
    for language in ("en", "es"):
        for scheme in ("AFPK", "AFEX", "DAH", "SS"):
            for topic_id in topics:
                for stance in ("in_favour", "against"):
                    records.append(record_factory(language, scheme, topic_id, stance))
    return records


@pytest.fixture(scope="session")
def en_run(tmp_path_factory):
    """One full EN mock pipeline run, shared by every test that only reads it."""
    run_dir = tmp_path_factory.mktemp("pipeline") / "run-en"
    config = PipelineConfig(languages=["en"], mode="mock", profile="reference-en")
    return run_pipeline(config, run_dir)


@pytest.fixture(scope="session")
def reference_records(registry):
    """The published reference corpus: the checked-in fixture by default, or a
    downloaded archive when NLAS_PUBLISHED_CORPUS points at one."""
    path = os.environ.get("NLAS_PUBLISHED_CORPUS", str(REFERENCE_CORPUS))
    return import_external_corpus(path, registry)
