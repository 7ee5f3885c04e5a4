"""Record parsing, structural validation, serialization, external import."""

from __future__ import annotations

import json

import pytest
from hypothesis import given, strategies as st

from nlas.errors import (
    EmptyComponent,
    ExtraComponent,
    MissingComponent,
    NlasError,
    NotADocument,
)
from nlas.gateway import RawResponse
from nlas.records import (
    CHECK_BRACKETS,
    CHECK_COMPONENTS,
    CHECK_NONEMPTY,
    CHECK_TOPIC,
    CHECK_VARIABLES,
    NlasRecord,
    RecordComponent,
    import_external_corpus,
    import_external_record,
    load_corpus,
    make_record,
    parse_response,
    record_from_dict,
    record_id_for,
    record_to_dict,
    save_corpus,
    structural_validate,
    word_count,
)
from nlas.registry import GenerationKey


def raw_for(body, key=None):
    key = key or GenerationKey(language="en", scheme="AFPK",
                               topic_id="euthanasia", stance="in_favour")
    return RawResponse(key=key, body=body, model_name="m", latency_ms=0.0, attempt=1)


AFPK_DOC = {
    "major_premise": "Doctors are in position to know about euthanasia outcomes.",
    "minor_premise": "Doctors assert that euthanasia can be dignified.",
    "conclusion": "Euthanasia can be dignified.",
}


# --- word counting ------------------------------------------------------------------

def test_word_count_reference_sentence():
    assert word_count("Euthanasia can be a morally justifiable option") == 7


def test_word_count_strips_edge_punctuation():
    assert word_count("Well, yes: it (really) works!") == 5
    assert word_count("... --- !!!") == 0
    assert word_count("") == 0


def test_word_count_spanish_accents():
    assert word_count("La eutanasia es, según muchos, una opción digna.") == 8


def test_word_count_keeps_inner_punctuation():
    assert word_count("state-of-the-art approach") == 2
    assert word_count("it's fine") == 2


@given(st.lists(st.text(alphabet="abcñé", min_size=1, max_size=6), max_size=8))
def test_word_count_concatenation_additive(words):
    text = " ".join(words)
    assert word_count(text) == len(words)
    assert word_count(text + " ...") == len(words)


# --- parsing ------------------------------------------------------------------------

def test_parse_valid_document(registry):
    record = parse_response(raw_for(json.dumps(AFPK_DOC)), registry.scheme("AFPK"))
    assert [c.role for c in record.components] == [
        "major_premise", "minor_premise", "conclusion"]
    assert record.id == "en-afpk-euthanasia-in_favour-i1"
    assert record.words == word_count(record.full_text)


def test_parse_fenced_document(registry):
    body = "```json\n" + json.dumps(AFPK_DOC) + "\n```"
    record = parse_response(raw_for(body), registry.scheme("AFPK"))
    assert record.components[0].text == AFPK_DOC["major_premise"]


def test_parse_document_with_surrounding_prose(registry):
    body = "Sure! Here is the answer:\n" + json.dumps(AFPK_DOC) + "\nHope this helps."
    record = parse_response(raw_for(body), registry.scheme("AFPK"))
    assert record.components[-1].text == AFPK_DOC["conclusion"]


def test_parse_keys_case_insensitive(registry):
    doc = {k.upper(): v for k, v in AFPK_DOC.items()}
    record = parse_response(raw_for(json.dumps(doc)), registry.scheme("AFPK"))
    assert record.components[0].role == "major_premise"


def test_parse_missing_component(registry):
    doc = dict(AFPK_DOC)
    del doc["minor_premise"]
    with pytest.raises(MissingComponent, match="minor_premise"):
        parse_response(raw_for(json.dumps(doc)), registry.scheme("AFPK"))


def test_parse_extra_component(registry):
    doc = dict(AFPK_DOC, commentary="extra")
    with pytest.raises(ExtraComponent, match="commentary"):
        parse_response(raw_for(json.dumps(doc)), registry.scheme("AFPK"))


def test_parse_empty_component(registry):
    doc = dict(AFPK_DOC, conclusion="   ")
    with pytest.raises(EmptyComponent, match="conclusion"):
        parse_response(raw_for(json.dumps(doc)), registry.scheme("AFPK"))


def test_parse_prose_only(registry):
    with pytest.raises(NotADocument):
        parse_response(raw_for("I am sorry, I cannot answer."), registry.scheme("AFPK"))


def test_parse_coerces_scalars(registry):
    doc = dict(AFPK_DOC, conclusion=42)
    record = parse_response(raw_for(json.dumps(doc)), registry.scheme("AFPK"))
    assert record.components[-1].text == "42"


def test_parse_iteration_stamps_id(registry):
    record = parse_response(raw_for(json.dumps(AFPK_DOC)), registry.scheme("AFPK"),
                            iteration=2)
    assert record.id.endswith("-i2")
    assert record.iteration == 2


# --- structural validation ----------------------------------------------------------

def test_structural_all_pass(record_factory, registry):
    verdict = structural_validate(record_factory(), registry)
    assert verdict.valid
    assert {c.name for c in verdict.checks} == {
        CHECK_COMPONENTS, CHECK_BRACKETS, CHECK_NONEMPTY, CHECK_TOPIC, CHECK_VARIABLES}


def test_structural_wrong_component_order(registry, record_factory):
    record = record_factory()
    shuffled = make_record(
        key=record.key,
        components=tuple(reversed(record.components)),
        model=record.model, iteration=1, record_id=record.id,
    )
    verdict = structural_validate(shuffled, registry)
    assert not verdict.valid
    assert not verdict.check(CHECK_COMPONENTS).passed


def test_structural_residual_variable(registry, record_factory):
    record = record_factory()
    components = list(record.components)
    components[0] = RecordComponent(role=components[0].role,
                                    text=components[0].text + " [Someone]")
    bad = make_record(key=record.key, components=components, model=record.model,
                      iteration=1, record_id=record.id)
    verdict = structural_validate(bad, registry)
    assert not verdict.valid
    assert not verdict.check(CHECK_BRACKETS).passed


def test_structural_topic_soft_check(registry):
    key = GenerationKey(language="en", scheme="AFPK",
                        topic_id="euthanasia", stance="in_favour")
    doc = {
        "major_premise": "Gardeners are in position to know about flower beds.",
        "minor_premise": "Gardeners assert that tulips bloom in spring.",
        "conclusion": "Tulips bloom in spring.",
    }
    record = parse_response(raw_for(json.dumps(doc), key), registry.scheme("AFPK"))
    verdict = structural_validate(record, registry)
    assert verdict.valid  # soft check does not invalidate
    assert not verdict.check(CHECK_TOPIC).passed


def test_structural_variable_consistency_soft_check(registry):
    key = GenerationKey(language="en", scheme="AFPK",
                        topic_id="euthanasia", stance="in_favour")
    # [Someone] instantiated differently across components, template otherwise kept.
    doc = {
        "major_premise": "Doctors is in position to know about things in a certain"
                         " subject domain euthanasia care containing proposition"
                         " euthanasia can be dignified.",
        "minor_premise": "Nurses asserts that euthanasia can be dignified is true.",
        "conclusion": "euthanasia can be dignified is true.",
    }
    record = parse_response(raw_for(json.dumps(doc), key), registry.scheme("AFPK"))
    verdict = structural_validate(record, registry)
    assert verdict.valid
    assert not verdict.check(CHECK_VARIABLES).passed


def test_structural_paraphrase_not_assessable_passes(registry):
    key = GenerationKey(language="en", scheme="AFPK",
                        topic_id="euthanasia", stance="in_favour")
    doc = {
        "major_premise": "Palliative physicians understand euthanasia deeply.",
        "minor_premise": "They hold that assisted dying can be dignified.",
        "conclusion": "Assisted dying regarding euthanasia can be dignified.",
    }
    record = parse_response(raw_for(json.dumps(doc), key), registry.scheme("AFPK"))
    verdict = structural_validate(record, registry)
    assert verdict.valid
    assert verdict.check(CHECK_VARIABLES).passed  # not assessable -> no complaint


# --- serialization ------------------------------------------------------------------

def test_record_dict_round_trip(record_factory):
    record = record_factory(language="es", scheme="SS", topic_id="climate-change",
                            stance="against")
    data = record_to_dict(record)
    again = record_from_dict(data)
    assert again == record
    assert data["language"] == "es"
    assert data["stance"] == "against"


def test_save_load_corpus_plain_and_gzip(small_corpus, tmp_path):
    plain = tmp_path / "corpus.json"
    zipped = tmp_path / "corpus.json.gz"
    save_corpus(small_corpus, plain)
    save_corpus(small_corpus, zipped)
    assert load_corpus(plain) == small_corpus
    assert load_corpus(zipped) == small_corpus
    assert plain.stat().st_size > zipped.stat().st_size


def test_save_corpus_bytes_deterministic(small_corpus, tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    save_corpus(small_corpus, a)
    save_corpus(small_corpus, b)
    assert a.read_bytes() == b.read_bytes()


def test_load_corpus_rejects_non_array(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text('{"not": "an array"}', encoding="utf-8")
    with pytest.raises(NlasError, match="array"):
        load_corpus(path)


def test_load_corpus_rejects_bad_json(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text("[{", encoding="utf-8")
    with pytest.raises(NlasError, match="JSON"):
        load_corpus(path)


# --- external import ----------------------------------------------------------------

def external_payload(**overrides):
    data = {
        "id": "x-1",
        "argument_scheme": "AFPK",
        "topic": "Euthanasia",
        "stance": "in favour",
        "language": "english",
        "components": [
            {"role": "major_premise", "text": AFPK_DOC["major_premise"]},
            {"role": "minor_premise", "text": AFPK_DOC["minor_premise"]},
            {"role": "conclusion", "text": AFPK_DOC["conclusion"]},
        ],
    }
    data.update(overrides)
    return data


def test_import_record_with_aliases(registry):
    record = import_external_record(external_payload(), registry, "fallback")
    assert record.key.scheme == "AFPK"
    assert record.key.topic_id == "euthanasia"
    assert record.key.stance == "in_favour"
    assert record.key.language == "en"
    assert record.id == "x-1"


def test_import_record_spanish_aliases(registry):
    topic_es = registry.topic("euthanasia").es
    data = external_payload(topic=topic_es, stance="en contra", language="español")
    record = import_external_record(data, registry, "fallback")
    assert record.key.topic_id == "euthanasia"
    assert record.key.stance == "against"
    assert record.key.language == "es"


def test_import_record_top_level_role_keys(registry):
    data = external_payload()
    del data["components"]
    data.update(AFPK_DOC)
    record = import_external_record(data, registry, "fallback")
    assert [c.role for c in record.components] == [
        "major_premise", "minor_premise", "conclusion"]


def test_import_record_unknown_stance(registry):
    with pytest.raises(NlasError, match="stance"):
        import_external_record(external_payload(stance="sideways"), registry, "f")


def test_import_record_unknown_topic(registry):
    with pytest.raises(NlasError, match="topic"):
        import_external_record(external_payload(topic="Quantum Chess"), registry, "f")


def test_import_corpus_from_directory(registry, tmp_path):
    (tmp_path / "a.json").write_text(json.dumps([external_payload()]), encoding="utf-8")
    (tmp_path / "b.json").write_text(
        json.dumps(external_payload(id="x-2", stance="against")), encoding="utf-8")
    records = import_external_corpus(tmp_path, registry)
    assert {r.id for r in records} == {"x-1", "x-2"}


def test_import_reference_fixture(reference_records):
    assert len(reference_records) == 1893 + 1917
    languages = {r.key.language for r in reference_records}
    assert languages == {"en", "es"}


# --- id format ----------------------------------------------------------------------

def test_record_id_format():
    key = GenerationKey(language="es", scheme="AFSC", topic_id="climate-change",
                        stance="against")
    assert record_id_for(key, 2) == "es-afsc-climate-change-against-i2"
