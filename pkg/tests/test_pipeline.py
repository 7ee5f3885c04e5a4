"""Two-iteration pipeline: conservation, determinism, checkpoint/resume, verdicts."""

from __future__ import annotations

import json
from pathlib import Path

import pytest

import nlas.pipeline as pipeline_module
from nlas.annotation import AnnotationLabel, write_labels_csv
from nlas.errors import CorruptCheckpoint, NlasError, UnknownRun
from nlas.pipeline import PipelineConfig, PipelineRun, config_hash, resume, run_pipeline
from nlas.records import load_corpus, record_id_for
from nlas.registry import GenerationKey

SMALL = dict(languages=["en"], schemes=["AFPK", "IC", "SS", "AFEX"],
             topics=None, mode="mock", profile="reference-en")


def small_config(**overrides):
    params = {**SMALL, **overrides}
    return PipelineConfig(**params)


def tree_bytes(root: Path) -> dict[str, bytes]:
    return {str(p.relative_to(root)): p.read_bytes()
            for p in sorted(root.rglob("*")) if p.is_file()}


def read_rows(run_dir: Path, iteration: int) -> list[dict]:
    path = run_dir / f"iter{iteration}" / "records.jsonl"
    if not path.exists():
        return []
    with open(path, encoding="utf-8") as fh:
        return [json.loads(line) for line in fh if line.strip()]


@pytest.fixture(scope="module")
def es_run(tmp_path_factory):
    run_dir = tmp_path_factory.mktemp("pipeline-es") / "run-es"
    config = PipelineConfig(languages=["es"], mode="mock", profile="reference-es")
    return run_pipeline(config, run_dir)


@pytest.fixture(scope="module")
def small_run(tmp_path_factory):
    run_dir = tmp_path_factory.mktemp("pipeline-small") / "run"
    return run_pipeline(small_config(), run_dir)


def assert_conservation(run: PipelineRun):
    r1, r2 = run.reports
    assert r1.valid + r2.valid + r2.nonvalid == r1.attempted
    assert run.final_valid == r1.valid + r2.valid


# --- calibrated full runs -----------------------------------------------------------

def test_en_run_exact_numbers(en_run):
    r1, r2 = en_run.reports
    assert (r1.attempted, r1.valid) == (2000, 1496)
    assert (r2.attempted, r2.valid, r2.nonvalid) == (504, 397, 107)
    assert en_run.final_valid == 1893
    assert_conservation(en_run)


def test_es_run_exact_numbers(es_run):
    r1, r2 = es_run.reports
    assert (r1.attempted, r1.valid) == (2000, 1794)
    assert (r2.attempted, r2.valid, r2.nonvalid) == (206, 123, 83)
    assert es_run.final_valid == 1917
    assert_conservation(es_run)


def test_es_errors_dominated_by_ic(es_run):
    errors = dict(es_run.reports[0].per_scheme_errors)
    assert max(errors, key=errors.get) == "IC"
    assert sum(errors.values()) == es_run.reports[0].nonvalid


def test_run_artifacts_consistent(en_run):
    run_dir = en_run.run_dir
    summary = json.loads((run_dir / "run.json").read_text())
    assert summary["run_id"] == en_run.run_id
    assert summary["final_valid"] == 1893
    assert summary["attempted"] == 2000
    assert summary["iterations"][0]["valid"] == 1496
    report1 = json.loads((run_dir / "iter1" / "report.json").read_text())
    assert report1 == en_run.reports[0].to_dict()
    corpus = load_corpus(run_dir / "corpus.json")
    assert len(corpus) == 1893
    assert {r.id for r in corpus} == {r.id for r in en_run.corpus}


def test_iteration2_reuses_rejected_keys_in_order(small_run):
    rows1 = read_rows(small_run.run_dir, 1)
    rows2 = read_rows(small_run.run_dir, 2)
    rejected = [row["key"] for row in rows1 if row["verdict"] == "non_valid"]
    assert rejected, "calibrated profile should reject something"
    assert [row["key"] for row in rows2] == rejected
    for row in rows2:
        if row["record"]:
            key = GenerationKey(**row["key"])
            assert row["record"]["id"] == record_id_for(key, iteration=2)


def test_second_iteration_recovers_some_keys(small_run):
    assert_conservation(small_run)
    r1, r2 = small_run.reports
    assert r2.attempted == r1.nonvalid
    assert 0 < r2.valid <= r2.attempted


def test_checkpoint_records_finished_iterations(small_run):
    state = json.loads((small_run.run_dir / "checkpoint.json").read_text())
    assert state["run_id"] == small_run.run_id
    for iteration, report in zip(("1", "2"), small_run.reports):
        entry = state["iterations"][iteration]
        assert entry == {"done": report.attempted, "total": report.attempted,
                         "finished": True}


def test_config_snapshot_written(small_run):
    snapshot = json.loads((small_run.run_dir / "config.snapshot").read_text())
    assert snapshot == small_config().canonical()


# --- determinism --------------------------------------------------------------------

def test_rerun_is_byte_identical(tmp_path):
    a = tmp_path / "a"
    b = tmp_path / "b"
    run_a = run_pipeline(small_config(), a)
    run_b = run_pipeline(small_config(), b)
    assert run_a.run_id == run_b.run_id
    assert tree_bytes(a) == tree_bytes(b)


def test_run_id_depends_on_config_not_directory(tmp_path):
    base = small_config()
    assert config_hash(base) == config_hash(small_config())
    assert config_hash(base) != config_hash(small_config(seed=123))
    assert config_hash(base) != config_hash(small_config(profile="clean"))


def test_seed_override_changes_outcome(tmp_path):
    default = run_pipeline(small_config(), tmp_path / "default")
    reseeded = run_pipeline(small_config(seed=99), tmp_path / "reseeded")
    assert reseeded.run_id != default.run_id
    assert_conservation(reseeded)
    rows_default = read_rows(default.run_dir, 1)
    rows_reseeded = read_rows(reseeded.run_dir, 1)
    assert [r["verdict"] for r in rows_default] != [r["verdict"] for r in rows_reseeded]


# --- interruption and resume --------------------------------------------------------

def test_resume_skips_finished_work_and_matches_clean_run(tmp_path, monkeypatch):
    real = pipeline_module.generate_mock
    calls = {"n": 0, "fail_at": None}

    def instrumented(profile, prompt):
        if calls["fail_at"] is not None and calls["n"] == calls["fail_at"]:
            raise NlasError("injected outage")
        calls["n"] += 1
        return real(profile, prompt)

    monkeypatch.setattr(pipeline_module, "generate_mock", instrumented)

    clean_dir = tmp_path / "clean"
    run_pipeline(small_config(), clean_dir)
    full_calls = calls["n"]

    crash_dir = tmp_path / "crash"
    calls.update(n=0, fail_at=7)
    with pytest.raises(NlasError, match="injected outage"):
        run_pipeline(small_config(), crash_dir)
    assert calls["n"] == 7
    assert len(read_rows(crash_dir, 1)) == 7

    calls.update(n=0, fail_at=None)
    resumed = resume(crash_dir)
    assert calls["n"] == full_calls - 7  # finished keys never regenerated
    assert tree_bytes(crash_dir) == tree_bytes(clean_dir)
    assert_conservation(resumed)


def test_resume_without_run(tmp_path):
    with pytest.raises(UnknownRun):
        resume(tmp_path / "nowhere")


def test_resume_with_corrupt_snapshot(tmp_path):
    run_dir = tmp_path / "run"
    run_dir.mkdir()
    (run_dir / "config.snapshot").write_text("{not json", encoding="utf-8")
    with pytest.raises(CorruptCheckpoint, match="snapshot"):
        resume(run_dir)


def test_config_drift_refused(tmp_path):
    run_dir = tmp_path / "run"
    run_pipeline(small_config(), run_dir)
    with pytest.raises(CorruptCheckpoint, match="different config"):
        run_pipeline(small_config(profile="clean"), run_dir)


def test_tampered_key_order_detected(tmp_path):
    run_dir = tmp_path / "run"
    run_pipeline(small_config(), run_dir)
    lines_path = run_dir / "iter1" / "records.jsonl"
    lines = lines_path.read_text(encoding="utf-8").splitlines(keepends=True)
    first = json.loads(lines[0])
    first["key"]["scheme"] = "DAH"
    lines[0] = json.dumps(first, sort_keys=True, separators=(",", ":")) + "\n"
    lines_path.write_text("".join(lines), encoding="utf-8")
    with pytest.raises(CorruptCheckpoint, match="key order"):
        resume(run_dir)


def test_excess_checkpoint_lines_detected(tmp_path):
    run_dir = tmp_path / "run"
    run_pipeline(small_config(), run_dir)
    lines_path = run_dir / "iter1" / "records.jsonl"
    content = lines_path.read_text(encoding="utf-8")
    lines_path.write_text(content + content, encoding="utf-8")
    with pytest.raises(CorruptCheckpoint, match="lines for"):
        resume(run_dir)


# --- verdict sources ----------------------------------------------------------------

def test_structural_verdicts_with_clean_profile(tmp_path):
    config = small_config(profile="clean", verdict_source="structural")
    run = run_pipeline(config, tmp_path / "run")
    r1, r2 = run.reports
    assert r1.valid == r1.attempted
    assert r2.attempted == 0
    assert run.final_valid == r1.attempted


def test_structural_verdicts_regenerate_hard_failures(tmp_path):
    run = run_pipeline(small_config(verdict_source="structural"), tmp_path / "run")
    assert_conservation(run)
    r1, _ = run.reports
    assert 0 < r1.nonvalid < r1.attempted
    # every reason recorded by machine checks is structural
    assert set(r1.per_reason) <= {"structure"}


def test_human_verdicts_from_csv(tmp_path, registry):
    topics = [t.id for t in registry.topics[:2]]
    config = small_config(schemes=["AFPK", "AFEX"], topics=topics, profile="clean",
                          verdict_source="human",
                          labels_csv=str(tmp_path / "labels.csv"))
    keys = registry.enumerate_keys(languages=["en"], schemes=["AFPK", "AFEX"],
                                   topics=topics)
    assert len(keys) == 8
    reject_first = {record_id_for(k, 1) for k in keys[:3]}
    labels = []
    for key in keys:
        rid = record_id_for(key, 1)
        if rid in reject_first:
            labels.append(AnnotationLabel(record_id=rid, annotator="human",
                                          verdict="non_valid", reason="topic"))
            second = record_id_for(key, 2)
            verdict = "valid" if key is keys[0] else "non_valid"
            labels.append(AnnotationLabel(
                record_id=second, annotator="human", verdict=verdict,
                reason=None if verdict == "valid" else "stance"))
        else:
            labels.append(AnnotationLabel(record_id=rid, annotator="human",
                                          verdict="valid"))
    write_labels_csv(labels, tmp_path / "labels.csv")

    run = run_pipeline(config, tmp_path / "run")
    r1, r2 = run.reports
    assert (r1.attempted, r1.valid) == (8, 5)
    assert (r2.attempted, r2.valid, r2.nonvalid) == (3, 1, 2)
    assert run.final_valid == 6
    assert r2.per_reason == {"stance": 2}
    assert_conservation(run)


def test_human_verdicts_require_labels_csv(tmp_path):
    with pytest.raises(NlasError, match="labels_csv"):
        run_pipeline(small_config(verdict_source="human"), tmp_path / "run")


def test_human_verdicts_missing_label(tmp_path, registry):
    labels = [AnnotationLabel(record_id="unrelated", annotator="h", verdict="valid")]
    write_labels_csv(labels, tmp_path / "labels.csv")
    config = small_config(schemes=["AFPK"], topics=[registry.topics[0].id],
                          profile="clean", verdict_source="human",
                          labels_csv=str(tmp_path / "labels.csv"))
    with pytest.raises(NlasError, match="no human label"):
        run_pipeline(config, tmp_path / "run")


# --- configuration validation -------------------------------------------------------

def test_unknown_mode_rejected(tmp_path):
    with pytest.raises(NlasError, match="mode"):
        run_pipeline(small_config(mode="dry"), tmp_path / "run")


def test_unknown_verdict_source_rejected(tmp_path):
    with pytest.raises(NlasError, match="verdict source"):
        run_pipeline(small_config(verdict_source="oracle"), tmp_path / "run")


def test_http_mode_requires_endpoints(tmp_path):
    with pytest.raises(NlasError, match="endpoint"):
        run_pipeline(small_config(mode="http", verdict_source="structural"),
                     tmp_path / "run")


def test_http_mode_rejects_mock_oracle_verdicts(tmp_path):
    endpoint = {"base_url": "http://localhost:9", "model_name": "m"}
    config = small_config(mode="http", first_endpoint=endpoint,
                          second_endpoint=endpoint)
    with pytest.raises(NlasError, match="mock"):
        run_pipeline(config, tmp_path / "run")


def test_empty_key_filter_rejected(tmp_path):
    with pytest.raises(NlasError, match="selects nothing"):
        run_pipeline(small_config(languages=[]), tmp_path / "run")
