"""Two-iteration generation pipeline.

Iteration 1 sends every generation key through the first-pass model. Keys whose
arguments are judged non-valid are regenerated once in iteration 2 with the
byte-identical prompt through the second-pass model; keys rejected twice drop
out. The final corpus is the union of valid arguments from both iterations, so
valid_1 + valid_2 + rejected_2 == attempted_1 always holds.

Verdict sources:
- mock-oracle:  the mock profile's injected defect decides (simulates the human
                judgement the real study applied, including off-topic content);
- structural:   machine checks only (hard checks from records.structural_validate);
- human:        labels read from a CSV keyed by record id.

Run directory layout: config.snapshot, checkpoint.json, iter1/records.jsonl,
iter1/report.json, iter2/..., corpus.json, run.json. Lines are appended as keys
complete and the checkpoint advances periodically, so an interrupted run resumes
without repeating finished gateway calls. Every byte written is a deterministic
function of the config in mock mode.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field, asdict
from pathlib import Path
from typing import Callable, Mapping, Sequence

from . import calibration
from .annotation import VERDICT_NON_VALID, VERDICT_VALID, read_labels_csv
from .errors import CorruptCheckpoint, NlasError, ParseError, UnknownRun
from .gateway import (
    DEFECT_OFF_TOPIC,
    ModelEndpoint,
    MockProfile,
    RawResponse,
    generate,
    generate_mock,
)
from .prompts import build_prompt
from .records import (
    MOCK_CREATED_AT,
    NlasRecord,
    parse_response,
    record_from_dict,
    record_to_dict,
    save_corpus,
    structural_validate,
)
from .registry import GenerationKey, Registry, load_registry

REASON_STRUCTURE = "structure"
REASON_TOPIC = "topic"
REASON_STANCE = "stance"

VERDICT_SOURCES = ("mock-oracle", "structural", "human")


@dataclass
class PipelineConfig:
    languages: Sequence[str] = ("en",)
    mode: str = "mock"                     # "mock" | "http"
    profile: str = "reference-en"              # mock profile name (mock mode)
    seed: int | None = None                # overrides the profile's calibrated seed
    verdict_source: str = "mock-oracle"
    schemes: Sequence[str] | None = None
    topics: Sequence[str] | None = None
    registry_path: str | None = None
    labels_csv: str | None = None          # verdict_source == "human"
    first_endpoint: Mapping | None = None  # http mode
    second_endpoint: Mapping | None = None
    checkpoint_every: int = 200

    def canonical(self) -> dict:
        return {
            "languages": list(self.languages),
            "mode": self.mode,
            "profile": self.profile,
            "seed": self.seed,
            "verdict_source": self.verdict_source,
            "schemes": list(self.schemes) if self.schemes else None,
            "topics": list(self.topics) if self.topics else None,
            "registry_path": self.registry_path,
            "labels_csv": self.labels_csv,
            "first_endpoint": dict(self.first_endpoint) if self.first_endpoint else None,
            "second_endpoint": dict(self.second_endpoint) if self.second_endpoint else None,
            "checkpoint_every": self.checkpoint_every,
        }


def config_hash(config: PipelineConfig) -> str:
    blob = json.dumps(config.canonical(), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()[:12]


@dataclass(frozen=True)
class IterationReport:
    iteration: int
    model: str
    attempted: int
    valid: int
    nonvalid: int
    per_scheme_errors: Mapping[str, int]
    per_reason: Mapping[str, int]

    @property
    def accuracy(self) -> float:
        return self.valid / self.attempted if self.attempted else 0.0

    def to_dict(self) -> dict:
        return {
            "iteration": self.iteration,
            "model": self.model,
            "attempted": self.attempted,
            "valid": self.valid,
            "nonvalid": self.nonvalid,
            "accuracy": self.accuracy,
            "per_scheme_errors": dict(sorted(self.per_scheme_errors.items())),
            "per_reason": dict(sorted(self.per_reason.items())),
        }


@dataclass(frozen=True)
class PipelineRun:
    run_id: str
    run_dir: Path
    reports: tuple[IterationReport, ...]
    corpus: tuple[NlasRecord, ...]

    @property
    def final_valid(self) -> int:
        return len(self.corpus)


def _dump_line(obj: dict) -> str:
    return json.dumps(obj, sort_keys=True, ensure_ascii=False, separators=(",", ":")) + "\n"


class _Runner:
    def __init__(self, config: PipelineConfig, run_dir: Path, registry: Registry,
                 generators: Mapping[int, Callable[[object], RawResponse]],
                 model_names: Mapping[int, str]):
        self.config = config
        self.run_dir = run_dir
        self.registry = registry
        self.generators = generators
        self.model_names = model_names
        self.run_id = config_hash(config)
        self.human_verdicts: dict[str, tuple[str, str | None]] = {}
        if config.verdict_source == "human":
            if not config.labels_csv:
                raise NlasError("verdict_source 'human' requires labels_csv")
            for label in read_labels_csv(config.labels_csv):
                self.human_verdicts.setdefault(label.record_id, (label.verdict, label.reason))

    # -- verdicts -----------------------------------------------------------------

    def judge(self, iteration: int, key: GenerationKey,
              record: NlasRecord | None, parse_error: str | None) -> tuple[str, str | None]:
        source = self.config.verdict_source
        if source == "mock-oracle":
            profile = self.mock_profiles[iteration]
            defect = profile.defect_for(key)
            if defect is None and record is not None:
                return VERDICT_VALID, None
            reason = REASON_TOPIC if defect == DEFECT_OFF_TOPIC else REASON_STRUCTURE
            return VERDICT_NON_VALID, reason
        if record is None:
            return VERDICT_NON_VALID, REASON_STRUCTURE
        if source == "structural":
            verdict = structural_validate(record, self.registry)
            return (VERDICT_VALID, None) if verdict.valid else (VERDICT_NON_VALID, REASON_STRUCTURE)
        try:
            verdict, reason = self.human_verdicts[record.id]
        except KeyError:
            raise NlasError(f"no human label for record {record.id}") from None
        return verdict, reason

    mock_profiles: dict[int, MockProfile] = {}

    # -- one iteration ----------------------------------------------------------------

    def run_iteration(self, iteration: int, keys: Sequence[GenerationKey]) -> list[dict]:
        it_dir = self.run_dir / f"iter{iteration}"
        it_dir.mkdir(parents=True, exist_ok=True)
        lines_path = it_dir / "records.jsonl"

        done: list[dict] = []
        if lines_path.exists():
            with open(lines_path, encoding="utf-8") as fh:
                done = [json.loads(l) for l in fh if l.strip()]
        if len(done) > len(keys):
            raise CorruptCheckpoint(
                f"iter{iteration} has {len(done)} lines for {len(keys)} keys"
            )
        for row, key in zip(done, keys):
            if row["key"] != key.as_dict():
                raise CorruptCheckpoint(
                    f"iter{iteration} line for {row['key']} does not match expected key order"
                )

        generator = self.generators[iteration]
        with open(lines_path, "a", encoding="utf-8") as fh:
            for i in range(len(done), len(keys)):
                key = keys[i]
                prompt = build_prompt(key, self.registry)
                try:
                    raw = generator(prompt)
                except NlasError:
                    self._write_checkpoint(iteration, i, len(keys), finished=False)
                    raise
                record = None
                parse_error = None
                try:
                    record = parse_response(raw, self.registry.scheme(key.scheme),
                                            iteration=iteration, created_at=MOCK_CREATED_AT)
                except ParseError as exc:
                    parse_error = f"{type(exc).__name__}: {exc}"
                verdict, reason = self.judge(iteration, key, record, parse_error)
                checks = None
                if record is not None:
                    sv = structural_validate(record, self.registry)
                    checks = [
                        {"name": c.name, "passed": c.passed, "hard": c.hard, "detail": c.detail}
                        for c in sv.checks
                    ]
                row = {
                    "key": key.as_dict(),
                    "record": record_to_dict(record) if record else None,
                    "parse_error": parse_error,
                    "checks": checks,
                    "verdict": verdict,
                    "reason": reason,
                }
                fh.write(_dump_line(row))
                fh.flush()
                done.append(row)
                if (i + 1) % self.config.checkpoint_every == 0:
                    self._write_checkpoint(iteration, i + 1, len(keys), finished=False)
        self._write_checkpoint(iteration, len(keys), len(keys), finished=True)
        return done

    def _write_checkpoint(self, iteration: int, done: int, total: int, finished: bool) -> None:
        path = self.run_dir / "checkpoint.json"
        state = {}
        if path.exists():
            state = json.loads(path.read_text(encoding="utf-8"))
        iterations = state.get("iterations", {})
        iterations[str(iteration)] = {"done": done, "total": total, "finished": finished}
        state = {
            "run_id": self.run_id,
            "config_hash": self.run_id,
            "iterations": {k: iterations[k] for k in sorted(iterations)},
        }
        path.write_text(json.dumps(state, sort_keys=True, indent=0) + "\n", encoding="utf-8")

    # -- full run ------------------------------------------------------------------------

    def run(self) -> PipelineRun:
        keys = self.registry.enumerate_keys(
            languages=self.config.languages,
            schemes=self.config.schemes,
            topics=self.config.topics,
        )
        if not keys:
            raise NlasError("key filter selects nothing to generate")

        rows1 = self.run_iteration(1, keys)
        rejected1 = [GenerationKey(**row["key"]) for row in rows1
                     if row["verdict"] == VERDICT_NON_VALID]
        rows2 = self.run_iteration(2, rejected1) if rejected1 else []

        report1 = self._report(1, rows1)
        report2 = self._report(2, rows2)
        (self.run_dir / "iter1" / "report.json").write_text(
            json.dumps(report1.to_dict(), sort_keys=True, indent=2) + "\n", encoding="utf-8")
        it2 = self.run_dir / "iter2"
        it2.mkdir(exist_ok=True)
        (it2 / "report.json").write_text(
            json.dumps(report2.to_dict(), sort_keys=True, indent=2) + "\n", encoding="utf-8")

        corpus = [record_from_dict(row["record"]) for row in rows1 + rows2
                  if row["verdict"] == VERDICT_VALID and row["record"]]
        # Conservation: every attempted key is valid once or rejected twice.
        assert report1.valid + report2.valid + report2.nonvalid == report1.attempted, \
            "conservation violated"
        save_corpus(corpus, self.run_dir / "corpus.json")

        summary = {
            "run_id": self.run_id,
            "iterations": [report1.to_dict(), report2.to_dict()],
            "final_valid": len(corpus),
            "attempted": report1.attempted,
        }
        (self.run_dir / "run.json").write_text(
            json.dumps(summary, sort_keys=True, indent=2) + "\n", encoding="utf-8")
        return PipelineRun(run_id=self.run_id, run_dir=self.run_dir,
                           reports=(report1, report2), corpus=tuple(corpus))

    def _report(self, iteration: int, rows: Sequence[dict]) -> IterationReport:
        per_scheme: dict[str, int] = {}
        per_reason: dict[str, int] = {}
        valid = 0
        for row in rows:
            if row["verdict"] == VERDICT_VALID:
                valid += 1
            else:
                scheme = row["key"]["scheme"]
                per_scheme[scheme] = per_scheme.get(scheme, 0) + 1
                reason = row["reason"] or "unspecified"
                per_reason[reason] = per_reason.get(reason, 0) + 1
        return IterationReport(
            iteration=iteration,
            model=self.model_names.get(iteration, ""),
            attempted=len(rows),
            valid=valid,
            nonvalid=len(rows) - valid,
            per_scheme_errors=per_scheme,
            per_reason=per_reason,
        )


def _build_runner(config: PipelineConfig, run_dir: Path) -> _Runner:
    registry = load_registry(config.registry_path)
    if config.verdict_source not in VERDICT_SOURCES:
        raise NlasError(f"unknown verdict source: {config.verdict_source}")
    if config.mode == "mock":
        bundle = calibration.named_profile(config.profile, seed=config.seed)
        generators = {
            1: lambda p: generate_mock(bundle.first, p),
            2: lambda p: generate_mock(bundle.second, p),
        }
        model_names = {1: bundle.first.model_name, 2: bundle.second.model_name}
        runner = _Runner(config, run_dir, registry, generators, model_names)
        runner.mock_profiles = {1: bundle.first, 2: bundle.second}
        return runner
    if config.mode == "http":
        if not config.first_endpoint or not config.second_endpoint:
            raise NlasError("http mode requires first_endpoint and second_endpoint")
        first = ModelEndpoint(**config.first_endpoint)
        second = ModelEndpoint(**config.second_endpoint)
        if config.verdict_source == "mock-oracle":
            raise NlasError("mock-oracle verdicts require mock mode")
        generators = {1: lambda p: generate(first, p), 2: lambda p: generate(second, p)}
        model_names = {1: first.model_name, 2: second.model_name}
        return _Runner(config, run_dir, registry, generators, model_names)
    raise NlasError(f"unknown pipeline mode: {config.mode}")


def run_pipeline(config: PipelineConfig, run_dir: str | Path) -> PipelineRun:
    """Start or continue the run for this config in run_dir."""
    run_dir = Path(run_dir)
    run_dir.mkdir(parents=True, exist_ok=True)
    snapshot = run_dir / "config.snapshot"
    blob = json.dumps(config.canonical(), sort_keys=True, indent=2) + "\n"
    if snapshot.exists():
        if snapshot.read_text(encoding="utf-8") != blob:
            raise CorruptCheckpoint(
                f"{run_dir} belongs to a different config; refusing to mix runs"
            )
    else:
        snapshot.write_text(blob, encoding="utf-8")
    return _build_runner(config, run_dir).run()


def resume(run_dir: str | Path) -> PipelineRun:
    """Continue an interrupted run from its snapshot."""
    run_dir = Path(run_dir)
    snapshot = run_dir / "config.snapshot"
    if not snapshot.exists():
        raise UnknownRun(f"no run found in {run_dir}")
    try:
        data = json.loads(snapshot.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise CorruptCheckpoint(f"unreadable config snapshot: {exc}") from None
    config = PipelineConfig(**data)
    return _build_runner(config, run_dir).run()
