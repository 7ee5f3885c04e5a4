"""Command line interface.

Subcommands: schemes (list/show), generate, validate, annotate (serve/import/
kappa/apply), stats, classify (train/eval), import. Exit codes: 0 success,
1 usage error, 2 data or configuration error.

generate reads defaults from an optional YAML config file; explicit flags win
over config values, which win over built-in defaults.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click
import yaml

from . import __version__, calibration
from .analytics import (
    compare_conflict_definitions,
    compute_stats,
    histogram_csv as render_histogram_csv,
    stats_to_dict,
    summary_table,
)
from .annotation import (
    LabelStore,
    agreement_report,
    create_tasks,
    read_labels_csv,
    resolve_verdicts,
)
from .classifier import (
    build_items,
    evaluate,
    load_model,
    make_homogeneous_split,
    make_topicwise_split,
    assert_no_topic_leakage,
    run_homogeneous_protocol,
    run_topicwise_protocol,
    save_model,
    train,
)
from .errors import NlasError
from .pipeline import PipelineConfig, resume as resume_run, run_pipeline
from .records import (
    import_external_corpus,
    load_corpus,
    save_corpus,
    structural_validate,
)
from .registry import LANGUAGES, load_registry


@click.group()
@click.version_option(version=__version__, prog_name="nlas")
def cli() -> None:
    """Argumentation scheme corpus toolkit."""


# --- schemes -----------------------------------------------------------------

@cli.group()
def schemes() -> None:
    """Inspect the scheme registry."""


@schemes.command("list")
@click.option("--registry", "registry_path", type=click.Path(exists=True), default=None)
@click.option("--lang", default="en", type=click.Choice(list(LANGUAGES)))
def schemes_list(registry_path, lang) -> None:
    registry = load_registry(registry_path)
    for s in registry.schemes:
        name = s.name if lang == "en" else s.name_es
        stance = "stance-bearing" if s.stance_bearing else "stance-free"
        click.echo(f"{s.acronym:6} {name} ({s.premise_count} premises, {stance})")


@schemes.command("show")
@click.argument("acronym")
@click.option("--registry", "registry_path", type=click.Path(exists=True), default=None)
@click.option("--lang", default="en", type=click.Choice(list(LANGUAGES)))
def schemes_show(acronym, registry_path, lang) -> None:
    registry = load_registry(registry_path)
    scheme = registry.scheme(acronym.upper())
    name = scheme.name if lang == "en" else scheme.name_es
    click.echo(f"{scheme.acronym}: {name}")
    click.echo(registry.render_pattern(scheme.acronym, lang))


# --- generate -----------------------------------------------------------------

@cli.command()
@click.option("--run-dir", required=True, type=click.Path())
@click.option("--config", "config_path", type=click.Path(exists=True), default=None,
              help="YAML file with default option values.")
@click.option("--mock/--http", "mock", default=None)
@click.option("--profile", default=None, help=f"one of {', '.join(calibration.PROFILE_NAMES)}")
@click.option("--seed", type=int, default=None)
@click.option("--languages", default=None, help="comma-separated, e.g. en or en,es")
@click.option("--schemes", "scheme_filter", default=None, help="comma-separated acronyms")
@click.option("--topics", "topic_filter", default=None, help="comma-separated topic ids")
@click.option("--verdict-source", default=None,
              type=click.Choice(["mock-oracle", "structural", "human"]))
@click.option("--labels-csv", type=click.Path(exists=True), default=None)
@click.option("--endpoints", "endpoints_path", type=click.Path(exists=True), default=None,
              help="YAML with first/second endpoint definitions (http mode).")
@click.option("--resume", "do_resume", is_flag=True, default=False)
def generate(run_dir, config_path, mock, profile, seed, languages, scheme_filter,
             topic_filter, verdict_source, labels_csv, endpoints_path, do_resume) -> None:
    """Run (or resume) the two-iteration generation pipeline."""
    if do_resume:
        run = resume_run(run_dir)
    else:
        file_cfg = {}
        if config_path:
            loaded = yaml.safe_load(Path(config_path).read_text(encoding="utf-8")) or {}
            if not isinstance(loaded, dict):
                raise NlasError(f"config file {config_path} must hold a mapping")
            file_cfg = loaded

        def pick(flag, key, default):
            if flag is not None:
                return flag
            return file_cfg.get(key, default)

        langs = pick(languages, "languages", "en")
        if isinstance(langs, str):
            langs = [l.strip() for l in langs.split(",") if l.strip()]
        endpoints = {}
        ep_path = pick(endpoints_path, "endpoints", None)
        if ep_path:
            endpoints = yaml.safe_load(Path(ep_path).read_text(encoding="utf-8")) or {}
        profile_name = pick(profile, "profile", f"reference-{langs[0]}")
        config = PipelineConfig(
            languages=langs,
            mode="mock" if pick(mock, "mock", True) else "http",
            profile=profile_name,
            seed=pick(seed, "seed", None),
            verdict_source=pick(verdict_source, "verdict_source", "mock-oracle"),
            schemes=[s.strip().upper() for s in scheme_filter.split(",")] if scheme_filter
            else file_cfg.get("schemes"),
            topics=[t.strip() for t in topic_filter.split(",")] if topic_filter
            else file_cfg.get("topics"),
            labels_csv=pick(labels_csv, "labels_csv", None),
            first_endpoint=endpoints.get("first"),
            second_endpoint=endpoints.get("second"),
        )
        run = run_pipeline(config, run_dir)
    r1, r2 = run.reports
    click.echo(f"run {run.run_id} in {run.run_dir}")
    click.echo(f"iteration 1: {r1.valid}/{r1.attempted} valid ({r1.accuracy:.1%})")
    click.echo(f"iteration 2: {r2.valid}/{r2.attempted} valid"
               + (f" ({r2.accuracy:.1%})" if r2.attempted else ""))
    click.echo(f"final corpus: {run.final_valid} arguments -> {run.run_dir / 'corpus.json'}")


# --- validate -----------------------------------------------------------------

@cli.command()
@click.option("--corpus", required=True, type=click.Path(exists=True))
@click.option("--registry", "registry_path", type=click.Path(exists=True), default=None)
@click.option("--out", type=click.Path(), default=None, help="write a JSON report here")
def validate(corpus, registry_path, out) -> None:
    """Structurally validate every record of a corpus file."""
    registry = load_registry(registry_path)
    records = load_corpus(corpus)
    results = [structural_validate(r, registry) for r in records]
    n_valid = sum(1 for v in results if v.valid)
    failed = [v for v in results if not v.valid]
    soft_flags = sum(1 for v in results for c in v.checks if not c.hard and not c.passed)
    click.echo(f"{n_valid}/{len(records)} records structurally valid; "
               f"{soft_flags} soft-check flags")
    for v in failed[:10]:
        problems = "; ".join(f"{c.name}: {c.detail}" for c in v.checks if c.hard and not c.passed)
        click.echo(f"  {v.record_id}: {problems}")
    if out:
        payload = [
            {"record_id": v.record_id, "valid": v.valid,
             "checks": [{"name": c.name, "passed": c.passed, "hard": c.hard,
                         "detail": c.detail} for c in v.checks]}
            for v in results
        ]
        Path(out).write_text(json.dumps(payload, indent=2, ensure_ascii=False),
                             encoding="utf-8")
        click.echo(f"report -> {out}")
    if failed:
        sys.exit(2)


# --- annotate -----------------------------------------------------------------

@cli.group()
def annotate() -> None:
    """Human annotation workflow."""


@annotate.command("serve")
@click.option("--corpus", required=True, type=click.Path(exists=True))
@click.option("--store", "store_dir", required=True, type=click.Path())
@click.option("--annotators", required=True, help="comma-separated annotator ids")
@click.option("--overlap", type=float, default=0.1, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--bind", default="127.0.0.1:8765", show_default=True)
@click.option("--registry", "registry_path", type=click.Path(exists=True), default=None)
@click.option("--ui-dir", type=click.Path(exists=True), default=None,
              help="directory with the built browser UI (index.html + assets)")
def annotate_serve(corpus, store_dir, annotators, overlap, seed, bind,
                   registry_path, ui_dir) -> None:
    """Create tasks (once) and serve the annotation API and UI."""
    from .server import create_app, serve

    registry = load_registry(registry_path)
    records = {r.id: r for r in load_corpus(corpus)}
    store = LabelStore(store_dir)
    if not store.tasks:
        names = [a.strip() for a in annotators.split(",") if a.strip()]
        tasks = create_tasks(list(records.values()), names,
                             overlap_fraction=overlap, seed=seed)
        store.set_tasks(tasks)
        click.echo(f"created {len(tasks)} tasks for {len(names)} annotators")
    else:
        click.echo(f"store already holds {len(store.tasks)} tasks; reusing")
    if ui_dir is None:
        default_ui = Path(__file__).resolve().parents[2] / "frontend" / "dist"
        if default_ui.is_dir():
            ui_dir = default_ui
    host, _, port = bind.partition(":")
    app = create_app(store, records, registry, ui_dir)
    click.echo(f"serving on http://{host}:{port or 8765}/")
    serve(app, host=host, port=int(port or 8765))


@annotate.command("import")
@click.option("--store", "store_dir", required=True, type=click.Path())
@click.option("--csv", "csv_path", required=True, type=click.Path(exists=True))
@click.option("--replace", is_flag=True, default=False,
              help="overwrite labels that already exist")
def annotate_import(store_dir, csv_path, replace) -> None:
    """Import labels from a CSV with columns record_id, annotator, verdict, reason."""
    store = LabelStore(store_dir)
    labels = read_labels_csv(csv_path)
    n = store.import_labels(labels, replace=replace)
    click.echo(f"imported {n} labels into {store_dir}")


@annotate.command("kappa")
@click.option("--store", "store_dir", required=True, type=click.Path(exists=True))
@click.option("--group", default=None, help="overlap group id (default: the only one)")
@click.option("--json", "as_json", is_flag=True, default=False)
def annotate_kappa(store_dir, group, as_json) -> None:
    """Inter-annotator agreement over an overlap group."""
    store = LabelStore(store_dir)
    report = agreement_report(store, group)
    if as_json:
        click.echo(json.dumps({
            "group": report.group,
            "n_records": report.n_records,
            "pairs": [{"annotators": [p.annotator_a, p.annotator_b], "kappa": p.kappa,
                       "observed_agreement": p.observed_agreement,
                       "expected_agreement": p.expected_agreement, "n": p.n}
                      for p in report.pairs],
            "mean_kappa": report.mean_kappa,
            "fleiss_kappa": report.fleiss,
        }, indent=2))
        return
    click.echo(f"group {report.group}: {report.n_records} records")
    for p in report.pairs:
        click.echo(f"  {p.annotator_a} / {p.annotator_b}: kappa={p.kappa:.4f} "
                   f"(p_o={p.observed_agreement:.4f}, p_e={p.expected_agreement:.4f}, n={p.n})")
    click.echo(f"mean pairwise kappa: {report.mean_kappa:.4f}")
    click.echo(f"fleiss kappa:        {report.fleiss:.4f}")


@annotate.command("apply")
@click.option("--corpus", required=True, type=click.Path(exists=True))
@click.option("--store", "store_dir", required=True, type=click.Path(exists=True))
@click.option("--primary", default=None,
              help="annotator whose labels decide overlap records")
@click.option("--out", required=True, type=click.Path())
def annotate_apply(corpus, store_dir, primary, out) -> None:
    """Assemble the human-validated corpus: keep records labeled valid."""
    records = load_corpus(corpus)
    store = LabelStore(store_dir)
    verdicts = resolve_verdicts(store, primary)
    kept = [r for r in records if verdicts.get(r.id) == "valid"]
    dropped = [r for r in records if verdicts.get(r.id) == "non_valid"]
    unlabeled = len(records) - len(kept) - len(dropped)
    save_corpus(kept, out)
    click.echo(f"kept {len(kept)} valid, dropped {len(dropped)} non-valid, "
               f"{unlabeled} unlabeled -> {out}")


# --- stats -----------------------------------------------------------------

@cli.command()
@click.option("--corpus", type=click.Path(exists=True), default=None)
@click.option("--language", default=None, help="restrict to one language")
@click.option("--registry", "registry_path", type=click.Path(exists=True), default=None)
@click.option("--strategy", default="all_pairs",
              type=click.Choice(["all_pairs", "same_scheme"]), show_default=True)
@click.option("--compare-strategies", is_flag=True, default=False)
@click.option("--sample-sd", is_flag=True, default=False,
              help="display sample instead of population standard deviation")
@click.option("--out", type=click.Path(), default=None, help="write JSON report here")
@click.option("--report", "report_path", type=click.Path(exists=True), default=None,
              help="iteration report.json for error-distribution export")
@click.option("--histogram-csv", "histogram_out", type=click.Path(), default=None)
def stats(corpus, language, registry_path, strategy, compare_strategies, sample_sd,
          out, report_path, histogram_out) -> None:
    """Corpus statistics, or error-distribution export from an iteration report."""
    if report_path:
        data = json.loads(Path(report_path).read_text(encoding="utf-8"))
        csv_text = render_histogram_csv(data.get("per_scheme_errors", {}))
        if histogram_out:
            Path(histogram_out).write_text(csv_text, encoding="utf-8")
            click.echo(f"histogram -> {histogram_out}")
        else:
            click.echo(csv_text, nl=False)
        return
    if not corpus:
        raise click.UsageError("provide --corpus (or --report for error histograms)")
    registry = load_registry(registry_path)
    records = load_corpus(corpus)
    result = compute_stats(records, registry, language, conflict_strategy=strategy)
    click.echo(summary_table(result, sample_sd=sample_sd))
    if compare_strategies:
        totals = compare_conflict_definitions(records, registry, language)
        click.echo("conflict strategy comparison: "
                   + ", ".join(f"{k}={v}" for k, v in sorted(totals.items())))
    if out:
        Path(out).write_text(json.dumps(stats_to_dict(result), indent=2),
                             encoding="utf-8")
        click.echo(f"report -> {out}")


# --- classify -----------------------------------------------------------------

@cli.group()
def classify() -> None:
    """Scheme classification baseline."""


def _load_items(corpus, languages):
    records = load_corpus(corpus)
    langs = [l.strip() for l in languages.split(",")] if languages else None
    return records, langs


@classify.command("train")
@click.option("--corpus", required=True, type=click.Path(exists=True))
@click.option("--languages", default=None, help="comma-separated; default all")
@click.option("--mode", default="homogeneous",
              type=click.Choice(["homogeneous", "topicwise"]), show_default=True)
@click.option("--fold", type=int, default=1, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--registry", "registry_path", type=click.Path(exists=True), default=None)
@click.option("--model-out", required=True, type=click.Path())
@click.option("--metrics-out", type=click.Path(), default=None)
def classify_train(corpus, languages, mode, fold, seed, registry_path,
                   model_out, metrics_out) -> None:
    """Train on the chosen split and report dev metrics."""
    records, langs = _load_items(corpus, languages)
    items = build_items(records, langs)
    if mode == "homogeneous":
        dataset = make_homogeneous_split(items, seed=seed)
    else:
        registry = load_registry(registry_path)
        dataset = make_topicwise_split(items, registry, fold=fold, seed=seed)
        assert_no_topic_leakage(dataset)
    clf = train(dataset, seed=seed)
    save_model(clf, model_out)
    metrics = evaluate(clf, dataset, "dev")
    click.echo(f"trained on {len(dataset.split('train'))} items; model -> {model_out}")
    click.echo(f"dev: macro-F1={metrics.macro_f1:.4f} accuracy={metrics.accuracy:.4f} "
               f"(n={metrics.n})")
    if metrics_out:
        Path(metrics_out).write_text(json.dumps(metrics.to_dict(), indent=2),
                                     encoding="utf-8")


@classify.command("eval")
@click.option("--corpus", required=True, type=click.Path(exists=True))
@click.option("--languages", default=None)
@click.option("--model", "model_path", type=click.Path(exists=True), default=None,
              help="evaluate a saved model on a fresh split")
@click.option("--mode", default="homogeneous",
              type=click.Choice(["homogeneous", "topicwise"]), show_default=True)
@click.option("--protocol", is_flag=True, default=False,
              help="run the full protocol (3 seeds or 5 folds) instead of one split")
@click.option("--fold", type=int, default=1, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--seeds", default="0,1,2", show_default=True,
              help="protocol seeds for homogeneous mode")
@click.option("--split", default="test", type=click.Choice(["train", "dev", "test"]),
              show_default=True)
@click.option("--registry", "registry_path", type=click.Path(exists=True), default=None)
@click.option("--out", type=click.Path(), default=None)
def classify_eval(corpus, languages, model_path, mode, protocol, fold, seed, seeds,
                  split, registry_path, out) -> None:
    """Evaluate a model or run a full evaluation protocol."""
    records, langs = _load_items(corpus, languages)
    if protocol:
        if mode == "homogeneous":
            seed_list = [int(s) for s in seeds.split(",")]
            result = run_homogeneous_protocol(records, langs, seeds=seed_list)
            click.echo(f"homogeneous protocol over seeds {seed_list}: "
                       f"mean macro-F1={result['mean_macro_f1']:.4f} "
                       f"mean accuracy={result['mean_accuracy']:.4f}")
        else:
            registry = load_registry(registry_path)
            result = run_topicwise_protocol(records, registry, langs, seed=seed)
            folds = " ".join(f"{f:.4f}" for f in result["per_fold_macro_f1"])
            click.echo(f"topic-wise protocol: per-fold macro-F1 [{folds}] "
                       f"mean={result['mean_macro_f1']:.4f}")
        if out:
            Path(out).write_text(json.dumps(result, indent=2), encoding="utf-8")
            click.echo(f"metrics -> {out}")
        return
    items = build_items(records, langs)
    if mode == "homogeneous":
        dataset = make_homogeneous_split(items, seed=seed)
    else:
        registry = load_registry(registry_path)
        dataset = make_topicwise_split(items, registry, fold=fold, seed=seed)
        assert_no_topic_leakage(dataset)
    clf = load_model(model_path) if model_path else train(dataset, seed=seed)
    metrics = evaluate(clf, dataset, split)
    click.echo(f"{split}: macro-F1={metrics.macro_f1:.4f} "
               f"macro-P={metrics.macro_precision:.4f} macro-R={metrics.macro_recall:.4f} "
               f"accuracy={metrics.accuracy:.4f} (n={metrics.n})")
    if out:
        Path(out).write_text(json.dumps(metrics.to_dict(), indent=2), encoding="utf-8")
        click.echo(f"metrics -> {out}")


# --- import -----------------------------------------------------------------

@cli.command("import")
@click.option("--src", required=True, type=click.Path(exists=True),
              help="externally published archive (file or directory)")
@click.option("--out", required=True, type=click.Path())
@click.option("--registry", "registry_path", type=click.Path(exists=True), default=None)
def import_cmd(src, out, registry_path) -> None:
    """Convert an external archive into the native corpus format."""
    registry = load_registry(registry_path)
    records = import_external_corpus(src, registry)
    save_corpus(records, out)
    click.echo(f"imported {len(records)} records -> {out}")


def main(argv: list[str] | None = None) -> None:
    try:
        cli.main(args=argv, standalone_mode=False)
    except click.exceptions.Exit as exc:
        sys.exit(exc.exit_code)
    except click.ClickException as exc:
        exc.show()
        sys.exit(1)
    except click.exceptions.Abort:
        sys.exit(1)
    except NlasError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(2)
    sys.exit(0)


if __name__ == "__main__":
    main()
