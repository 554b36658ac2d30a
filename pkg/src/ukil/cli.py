"""Command-line entry point: ukil <command>.

Commands cover the whole pipeline: scrape raw act pages, build and inspect
the corpus, render the instruction-tuning dataset, fine-tune adapters,
evaluate outputs, serve or query the assistant, replay the bundled case
studies, and reconcile the expert survey tables.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from . import corpus as corpus_mod
from . import prompts as prompts_mod

PUBLISHED_PROMPT_COUNT = 18488  # released dataset's reported record count


def _cmd_scrape(args) -> int:
    from .scraper import DocumentCache, Fetcher, FetchSettings

    base_url = os.environ.get("UKIL_BASE_URL", args.base_url)
    if not base_url:
        print("error: no base URL (flag --base-url or UKIL_BASE_URL)", file=sys.stderr)
        return 2
    cache = DocumentCache(args.out)
    fetcher = Fetcher(cache, FetchSettings(rate_per_sec=args.rate))
    locators = [f"{base_url.rstrip('/')}/{path.lstrip('/')}" for path in args.pages]
    for locator in locators:
        doc = fetcher.fetch_document(locator, cache_policy=args.cache_policy)
        origin = "cache" if doc.from_cache else "network"
        print(f"fetched {locator} ({len(doc.body)} bytes, {origin})")
    return 0


def _cmd_build_corpus(args) -> int:
    from .scraper import DocumentCache, parse_act

    cache = DocumentCache(args.raw)
    acts = []
    for locator in cache.locators():
        doc = cache.get(locator)
        acts.append(parse_act(doc))
    acts.sort(key=lambda a: a.id)
    report = corpus_mod.validate_corpus(acts)
    corpus_mod.save_corpus(acts, args.out)
    print(f"wrote {len(acts)} acts to {args.out}")
    if report.errors:
        print(f"validation found {len(report.errors)} errors; run `ukil validate`")
        return 1
    return 0


def _cmd_stats(args) -> int:
    acts = corpus_mod.load_corpus(args.corpus)
    stats = corpus_mod.corpus_stats(acts)
    print(json.dumps(stats.to_dict(), indent=2))
    return 0


def _cmd_validate(args) -> int:
    acts = corpus_mod.load_corpus(args.corpus)
    report = corpus_mod.validate_corpus(acts)
    for issue in report.errors:
        where = f"act {issue.act_id}" + (
            f" section {issue.section_id}" if issue.section_id is not None else "")
        print(f"ERROR [{issue.rule}] {where}: {issue.message}")
    for issue in report.warnings:
        print(f"warning [{issue.rule}] act {issue.act_id}: {issue.message}")
    print(f"checked {report.checked_acts} acts: "
          f"{len(report.errors)} errors, {len(report.warnings)} warnings")
    return 0 if report.ok else 1


def _cmd_make_prompts(args) -> int:
    acts = corpus_mod.load_corpus(args.corpus)
    curated = corpus_mod.filter_repealed(acts)
    warnings: list[str] = []
    records = prompts_mod.build_qa_records(curated, on_warning=warnings.append)
    for msg in warnings:
        print(f"warning: {msg}")
    prompts_mod.save_records(records, args.out)
    print(f"wrote {len(records)} records to {args.out} "
          f"({len(curated)} acts, {sum(len(a.sections) for a in curated)} sections)")
    delta = len(records) - PUBLISHED_PROMPT_COUNT
    print(f"published dataset reports {PUBLISHED_PROMPT_COUNT} records "
          f"(delta {delta:+d}; informational, not enforced)")
    train, val = prompts_mod.split(
        records, prompts_mod.SplitSpec(validation_size=args.val_size, seed=args.seed))
    out = Path(args.out)
    train_path = out.with_name("train.jsonl")
    val_path = out.with_name("val.jsonl")
    prompts_mod.save_records(train, train_path)
    prompts_mod.save_records(val, val_path)
    print(f"split seed={args.seed}: {len(train)} train -> {train_path}, "
          f"{len(val)} validation -> {val_path}")
    return 0


def _cmd_train(args) -> int:
    import torch

    from .adapters import AdapterConfig, attach_adapters
    from .encoding import encode_records
    from .quantization import QuantConfig, quantize_base
    from .toybase import load_toy_base
    from .training import TrainConfig, train

    train_records = prompts_mod.load_records(args.train)
    val_records = prompts_mod.load_records(args.val)
    model, tokenizer = load_toy_base(args.base)
    cfg = TrainConfig(
        effective_batch=args.micro_batch * args.grad_accumulation,
        micro_batch=args.micro_batch,
        grad_accumulation=args.grad_accumulation,
        epochs=args.epochs,
        learning_rate=args.learning_rate,
        max_length=args.max_length,
        seed=args.seed,
    )
    adapter_cfg = AdapterConfig(rank=args.rank, alpha=args.alpha)
    quant_cfg = QuantConfig() if not args.no_quant else QuantConfig(scheme="none")
    quant_result = quantize_base(model, quant_cfg)
    attach_adapters(model, adapter_cfg)
    train_set = encode_records(train_records, tokenizer, cfg.max_length)
    val_set = encode_records(val_records, tokenizer, cfg.max_length)
    artifact = train(model, train_set, val_set, cfg,
                     adapter_cfg=adapter_cfg, quant_result=quant_result,
                     out_dir=args.out,
                     on_step=lambda step, loss: print(f"step {step}: loss {loss:.4f}"))
    if artifact.val_losses:
        print(f"best validation loss {min(v for _, v in artifact.val_losses):.4f} "
              f"(epoch {artifact.best_epoch})")
    print(f"artifacts in {args.out}")
    del torch
    return 0


def _cmd_eval(args) -> int:
    from .evaluation import (ComparisonRow, comparison_report, error_case,
                             evaluate_model, write_error_cases,
                             write_scores_csv)
    from .metrics import IdfTable

    refs = [(r.key, r.response) for r in prompts_mod.load_records(args.refs)]
    outputs = []
    with open(args.outputs, encoding="utf-8") as fp:
        for line in fp:
            if line.strip():
                d = json.loads(line)
                outputs.append((d["key"], d["text"]))
    result = evaluate_model(outputs, refs, model_name=args.model_name)
    report_dir = Path(args.report)
    report_dir.mkdir(parents=True, exist_ok=True)
    write_scores_csv(result, report_dir / "scores.csv")
    comparison_report([ComparisonRow(
        model=result.model_name, parameters=args.parameters,
        fine_tuned=args.fine_tuned, cosine=result.mean_cosine,
        jaccard=result.mean_jaccard)], report_dir)
    idf = IdfTable.fit(text for _, text in refs)
    ref_map, out_map = dict(refs), dict(outputs)
    worst = sorted(result.per_example, key=lambda s: s.jaccard)[: args.error_cases]
    cases = [error_case(key, ref_map[key], out_map[key], idf) for key in
             (s.key for s in worst)]
    write_error_cases(cases, report_dir / "errorcases")
    print(f"{result.model_name}: mean cosine {result.mean_cosine:.3f}, "
          f"mean jaccard {result.mean_jaccard:.3f} over {result.n} examples")
    print(f"reports in {report_dir}")
    return 0


def _load_handle(args):
    from .generation import load

    return load(args.base, args.adapter)


def _cmd_serve(args) -> int:
    from .service import serve

    serve(lambda: _load_handle(args), host=args.host, port=args.port)
    return 0


def _cmd_ask(args) -> int:
    handle = _load_handle(args)
    transcript = handle.answer(args.question)
    print(transcript.answer)
    if transcript.truncated:
        print("(answer truncated at the generation budget)", file=sys.stderr)
    return 0


def _cmd_run_cases(args) -> int:
    from .service import load_cases, run_cases

    handle = _load_handle(args)
    transcripts = run_cases(handle, load_cases(), out_dir=args.out)
    for t in transcripts:
        marker = " (truncated)" if t.truncated else ""
        print(f"case {t.case_id}: {len(t.answer)} chars{marker}")
    print(f"transcripts in {args.out}")
    return 0


def _cmd_survey(args) -> int:
    from . import survey

    published = survey.load_published_means(
        args.published or survey.bundled_published_means())
    matrix = survey.ingest_star_table(
        args.counts or survey.bundled_response_counts(),
        statements=published.statements)
    report = survey.consistency_report(matrix, published)
    for case_id in matrix.cases:
        print(f"case {case_id}: average {survey.case_average(matrix, case_id):.2f}")
    flags = report.flags()
    print(f"consistency flags: {', '.join(flags) if flags else 'none'}")
    if args.out:
        survey.write_report(report, args.out)
        print(f"report written to {args.out}")
    return 0


def _cmd_toy_base(args) -> int:
    from .toybase import pretrain_toy_base, save_toy_base, toy_corpus

    model, tokenizer = pretrain_toy_base(
        steps=args.steps,
        on_step=lambda step, loss: (
            print(f"pretrain step {step}: loss {loss:.3f}")
            if step % 100 == 0 else None))
    out = save_toy_base(model, tokenizer, args.out)
    corpus_path = Path(args.out) / "toy_corpus.json"
    corpus_mod.save_corpus(toy_corpus(), corpus_path)
    print(f"toy base model in {out}; companion corpus at {corpus_path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ukil",
                                     description="Legal-assistant pipeline")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("scrape", help="fetch act pages into the raw cache")
    p.add_argument("--base-url", default=None,
                   help="portal base URL (env UKIL_BASE_URL overrides)")
    p.add_argument("--out", required=True, help="raw cache directory")
    p.add_argument("--pages", nargs="+", required=True,
                   help="page paths relative to the base URL")
    p.add_argument("--rate", type=float, default=1.0, help="requests per second")
    p.add_argument("--cache-policy", choices=["prefer_cache", "refresh"],
                   default="prefer_cache")
    p.set_defaults(func=_cmd_scrape)

    p = sub.add_parser("build-corpus", help="parse the raw cache into corpus JSON")
    p.add_argument("--raw", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_build_corpus)

    p = sub.add_parser("stats", help="corpus statistics")
    p.add_argument("corpus")
    p.set_defaults(func=_cmd_stats)

    p = sub.add_parser("validate", help="corpus validation report")
    p.add_argument("corpus")
    p.set_defaults(func=_cmd_validate)

    p = sub.add_parser("make-prompts", help="render the QA dataset and split it")
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", required=True, help="prompts.jsonl path")
    p.add_argument("--val-size", type=int, default=2000)
    p.add_argument("--seed", type=int, default=42)
    p.set_defaults(func=_cmd_make_prompts)

    p = sub.add_parser("train", help="fine-tune adapters on a base model")
    p.add_argument("--train", required=True)
    p.add_argument("--val", required=True)
    p.add_argument("--base", required=True, help="base model directory")
    p.add_argument("--out", required=True, help="run directory")
    p.add_argument("--epochs", type=int, default=13)
    p.add_argument("--micro-batch", type=int, default=8)
    p.add_argument("--grad-accumulation", type=int, default=8)
    p.add_argument("--learning-rate", type=float, default=3e-4)
    p.add_argument("--max-length", type=int, default=768)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--rank", type=int, default=3)
    p.add_argument("--alpha", type=float, default=16.0)
    p.add_argument("--no-quant", action="store_true",
                   help="skip 4-bit quantization of the base")
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("eval", help="score model outputs against references")
    p.add_argument("--refs", required=True, help="reference records jsonl")
    p.add_argument("--outputs", required=True, help="jsonl of {key, text}")
    p.add_argument("--report", required=True, help="report directory")
    p.add_argument("--model-name", default="model")
    p.add_argument("--parameters", default="-",
                   help="parameter-count label for the comparison row")
    p.add_argument("--fine-tuned", action="store_true",
                   help="mark the comparison row as fine-tuned")
    p.add_argument("--error-cases", type=int, default=5)
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("serve", help="run the HTTP API")
    p.add_argument("--base", required=True)
    p.add_argument("--adapter", default=None)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8080)
    p.set_defaults(func=_cmd_serve)

    p = sub.add_parser("ask", help="answer one question")
    p.add_argument("question")
    p.add_argument("--base", required=True)
    p.add_argument("--adapter", default=None)
    p.set_defaults(func=_cmd_ask)

    p = sub.add_parser("run-cases", help="answer the bundled case studies")
    p.add_argument("--out", required=True)
    p.add_argument("--base", required=True)
    p.add_argument("--adapter", default=None)
    p.set_defaults(func=_cmd_run_cases)

    p = sub.add_parser("survey", help="aggregate and reconcile survey tables")
    p.add_argument("--counts", default=None,
                   help="histogram CSV (default: bundled transcription)")
    p.add_argument("--published", default=None,
                   help="published means CSV (default: bundled transcription)")
    p.add_argument("--out", default=None, help="write report JSON here")
    p.set_defaults(func=_cmd_survey)

    p = sub.add_parser("toy-base", help="pretrain the bundled tiny base model")
    p.add_argument("--out", required=True)
    p.add_argument("--steps", type=int, default=800)
    p.set_defaults(func=_cmd_toy_base)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
