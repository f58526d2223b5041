"""hemeval command-line interface.

Subcommands: synth, extract, eval, attr-eval, classify, report, validate.
Exit codes: 0 success, 2 invalid input or usage, 1 internal error. Every
output embeds (JSON) or heads (JSONL) a meta block with the tool version,
seed, options, and input digests; paths are recorded as basenames so
identical inputs give byte-identical artifacts regardless of directory.
Set HEMEVAL_THREADS to cap worker threads for corpus-sized stages.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from . import __version__
from .attr_metrics import PlausibilityMap, attribute_report, load_plausibility
from .classify import evaluate, fit_prototypes, split
from .core import (
    AttributeMatch,
    AttributeSchema,
    CaptionPair,
    ExtractionResult,
    HemevalError,
    Lexicon,
    check_lexicon,
    load_lexicon,
    load_schema,
)
from .defaults import (
    default_lexicon,
    default_plausibility_dict,
    default_schema,
    default_templates_dict,
)
from .extract import compile_lexicon, extract_with_id
from .ingest import IngestError, load_attribute_table, load_caption_pairs, load_captions, load_embeddings
from .jsonlio import iter_jsonl, write_jsonl
from .report import attr_markdown, compose_report, render_markdown
from .synth import TemplateSet, load_templates, synth_corpus
from .text_metrics import ALL_METRICS, corpus_scores, provider_from_spec, tokenize


def _workers() -> int:
    try:
        return max(1, int(os.environ.get("HEMEVAL_THREADS", "1")))
    except ValueError:
        return 1


def _digest(path: str | Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            h.update(chunk)
    return "sha256:" + h.hexdigest()


def _meta(command: str, options: dict, inputs: dict[str, str | Path], seed: int | None) -> dict:
    return {
        "tool": "hemeval",
        "version": __version__,
        "command": command,
        "seed": seed,
        "options": {k: v for k, v in sorted(options.items())},
        "inputs": {
            role: {"name": Path(p).name, "digest": _digest(p)}
            for role, p in sorted(inputs.items())
        },
    }


def _write_json(path: Path, obj: dict) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, ensure_ascii=False)
        fh.write("\n")


def _write_text(path: Path, text: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text)


def _out_dir(args) -> Path:
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _load_schema(args) -> AttributeSchema:
    return load_schema(args.schema) if args.schema else default_schema()


def _load_lexicon(args) -> Lexicon:
    return load_lexicon(args.lexicon) if args.lexicon else default_lexicon()


def _load_templates(args, schema: AttributeSchema) -> TemplateSet:
    if args.templates:
        return load_templates(args.templates, schema)
    return TemplateSet.from_dict(default_templates_dict(), schema)


def _load_plausibility(args, schema: AttributeSchema) -> PlausibilityMap:
    if getattr(args, "plausibility", None):
        return load_plausibility(args.plausibility, schema)
    return PlausibilityMap.from_dict(default_plausibility_dict(), schema)


def _config_inputs(args) -> dict[str, str]:
    inputs = {}
    for role in ("schema", "lexicon", "templates", "plausibility"):
        path = getattr(args, role, None)
        if path:
            inputs[role] = path
    return inputs


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def cmd_validate(args) -> int:
    schema = _load_schema(args)
    print(f"schema OK ({len(schema.attributes)} attributes)")
    lexicon = _load_lexicon(args)
    check_lexicon(lexicon, schema)
    n_patterns = sum(len(p) for values in lexicon.entries.values() for p in values.values())
    print(f"lexicon OK ({n_patterns} patterns)")
    templates = _load_templates(args, schema)
    print(f"templates OK ({len(templates.templates)} templates)")
    plausibility = _load_plausibility(args, schema)
    n_pairs = sum(len(v) for v in plausibility.pairs.values())
    print(f"plausibility OK ({n_pairs} pairs)")
    return 0


def cmd_synth(args) -> int:
    schema = _load_schema(args)
    lexicon = _load_lexicon(args)
    check_lexicon(lexicon, schema)
    templates = _load_templates(args, schema)
    if args.emit_pairs and args.variants < 2:
        raise IngestError("--emit-pairs needs --variants >= 2")

    records, rejects = load_attribute_table(args.records, schema)
    corpus = synth_corpus(
        records, templates, lexicon, schema, variants_per_record=args.variants, seed=args.seed
    )

    out = _out_dir(args)
    meta = _meta(
        "synth",
        {"variants": args.variants, "emit_pairs": args.emit_pairs},
        {"records": args.records, **_config_inputs(args)},
        seed=args.seed,
    )
    write_jsonl(
        out / "captions.jsonl",
        ({"image_id": i, "variant": v, "text": t} for i, v, t in corpus),
        meta=meta,
    )
    if rejects:
        write_jsonl(
            out / "rejects.jsonl",
            ({"row": r.row_number, "reason": r.reason, "data": r.row} for r in rejects),
            meta=meta,
        )
    if args.emit_pairs:
        by_variant: dict[int, dict[str, str]] = {0: {}, 1: {}}
        for image_id, variant, text in corpus:
            if variant in by_variant:
                by_variant[variant][image_id] = text
        write_jsonl(
            out / "pairs.jsonl",
            (
                {"image_id": i, "reference": by_variant[0][i], "candidate": by_variant[1][i]}
                for i in by_variant[0]
            ),
            meta=meta,
        )
    print(
        f"accepted {len(records)} records, rejected {len(rejects)} rows; "
        f"wrote {len(corpus)} captions"
    )
    return 0


def cmd_extract(args) -> int:
    schema = _load_schema(args)
    compiled = compile_lexicon(_load_lexicon(args), schema)
    captions = load_captions(args.captions)

    def run(item: tuple[str, str]) -> ExtractionResult:
        return extract_with_id(item[0], item[1], compiled, schema)

    workers = _workers()
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run, captions))
    else:
        results = [run(item) for item in captions]

    out = _out_dir(args)
    meta = _meta("extract", {}, {"captions": args.captions, **_config_inputs(args)}, seed=None)
    write_jsonl(
        out / "extraction.jsonl",
        (
            {
                "image_id": r.image_id,
                "values": {a: m.value for a, m in r.values.items()},
                "spans": {a: list(m.span) for a, m in r.values.items()},
                "patterns": {a: m.pattern for a, m in r.values.items()},
                "conflicts": [[a, list(vals)] for a, vals in r.conflicts],
            }
            for r in results
        ),
        meta=meta,
    )
    n_conflicts = sum(len(r.conflicts) for r in results)
    print(f"extracted {len(results)} captions ({n_conflicts} conflicts)")
    return 0


def _load_pairs_from_args(args) -> list[CaptionPair]:
    if args.pairs:
        return load_caption_pairs(args.pairs)
    references = dict(load_captions(args.references))
    candidates = dict(load_captions(args.candidates))
    missing_refs = sorted(set(candidates) - set(references))
    missing_cands = sorted(set(references) - set(candidates))
    if missing_refs or missing_cands:
        detail = []
        if missing_refs:
            detail.append(f"ids without reference: {', '.join(missing_refs)}")
        if missing_cands:
            detail.append(f"ids without candidate: {', '.join(missing_cands)}")
        raise IngestError("reference/candidate files do not align: " + "; ".join(detail))
    return [
        CaptionPair(image_id=i, reference=references[i], candidate=candidates[i])
        for i, _ in load_captions(args.references)
    ]


def cmd_eval(args) -> int:
    pairs = _load_pairs_from_args(args)
    metrics = tuple(m for m in args.metrics.split(",") if m)
    provider = None
    if "bertscore" in metrics:
        vocabulary = None
        if args.provider == "one_hot":
            vocabulary = sorted(
                {tok for pair in pairs for tok in tokenize(pair.reference) + tokenize(pair.candidate)}
            )
        provider = provider_from_spec(args.provider, vocabulary)

    result = corpus_scores(
        pairs,
        provider=provider,
        metrics=metrics,
        bleu_max_n=args.bleu_max_n,
        smoothing=args.smoothing,
    )

    inputs = (
        {"pairs": args.pairs}
        if args.pairs
        else {"references": args.references, "candidates": args.candidates}
    )
    if args.provider.startswith("file:"):
        inputs["token_embeddings"] = args.provider.split(":", 1)[1]
    out = _out_dir(args)
    meta = _meta(
        "eval",
        {
            "metrics": list(metrics),
            "bleu_max_n": args.bleu_max_n,
            "smoothing": args.smoothing,
            "provider": args.provider,
        },
        inputs,
        seed=None,
    )
    write_jsonl(out / "pair_scores.jsonl", (p.to_dict() for p in result.per_pair), meta=meta)
    _write_json(
        out / "metrics.json",
        {"meta": meta, "aggregates": dict(result.aggregates), "options": dict(result.options)},
    )
    shown = {k: v for k, v in result.aggregates.items() if k in ("bleu", "rouge_l_f1", "bertscore_f1")}
    print("aggregates: " + json.dumps(shown, sort_keys=True))
    return 0


def _load_extraction(path: str | Path) -> list[ExtractionResult]:
    results = []
    for line_no, obj in iter_jsonl(path):
        if "image_id" not in obj or "values" not in obj:
            raise IngestError(f"line {line_no}: missing field 'image_id' or 'values'")
        spans = obj.get("spans", {})
        patterns = obj.get("patterns", {})
        values = {
            attr: AttributeMatch(
                value=value,
                span=tuple(spans.get(attr, (0, 0))),
                pattern=patterns.get(attr, ""),
            )
            for attr, value in obj["values"].items()
        }
        conflicts = tuple((a, tuple(vs)) for a, vs in obj.get("conflicts", []))
        results.append(
            ExtractionResult(image_id=str(obj["image_id"]), values=values, conflicts=conflicts)
        )
    return results


def cmd_attr_eval(args) -> int:
    schema = _load_schema(args)
    plausibility = _load_plausibility(args, schema)
    extracted = _load_extraction(args.extraction)
    truth, rejects = load_attribute_table(args.truth, schema)
    if rejects:
        print(f"warning: {len(rejects)} truth rows rejected", file=sys.stderr)

    report = attribute_report(extracted, truth, schema, plausibility)
    out = _out_dir(args)
    meta = _meta(
        "attr-eval",
        {},
        {"extraction": args.extraction, "truth": args.truth, **_config_inputs(args)},
        seed=None,
    )
    fragment = report.to_dict()
    _write_json(out / "attr_report.json", {"meta": meta, **fragment})
    _write_text(out / "attr_report.md", attr_markdown(fragment))
    print(f"evaluated {len(fragment['features'])} features over {len(truth)} truth records")
    return 0


def cmd_classify(args) -> int:
    if args.data:
        embeddings = load_embeddings(args.data)
        train, test = split(embeddings, args.label, args.test_fraction, args.seed)
        inputs = {"data": args.data}
    else:
        train = load_embeddings(args.train)
        test = load_embeddings(args.test)
        inputs = {"train": args.train, "test": args.test}

    prototypes = fit_prototypes(train, args.label)
    result = evaluate(test, prototypes, args.label)

    out = _out_dir(args)
    meta = _meta(
        "classify",
        {"label": args.label, "test_fraction": args.test_fraction},
        inputs,
        seed=args.seed if args.data else None,
    )
    _write_json(out / f"classifier_report_{args.label}.json", {"meta": meta, **result.to_dict()})
    print(
        f"{args.label}: accuracy {result.accuracy:.4f}, weighted F1 {result.weighted_f1:.4f} "
        f"({len(test)} test items, {len(prototypes)} classes)"
    )
    return 0


def _read_fragment(path: str) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)


def cmd_report(args) -> int:
    if not (args.metrics or args.attr or args.classifier):
        raise IngestError("report needs at least one of --metrics, --attr, --classifier")
    metrics = _read_fragment(args.metrics) if args.metrics else None
    metrics_external = _read_fragment(args.metrics_external) if args.metrics_external else None
    attr = _read_fragment(args.attr) if args.attr else None
    classifiers = [_read_fragment(p) for p in args.classifier or []]

    inputs = {}
    if args.metrics:
        inputs["metrics"] = args.metrics
    if args.metrics_external:
        inputs["metrics_external"] = args.metrics_external
    if args.attr:
        inputs["attr"] = args.attr
    for i, path in enumerate(args.classifier or []):
        inputs[f"classifier_{i}"] = path
    meta = _meta("report", {}, inputs, seed=None)

    combined = compose_report(
        metrics=metrics,
        metrics_external=metrics_external,
        attr=attr,
        classifiers=classifiers,
        meta=meta,
    )
    out = _out_dir(args)
    _write_json(out / "report.json", combined)
    _write_text(out / "report.md", render_markdown(combined))
    print(f"wrote report with {len(combined['tables'])} tables")
    return 0


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------


def _add_config_flags(parser: argparse.ArgumentParser, *, templates: bool = False, plausibility: bool = False) -> None:
    parser.add_argument("--schema", help="attribute schema JSON (default: built-in)")
    parser.add_argument("--lexicon", help="lexicon JSON (default: built-in)")
    if templates:
        parser.add_argument("--templates", help="template set JSON (default: built-in)")
    if plausibility:
        parser.add_argument("--plausibility", help="plausible-confusion JSON (default: built-in)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hemeval",
        description="Build and evaluate morphology-aware blood-cell caption corpora.",
    )
    parser.add_argument("--version", action="version", version=f"hemeval {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check schema/lexicon/templates/plausibility files")
    _add_config_flags(p, templates=True, plausibility=True)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("synth", help="render captions from an attribute table")
    p.add_argument("--records", required=True, help="attribute table CSV")
    p.add_argument("--variants", type=int, default=1, help="caption variants per record")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--emit-pairs", action="store_true", help="also write variant-0/1 pairs.jsonl")
    p.add_argument("--out-dir", default=".")
    _add_config_flags(p, templates=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("extract", help="extract attribute mentions from captions")
    p.add_argument("--captions", required=True, help="captions JSONL (image_id, text)")
    p.add_argument("--out-dir", default=".")
    _add_config_flags(p)
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("eval", help="score candidate captions against references")
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--pairs", help="pairs JSONL (image_id, reference, candidate)")
    group.add_argument("--references", help="captions JSONL with reference texts")
    p.add_argument("--candidates", help="captions JSONL with candidate texts")
    p.add_argument("--metrics", default=",".join(ALL_METRICS))
    p.add_argument("--bleu-max-n", type=int, default=4)
    p.add_argument("--smoothing", choices=["none", "epsilon"], default="epsilon")
    p.add_argument(
        "--provider",
        default="one_hot",
        help="token embeddings: one_hot | hashed:<seed> | file:<path>",
    )
    p.add_argument("--out-dir", default=".")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("attr-eval", help="feature accuracy of extraction vs. ground truth")
    p.add_argument("--extraction", required=True, help="extraction JSONL from `extract`")
    p.add_argument("--truth", required=True, help="ground-truth attribute table CSV")
    p.add_argument("--out-dir", default=".")
    _add_config_flags(p, plausibility=True)
    p.set_defaults(func=cmd_attr_eval)

    p = sub.add_parser("classify", help="nearest-prototype probe on frozen embeddings")
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--data", help="embeddings JSONL to split")
    group.add_argument("--train", help="training embeddings JSONL")
    p.add_argument("--test", help="test embeddings JSONL (with --train)")
    p.add_argument("--label", required=True, help="label name, e.g. diagnosis or cell_type")
    p.add_argument("--test-fraction", type=float, default=0.2)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", default=".")
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("report", help="combine fragments into report.json / report.md")
    p.add_argument("--metrics", help="metrics.json from `eval` (internal set)")
    p.add_argument("--metrics-external", help="metrics.json for the external set")
    p.add_argument("--attr", help="attr_report.json from `attr-eval`")
    p.add_argument("--classifier", action="append", help="classifier report JSON (repeatable)")
    p.add_argument("--out-dir", default=".")
    p.set_defaults(func=cmd_report)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "eval" and args.references and not args.candidates:
        parser.error("--references needs --candidates")
    if args.command == "classify" and args.train and not args.test:
        parser.error("--train needs --test")
    try:
        return args.func(args)
    except (HemevalError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # internal failure, distinct exit code
        print(f"internal error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
