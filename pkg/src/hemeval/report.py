"""Combined report assembly: one JSON document plus a Markdown view.

The Markdown is a pure view: every rendered cell string is also stored in
the JSON document's `tables` section, while the `fragments` section keeps
the originating numbers at full precision. Metric scalars and percentages
are displayed with two decimals.
"""

from __future__ import annotations

from typing import Mapping, Sequence


def _fmt(value: float | None, *, na: str = "-") -> str:
    if value is None:
        return na
    return f"{value:.2f}"


def _feature_title(name: str) -> str:
    return name.replace("_", " ").capitalize()


def metrics_table(
    internal: Mapping, external: Mapping | None = None
) -> dict:
    """Caption-quality table: BLEU / ROUGE-L / BERTScore F1 per test set."""
    columns = ["Set", "BLEU", "ROUGE-L", "BERTScore F1"]
    rows = []
    sets = [("internal", internal)]
    if external is not None:
        sets.append(("external", external))
    for label, fragment in sets:
        agg = fragment["aggregates"]
        rows.append(
            [
                label,
                _fmt(agg.get("bleu")),
                _fmt(agg.get("rouge_l_f1")),
                _fmt(agg.get("bertscore_f1")),
            ]
        )
    return {"title": "Caption quality", "columns": columns, "rows": rows}


def attr_table(attr_fragment: Mapping) -> dict:
    """Feature-level accuracy table shaped like the per-feature results."""
    columns = [
        "Feature",
        "Accuracy (%)",
        "Mention rate (%)",
        "Accuracy when mentioned (%)",
        "Conflict rate (%)",
        "Plausible error rate",
        "n",
    ]
    plausible = attr_fragment.get("plausible_errors", {})
    rows = []
    for stats in attr_fragment["features"]:
        feature = stats["feature"]
        perr = plausible.get(feature)
        rows.append(
            [
                _feature_title(feature),
                _fmt(stats["accuracy_pct"]),
                _fmt(stats["mention_rate_pct"]),
                _fmt(stats.get("accuracy_when_mentioned_pct")),
                _fmt(stats["conflict_rate_pct"]),
                _fmt(perr["rate"]) if perr else "-",
                str(stats["n"]),
            ]
        )
    return {"title": "Morphological attribute accuracy", "columns": columns, "rows": rows}


def classifier_table(classifier_fragments: Sequence[Mapping]) -> dict:
    columns = ["Task", "Accuracy", "Weighted F1"]
    rows = [
        [frag["task"], _fmt(frag["accuracy"]), _fmt(frag["weighted_f1"])]
        for frag in classifier_fragments
    ]
    return {"title": "Frozen-embedding classification", "columns": columns, "rows": rows}


def confusion_tables(attr_fragment: Mapping) -> list[dict]:
    tables = []
    for feature, matrix in attr_fragment.get("confusion_matrices", {}).items():
        columns = ["Truth \\ Extracted", *matrix["columns"]]
        rows = [
            [row_label, *[str(c) for c in counts]]
            for row_label, counts in zip(matrix["rows"], matrix["counts"])
        ]
        tables.append(
            {
                "title": f"Confusion: {_feature_title(feature)}",
                "columns": columns,
                "rows": rows,
            }
        )
    return tables


def compose_report(
    metrics: Mapping | None = None,
    metrics_external: Mapping | None = None,
    attr: Mapping | None = None,
    classifiers: Sequence[Mapping] = (),
    meta: Mapping | None = None,
) -> dict:
    """Assemble fragments into the combined report document.

    Table order is fixed: caption metrics, attribute accuracy, classifier
    results.
    """
    tables: list[dict] = []
    fragments: dict = {}
    if metrics is not None:
        fragments["text_metrics"] = {"internal": dict(metrics)}
        if metrics_external is not None:
            fragments["text_metrics"]["external"] = dict(metrics_external)
        tables.append(metrics_table(metrics, metrics_external))
    if attr is not None:
        fragments["attributes"] = dict(attr)
        tables.append(attr_table(attr))
    if classifiers:
        fragments["classifiers"] = [dict(c) for c in classifiers]
        tables.append(classifier_table(classifiers))
    report = {"tables": tables, "fragments": fragments}
    if meta is not None:
        report["meta"] = dict(meta)
    return report


def _markdown_table(table: Mapping) -> str:
    lines = [
        "| " + " | ".join(table["columns"]) + " |",
        "| " + " | ".join("---" for _ in table["columns"]) + " |",
    ]
    for row in table["rows"]:
        lines.append("| " + " | ".join(row) + " |")
    return "\n".join(lines)


def render_markdown(report: Mapping, title: str = "Evaluation report") -> str:
    sections = [f"# {title}"]
    for table in report["tables"]:
        sections.append(f"## {table['title']}\n\n" + _markdown_table(table))
    return "\n\n".join(sections) + "\n"


def attr_markdown(attr_fragment: Mapping) -> str:
    """Standalone Markdown for an attribute report: table plus matrices."""
    sections = ["# Attribute evaluation", "## " + "Morphological attribute accuracy"]
    sections[-1] += "\n\n" + _markdown_table(attr_table(attr_fragment))
    for table in confusion_tables(attr_fragment):
        sections.append(f"## {table['title']}\n\n" + _markdown_table(table))
    unmatched = attr_fragment.get("unmatched_truth_ids", [])
    if unmatched:
        sections.append("Unmatched truth ids: " + ", ".join(unmatched))
    return "\n\n".join(sections) + "\n"
