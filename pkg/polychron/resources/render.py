from __future__ import annotations

import csv
import io
from collections.abc import Iterator

from polychron.resources.analytic import ResourceReport


CSV_HEADER = ("component", "metric", "value")


def _rows(report: ResourceReport, prefix: str = "") -> Iterator[tuple[str, str, str]]:
    name = f"{prefix}{report.component}"
    yield name, "memory_footprint", str(report.memory_footprint)
    yield name, "bandwidth_fixed", str(report.bandwidth.fixed)
    yield name, "bandwidth_per_context", str(report.bandwidth.per_context)
    for kind, value in report.compute.items():
        yield name, kind, str(value)
    yield name, "compute_total", str(report.compute_total)
    for part in report.parts:
        yield from _rows(part, f"{name}/")


def render_csv(report: ResourceReport) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    writer.writerows(_rows(report))
    return buffer.getvalue()


def render_text(report: ResourceReport, title: str | None = None) -> str:
    """Aligned table, one block per component, whole-report totals first."""
    lines = [title] if title else []
    entries: list[tuple[str, str, str]] = []

    def walk(item: ResourceReport, prefix: str) -> None:
        name = f"{prefix}{item.component}"
        entries.append((name, "memory footprint", f"{item.memory_footprint:,}"))
        entries.append((name, "bandwidth per token", str(item.bandwidth)))
        for kind, value in item.compute.items():
            if value:
                entries.append((name, kind, f"{value:,}"))
        entries.append((name, "compute total", f"{item.compute_total:,}"))
        for part in item.parts:
            walk(part, f"{name}/")

    walk(report, "")
    width_name = max(len(e[0]) for e in entries)
    width_metric = max(len(e[1]) for e in entries)
    width_value = max(len(e[2]) for e in entries)
    for name, metric, value in entries:
        lines.append(f"{name:<{width_name}}  {metric:<{width_metric}}  {value:>{width_value}}")
    return "\n".join(lines) + "\n"
