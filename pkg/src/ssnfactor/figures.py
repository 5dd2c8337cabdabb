"""Figure rendering for bench reports (headless, file output only)."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

from .bench import BenchReport  # noqa: E402

_BAR_COLORS = ("#4878a8", "#e49444")


def _save(fig, path: Path) -> Path:
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def savings_figure(report: BenchReport, path: Path) -> Path:
    m = report.metrics
    fig, ax = plt.subplots(figsize=(5, 4))
    bars = ax.bar(
        ["original", "factorized"],
        [m.original_triples, m.factorized_triples],
        color=_BAR_COLORS,
    )
    ax.bar_label(bars, fmt="%d")
    ax.set_ylabel("triples")
    ax.set_title(f"Graph size ({m.pct_savings:.2f}% saved)")
    return _save(fig, path)


def query_times_figure(report: BenchReport, path: Path) -> Path:
    names = [q.name for q in report.queries]
    orig = [max(q.warm_original_s, 1e-9) for q in report.queries]
    fact = [max(q.warm_factorized_s, 1e-9) for q in report.queries]
    x = range(len(names))
    width = 0.4
    fig, ax = plt.subplots(figsize=(max(6, 0.8 * len(names)), 4))
    ax.bar([i - width / 2 for i in x], orig, width, label="original", color=_BAR_COLORS[0])
    ax.bar([i + width / 2 for i in x], fact, width, label="factorized", color=_BAR_COLORS[1])
    ax.set_yscale("log")
    ax.set_ylabel("warm time (s)")
    ax.set_xticks(list(x))
    ax.set_xticklabels(names, rotation=45, ha="right")
    ax.legend()
    ax.set_title("Query evaluation time")
    return _save(fig, path)


def value_profile_figure(counts: dict[str, int], path: Path) -> Path:
    """Observation count per value label, most frequent first."""
    items = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    labels = [k for k, _ in items]
    heights = [c for _, c in items]
    fig, ax = plt.subplots(figsize=(max(6, 0.25 * len(labels)), 4))
    ax.bar(range(len(labels)), heights, color=_BAR_COLORS[0])
    ax.set_ylabel("observations")
    ax.set_xlabel("value levels (most frequent first)")
    if len(labels) <= 25:
        ax.set_xticks(range(len(labels)))
        ax.set_xticklabels(labels, rotation=45, ha="right")
    else:
        ax.set_xticks([])
    ax.set_title("Value distribution")
    return _save(fig, path)


def render_report_figures(
    report: BenchReport,
    out_dir: str | Path,
    value_counts: dict[str, int] | None = None,
) -> list[Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = [savings_figure(report, out_dir / "savings.png")]
    if report.queries:
        written.append(query_times_figure(report, out_dir / "query_times.png"))
    if value_counts:
        written.append(value_profile_figure(value_counts, out_dir / "value_profile.png"))
    return written
