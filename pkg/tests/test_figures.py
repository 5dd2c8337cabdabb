from ssnfactor.bench import run_bench
from ssnfactor.figures import (
    render_report_figures,
    savings_figure,
    value_profile_figure,
)

PNG_MAGIC = b"\x89PNG\r\n\x1a\n"

S = "http://ssn.example/"


def make_report(weather, weather_factorized, vocab, with_queries=True):
    queries = (
        {"by_type": f"PREFIX s: <{S}> SELECT ?obs WHERE {{ ?obs a s:TempObs . }}"}
        if with_queries
        else {}
    )
    return run_bench(
        weather, weather_factorized, vocab, queries, reps=1, include_cold=False
    )


def test_savings_figure_is_a_png(tmp_path, weather, weather_factorized, vocab):
    report = make_report(weather, weather_factorized, vocab, with_queries=False)
    path = savings_figure(report, tmp_path / "savings.png")
    assert path.exists()
    assert path.read_bytes()[:8] == PNG_MAGIC


def test_render_report_figures_full_set(tmp_path, weather, weather_factorized, vocab):
    report = make_report(weather, weather_factorized, vocab)
    written = render_report_figures(
        report, tmp_path / "figs", value_counts={"24.8": 3, "20.0": 3}
    )
    assert [p.name for p in written] == [
        "savings.png",
        "query_times.png",
        "value_profile.png",
    ]
    for p in written:
        assert p.read_bytes()[:8] == PNG_MAGIC


def test_render_report_figures_without_queries_or_values(
    tmp_path, weather, weather_factorized, vocab
):
    report = make_report(weather, weather_factorized, vocab, with_queries=False)
    written = render_report_figures(report, tmp_path)
    assert [p.name for p in written] == ["savings.png"]


def test_value_profile_figure_many_levels(tmp_path):
    counts = {f"{(i + 1) / 10:.1f}": 40 - i for i in range(40)}
    path = value_profile_figure(counts, tmp_path / "profile.png")
    assert path.read_bytes()[:8] == PNG_MAGIC
