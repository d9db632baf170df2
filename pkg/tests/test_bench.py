import dataclasses
import json

import pandas as pd
import pytest

from app.planner import bench as bench_module
from app.planner.bench import (
    BASELINE,
    TIMING_COLUMNS,
    Metrics,
    compare,
    evaluate,
    metrics_frame,
    oracle_answers,
    write_report,
)
from app.planner.combinations import BuildParams, Strategy
from app.planner.errors import InvalidParam, MismatchedIndex
from app.planner.model import Query, QuerySet, Vehicle
from app.planner.partitioner import from_assignment
from app.planner.pipeline import build_strategy_index
from app.planner.shortcuts import build_index
from tests.conftest import PI2, PI3

REF_QUERIES = QuerySet(
    (
        Query(0, 8, Vehicle(1.5, 2.0, 2.0)),
        Query(0, 8, Vehicle(2.0, 2.0, 10)),
        Query(0, 8, Vehicle(2.4, 2.3, 9)),
        Query(8, 0, Vehicle(5.0, 5.0, 50)),
    ),
    seed=None,
)


@pytest.fixture(scope="module")
def small_report(small_dataset, small_queries):
    return compare(
        [BASELINE, Strategy.random.value, Strategy.all.value, Strategy.trapp.value],
        small_dataset.net,
        small_dataset.decomp,
        small_dataset.traffic,
        small_queries,
        BuildParams(k=10, seed=3),
    )


def test_evaluate_counts_quality_per_query(ref_net, ref_decomp) -> None:
    index = build_index(ref_decomp, [(PI2, PI3), (), ()], strategy="manual")
    run = evaluate(ref_net, ref_decomp, index, REF_QUERIES)
    m = run.metrics
    assert m.query_count == 4
    # q1 overlay 5 vs 4, q2 overlay exact, q3 overlay via PI3 is exact, q4 unreachable.
    assert [r.status for r in run.queries] == ["overlay", "overlay", "overlay", "no_path"]
    assert m.failure_rate == 0.0
    assert m.optimal_proportion == pytest.approx(0.75)
    assert m.mean_error_rate == pytest.approx(0.25 / 3)
    assert m.unreachable_count == 1
    assert m.match_mismatches == 0
    assert m.total_entries == 4
    assert m.mean_entries_per_shortcut == pytest.approx(2.0)


def test_all_index_scores_perfectly(ref_net, ref_decomp) -> None:
    index = build_strategy_index(ref_decomp, None, BuildParams(strategy=Strategy.all))
    m = evaluate(ref_net, ref_decomp, index, REF_QUERIES).metrics
    assert m.failure_rate == 0.0
    assert m.mean_error_rate == 0.0
    assert m.optimal_proportion == 1.0


def test_evaluate_rejects_foreign_index(ref_net, ref_decomp) -> None:
    index = build_strategy_index(ref_decomp, None, BuildParams(strategy=Strategy.all))
    other = from_assignment(ref_net, [1, 0, 0, 0, 0, 0, 2, 0, 2])
    with pytest.raises(MismatchedIndex):
        evaluate(ref_net, other, index, REF_QUERIES)
    with pytest.raises(InvalidParam):
        evaluate(ref_net, ref_decomp, index, REF_QUERIES, oracle=oracle_answers(ref_net, REF_QUERIES)[:1])


def test_compare_rows(small_report, small_queries) -> None:
    assert [m.strategy for m in small_report.rows] == [BASELINE, "random", "all", "trapp"]
    assert small_report.seed == small_queries.seed
    baseline = small_report.row(BASELINE)
    assert baseline.optimal_proportion == 1.0
    assert baseline.total_entries == 0
    full = small_report.row("all")
    assert full.failure_rate == 0.0
    assert full.optimal_proportion == 1.0
    assert full.mean_error_rate == 0.0
    for m in small_report.rows:
        assert m.query_count == len(small_queries)
        assert m.match_mismatches == 0
        assert m.unreachable_count == baseline.unreachable_count
    trapp = small_report.row("trapp")
    assert trapp.total_entries <= full.total_entries
    assert trapp.mean_scanned_entries <= trapp.mean_full_scan_entries
    with pytest.raises(KeyError):
        small_report.row("trapp-no-cr")


def test_random_budget_follows_trapp(small_report) -> None:
    random_params = small_report.row("random").params
    budgets = random_params["random_budgets"]
    assert budgets is not None
    assert sum(budgets) > 0


def test_compare_validates_strategies(small_dataset, small_queries) -> None:
    args = (small_dataset.net, small_dataset.decomp, small_dataset.traffic, small_queries, BuildParams())
    with pytest.raises(InvalidParam):
        compare([], *args)
    with pytest.raises(InvalidParam):
        compare(["fastest"], *args)


def test_metrics_frame_and_report_files(small_report, tmp_path) -> None:
    frame = metrics_frame(small_report)
    assert list(frame.columns) == list(Metrics.model_fields)
    assert len(frame) == 4
    csv_path, json_path = write_report(small_report, tmp_path / "out", tag="_seed3")
    assert csv_path.name == "metrics_seed3.csv"
    loaded = pd.read_csv(csv_path)
    assert list(loaded["strategy"]) == [BASELINE, "random", "all", "trapp"]
    details = json.loads(json_path.read_text(encoding="utf-8"))
    assert len(details["runs"]) == 4
    assert len(details["runs"][0]["queries"]) == small_report.rows[0].query_count


def test_report_is_deterministic_without_timings(small_dataset, small_queries, small_report) -> None:
    again = compare(
        [BASELINE, Strategy.random.value, Strategy.all.value, Strategy.trapp.value],
        small_dataset.net,
        small_dataset.decomp,
        small_dataset.traffic,
        small_queries,
        BuildParams(k=10, seed=3),
    )
    drop = list(TIMING_COLUMNS)
    pd.testing.assert_frame_equal(
        metrics_frame(small_report).drop(columns=drop),
        metrics_frame(again).drop(columns=drop),
    )


def test_timings_exclude_match_verification(monkeypatch, ref_net, ref_decomp) -> None:
    index = build_index(ref_decomp, [(PI2, PI3), (), ()], strategy="manual")
    real_plan = bench_module.plan
    verify_flags: list[bool] = []

    def plan_with_costly_verification(*args, verify_matches: bool = False, **kwargs):
        verify_flags.append(verify_matches)
        result = real_plan(*args, verify_matches=verify_matches, **kwargs)
        if verify_matches:
            return dataclasses.replace(result, overlay_seconds=result.overlay_seconds + 100.0)
        return result

    monkeypatch.setattr(bench_module, "plan", plan_with_costly_verification)
    run = evaluate(ref_net, ref_decomp, index, REF_QUERIES)
    assert True in verify_flags
    assert run.metrics.match_mismatches == 0
    assert run.metrics.mean_query_time < 100.0
    assert all(record.seconds < 100.0 for record in run.queries)

    verify_flags.clear()
    evaluate(ref_net, ref_decomp, index, REF_QUERIES, verify_matches=False)
    assert verify_flags and not any(verify_flags)
