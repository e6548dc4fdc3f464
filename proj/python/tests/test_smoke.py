import os
from pathlib import Path

import pytest

import droidretriever as dr

ROOT = Path(os.environ.get("DR_SOURCE_DIR", Path(__file__).resolve().parents[2]))
SCENARIOS = ROOT / "scenarios"
HOTEL_TASK = "Check the room prices of Hilton Shanghai Hongqiao on Trip"


def test_hotel_run(tmp_path):
    r = dr.run(SCENARIOS / "hotel_focused.yaml", HOTEL_TASK, out_dir=tmp_path)
    assert r["mode"] == "done"
    assert r["error"] is None
    assert r["report"]["unresolved_count"] == 0
    assert "CNY 1280" in r["report"]["markdown"]
    assert r["metrics"]["steps"] == sum(1 for e in r["trace"] if e["kind"] == "action_executed")
    run_dir = Path(r["run_dir"])
    assert (run_dir / "report.md").exists()
    assert dr.verify_trace(run_dir) == []
    assert dr.metrics(run_dir)["tokens"] == r["metrics"]["tokens"]
    assert dr.replay_matches(run_dir / "trace.jsonl")


def test_run_is_deterministic():
    a = dr.run(SCENARIOS / "news_list.yaml", "Find the latest articles about electric cars on NewsHub")
    b = dr.run(SCENARIOS / "news_list.yaml", "Find the latest articles about electric cars on NewsHub")
    assert a["trace"] == b["trace"]
    assert a["run_id"] == b["run_id"] == dr.run_id("news-list", "Find the latest articles about electric cars on NewsHub")


def test_citations_and_similarity():
    assert dr.parse_citations("price 120 yuan[1(120)]") == [(1, "120")]
    assert dr.similarity("450g small cap", "450g small capacity") == pytest.approx(1 - 5 / 19)
    assert dr.CITATION_THRESHOLD == 0.8
    assert dr.report_statements("- a\n- b\n") == ["a", "b"]


def test_batch_scores_every_task():
    rows = dr.batch(str(SCENARIOS / "*.yaml"), SCENARIOS / "tasks.txt")
    assert len(rows) == 5
    assert all(r["status"] == "done" and r["coverage"] == 1.0 for r in rows)


def test_errors_surface_as_python_exceptions(tmp_path):
    bad = tmp_path / "bad.yaml"
    bad.write_text("name: x\n")
    with pytest.raises(dr.DroidRetrieverError):
        dr.run(bad, "anything")
