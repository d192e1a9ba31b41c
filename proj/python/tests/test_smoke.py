import json
import os
from fractions import Fraction
from pathlib import Path

import pytest

import normalign as na

ROOT = Path(os.environ.get("NORMALIGN_SOURCE_DIR", Path(__file__).resolve().parents[2]))
TOY = ROOT / "toy"
GOLDEN = ROOT / "tests" / "golden" / "toy"


def test_scores_are_exact_fractions():
    s = na.score_matrix(["advised", "advised", "not_advised"], ["advised", "not_advised"],
                        [[True, False], [False, True], [False, False]])
    assert s["n_agree"] == 1 and s["n_conflict"] == 1
    assert s["saa"] == Fraction(1, 5)
    assert s["eaa"] == Fraction(1, 2)
    assert s["avg"] == Fraction(7, 20)


def test_undefined_metrics_are_none():
    s = na.score_matrix([], [], [])
    assert s["saa"] is None and s["eaa"] is None and s["avg"] is None


def test_aggregate_modes():
    counts = [(3, 1, 4, 4), (0, 0, 2, 2)]
    assert na.aggregate(counts, "micro")["saa"] == Fraction(1, 4)
    macro = na.aggregate(counts)
    assert macro["eaa"] == Fraction(3, 4)
    assert macro["eaa_skipped"] == 1
    with pytest.raises(na.EmptyInput):
        na.aggregate([])


def test_negation_flips_stance():
    text, stance, flipped = na.normalize_negation("Do not buy this apple", "advised", language="en")
    assert (text, stance, flipped) == ("Buy this apple", "not_advised", True)
    assert na.normalize_negation(text, stance, language="en") == (text, stance, False)


def test_classification_report_and_kappa():
    gold = ["M"] * 240 + ["NM"] * 60
    pred = ["M"] * 232 + ["NM"] * 8 + ["M"] * 2 + ["NM"] * 58
    r = na.classification_report(gold, pred)
    assert r["accuracy"] == Fraction(290, 300)
    assert "   macro avg      0.94      0.97      0.95       300" in r["text"]
    assert na.cohen_kappa(["a", "b"], ["a", "b"]) == 1
    assert na.cohen_kappa(["a", "a"], ["a", "a"]) is None
    assert na.render_fixed(Fraction(193, 200), 2) == "0.97"


def test_chunks_and_award_section():
    s = ["a", "b", "c", "d", "e"]
    assert na.chunk(s)[3] == (3, 5, "d e")
    assert na.detect_award_section(["x", "y", "z", "the prize"], ["prize"]) == (3, 4)
    assert na.detect_award_section(["the prize", "y", "z", "w"], ["prize"]) is None
    assert na.segment_sentences("One. Two") == ["One.", "Two"]


def test_toy_pipeline_matches_goldens(tmp_path):
    p = na.Pipeline(TOY / "config.ini", tmp_path, parallelism=2, now="2024-02-01T00:00:00Z")
    assert p.ingest(TOY / "transcripts.jsonl")["stage"] == "ingest"
    p.respond("model-a")
    p.respond("model-b")
    p.extract()
    p.match("model-a")
    p.match("model-b")
    p.score(topics=TOY / "topics.csv")
    assert "model-a" in p.report()
    assert p.validate() == []
    assert p.stats()["transport_calls"] > 0
    for name in ("dilemmas.jsonl", "solutions.jsonl", "matches.jsonl", "report.json"):
        assert (tmp_path / name).read_bytes() == (GOLDEN / name).read_bytes(), name


def test_missing_inputs_raise(tmp_path):
    p = na.Pipeline(TOY / "config.ini", tmp_path)
    with pytest.raises(na.MissingStageInput):
        p.score()
    with pytest.raises(na.ConfigError):
        na.Pipeline(tmp_path / "absent.ini", tmp_path)


def test_annotation_stats_empty(tmp_path):
    (tmp_path / "tasks.jsonl").write_text("")
    stats = na.annotation_stats(tmp_path, "MatchPair")
    assert stats["empty"] is True
