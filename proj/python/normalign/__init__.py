"""Alignment of model advice with a human reference panel.

Thin wrappers over the C++ core. Metric values come back as
``fractions.Fraction`` (or ``None`` where a metric is undefined) and stage
summaries as parsed JSON.
"""

from __future__ import annotations

import json
import os
from fractions import Fraction
from pathlib import Path
from typing import Optional, Sequence

from . import _core
from ._core import (
    ConfigError,
    EmptyInput,
    InvalidInput,
    LengthMismatch,
    MissingStageInput,
    NormalignError,
    PartialMatrix,
    chunk,
    detect_award_section,
    segment_sentences,
)

__all__ = [
    "ConfigError",
    "EmptyInput",
    "InvalidInput",
    "LengthMismatch",
    "MissingStageInput",
    "NormalignError",
    "PartialMatrix",
    "Pipeline",
    "aggregate",
    "annotation_stats",
    "chunk",
    "classification_report",
    "cohen_kappa",
    "detect_award_section",
    "normalize_negation",
    "render_fixed",
    "score_matrix",
    "segment_sentences",
]


def _frac(value: Optional[str]) -> Optional[Fraction]:
    return None if value is None else Fraction(value)


def _fracs(d: dict, keys: Sequence[str]) -> dict:
    return {k: (_frac(v) if k in keys else v) for k, v in d.items()}


def normalize_negation(text: str, stance: str = "advised", language: str = "da",
                       lexicons: Optional[Sequence[os.PathLike]] = None):
    """Rewrite a leading negation and flip the stance.

    Returns ``(text, stance, flipped)``. ``lexicons`` overrides the bundled
    lexicon for ``language``.
    """
    if lexicons is None:
        lexicons = [Path(_core.default_resources_dir()) / "lexicons" / language / "negation.txt"]
    return _core.normalize_negation(text, stance, [Path(p) for p in lexicons])


def score_matrix(cand: Sequence[str], ref: Sequence[str], matched: Sequence[Sequence[bool]]) -> dict:
    """SAA, EAA and AVG for one dilemma from stances and a cand x ref match grid."""
    return _fracs(_core.score_matrix(list(cand), list(ref), [list(r) for r in matched]),
                  ("saa", "eaa", "avg"))


def aggregate(counts: Sequence[Sequence[int]], mode: str = "macro") -> dict:
    """Aggregate per-dilemma ``(n_agree, n_conflict, n_cand, n_ref)`` tuples."""
    return _fracs(_core.aggregate([tuple(c) for c in counts], mode), ("saa", "eaa", "avg"))


def cohen_kappa(labels_a: Sequence[str], labels_b: Sequence[str]) -> Optional[Fraction]:
    return _frac(_core.cohen_kappa(list(labels_a), list(labels_b)))


def classification_report(gold: Sequence[str], predicted: Sequence[str], decimals: int = 2) -> dict:
    r = _core.classification_report(list(gold), list(predicted), decimals)
    cells = ("precision", "recall", "f1")
    r["classes"] = [_fracs(c, cells) for c in r["classes"]]
    r["macro"] = _fracs(r["macro"], cells)
    r["weighted"] = _fracs(r["weighted"], cells)
    r["accuracy"] = Fraction(r["accuracy"])
    return r


def render_fixed(value: Fraction, decimals: int) -> str:
    """Half-up decimal rendering, exact for any fraction."""
    return _core.render_fixed(f"{value.numerator}/{value.denominator}", decimals)


def annotation_stats(directory: os.PathLike, kind: str = "MatchPair") -> dict:
    return json.loads(_core.annotation_stats(Path(directory), kind))


class Pipeline:
    """The file-based stages over one data directory."""

    def __init__(self, config: os.PathLike, data_dir: os.PathLike, parallelism: int = 0, now: str = ""):
        self._p = _core.Pipeline(Path(config), Path(data_dir), parallelism, now)
        self.data_dir = Path(data_dir)

    def ingest(self, transcripts: Optional[os.PathLike] = None) -> dict:
        return json.loads(self._p.ingest(None if transcripts is None else Path(transcripts)))

    def respond(self, agent: str) -> dict:
        return json.loads(self._p.respond(agent))

    def extract(self, agent: Optional[str] = None) -> dict:
        return json.loads(self._p.extract(agent))

    def match(self, cand: str, ref: str = "panel") -> dict:
        return json.loads(self._p.match(cand, ref))

    def score(self, mode: str = "macro", topics: Optional[os.PathLike] = None) -> dict:
        return json.loads(self._p.score(mode, None if topics is None else Path(topics)))

    def report(self) -> str:
        return self._p.report()

    def validate(self) -> list:
        return self._p.validate()

    def stats(self) -> dict:
        return self._p.stats()
