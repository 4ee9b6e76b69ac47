"""Ranking metrics for relation prediction queries and the line-oriented
report format: one aggregate header, then one ``s,r_true,o,t,rank`` line per
query.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DataError, ParseError


@dataclass(frozen=True)
class EvaluationReport:
    mrr: float
    hits1: float
    hits3: float
    hits10: float
    ranks: tuple[int, ...]
    filter_mode: str

    def header(self) -> str:
        return (
            f"MRR={self.mrr * 100:.2f}\t"
            f"Hits@1={self.hits1 * 100:.2f}\t"
            f"Hits@3={self.hits3 * 100:.2f}\t"
            f"Hits@10={self.hits10 * 100:.2f}\t"
            f"filter={self.filter_mode}\tqueries={len(self.ranks)}"
        )


def rank_of_truth(scores: np.ndarray, truth: int, excluded=()) -> int:
    """Pessimistic rank: 1 + competitors scored >= the truth's score.

    Competitors are all relations except the truth and the excluded ids.
    """
    if not 0 <= truth < len(scores):
        raise DataError(f"truth id {truth} outside the score vector of length {len(scores)}")
    mask = np.ones(len(scores), dtype=bool)
    mask[truth] = False
    for e in excluded:
        mask[e] = False
    competitors = scores[mask]
    truth_score = scores[truth]
    higher = int(np.sum(competitors > truth_score))
    ties = int(np.sum(competitors == truth_score))
    return 1 + higher + ties


def rank_metrics(score_rows, truths, filter_mode: str = "raw", true_sets=None) -> EvaluationReport:
    """Aggregate MRR and Hits@{1,3,10} over queries.

    ``true_sets`` holds, per query, every relation id known true for that
    query's (subject, object, timestamp); under ``filter_mode="time"`` those
    ids (except the truth itself) are removed from the competitor set.
    """
    if filter_mode not in ("raw", "time"):
        raise DataError(f"unknown filter mode {filter_mode!r}")
    ranks = []
    for i, (scores, truth) in enumerate(zip(score_rows, truths)):
        scores = np.asarray(scores, dtype=np.float64)
        excluded = ()
        if filter_mode == "time" and true_sets is not None:
            excluded = tuple(r for r in true_sets[i] if r != truth)
        ranks.append(rank_of_truth(scores, int(truth), excluded))
    arr = np.asarray(ranks, dtype=np.float64)
    if len(arr) == 0:
        raise DataError("no queries to aggregate")
    return EvaluationReport(
        mrr=float(np.mean(1.0 / arr)),
        hits1=float(np.mean(arr <= 1)),
        hits3=float(np.mean(arr <= 3)),
        hits10=float(np.mean(arr <= 10)),
        ranks=tuple(int(r) for r in ranks),
        filter_mode=filter_mode,
    )


def save_report(report: EvaluationReport, queries, path: str) -> None:
    """Write the header plus one ``s,r_true,o,t,rank`` line per query."""
    if len(queries) != len(report.ranks):
        raise DataError("query list and rank list lengths differ")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(report.header() + "\n")
        for q, rank in zip(queries, report.ranks):
            fh.write(f"{q.subject},{q.relation},{q.object},{q.timestamp},{rank}\n")


def load_report(path: str):
    """Parse a report file back into (EvaluationReport, query rows).

    Aggregates are recomputed from the per-query ranks; the header is parsed
    for the filter tag and checked for count consistency.
    """
    with open(path, encoding="utf-8") as fh:
        lines = [ln.rstrip("\n") for ln in fh]
    if not lines:
        raise ParseError(f"{path}: empty report")
    fields = dict(part.split("=", 1) for part in lines[0].split("\t"))
    filter_mode = fields.get("filter", "raw")
    rows = []
    ranks = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split(",")
        if len(parts) != 5:
            raise ParseError(f"{path}:{lineno}: expected s,r_true,o,t,rank")
        s, r, o, t, rank = (int(p) for p in parts)
        rows.append((s, r, o, t))
        ranks.append(rank)
    if int(fields.get("queries", len(ranks))) != len(ranks):
        raise ParseError(f"{path}: header query count does not match line count")
    arr = np.asarray(ranks, dtype=np.float64)
    report = EvaluationReport(
        mrr=float(np.mean(1.0 / arr)),
        hits1=float(np.mean(arr <= 1)),
        hits3=float(np.mean(arr <= 3)),
        hits10=float(np.mean(arr <= 10)),
        ranks=tuple(ranks),
        filter_mode=filter_mode,
    )
    return report, rows


def monte_carlo_random_mrr(n_relations: int, n_sets: int = 1000, seed: int = 0) -> float:
    """Mean reciprocal rank of a uniform random scorer, estimated by sampling."""
    rng = np.random.default_rng(seed)
    total = 0.0
    for _ in range(n_sets):
        scores = rng.random(n_relations)
        truth = int(rng.integers(n_relations))
        total += 1.0 / rank_of_truth(scores, truth)
    return total / n_sets
