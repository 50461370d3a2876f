"""TopRank and RelRank: scoring a method's similarity ranking against the
simulated human's reference ranking."""

from __future__ import annotations

import csv
import io
from itertools import combinations

from .errors import SetMismatchError, TooSmallError


def _positions(ranked: list) -> dict:
    pos = {}
    for i, g in enumerate(ranked):
        if g in pos:
            raise SetMismatchError(f"ranked list repeats item {g!r}")
        pos[g] = i
    return pos


def top_rank(reference: list, method: list) -> int:
    """1 iff the method's most-similar item matches the reference's."""
    if set(reference) != set(method) or len(reference) != len(method):
        raise SetMismatchError("ranked lists must cover the same set")
    _positions(reference), _positions(method)
    return int(reference[0] == method[0])


def rel_rank(reference: list, method: list) -> float:
    """Fraction of unordered pairs whose relative order agrees between the
    two rankings. Concordant pairs score 1, discordant 0; no ties allowed."""
    if set(reference) != set(method) or len(reference) != len(method):
        raise SetMismatchError("ranked lists must cover the same set")
    n = len(reference)
    if n < 2:
        raise TooSmallError("need at least two items for pairwise agreement")
    ref_pos = _positions(reference)
    met_pos = _positions(method)
    agree = 0
    for a, b in combinations(reference, 2):
        same = (ref_pos[a] - ref_pos[b]) * (met_pos[a] - met_pos[b]) > 0
        agree += int(same)
    return agree / (n * (n - 1) / 2)


def render_rank_report(rows, fmt: str = "text") -> str:
    """Tabulate per-intent, per-goal TopRank/RelRank scores for each measure.

    rows: iterables of (intent, g_h name, measure, top_rank, rel_rank).
    """
    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf)
        writer.writerow(["intent", "g_h", "measure", "top_rank", "rel_rank"])
        for intent, gh, measure, tr, rr in rows:
            writer.writerow([intent, gh, measure, tr, f"{rr:.6f}"])
        return buf.getvalue()
    lines = [f"{'intent':<16} {'g_h':<18} {'measure':<8} {'TopRank':>7} {'RelRank':>8}"]
    for intent, gh, measure, tr, rr in rows:
        lines.append(f"{intent:<16} {gh:<18} {measure:<8} {tr:>7d} {rr:>8.4f}")
    return "\n".join(lines)
