"""Wilcoxon signed-rank test for paired method comparisons."""

from __future__ import annotations

import math
from collections import Counter
from collections.abc import Iterable
from dataclasses import asdict, dataclass

from scipy.stats import rankdata

EXACT_MAX_N = 14
# differences are rounded before zero/tie detection so that 1.01 - 1.01 is 0
# and 1.24 - 1.33 ties with 1.33 - 1.42
_DIFF_DECIMALS = 12


@dataclass(frozen=True)
class WilcoxonResult:
    statistic: float
    p_two_sided: float
    n_effective: int
    n_zero_dropped: int
    method: str
    degenerate: bool = False

    def to_dict(self) -> dict:
        return asdict(self)


def signed_differences(pairs: Iterable[tuple[float, float]]) -> tuple[list[float], int]:
    """Return the nonzero a - b differences and how many zeros were dropped."""
    diffs = [round(a - b, _DIFF_DECIMALS) for a, b in pairs]
    nonzero = [d for d in diffs if d != 0]
    return nonzero, len(diffs) - len(nonzero)


def _exact_lower_tail(doubled_ranks: list[int], w_doubled: int) -> float:
    """P(T+ <= w) under random signs, via a count DP over doubled ranks."""
    counts = Counter({0: 1})
    for r in doubled_ranks:
        nxt = Counter()
        for s, c in counts.items():
            nxt[s] += c
            nxt[s + r] += c
        counts = nxt
    hits = sum(c for s, c in counts.items() if s <= w_doubled)
    return hits / 2 ** len(doubled_ranks)


def wilcoxon_signed_rank(pairs: Iterable[tuple[float, float]], *, exact_max_n: int = EXACT_MAX_N) -> WilcoxonResult:
    """Two-sided Wilcoxon signed-rank test on paired samples.

    Zero differences are dropped, tied absolute differences get average
    ranks, and W = min(W+, W-). The p-value is exact (full sign-flip
    distribution) when at most ``exact_max_n`` differences remain, otherwise
    a normal approximation with tie-corrected variance and continuity
    correction.

    If every difference is zero the result is flagged ``degenerate`` with
    p = 1.
    """
    diffs, n_zero = signed_differences(pairs)
    n = len(diffs)
    if n == 0:
        return WilcoxonResult(0.0, 1.0, 0, n_zero, "degenerate", degenerate=True)
    ranks = rankdata([abs(d) for d in diffs])
    w_plus = float(sum(r for r, d in zip(ranks, diffs) if d > 0))
    w_minus = float(sum(ranks) - w_plus)
    w = min(w_plus, w_minus)

    if n <= exact_max_n:
        # average ranks are multiples of 1/2
        doubled = [int(round(2 * r)) for r in ranks]
        p = 2 * _exact_lower_tail(doubled, int(round(2 * w)))
        return WilcoxonResult(w, min(1.0, p), n, n_zero, "exact")

    mean = n * (n + 1) / 4
    tie_term = sum(t**3 - t for t in Counter(ranks).values()) / 48
    sd = math.sqrt(n * (n + 1) * (2 * n + 1) / 24 - tie_term)
    z = max(abs(w - mean) - 0.5, 0.0) / sd
    p = math.erfc(z / math.sqrt(2))
    return WilcoxonResult(w, min(1.0, p), n, n_zero, "normal")
