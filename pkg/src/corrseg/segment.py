"""Segment likelihoods, optimal segmentation, and choice of segment count.

Under the block model, every segment of genes shares one pairwise
correlation rho, so its maximized log-likelihood has a closed form in the
block sum of the Gram matrix. The dynamic program then finds the exact
optimum over all segmentations into K contiguous segments, and the number
of segments is chosen where the penalized, normalized likelihood curve
shows its largest slope change.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .core import GramPrefix
from .errors import DegenerateNormalizationWarning, KTooLarge

RHO_EPS = 1e-8
LOG_EPS = 1e-12


def rho_hat(block_sum: float, p_k: int) -> float:
    """Maximum-likelihood common correlation of a segment of p_k genes.

    block_sum is the double sum of the Gram matrix over the segment. The
    estimate (block_sum - p_k) / (p_k^2 - p_k) is clamped into the open
    interval where the compound-symmetry covariance stays positive
    definite, so downstream log terms remain finite.
    """
    if p_k < 2:
        raise ValueError(f"rho_hat needs a segment of at least 2 genes, got {p_k}")
    raw = (block_sum - p_k) / (p_k * p_k - p_k)
    lo = -1.0 / (p_k - 1) + RHO_EPS
    hi = 1.0 - RHO_EPS
    return float(min(max(raw, lo), hi))


@dataclass(frozen=True)
class SegmentCostTable:
    """Materialized -2 * max-log-likelihood for every contiguous segment.

    ``cost[a, b]`` covers genes a..b inclusive (0-based); entries with
    a > b are +inf. ``block_sums`` keeps the matching Gram block sums so
    per-segment rho estimates can be read back after the DP.
    """

    cost: np.ndarray
    block_sums: np.ndarray
    n: int

    @property
    def p(self) -> int:
        return self.cost.shape[0]

    def segment_cost(self, a: int, b: int) -> float:
        """-2 * max log-likelihood of the segment of genes a..b inclusive."""
        if not 0 <= a <= b < self.p:
            raise IndexError(f"invalid segment [{a}, {b}] for p={self.p}")
        return float(self.cost[a, b])


def build_cost_table(gram: GramPrefix) -> SegmentCostTable:
    """Evaluate the closed-form segment cost for all O(p^2) segments at once.

    For a segment of length L with Gram block sum S the cost is
    n * [L + (L-1) log((L^2 - S)/(L^2 - L)) + log(S / L)], and
    n * (1 + log G_aa) for singletons. Log arguments are floored at 1e-12
    so empirically singular blocks yield finite (strongly negative) costs
    instead of NaN.
    """
    P = gram.prefix
    p = gram.p
    n = gram.n
    d = np.diag(P)
    # S[a, b] = block sum over genes a..b inclusive, via 2-D inclusion-exclusion
    S = d[1:][None, :] - P[:p, 1:] - P[1:, :p].T + d[:p][:, None]
    idx = np.arange(p)
    L = idx[None, :] - idx[:, None] + 1
    den = np.maximum(L * L - L, 1)
    with np.errstate(invalid="ignore"):
        r1 = np.clip((L * L - S) / den, LOG_EPS, None)
        r2 = np.clip(S / np.maximum(L, 1), LOG_EPS, None)
        cost = n * (L + (L - 1) * np.log(r1) + np.log(r2))
        single = n * (1.0 + np.log(np.clip(S, LOG_EPS, None)))
    cost = np.where(L == 1, single, cost)
    cost = np.where(L < 1, np.inf, cost)
    return SegmentCostTable(cost=cost, block_sums=S, n=n)


@dataclass(frozen=True)
class Segmentation:
    """Breakpoints 0 = t_0 < t_1 < ... < t_K = p with per-segment estimates.

    Segment k covers genes [t_{k-1}, t_k) in 0-based half-open convention.
    rho is 0 by convention for singleton segments.
    """

    breakpoints: tuple[int, ...]
    rho: tuple[float, ...]
    segment_loglik: tuple[float, ...]
    total_loglik: float

    def __post_init__(self):
        bps = self.breakpoints
        if len(bps) < 2 or bps[0] != 0:
            raise ValueError(f"breakpoints must start at 0, got {bps}")
        if any(b <= a for a, b in zip(bps, bps[1:])):
            raise ValueError(f"breakpoints must be strictly increasing, got {bps}")
        if len(self.rho) != self.K or len(self.segment_loglik) != self.K:
            raise ValueError("per-segment lists must have length K")

    @property
    def K(self) -> int:
        return len(self.breakpoints) - 1

    @property
    def p(self) -> int:
        return self.breakpoints[-1]

    def segments(self) -> list[tuple[int, int]]:
        """Half-open (start, stop) pairs, one per segment."""
        return list(zip(self.breakpoints[:-1], self.breakpoints[1:]))


def _dp_tables(cost: np.ndarray, k_max: int) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized DP over segment counts 1..k_max.

    D[k-1, b] = min cost of segmenting genes 0..b into k segments;
    B[k-1, b] = last gene of the (k-1)-th segment at that optimum.
    """
    p = cost.shape[0]
    D = np.full((k_max, p), np.inf)
    B = np.zeros((k_max, p), dtype=np.intp)
    D[0] = cost[0]
    # shifted[t, b] = cost of segment (t+1)..b, the candidate last segment
    shifted = np.full((p, p), np.inf)
    if p > 1:
        shifted[: p - 1, 1:] = cost[1:, 1:]
    for k in range(1, k_max):
        M = D[k - 1][:, None] + shifted
        D[k] = M.min(axis=0)
        B[k] = M.argmin(axis=0)
    return D, B

def _backtrack(B: np.ndarray, k: int, p: int) -> list[int]:
    """Recover breakpoints [0, ..., p] for the optimum with k segments."""
    bps = [p]
    b = p - 1
    for kk in range(k - 1, 0, -1):
        t = int(B[kk, b])
        bps.append(t + 1)
        b = t
    bps.append(0)
    return bps[::-1]


def _segmentation_from_breakpoints(costs: SegmentCostTable, bps: list[int]) -> Segmentation:
    rho = []
    seg_ll = []
    for a, b in zip(bps[:-1], bps[1:]):
        p_k = b - a
        rho.append(0.0 if p_k == 1 else rho_hat(float(costs.block_sums[a, b - 1]), p_k))
        seg_ll.append(-0.5 * float(costs.cost[a, b - 1]))
    return Segmentation(
        breakpoints=tuple(bps),
        rho=tuple(rho),
        segment_loglik=tuple(seg_ll),
        total_loglik=float(sum(seg_ll)),
    )

def _masked_cost(costs: SegmentCostTable, min_seg_len: int) -> np.ndarray:
    if min_seg_len <= 1:
        return costs.cost
    p = costs.p
    idx = np.arange(p)
    length = idx[None, :] - idx[:, None] + 1
    return np.where(length >= min_seg_len, costs.cost, np.inf)

def dp_segment(costs: SegmentCostTable, K: int, min_seg_len: int = 1) -> Segmentation:
    """Globally optimal segmentation into exactly K contiguous segments."""
    p = costs.p
    if K < 1 or K * max(1, min_seg_len) > p:
        raise KTooLarge(f"K={K} infeasible for p={p} (min segment {min_seg_len})")
    _, B = _dp_tables(_masked_cost(costs, min_seg_len), K)
    return _segmentation_from_breakpoints(costs, _backtrack(B, K, p))


def default_k_max(p: int) -> int:
    """Default ceiling on the segment count: min(p, max(20, p // 10))."""
    return min(p, max(20, p // 10))


@dataclass(frozen=True)
class SelectionTrace:
    """Diagnostics of the segment-count choice.

    L[k-1] is the maximized log-likelihood with k segments. Ltilde is the
    displayed normalization of that curve onto the penalty scale: it spans
    [1, Ktilde_max - Ktilde_1 + 1] downward as K grows. The decision itself
    compares consecutive slopes of the curve rescaled per unit of penalty;
    second_diffs[i] is that slope change centered at K = i + 2, and
    chosen_K is the largest (or smallest, per rule) K whose slope change
    exceeds threshold_S, falling back to 1.
    """

    L: tuple[float, ...]
    Ltilde: tuple[float, ...]
    Ktilde: tuple[float, ...]
    second_diffs: tuple[float, ...]
    chosen_K: int
    threshold_S: float
    rule: str = "largest"
    degenerate: bool = False


def penalty(K: np.ndarray | int, p: int) -> np.ndarray | float:
    """Segmentation penalty 5K + 2K log(p / K)."""
    K = np.asarray(K, dtype=float)
    out = 5.0 * K + 2.0 * K * np.log(p / K)
    return float(out) if out.ndim == 0 else out

def slope_change_choice(
    L: np.ndarray, Ktilde: np.ndarray, S: float, rule: str = "largest"
) -> tuple[int, np.ndarray, bool]:
    """Pick a segment count from a likelihood curve by its largest slope change.

    The curve is normalized so the full likelihood range maps onto
    K_max - 1 units, converted to slopes per unit of penalty, and the
    drop between consecutive slopes is compared against S. Returns
    (chosen K, slope changes indexed from K=2, degenerate flag).
    """
    k_max = len(L)
    if k_max < 3:
        return 1, np.zeros(0), False
    span = L[-1] - L[0]
    if span == 0.0:
        # perfectly flat likelihood curve carries no elbow signal
        return 1, np.zeros(k_max - 2), True
    Lt = (L[-1] - L) / span * (k_max - 1) + 1.0
    slopes = (Lt[:-1] - Lt[1:]) / np.diff(Ktilde)
    d = slopes[:-1] - slopes[1:]
    qualifying = np.flatnonzero(d > S)
    if qualifying.size == 0:
        return 1, d, False
    if rule == "largest":
        return int(qualifying[-1]) + 2, d, False
    if rule == "smallest":
        return int(qualifying[0]) + 2, d, False
    raise ValueError(f"unknown selection rule {rule!r}")

def select_k(
    costs: SegmentCostTable,
    k_max: int | None = None,
    S: float = 0.7,
    rule: str = "largest",
    min_seg_len: int = 1,
) -> SelectionTrace:
    """Choose the number of segments by the slope-change criterion.

    Runs one DP pass up to k_max, normalizes the likelihood curve, and
    scans the slope changes. A flat curve (no likelihood gain from
    segmenting at all) triggers a warning and returns K = 1.
    """
    p = costs.p
    if k_max is None:
        k_max = default_k_max(p)
    if min_seg_len > 1:
        k_max = min(k_max, p // min_seg_len)
    if k_max < 1 or k_max > p:
        raise KTooLarge(f"k_max={k_max} out of range for p={p}")
    D, _ = _dp_tables(_masked_cost(costs, min_seg_len), k_max)
    L = -0.5 * D[:, -1]
    Kt = penalty(np.arange(1, k_max + 1), p)
    Kt = np.atleast_1d(np.asarray(Kt, dtype=float))
    chosen, d, degenerate = slope_change_choice(L, Kt, S, rule)
    if degenerate:
        warnings.warn(
            "likelihood curve is flat across K; falling back to a single segment",
            DegenerateNormalizationWarning,
            stacklevel=2,
        )
    span = L[-1] - L[0]
    if k_max == 1 or span == 0.0:
        Ltilde = np.ones(k_max)
    else:
        Ltilde = (L[-1] - L) / span * (Kt[-1] - Kt[0]) + 1.0
    return SelectionTrace(
        L=tuple(float(v) for v in L),
        Ltilde=tuple(float(v) for v in Ltilde),
        Ktilde=tuple(float(v) for v in Kt),
        second_diffs=tuple(float(v) for v in d),
        chosen_K=chosen,
        threshold_S=S,
        rule=rule,
        degenerate=degenerate,
    )
