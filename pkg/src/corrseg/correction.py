"""Covariate pre-correction: fit, align, regress out.

A positioned covariate (copy number, typically) can induce local
correlation that has nothing to do with co-regulation. The covariate
track is smoothed per patient into a piecewise-constant fit, aligned from
probe coordinates onto gene coordinates, and regressed out of the
expression signal; the residuals then go through the usual
segmentation/testing pipeline.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .core import ExpressionMatrix
from .errors import DegenerateCovariateWarning, NoProbesOnChromosome, TooFewProbes
from .segment import (
    LOG_EPS,
    _backtrack,
    _dp_tables,
    default_k_max,
    penalty,
    slope_change_choice,
)


@dataclass(frozen=True)
class PatientFit:
    """Piecewise-constant fit of one patient's covariate series.

    breakpoints are probe indices in the same 0-based half-open convention
    as gene segmentations; means[k] is the average of the raw values in
    segment k, which is the least-squares fit on that segment.
    """

    patient: str
    positions: np.ndarray
    values: np.ndarray
    breakpoints: tuple[int, ...]
    means: tuple[float, ...]

    def fitted(self) -> np.ndarray:
        """Fitted value for every probe."""
        out = np.empty(len(self.values))
        for k, (a, b) in enumerate(zip(self.breakpoints[:-1], self.breakpoints[1:])):
            out[a:b] = self.means[k]
        return out

    def segment_of_probe(self) -> np.ndarray:
        """Segment index of every probe."""
        out = np.empty(len(self.values), dtype=np.intp)
        for k, (a, b) in enumerate(zip(self.breakpoints[:-1], self.breakpoints[1:])):
            out[a:b] = k
        return out


@dataclass(frozen=True)
class CovariateTrack:
    """Per-patient covariate fits for one chromosome."""

    fits: tuple[PatientFit, ...]

    @property
    def patients(self) -> tuple[str, ...]:
        return tuple(f.patient for f in self.fits)


def _rss_cost_matrix(v: np.ndarray) -> np.ndarray:
    """Within-segment residual sum of squares for all contiguous segments."""
    t = len(v)
    cs = np.concatenate(([0.0], np.cumsum(v)))
    cs2 = np.concatenate(([0.0], np.cumsum(v * v)))
    idx = np.arange(t)
    length = idx[None, :] - idx[:, None] + 1
    seg_sum = cs[1:][None, :] - cs[:t][:, None]
    seg_sq = cs2[1:][None, :] - cs2[:t][:, None]
    with np.errstate(invalid="ignore", divide="ignore"):
        rss = seg_sq - seg_sum * seg_sum / np.maximum(length, 1)
    rss = np.maximum(rss, 0.0)  # guard tiny negative round-off
    return np.where(length < 1, np.inf, rss)

def _fit_one_series(
    patient: str,
    positions: np.ndarray,
    values: np.ndarray,
    S: float,
    k_max: int | None,
    fixed_k: int | None,
) -> PatientFit:
    t = len(values)
    if t < 2:
        raise TooFewProbes(patient)
    order = np.argsort(positions, kind="stable")
    positions = np.asarray(positions, dtype=float)[order]
    values = np.asarray(values, dtype=float)[order]
    cost = _rss_cost_matrix(values)
    if fixed_k is not None:
        k = min(max(1, fixed_k), t)
        _, B = _dp_tables(cost, k)
        bps = _backtrack(B, k, t)
    else:
        km = default_k_max(t) if k_max is None else min(k_max, t)
        D, B = _dp_tables(cost, km)
        rss_k = D[:, -1]
        # Gaussian profile log-likelihood of the best K-segment fit
        L = -(t / 2.0) * np.log(np.maximum(rss_k, LOG_EPS) / t)
        Kt = np.atleast_1d(np.asarray(penalty(np.arange(1, km + 1), t), dtype=float))
        k, _, _ = slope_change_choice(L, Kt, S, "largest")
        bps = _backtrack(B, k, t)
    means = tuple(float(values[a:b].mean()) for a, b in zip(bps[:-1], bps[1:]))
    return PatientFit(
        patient=patient,
        positions=positions,
        values=values,
        breakpoints=tuple(bps),
        means=means,
    )

def segment_covariate(
    series: dict[str, tuple[np.ndarray, np.ndarray]],
    S: float = 0.7,
    k_max: int | None = None,
    fixed_k: int | None = None,
) -> CovariateTrack:
    """Fit each patient's (positions, values) series piecewise-constant.

    The number of segments per patient is chosen by the same slope-change
    rule as expression segmentation, applied to the Gaussian profile
    log-likelihood of the residual sum of squares; fixed_k overrides it.
    """
    fits = tuple(
        _fit_one_series(patient, pos, val, S, k_max, fixed_k)
        for patient, (pos, val) in series.items()
    )
    return CovariateTrack(fits=fits)


@dataclass(frozen=True)
class AlignedCovariate:
    """Covariate values on the gene grid; provenance records how each cell
    was filled: 'single-probe', 'averaged', or 'interpolated'."""

    x: np.ndarray
    provenance: np.ndarray

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def p(self) -> int:
        return self.x.shape[1]


def align_to_genes(
    track: CovariateTrack,
    gene_starts: np.ndarray,
    gene_ends: np.ndarray | None = None,
    half_width: float = 0.0,
    chromosome: str = "all",
) -> AlignedCovariate:
    """Map per-patient covariate fits onto gene coordinates.

    A gene's region is [start, end], or [position - half_width,
    position + half_width] when only single positions are given. One probe
    in the region contributes its segment mean; several contribute the
    average of the distinct segment means they touch; genes with no probe
    are filled by linear interpolation between the nearest flanking filled
    genes, held constant past the first and last of them.
    """
    starts = np.asarray(gene_starts, dtype=float)
    if gene_ends is None:
        lo = starts - half_width
        hi = starts + half_width
        centers = starts
    else:
        ends = np.asarray(gene_ends, dtype=float)
        lo, hi = starts, ends
        centers = 0.5 * (starts + ends)
    p = len(starts)
    n = len(track.fits)
    x = np.full((n, p), np.nan)
    provenance = np.full((n, p), "interpolated", dtype="<U12")
    for i, fit in enumerate(track.fits):
        if len(fit.positions) == 0:
            raise NoProbesOnChromosome(fit.patient, chromosome)
        seg_means = np.asarray(fit.means)
        probe_seg = fit.segment_of_probe()
        first = np.searchsorted(fit.positions, lo, side="left")
        last = np.searchsorted(fit.positions, hi, side="right")
        for j in range(p):
            a, b = first[j], last[j]
            if b > a:
                touched = np.unique(probe_seg[a:b])
                x[i, j] = float(seg_means[touched].mean())
                provenance[i, j] = "single-probe" if b - a == 1 else "averaged"
        filled = np.flatnonzero(~np.isnan(x[i]))
        if filled.size == 0:
            # no gene captured a probe; fall back to the probe-level fit
            x[i] = np.interp(centers, fit.positions, fit.fitted())
        elif filled.size < p:
            missing = np.flatnonzero(np.isnan(x[i]))
            x[i, missing] = np.interp(centers[missing], centers[filled], x[i, filled])
    return AlignedCovariate(x=x, provenance=provenance)


def correct_expression(
    matrix: ExpressionMatrix,
    covariates: AlignedCovariate | list[AlignedCovariate],
    mode: str = "pooled",
) -> tuple[ExpressionMatrix, dict]:
    """Regress the covariate(s) out of the expression matrix.

    Pooled mode fits one regression over every (patient, gene) cell of the
    chromosome, matching a single shared slope per covariate; per-gene
    mode fits one regression per gene column. Returns the residual matrix
    (unstandardized; the pipeline re-standardizes before segmenting) and
    the fitted coefficients.
    """
    if isinstance(covariates, AlignedCovariate):
        covariates = [covariates]
    if not covariates:
        raise ValueError("need at least one covariate")
    Y = matrix.values
    for c in covariates:
        if c.x.shape != Y.shape:
            raise ValueError(f"covariate shape {c.x.shape} does not match {Y.shape}")
    if mode not in ("pooled", "per-gene"):
        raise ValueError(f"unknown correction mode {mode!r}")
    if mode == "pooled":
        cols = [np.ones(Y.size)]
        degenerate = True
        for c in covariates:
            flat = c.x.ravel()
            if np.ptp(flat) > 0:
                degenerate = False
            cols.append(flat)
        if degenerate:
            warnings.warn(
                "covariate has zero variance; returning centered expression",
                DegenerateCovariateWarning,
                stacklevel=2,
            )
            resid = Y - Y.mean()
            info = {"mode": mode, "beta": [float(Y.mean())] + [0.0] * len(covariates)}
        else:
            A = np.column_stack(cols)
            beta, *_ = np.linalg.lstsq(A, Y.ravel(), rcond=None)
            resid = (Y.ravel() - A @ beta).reshape(Y.shape)
            info = {"mode": mode, "beta": [float(b) for b in beta]}
    else:
        resid = np.empty_like(Y)
        betas = np.empty((matrix.p, 1 + len(covariates)))
        for j in range(matrix.p):
            A = np.column_stack([np.ones(matrix.n)] + [c.x[:, j] for c in covariates])
            beta, *_ = np.linalg.lstsq(A, Y[:, j], rcond=None)
            resid[:, j] = Y[:, j] - A @ beta
            betas[j] = beta
        info = {"mode": mode, "beta": betas.tolist()}
    corrected = ExpressionMatrix(
        values=resid,
        gene_ids=matrix.gene_ids,
        positions=matrix.positions,
        standardized=False,
        patient_ids=matrix.patient_ids,
    )
    return corrected, info
