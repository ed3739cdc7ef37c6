"""Per-chromosome orchestration shared by the CLI and the test harness.

The model is defined per ordered gene sequence, so every step here splits
the input by chromosome, processes chromosomes independently in a fixed
sorted order, and reassembles results deterministically.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import ExpressionMatrix, build_gram_prefix, standardize
from .correction import (
    AlignedCovariate,
    align_to_genes,
    correct_expression,
    segment_covariate,
)
from .errors import PatientMismatch, ValidationError
from .io import natural_key
from .segment import (
    Segmentation,
    SegmentCostTable,
    SelectionTrace,
    build_cost_table,
    dp_segment,
    rho_hat,
    select_k,
)
from .significance import RegionReport, apply_adjustment, test_regions


@dataclass(frozen=True)
class ChromosomeView:
    """One chromosome's slice of the input matrix.

    columns holds the original column indices in input order, so corrected
    values can be written back into the full matrix layout.
    """

    name: str
    matrix: ExpressionMatrix
    columns: np.ndarray
    starts: np.ndarray | None = None
    ends: np.ndarray | None = None


def split_by_chromosome(
    matrix: ExpressionMatrix,
    annotation: dict[str, tuple[str, float, float | None]] | None,
) -> list[ChromosomeView]:
    """Group genes by chromosome, ordered by start position within each.

    Without an annotation, the whole matrix is one chromosome named 'all'
    in input order. Genes absent from the annotation are an error: silent
    dropping would desynchronize outputs from inputs.
    """
    if annotation is None:
        return [
            ChromosomeView(
                name="all",
                matrix=matrix,
                columns=np.arange(matrix.p),
            )
        ]
    missing = [g for g in matrix.gene_ids if g not in annotation]
    if missing:
        shown = ", ".join(missing[:5]) + ("..." if len(missing) > 5 else "")
        raise ValidationError(
            f"{len(missing)} gene(s) missing from the annotation: {shown}"
        )
    by_chrom: dict[str, list[int]] = {}
    for j, gene in enumerate(matrix.gene_ids):
        by_chrom.setdefault(annotation[gene][0], []).append(j)
    views = []
    for name in sorted(by_chrom, key=natural_key):
        cols = by_chrom[name]
        cols.sort(key=lambda j: (annotation[matrix.gene_ids[j]][1], j))
        idx = np.array(cols, dtype=np.intp)
        starts = np.array([annotation[matrix.gene_ids[j]][1] for j in cols])
        raw_ends = [annotation[matrix.gene_ids[j]][2] for j in cols]
        ends = None if any(e is None for e in raw_ends) else np.array(raw_ends)
        views.append(
            ChromosomeView(
                name=name,
                matrix=ExpressionMatrix(
                    values=matrix.values[:, idx],
                    gene_ids=tuple(matrix.gene_ids[j] for j in cols),
                    positions=tuple(float(s) for s in starts),
                    standardized=matrix.standardized,
                    patient_ids=matrix.patient_ids,
                ),
                columns=idx,
                starts=starts,
                ends=ends,
            )
        )
    return views


@dataclass(frozen=True)
class ChromosomeResult:
    name: str
    matrix: ExpressionMatrix  # standardized
    costs: SegmentCostTable
    segmentation: Segmentation
    trace: SelectionTrace | None


def segment_chromosome(
    matrix: ExpressionMatrix,
    name: str = "all",
    S: float = 0.7,
    k_max: int | None = None,
    rule: str = "largest",
    min_seg_len: int = 1,
    fixed_k: int | None = None,
) -> ChromosomeResult:
    """Standardize, build costs, choose K (unless fixed), and segment."""
    std = standardize(matrix)
    costs = build_cost_table(build_gram_prefix(std))
    if fixed_k is not None:
        trace = None
        k = fixed_k
    elif matrix.p == 1:
        trace = None
        k = 1
    else:
        trace = select_k(costs, k_max=k_max, S=S, rule=rule, min_seg_len=min_seg_len)
        k = trace.chosen_K
    seg = dp_segment(costs, k, min_seg_len=min_seg_len)
    return ChromosomeResult(name=name, matrix=std, costs=costs, segmentation=seg, trace=trace)

def segment_all(
    views: list[ChromosomeView],
    S: float = 0.7,
    k_max: int | None = None,
    rule: str = "largest",
    min_seg_len: int = 1,
) -> list[ChromosomeResult]:
    return [
        segment_chromosome(
            v.matrix, v.name, S=S, k_max=k_max, rule=rule, min_seg_len=min_seg_len
        )
        for v in views
    ]


def segmentation_rows(results: list[ChromosomeResult]) -> list[dict]:
    """Flatten segmentations into output rows (1-based inclusive bounds)."""
    rows = []
    for res in results:
        seg = res.segmentation
        for k, (a, b) in enumerate(seg.segments()):
            rows.append(
                {
                    "chromosome": res.name,
                    "segment": k + 1,
                    "start": a + 1,
                    "end": b,
                    "p_k": b - a,
                    "rho_hat": seg.rho[k],
                    "loglik": seg.segment_loglik[k],
                }
            )
    return rows


def segmentation_from_bounds(
    costs: SegmentCostTable, bounds: list[tuple[int, int]]
) -> Segmentation:
    """Rebuild a Segmentation (with rho estimates) from half-open bounds."""
    if not bounds:
        raise ValidationError("empty segmentation")
    bps = [bounds[0][0]] + [b for _, b in bounds]
    if bps[0] != 0 or bps[-1] != costs.p:
        raise ValidationError(
            f"segmentation covers [{bps[0]}, {bps[-1]}), expected [0, {costs.p})"
        )
    rho = []
    seg_ll = []
    for a, b in bounds:
        p_k = b - a
        rho.append(0.0 if p_k == 1 else rho_hat(float(costs.block_sums[a, b - 1]), p_k))
        seg_ll.append(-0.5 * float(costs.cost[a, b - 1]))
    return Segmentation(
        breakpoints=tuple(bps),
        rho=tuple(rho),
        segment_loglik=tuple(seg_ll),
        total_loglik=float(sum(seg_ll)),
    )


def test_all(
    results: list[ChromosomeResult],
    rho0: float | None = None,
    adjust: str = "bh",
    alpha: float = 0.05,
) -> list[RegionReport]:
    """Test every segment of every chromosome; adjust across the whole family."""
    reports: list[RegionReport] = []
    for res in results:
        reports.extend(
            test_regions(res.matrix, res.segmentation, chromosome=res.name, rho0=rho0)
        )
    return apply_adjustment(reports, method=adjust, alpha=alpha)


def match_patients(
    matrix: ExpressionMatrix, covariate_patients: set[str]
) -> None:
    """Expression and covariate cohorts must agree exactly."""
    expr = set(matrix.patient_ids)
    missing = sorted(expr - covariate_patients)
    extra = sorted(covariate_patients - expr)
    if missing or extra:
        raise PatientMismatch(missing, extra)

def correct_view(
    view: ChromosomeView,
    covariate: dict[str, tuple[np.ndarray, np.ndarray]],
    mode: str = "pooled",
    S: float = 0.7,
    k_max: int | None = None,
    half_width: float = 0.0,
) -> tuple[ExpressionMatrix, dict]:
    """Fit, align, and regress out one chromosome's covariate track."""
    matrix = view.matrix
    series = {patient: covariate[patient] for patient in matrix.patient_ids}
    track = segment_covariate(series, S=S, k_max=k_max)
    if view.starts is None:
        starts = np.arange(matrix.p, dtype=float)
    else:
        starts = view.starts
    aligned = align_to_genes(
        track, starts, gene_ends=view.ends, half_width=half_width, chromosome=view.name
    )
    corrected, info = correct_expression(matrix, aligned, mode=mode)
    prov, counts = np.unique(aligned.provenance, return_counts=True)
    info = dict(info)
    info["alignment"] = {str(k): int(v) for k, v in zip(prov, counts)}
    info["covariate_breakpoints"] = {
        fit.patient: list(fit.breakpoints) for fit in track.fits
    }
    return corrected, info
