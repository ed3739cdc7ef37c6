"""Data containers and Gram-matrix prefix sums.

The segmentation cost of any gene block depends on the data only through
the double sum of the empirical Gram matrix over that block. A 2-D prefix
sum over G turns every such query into four lookups, which is what makes
the O(K p^2) dynamic program practical.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConstantColumn, EmptyRegion, InvalidMatrix, NotStandardized


@dataclass(frozen=True)
class ExpressionMatrix:
    """n patients by p ordered genes, optionally column-standardized.

    ``values[i, j]`` is the signal of patient i for the j-th gene in
    chromosome order. ``positions`` are genomic coordinates (monotone
    nondecreasing) used for covariate alignment; they are optional and
    carried through untouched otherwise.
    """

    values: np.ndarray
    gene_ids: tuple[str, ...]
    positions: tuple[float, ...] | None = None
    standardized: bool = False
    patient_ids: tuple[str, ...] = ()

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 2:
            raise InvalidMatrix(f"expected a 2-D matrix, got shape {v.shape}")
        n, p = v.shape
        if p < 1:
            raise InvalidMatrix("need at least one gene")
        if n < 3:
            # the test statistic needs n-1 >= 2 degrees of freedom
            raise InvalidMatrix(f"need at least 3 patients, got {n}")
        if not np.isfinite(v).all():
            raise InvalidMatrix("matrix contains non-finite values")
        if len(self.gene_ids) != p:
            raise InvalidMatrix(f"{len(self.gene_ids)} gene ids for {p} columns")
        if self.positions is not None:
            if len(self.positions) != p:
                raise InvalidMatrix(f"{len(self.positions)} positions for {p} genes")
            if any(b < a for a, b in zip(self.positions, self.positions[1:])):
                raise InvalidMatrix("positions must be monotone nondecreasing")
        if self.patient_ids and len(self.patient_ids) != n:
            raise InvalidMatrix(f"{len(self.patient_ids)} patient ids for {n} rows")
        object.__setattr__(self, "values", v)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def p(self) -> int:
        return self.values.shape[1]


def standardize(matrix: ExpressionMatrix) -> ExpressionMatrix:
    """Center and scale every column to mean 0, variance 1 (divisor n).

    The n divisor (not n-1) makes the empirical Gram diagonal exactly 1,
    which the closed-form segment likelihood assumes. Idempotent.
    """
    v = matrix.values
    centered = v - v.mean(axis=0)
    sd = np.sqrt((centered * centered).mean(axis=0))
    zero = np.flatnonzero(sd == 0.0)
    if zero.size:
        raise ConstantColumn(matrix.gene_ids[zero[0]])
    return ExpressionMatrix(
        values=centered / sd,
        gene_ids=matrix.gene_ids,
        positions=matrix.positions,
        standardized=True,
        patient_ids=matrix.patient_ids,
    )


@dataclass(frozen=True)
class GramPrefix:
    """2-D cumulative sums of G_jk = n^-1 sum_i Y_ij Y_ik.

    ``prefix[a, b]`` is the sum of G over the leading a x b submatrix, so
    the block sum over genes [start, stop) comes out of four entries by
    inclusion-exclusion.
    """

    prefix: np.ndarray
    n: int

    @property
    def p(self) -> int:
        return self.prefix.shape[0] - 1

    def block_sum(self, start: int, stop: int) -> float:
        """Sum of G_jk over j, k in [start, stop), half-open 0-based."""
        if not (0 <= start < stop <= self.p):
            raise EmptyRegion(f"invalid region [{start}, {stop}) for p={self.p}")
        P = self.prefix
        return float(P[stop, stop] - P[start, stop] - P[stop, start] + P[start, start])


def build_gram_prefix(matrix: ExpressionMatrix) -> GramPrefix:
    """Materialize the Gram matrix of a standardized matrix and its prefix sums."""
    if not matrix.standardized:
        raise NotStandardized("standardize the matrix before building Gram prefix sums")
    Y = matrix.values
    G = (Y.T @ Y) / matrix.n
    prefix = np.zeros((matrix.p + 1, matrix.p + 1))
    prefix[1:, 1:] = G.cumsum(axis=0).cumsum(axis=1)
    return GramPrefix(prefix=prefix, n=matrix.n)
