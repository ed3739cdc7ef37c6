"""Command-line surface: segment, test, correct, simulate, evaluate, power.

Every run writes its outputs plus a manifest.json recording the resolved
configuration, library version, and seed; reruns with the same flags
produce byte-identical files. Exit codes: 0 success, 2 ingestion failure
(unreadable or malformed input), 3 validation failure (readable input or
flags violating a contract).
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from . import __version__, io
from .errors import IngestionError, ValidationError
from .pipeline import (
    correct_view,
    match_patients,
    segment_all,
    segmentation_from_bounds,
    segmentation_rows,
    split_by_chromosome,
)
from .core import ExpressionMatrix, build_gram_prefix, standardize
from .segment import build_cost_table
from .significance import apply_adjustment, power, test_regions
from .simulate import (
    ScenarioSpec,
    annotation_rows,
    default_scenario,
    evaluate,
    generate,
    tile_chromosome,
)


@dataclass
class RunConfig:
    """Resolved knobs of one CLI invocation, as recorded in the manifest."""

    command: str
    input: str | None = None
    annotation: str | None = None
    covariate: str | None = None
    covariate_positions: str | None = None
    segmentation: str | None = None
    truth: str | None = None
    regions: str | None = None
    spec: str | None = None
    S: float = 0.7
    kmax: int | None = None
    min_seg: int = 1
    rule: str = "largest"
    alpha: float = 0.05
    adjust: str = "bh"
    rho0: float | None = None
    rho1: float = 0.7
    mode: str = "pooled"
    half_width: float = 0.0
    scenario: int = 1
    n: int = 58
    p: int = 500
    seed: int = 0
    transpose: bool = False
    json_out: bool = False
    trace: bool = False
    out: str = "."

    def validate(self) -> None:
        if self.S <= 0:
            raise ValidationError(f"--S must be positive, got {self.S}")
        if not 0 < self.alpha < 1:
            raise ValidationError(f"--alpha must lie in (0, 1), got {self.alpha}")
        if self.kmax is not None and self.kmax < 1:
            raise ValidationError(f"--kmax must be >= 1, got {self.kmax}")
        if self.min_seg < 1:
            raise ValidationError(f"--min-seg must be >= 1, got {self.min_seg}")
        if self.rule not in ("largest", "smallest"):
            raise ValidationError(f"--rule must be largest or smallest, got {self.rule}")
        if self.adjust not in ("bh", "bonferroni", "none"):
            raise ValidationError(f"--adjust must be bh, bonferroni, or none, got {self.adjust}")
        if self.mode not in ("pooled", "per-gene"):
            raise ValidationError(f"--mode must be pooled or per-gene, got {self.mode}")
        if self.scenario not in (1, 2):
            raise ValidationError(f"--scenario must be 1 or 2, got {self.scenario}")
        if self.n < 3:
            raise ValidationError(f"--n must be >= 3, got {self.n}")
        for name in ("input", "annotation", "covariate", "covariate_positions",
                     "segmentation", "truth", "regions", "spec"):
            value = getattr(self, name)
            if value is not None and not Path(value).exists():
                raise ValidationError(f"--{name.replace('_', '-')}: no such file {value}")

    def manifest(self) -> dict:
        return {k: v for k, v in sorted(asdict(self).items())}


def _outdir(config: RunConfig) -> Path:
    out = Path(config.out)
    out.mkdir(parents=True, exist_ok=True)
    return out

def _load_views(config: RunConfig):
    matrix = io.read_expression(config.input, transpose=config.transpose)
    annotation = io.read_annotation(config.annotation) if config.annotation else None
    return split_by_chromosome(matrix, annotation)


def cmd_segment(config: RunConfig) -> int:
    views = _load_views(config)
    results = segment_all(
        views, S=config.S, k_max=config.kmax, rule=config.rule, min_seg_len=config.min_seg
    )
    out = _outdir(config)
    rows = segmentation_rows(results)
    io.write_segmentation(out / "segmentation.tsv", rows)
    if config.json_out:
        io.write_json(out / "segmentation.json", rows)
    if config.trace:
        traces = {r.name: r.trace for r in results if r.trace is not None}
        io.write_json(out / "trace.json", io.trace_payload(traces))
    io.write_manifest(out / "manifest.json", config.manifest())
    return 0


def cmd_test(config: RunConfig) -> int:
    views = _load_views(config)
    bounds_by_chrom = io.read_segmentation(config.segmentation)
    known = {v.name for v in views}
    unknown = sorted(set(bounds_by_chrom) - known)
    if unknown:
        raise ValidationError(f"segmentation names unknown chromosome(s): {unknown}")
    absent = sorted(known - set(bounds_by_chrom))
    if absent:
        raise ValidationError(f"segmentation missing chromosome(s): {absent}")
    reports = []
    for view in views:
        std = standardize(view.matrix)
        costs = build_cost_table(build_gram_prefix(std))
        seg = segmentation_from_bounds(costs, bounds_by_chrom[view.name])
        reports.extend(
            test_regions(std, seg, chromosome=view.name, rho0=config.rho0)
        )
    reports = apply_adjustment(reports, method=config.adjust, alpha=config.alpha)
    out = _outdir(config)
    io.write_regions(out / "regions.tsv", reports)
    if config.json_out:
        io.write_json(
            out / "regions.json",
            [
                {k: (None if isinstance(v, float) and v != v else v)
                 for k, v in vars(r).items()}
                for r in reports
            ],
        )
    io.write_manifest(out / "manifest.json", config.manifest())
    return 0


def cmd_correct(config: RunConfig) -> int:
    matrix = io.read_expression(config.input, transpose=config.transpose)
    annotation = io.read_annotation(config.annotation) if config.annotation else None
    views = split_by_chromosome(matrix, annotation)
    if config.covariate_positions:
        covariate = io.read_covariate_wide(config.covariate, config.covariate_positions)
    else:
        covariate = io.read_covariate_long(config.covariate)
    missing_chroms = sorted({v.name for v in views} - set(covariate))
    if missing_chroms:
        raise ValidationError(
            f"covariate has no probes for chromosome(s): {missing_chroms}"
        )
    corrected_values = np.array(matrix.values, copy=True)
    sidecar = {}
    for view in views:
        tracks = covariate[view.name]
        match_patients(view.matrix, set(tracks))
        corrected, info = correct_view(
            view,
            tracks,
            mode=config.mode,
            S=config.S,
            k_max=config.kmax,
            half_width=config.half_width,
        )
        corrected_values[:, view.columns] = corrected.values
        sidecar[view.name] = info
    out = _outdir(config)
    io.write_matrix(
        out / "corrected.tsv",
        ExpressionMatrix(
            values=corrected_values,
            gene_ids=matrix.gene_ids,
            standardized=False,
            patient_ids=matrix.patient_ids,
        ),
    )
    io.write_json(out / "correction.json", sidecar)
    io.write_manifest(out / "manifest.json", config.manifest())
    return 0


def _spec_from_file(path: str, config: RunConfig) -> ScenarioSpec:
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise IngestionError(f"cannot read scenario spec {path}: {exc}") from exc
    try:
        chroms = tuple(
            tile_chromosome(
                c["name"],
                int(c["p"]),
                [(int(a) - 1, int(b)) for a, b in c.get("h1_blocks", [])],
            )
            for c in raw["chromosomes"]
        )
        rho0 = raw.get("rho0", config.rho0 if config.rho0 is not None else 0.08)
        if isinstance(rho0, list):
            rho0 = tuple(float(v) for v in rho0)
        return ScenarioSpec(
            chromosomes=chroms,
            rho0=rho0,
            rho1=float(raw.get("rho1", config.rho1)),
            n=int(raw.get("n", config.n)),
            seed=int(raw.get("seed", config.seed)),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ValidationError(f"bad scenario spec {path}: {exc}") from exc

def cmd_simulate(config: RunConfig) -> int:
    if config.spec:
        spec = _spec_from_file(config.spec, config)
    else:
        try:
            spec = default_scenario(
                scenario=config.scenario,
                rho0=config.rho0 if config.rho0 is not None else 0.08,
                rho1=config.rho1,
                n=config.n,
                seed=config.seed,
                p=config.p,
            )
        except ValueError as exc:
            raise ValidationError(str(exc)) from exc
    matrix = generate(spec)
    out = _outdir(config)
    io.write_matrix(out / "expression.tsv", matrix)
    ann = annotation_rows(spec)
    io.write_rows(
        out / "annotation.tsv",
        ["gene", "chromosome", "start", "end"],
        [[g, c, s, e] for g, c, s, e in ann],
    )
    truth = spec.truth_by_chromosome()
    gene_ids = {c.name: [f"{c.name}_g{j + 1}" for j in range(c.p)] for c in spec.chromosomes}
    io.write_truth(out / "truth.tsv", truth, gene_ids)
    io.write_manifest(out / "manifest.json", config.manifest())
    return 0


def cmd_evaluate(config: RunConfig) -> int:
    truth = io.read_truth(config.truth)
    reports = io.read_regions(config.regions)
    result = evaluate(truth, reports)
    out = _outdir(config)
    for level, roc in (("gene", result.gene_level), ("region", result.region_level)):
        io.write_rows(
            out / f"roc_{level}.tsv",
            ["threshold", "tpr", "fpr"],
            [[repr(t), repr(tp), repr(fp)]
             for t, tp, fp in zip(roc.thresholds, roc.tpr, roc.fpr)],
        )
    io.write_rows(
        out / "auc.tsv",
        ["level", "auc"],
        [["gene", repr(result.gene_level.auc)], ["region", repr(result.region_level.auc)]],
    )
    if config.json_out:
        io.write_json(
            out / "evaluation.json",
            {
                "gene": {"auc": result.gene_level.auc},
                "region": {"auc": result.region_level.auc},
            },
        )
    io.write_manifest(out / "manifest.json", config.manifest())
    return 0


def _parse_grid(text: str, cast=float) -> list:
    try:
        return [cast(tok) for tok in text.split(",") if tok.strip()]
    except ValueError as exc:
        raise ValidationError(f"bad grid {text!r}: {exc}") from exc

def cmd_power(config: RunConfig, n_grid: str, p_grid: str, rho_grid: str, alpha_grid: str) -> int:
    rho0 = config.rho0 if config.rho0 is not None else 0.15
    ns = _parse_grid(n_grid, int)
    ps = _parse_grid(p_grid, int)
    rhos = _parse_grid(rho_grid)
    alphas = _parse_grid(alpha_grid)
    rows = []
    for n in ns:
        for p in ps:
            for rho in rhos:
                if rho < rho0:
                    continue
                for alpha in alphas:
                    rows.append(
                        [n, p, repr(float(rho)), repr(float(rho0)), repr(float(alpha)),
                         repr(power(n, p, rho, rho0, alpha))]
                    )
    out = _outdir(config)
    io.write_rows(out / "power.tsv", ["n", "p", "rho", "rho0", "alpha", "power"], rows)
    manifest = config.manifest()
    manifest.update({"n_grid": ns, "p_grid": ps, "rho_grid": rhos, "alpha_grid": alphas})
    io.write_manifest(out / "manifest.json", manifest)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="corrseg",
        description="Segment and test the correlation structure of ordered "
        "expression profiles.",
    )
    parser.add_argument("--version", action="version", version=f"corrseg {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p: argparse.ArgumentParser, *, needs_input: bool) -> None:
        if needs_input:
            p.add_argument("--input", required=True, help="expression matrix (TSV/CSV)")
            p.add_argument("--annotation", help="gene -> chromosome, start[, end] table")
            p.add_argument("--transpose", action="store_true",
                           help="input has genes as rows, patients as columns")
        p.add_argument("--out", default=".", help="output directory")
        p.add_argument("--json", dest="json_out", action="store_true",
                       help="also write JSON mirrors of tabular outputs")

    p_seg = sub.add_parser("segment", help="segment chromosomes into correlation blocks")
    add_common(p_seg, needs_input=True)
    p_seg.add_argument("--S", type=float, default=0.7, help="slope-change threshold")
    p_seg.add_argument("--kmax", type=int, help="max segments per chromosome")
    p_seg.add_argument("--min-seg", type=int, default=1, help="minimum segment length")
    p_seg.add_argument("--rule", choices=["largest", "smallest"], default="largest",
                       help="which qualifying slope change picks K")
    p_seg.add_argument("--trace", action="store_true", help="dump selection diagnostics")

    p_test = sub.add_parser("test", help="test segmented regions against background")
    add_common(p_test, needs_input=True)
    p_test.add_argument("--segmentation", required=True,
                        help="segmentation TSV from the segment step (or external)")
    p_test.add_argument("--alpha", type=float, default=0.05, help="significance level")
    p_test.add_argument("--adjust", choices=["bh", "bonferroni", "none"], default="bh",
                        help="multiple-testing adjustment")
    p_test.add_argument("--rho0", type=float,
                        help="fixed background correlation (default: estimated per chromosome)")

    p_cor = sub.add_parser("correct", help="regress a positioned covariate out of expression")
    add_common(p_cor, needs_input=True)
    p_cor.add_argument("--covariate", required=True,
                       help="long TSV (patient[, chromosome], position, value) or wide matrix")
    p_cor.add_argument("--covariate-positions",
                       help="positions file when --covariate is a wide matrix")
    p_cor.add_argument("--mode", choices=["pooled", "per-gene"], default="pooled",
                       help="one regression per chromosome or per gene")
    p_cor.add_argument("--half-width", type=float, default=0.0,
                       help="probe-matching window around point gene positions")
    p_cor.add_argument("--S", type=float, default=0.7,
                       help="slope-change threshold for covariate segmentation")
    p_cor.add_argument("--kmax", type=int, help="max segments per covariate series")

    p_sim = sub.add_parser("simulate", help="generate a synthetic dataset with known truth")
    add_common(p_sim, needs_input=False)
    p_sim.add_argument("--scenario", type=int, choices=[1, 2], default=1,
                       help="1: shared background; 2: per-chromosome background")
    p_sim.add_argument("--rho0", type=float, help="background correlation (scenario 1)")
    p_sim.add_argument("--rho1", type=float, default=0.7, help="within-block correlation")
    p_sim.add_argument("--n", type=int, default=58, help="number of patients")
    p_sim.add_argument("--p", type=int, default=500, help="genes per chromosome")
    p_sim.add_argument("--seed", type=int, default=0, help="generator seed")
    p_sim.add_argument("--spec", help="scenario spec JSON (overrides the flags above)")

    p_eval = sub.add_parser("evaluate", help="score region calls against a known truth")
    add_common(p_eval, needs_input=False)
    p_eval.add_argument("--truth", required=True, help="truth table from simulate")
    p_eval.add_argument("--regions", required=True, help="region report from test")

    p_pow = sub.add_parser("power", help="tabulate exact detection power")
    add_common(p_pow, needs_input=False)
    p_pow.add_argument("--n", dest="n_grid", default="10,50,200,1000",
                       help="comma list of cohort sizes")
    p_pow.add_argument("--p", dest="p_grid", default="3,5,10,20",
                       help="comma list of region widths")
    p_pow.add_argument("--rho", dest="rho_grid", default="0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9",
                       help="comma list of within-region correlations")
    p_pow.add_argument("--rho0", type=float, default=0.15, help="background correlation")
    p_pow.add_argument("--alpha", dest="alpha_grid", default="0.05,0.005,0.0005",
                       help="comma list of significance levels")
    return parser

def _config_from_args(args: argparse.Namespace) -> RunConfig:
    config = RunConfig(command=args.command)
    for name in vars(config):
        if name == "command":
            continue
        if hasattr(args, name):
            value = getattr(args, name)
            if value is not None:
                setattr(config, name, value)
    return config

def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    config = _config_from_args(args)
    try:
        if args.command == "power":
            config.validate()
            return cmd_power(config, args.n_grid, args.p_grid, args.rho_grid, args.alpha_grid)
        config.validate()
        return {
            "segment": cmd_segment,
            "test": cmd_test,
            "correct": cmd_correct,
            "simulate": cmd_simulate,
            "evaluate": cmd_evaluate,
        }[args.command](config)
    except IngestionError as exc:
        print(f"corrseg: ingestion error: {exc}", file=sys.stderr)
        return 2
    except ValidationError as exc:
        print(f"corrseg: validation error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
