"""Convergence-study command line tool."""

import argparse
import io
import sys
import warnings
from dataclasses import dataclass
from pathlib import Path

from .errors import HDGError, ParameterError
from .hybridsystem import dump_matrix, solve_problem
from .localsolver import StabilizationParams
from .mesh import MAX_LEVEL, build_structured_mesh
from .options import ElementKind, HybridizationType
from .verify import QUANTITIES, ConvergenceRecord, compute_errors, manufactured_case

SOFT_MAX_DEGREE = 3

CSV_COLUMNS = ["k", "level", "h"] + [c for q in QUANTITIES for c in ("e_" + q, "eoc_" + q)]


@dataclass
class StudyConfig:
    experiment: int = 1
    element_kind: ElementKind = ElementKind.TRIANGLE
    hybridization: HybridizationType = HybridizationType.TYPE_III
    degrees: tuple = (1,)
    levels: tuple = (1, 4)
    alpha: float = 1.0
    tau: float = 1.0
    solver: str = "cholesky"
    tol: float = 1e-12
    out: str = None
    fmt: str = "csv"
    dump_matrix: str = None
    allow_high_degree: bool = False
    diagonal: str = "up"

    def level_range(self):
        return range(self.levels[0], self.levels[1] + 1)


def _degree_list(text):
    try:
        ks = [int(tok) for tok in text.split(",") if tok.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a comma-separated list of integers, got {text!r}")
    if not ks or any(k < 0 for k in ks):
        raise argparse.ArgumentTypeError(f"degrees must be non-negative integers, got {text!r}")
    return tuple(ks)


def _level_range(text):
    parts = text.split(":")
    try:
        lo, hi = (int(parts[0]), int(parts[-1])) if len(parts) <= 2 else (None, None)
    except ValueError:
        lo = hi = None
    if lo is None or not 0 <= lo <= hi <= MAX_LEVEL:
        raise argparse.ArgumentTypeError(f"levels must look like MIN:MAX within [0, {MAX_LEVEL}], got {text!r}")
    return lo, hi


def _positive(text):
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}")
    if not v > 0:
        raise argparse.ArgumentTypeError(f"must be positive, got {text!r}")
    return v


def build_parser():
    p = argparse.ArgumentParser(
        prog="hdgvl-study",
        description="Convergence study of the HDG vector Laplacian solver on the unit square.")
    p.add_argument("--experiment", type=int, choices=(1, 2, 3), default=1,
                   help="1 electric, 2 magnetic, 3 Dirichlet manufactured solution")
    p.add_argument("--elements", choices=("tri", "quad"), default="tri")
    p.add_argument("--diagonal", choices=("up", "down"), default="up",
                   help="triangle split: lower-left to upper-right (up) or upper-left to lower-right")
    p.add_argument("--hybridization", type=int, choices=(1, 2, 3), default=3)
    p.add_argument("--k", type=_degree_list, default=(1,), help="comma-separated degrees, e.g. 0,1,2")
    p.add_argument("--levels", type=_level_range, default=(1, 4), help="refinement levels MIN:MAX")
    p.add_argument("--alpha", type=_positive, default=1.0)
    p.add_argument("--tau", type=_positive, default=1.0)
    p.add_argument("--solver", choices=("cholesky", "cg"), default="cholesky")
    p.add_argument("--tol", type=_positive, default=1e-12)
    p.add_argument("--format", dest="fmt", choices=("csv", "md"), default="csv")
    p.add_argument("--out", default=None, help="output file (default: standard output)")
    p.add_argument("--dump-matrix", default=None, metavar="PATH",
                   help="write each skeleton matrix as 'i j value' lines")
    p.add_argument("--allow-high-degree", action="store_true",
                   help=f"accept degrees above {SOFT_MAX_DEGREE}")
    return p


def parse_args(argv=None):
    parser = build_parser()
    ns = parser.parse_args(argv)
    if max(ns.k) > SOFT_MAX_DEGREE:
        if not ns.allow_high_degree:
            parser.error(f"degree {max(ns.k)} exceeds the soft limit {SOFT_MAX_DEGREE}; "
                         "pass --allow-high-degree to run it anyway")
        warnings.warn(f"degree {max(ns.k)} above {SOFT_MAX_DEGREE}: expect long runs and "
                      "ill-conditioned local systems", stacklevel=2)
    return StudyConfig(
        experiment=ns.experiment,
        element_kind=ElementKind.parse(ns.elements),
        hybridization=HybridizationType.parse(ns.hybridization),
        degrees=ns.k, levels=ns.levels, alpha=ns.alpha, tau=ns.tau,
        solver=ns.solver, tol=ns.tol, out=ns.out, fmt=ns.fmt,
        dump_matrix=ns.dump_matrix, allow_high_degree=ns.allow_high_degree,
        diagonal=ns.diagonal)


def _dump_path(config, k, level):
    path = Path(config.dump_matrix)
    if len(config.degrees) == 1 and config.levels[0] == config.levels[1]:
        return path
    return path.with_name(f"{path.stem}_k{k}_l{level}{path.suffix}")


def run_convergence_study(config):
    """One ConvergenceRecord per degree, levels in increasing order."""
    if not config.allow_high_degree and max(config.degrees) > SOFT_MAX_DEGREE:
        raise ParameterError(f"degree above {SOFT_MAX_DEGREE} needs allow_high_degree")
    exact = manufactured_case(config.experiment)
    params = StabilizationParams(config.alpha, config.tau)
    records = []
    for k in config.degrees:
        rec = ConvergenceRecord(k)
        for level in config.level_range():
            mesh = build_structured_mesh(level, config.element_kind, config.diagonal)
            res = solve_problem(mesh, k, exact.f, exact.boundary_kind, config.hybridization,
                                params=params, solver=config.solver, tol=config.tol)
            if config.dump_matrix:
                with open(_dump_path(config, k, level), "w") as fh:
                    dump_matrix(res.system, fh)
            rec.add(level, mesh.h_reported, compute_errors(res.fields, exact, mesh),
                    ndof=res.system.ndof)
        records.append(rec)
    return records


def _rows(records):
    for rec in records:
        for row in rec.rows:
            yield rec.k, row


def format_csv(records):
    buf = io.StringIO()
    buf.write(",".join(CSV_COLUMNS) + "\n")
    for k, row in _rows(records):
        cells = [str(k), str(row.level), repr(row.h)]
        for q in QUANTITIES:
            rate = row.rates[q]
            cells += [repr(getattr(row.errors, "e_" + q)), "" if rate is None else repr(rate)]
        buf.write(",".join(cells) + "\n")
    return buf.getvalue()


def format_markdown(records):
    head = ["k", "h"] + [c for q in QUANTITIES for c in ("e_" + q, "e.o.c.")]
    lines = ["| " + " | ".join(head) + " |", "|" + "---|" * len(head)]
    for k, row in _rows(records):
        cells = [str(k), f"{row.h:.2e}"]
        for q in QUANTITIES:
            rate = row.rates[q]
            cells += [f"{getattr(row.errors, 'e_' + q):.2e}", "-" if rate is None else f"{rate:.2f}"]
        lines.append("| " + " | ".join(cells) + " |")
    return "\n".join(lines) + "\n"


def main(argv=None):
    config = parse_args(argv)
    try:
        records = run_convergence_study(config)
    except (HDGError, ArithmeticError) as exc:
        print(f"hdgvl-study: solve failed: {exc}", file=sys.stderr)
        return 1
    text = format_csv(records) if config.fmt == "csv" else format_markdown(records)
    if config.out:
        Path(config.out).write_text(text)
    else:
        sys.stdout.write(text)
    return 0


if __name__ == "__main__":
    sys.exit(main())
