"""
cli.py

Command-line surface of the laboratory.

Example:
    python scripts/krylov_lab.py constants --kappa 0.5
    python scripts/krylov_lab.py verify --count 50 --seed 42 --format csv
    python scripts/krylov_lab.py certify-barrier --theta 0.5 --delta 0.25 --eta 1 --tau1 0.75 --tau2 0.75

Exit codes: 0 = all checks passed, 1 = hard failure, 2 = configuration error.
"""

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import List, Optional

import numpy as np

from krylov_growth_lab.barriers.barrier_certifier import DEFAULT_SAMPLES, BarrierParams, certify_subsolution
from krylov_growth_lab.config import LabSettings
from krylov_growth_lab.constants.constants_pipeline import FSConfig, thm_lb_bound, thm_tsfs_bound
from krylov_growth_lab.errors import ConfigurationError, DomainViolation, LabError
from krylov_growth_lab.export.structured_exporter import StructuredExporter
from krylov_growth_lab.geometry.indicator_set import IndicatorSet
from krylov_growth_lab.harness.elliptic_limit import elliptic_limit_sweep
from krylov_growth_lab.harness.ensemble_generator import COEFFICIENT_FAMILIES, SOURCE_FAMILIES
from krylov_growth_lab.harness.fabes_stroock_fit import fs_fit
from krylov_growth_lab.laboratory import FORMATS, GrowthLaboratory
from krylov_growth_lab.pucci.pucci_operators import EllipticityPair
from krylov_growth_lab.solver.finite_difference_solver import FiniteDifferenceSolver, fundamental_solution
from krylov_growth_lab.solver.grid import Grid, OperatorSpec

logger = logging.getLogger(__name__)

EXIT_OK, EXIT_FAILURE, EXIT_CONFIG = 0, 1, 2


def _common_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int)
    common.add_argument("--count", type=int, default=50)
    common.add_argument("--grid", type=int, help="space nodes per axis")
    common.add_argument("--kappa", type=float)
    common.add_argument("--lambda", dest="lam", type=float)
    common.add_argument("--Lambda", dest="Lam", type=float)
    common.add_argument("--N", type=int)
    common.add_argument("--out", type=Path, help="output file; verify writes rows there with the --format extension")
    common.add_argument("--format", choices=sorted(FORMATS), default="csv")
    common.add_argument("--fs-sigma", type=float)
    common.add_argument("--fs-C", type=float)
    common.add_argument("--verbose", action="store_true")
    common.add_argument("--quiet", action="store_true")
    return common


def build_parser() -> argparse.ArgumentParser:
    common = _common_parser()
    parser = argparse.ArgumentParser(description="Krylov growth laboratory.")
    verbs = parser.add_subparsers(dest="verb", required=True)

    solve = verbs.add_parser("solve", parents=[common], help="solve u_t - op(D^2 u) = chi_source")
    solve.add_argument("--operator", type=Path, required=True, help="JSON: kind, lambda, Lambda[, A]")
    solve.add_argument("--source", type=Path, required=True, help="indicator-set file")

    fundamental = verbs.add_parser("fundamental", parents=[common], help="fundamental solution of a set")
    fundamental.add_argument("--source", type=Path, required=True, help="indicator-set file")

    verbs.add_parser("constants", parents=[common], help="explicit constants report")

    certify = verbs.add_parser("certify-barrier", parents=[common], help="sample the barrier residual")
    certify.add_argument("--theta", type=float, required=True)
    certify.add_argument("--delta", type=float, required=True)
    certify.add_argument("--eta", type=float, default=0.0)
    certify.add_argument("--tau1", type=float, default=1.0)
    certify.add_argument("--tau2", type=float, default=1.0)
    certify.add_argument("--samples", type=int, default=DEFAULT_SAMPLES)
    certify.add_argument("--alpha", type=float, help="exponent to test instead of the certified one")

    verify = verbs.add_parser("verify", parents=[common], help="verify an ensemble against the bounds")
    verify.add_argument("--source-family", choices=SOURCE_FAMILIES, default="indicator-cells")
    verify.add_argument("--coefficient-family", choices=COEFFICIENT_FAMILIES, default="mixed")
    verify.add_argument("--corrupt-source", action="store_true", help="flip the source sign (fault injection)")
    verify.add_argument("--no-richardson", action="store_true")

    fs = verbs.add_parser("fs-fit", parents=[common], help="fit the Fabes-Stroock power law")
    fs.add_argument("--r", type=float, default=0.25)
    fs.add_argument("--samples", type=int, default=40)

    elliptic = verbs.add_parser("elliptic-limit", parents=[common], help="steady states for chi_{B_r}")
    elliptic.add_argument("--radii", type=float, nargs="+", default=[0.1, 0.2, 0.4])
    elliptic.add_argument("--horizon", type=float, default=8.0)

    verbs.add_parser("report", parents=[common], help="aggregate raw summaries")

    bound = verbs.add_parser("bound", parents=[common], help="evaluate a lower-bound closure")
    which = bound.add_mutually_exclusive_group(required=True)
    which.add_argument("--m", type=float)
    which.add_argument("--fnorm", type=float)
    bound.add_argument("--level", type=float, default=1.0)
    return parser


def _configure_logging(args: argparse.Namespace) -> None:
    level = logging.DEBUG if args.verbose else logging.WARNING if args.quiet else logging.INFO
    logging.basicConfig(level=level, format="%(levelname)s: %(message)s")


def _settings(args: argparse.Namespace) -> LabSettings:
    settings = LabSettings.from_env().override(
        seed=args.seed, kappa=args.kappa, lam=args.lam, Lam=args.Lam, N=args.N, fs_sigma=args.fs_sigma, fs_C=args.fs_C
    )
    if args.grid is not None:
        key = "grid_nodes_1d" if settings.N == 1 else "grid_nodes_2d"
        settings = settings.override(**{key: args.grid})
    return settings


def _ell(settings: LabSettings) -> EllipticityPair:
    return EllipticityPair(settings.lam, settings.Lam)


def _write(text: str, out: Optional[Path]) -> None:
    if out is None:
        print(text)
        return
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(text + "\n", encoding="utf-8")
    print(f"Written to: {out}")


def _load_operator(path: Path, settings: LabSettings) -> OperatorSpec:
    try:
        spec = json.loads(path.read_text(encoding="utf-8"))
        ell = EllipticityPair(float(spec.get("lambda", settings.lam)), float(spec.get("Lambda", settings.Lam)))
        kind = spec.get("kind", "pucci_minus")
    except (OSError, ValueError, AttributeError) as e:
        raise ConfigurationError(f"cannot read operator file {path}: {e}")
    if kind != "linear" or "A" not in spec:
        return OperatorSpec(kind, ell)
    A = np.asarray(spec["A"], dtype=float)
    return OperatorSpec.linear(ell, lambda points, t: np.broadcast_to(A, points.shape[:-1] + A.shape), label="constant")


def _load_source(path: Path) -> IndicatorSet:
    try:
        return IndicatorSet.load(path)
    except OSError as e:
        raise ConfigurationError(f"cannot read source file {path}: {e}")


def cmd_solve(args, settings: LabSettings) -> int:
    gamma = _load_source(args.source)
    op = _load_operator(args.operator, settings)
    grid = Grid(lattice=gamma.lattice, Lam=op.ell.Lam, cfl_factor=settings.cfl_factor, frames=settings.frames,
                snapshots=gamma.lattice.time_cells)
    solution = FiniteDifferenceSolver(grid, op).solve(gamma)
    path = solution.save(args.out or settings.data_dir / "raw" / "solution.txt")
    print(f"Solution saved to: {path}")
    return EXIT_OK


def cmd_fundamental(args, settings: LabSettings) -> int:
    gamma = _load_source(args.source)
    w = fundamental_solution(gamma, _ell(settings), cfl_factor=settings.cfl_factor, frames=settings.frames)
    path = w.save(args.out or settings.data_dir / "raw" / "fundamental.txt")
    print(f"Fundamental solution saved to: {path}")
    return EXIT_OK


def cmd_constants(args, settings: LabSettings) -> int:
    report = GrowthLaboratory(settings).constants()
    _write(report.to_json() if args.out else report.to_key_value(), args.out)
    return EXIT_OK


def cmd_certify(args, settings: LabSettings) -> int:
    params = BarrierParams.reduced(args.theta, args.delta, args.eta, args.tau1, args.tau2, _ell(settings), settings.N)
    certificate = certify_subsolution(params, sample_density=args.samples, alpha=args.alpha)
    lines = [f"{key} = {value}" for key, value in sorted(certificate.as_dict().items()) if key != "params"]
    lines += [f"param.{key} = {value}" for key, value in sorted(params.as_dict().items())]
    _write("\n".join(lines), args.out)
    return EXIT_OK if certificate.valid else EXIT_FAILURE


def cmd_verify(args, settings: LabSettings) -> int:
    lab = GrowthLaboratory(settings)
    config = lab.ensemble_config(
        count=args.count,
        source_family=args.source_family,
        coefficient_family=args.coefficient_family,
        corrupt_source=args.corrupt_source,
    )
    report = lab.run_suite(config, richardson=not args.no_richardson)
    if args.out:
        path = lab.save_results(report, name=args.out.stem, fmt=args.format, directory=args.out.parent)
    else:
        path = lab.save_results(report, name="verify", fmt=args.format)
    print(f"Verification saved to: {path}")
    return report.exit_code


def cmd_fs_fit(args, settings: LabSettings) -> int:
    report = fs_fit(
        r=args.r,
        sample_count=args.samples,
        seed=settings.seed,
        ell=_ell(settings),
        N=settings.N,
        nodes=settings.grid_nodes if args.grid is None else args.grid,
        frames=settings.frames,
        cfl_factor=settings.cfl_factor,
    )
    _write(json.dumps(report.as_dict(), indent=2, ensure_ascii=False, sort_keys=True), args.out)
    return EXIT_OK


def cmd_elliptic(args, settings: LabSettings) -> int:
    sweep = elliptic_limit_sweep(args.radii, args.horizon, _ell(settings), settings.kappa, settings.N, settings.grid_nodes)
    _write(json.dumps(sweep, indent=2, ensure_ascii=False, sort_keys=True), args.out)
    return EXIT_OK if sweep["passed"] else EXIT_FAILURE


def cmd_report(args, settings: LabSettings) -> int:
    created = StructuredExporter(settings.data_dir).export_csv(args.out)
    print(f"Summary dataset created at: {created}")
    return EXIT_OK


def cmd_bound(args, settings: LabSettings) -> int:
    fs = FSConfig(settings.fs_sigma, settings.fs_C)
    ell = _ell(settings)
    if args.m is not None:
        value = thm_lb_bound(args.m, args.level, settings.kappa, ell, settings.N, fs)
        _write(f"m = {args.m}\nlevel = {args.level}\nbound = {value!r}", args.out)
    else:
        result = thm_tsfs_bound(args.fnorm, settings.kappa, ell, settings.N, fs)
        lines = [f"{key} = {value!r}" for key, value in sorted(vars(result).items())]
        _write("\n".join([f"fnorm = {args.fnorm}"] + lines), args.out)
    return EXIT_OK


COMMANDS = {
    "solve": cmd_solve,
    "fundamental": cmd_fundamental,
    "constants": cmd_constants,
    "certify-barrier": cmd_certify,
    "verify": cmd_verify,
    "fs-fit": cmd_fs_fit,
    "elliptic-limit": cmd_elliptic,
    "report": cmd_report,
    "bound": cmd_bound,
}


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    _configure_logging(args)
    try:
        settings = _settings(args)
        return COMMANDS[args.verb](args, settings)
    except (ConfigurationError, DomainViolation) as e:
        logger.error(f"Configuration error: {e}")
        return EXIT_CONFIG
    except LabError as e:
        logger.error(f"{args.verb} failed: {e}")
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
