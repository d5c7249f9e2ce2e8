"""Command-line front end for the convergence studies.

Example:
    nvdg --test 1 --degree 1 --levels 5 --format markdown

Exit codes: 0 on success, 1 on solver failure (a partial table is still
written), 2 on argument errors.
"""

import argparse
import os
import sys
from dataclasses import dataclass
from typing import Optional

from .assembly import BilinearFormConfig
from .analysis import run_study
from .linalg import save_matrix_market
from .mesh import dump_off
from .problems import get_problem


@dataclass
class RunConfig:
    test: str
    degree: int = 1
    levels: int = 5
    sigma: float = 20.0
    theta: float = 1.0
    form: str = "eliminated"
    tol: float = 1e-12
    precond: str = "ilu0"
    fmt: str = "markdown"
    out: Optional[str] = None
    dump_matrix: bool = False
    dump_mesh: bool = False
    threads: Optional[int] = None


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="nvdg",
        description="DG solver for -A(x):D^2 u = f on the unit square; "
                    "runs the benchmark convergence studies.")
    p.add_argument("--test", required=True, choices=["1", "2", "3a", "3b"],
                   help="benchmark problem id")
    p.add_argument("--degree", type=int, default=1, choices=[1, 2],
                   help="polynomial degree k")
    p.add_argument("--levels", type=int, default=5,
                   help="number of refinement levels (1..8)")
    p.add_argument("--sigma", type=float, default=20.0,
                   help="interior penalty parameter (default 20)")
    p.add_argument("--theta", type=float, default=1.0, choices=[-1.0, 1.0],
                   help="+1 symmetric / -1 nonsymmetric flux variant")
    p.add_argument("--form", default="eliminated", choices=["eliminated", "mixed"],
                   help="assemble the compact eliminated system or the mixed block system")
    p.add_argument("--tol", type=float, default=1e-12,
                   help="relative solver tolerance")
    p.add_argument("--precond", default="ilu0", choices=["ilu0", "jacobi", "none"],
                   help="BiCGSTAB preconditioner")
    p.add_argument("--format", dest="fmt", default="markdown",
                   choices=["csv", "markdown"], help="table output format")
    p.add_argument("--out", default=None, help="write the table to this path")
    p.add_argument("--dump-matrix", action="store_true",
                   help="write each level's matrix as nvdg_matrix_L<level>.mtx")
    p.add_argument("--dump-mesh", action="store_true",
                   help="write each level's mesh as nvdg_mesh_L<level>.off")
    p.add_argument("--threads", type=int, default=None,
                   help="cap worker threads (falls back to NVDG_THREADS)")
    return p


def parse_args(argv) -> RunConfig:
    parser = build_parser()
    args = parser.parse_args(argv)
    if not 1 <= args.levels <= 8:
        parser.error("levels must be between 1 and 8")
    if args.sigma <= 0:
        parser.error("sigma must be positive")
    if args.tol <= 0:
        parser.error("tol must be positive")
    threads = args.threads
    if threads is None and os.environ.get("NVDG_THREADS"):
        try:
            threads = int(os.environ["NVDG_THREADS"])
        except ValueError:
            parser.error("NVDG_THREADS must be an integer")
    if threads is not None and threads < 1:
        parser.error("threads must be at least 1")
    return RunConfig(test=args.test, degree=args.degree, levels=args.levels,
                     sigma=args.sigma, theta=args.theta, form=args.form,
                     tol=args.tol, precond=args.precond, fmt=args.fmt,
                     out=args.out, dump_matrix=args.dump_matrix,
                     dump_mesh=args.dump_mesh, threads=threads)


def _apply_thread_cap(threads):
    if threads is None:
        return
    try:
        import numba

        numba.set_num_threads(max(1, min(threads, numba.config.NUMBA_NUM_THREADS)))
    except (ImportError, ValueError):
        pass


def run(cfg: RunConfig) -> int:
    _apply_thread_cap(cfg.threads)
    problem = get_problem(cfg.test)
    form_cfg = BilinearFormConfig(sigma=cfg.sigma, theta=cfg.theta, form=cfg.form)

    def level_hook(level, mesh, space, system, u):
        if cfg.dump_matrix:
            save_matrix_market(system.K, f"nvdg_matrix_L{level}.mtx")
        if cfg.dump_mesh:
            with open(f"nvdg_mesh_L{level}.off", "w") as fh:
                fh.write(dump_off(mesh))

    hook = level_hook if (cfg.dump_matrix or cfg.dump_mesh) else None
    report = run_study(problem, cfg.degree, cfg.levels, cfg=form_cfg,
                       tol=cfg.tol, precond=cfg.precond, level_hook=hook)

    table = report.to_csv() if cfg.fmt == "csv" else report.to_markdown()
    if cfg.out:
        try:
            with open(cfg.out, "w") as fh:
                fh.write(table)
        except OSError as exc:
            print(f"error: cannot write table to {cfg.out}: {exc}", file=sys.stderr)
            return 1
    else:
        sys.stdout.write(table)
    sys.stdout.write(report.solver_summary())

    if report.failed_level is not None:
        print(f"error: solver failed to converge at level {report.failed_level}",
              file=sys.stderr)
        return 1
    return 0


def main(argv=None) -> int:
    cfg = parse_args(sys.argv[1:] if argv is None else argv)
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
