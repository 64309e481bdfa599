"""Desk-scale experiment driver behind the command line: one dispatch
function per solver, the comparison table and the phase profile."""
import csv
import io
import time

import numpy as np

from .cg import CgConfig, solve_cg
from .dense import assemble_dense, solve_dense
from .errors import ConfigurationError, OutOfMemoryError, SizeGuardError
from .grid import new_grid
from .lanczos import solve_sylvester, sylvester_problem
from .model import build_rhs, planck_model
from .operators import PosteriorOperator
from .profiling import NULL_TIMER, PhaseTimer
from .report import SolveReport
from .simio import SimConfig, simulate
from .sparse_dense import MAX_ASSEMBLED_LEVEL, solve_sparse_dense

METHODS = ("cg", "lanczos-sylvester", "sparse-dense", "dense")
CSV_HEADER = ("level", "N", "method", "iterations", "rel_residual", "wall_time_s",
              "peak_mem_bytes", "status")
PROFILE_FIELDS = ("method", "level", "N", "wall_time_s", "phases", "coverage", "kernel_coverage",
                  "peak_mem_bytes", "report")
# Budget for the assembled sparse-dense path that plays the role of the
# workstation memory limit: level 4 fits, level 5 does not.
DESK_MEM_BUDGET = 1_000_000


def run_method(method, grid, model, Y, *, tol=1e-8, max_iter=None, mem_budget=None,
               timer=NULL_TIMER):
    """Solve the posterior mean system for the maps ``Y`` with ``method``.

    Returns the ``(N, m)`` mean and a :class:`SolveReport`. For the two
    Sylvester methods ``rel_residual`` is the Sylvester residual; for ``cg``
    and ``dense`` it is the residual of the Kronecker system.

    Raises
    ------
    ConfigurationError
        Unknown method.
    SizeGuardError
        ``dense`` above the oracle size guard.
    OutOfMemoryError
        ``sparse-dense`` whose assembled factor exceeds ``mem_budget``.
    """
    if method == "cg":
        cfg = CgConfig(tol=tol) if max_iter is None else CgConfig(tol=tol, max_iter=max_iter)
        with timer.phase("setup"):
            op = PosteriorOperator(grid, model)
            rhs = build_rhs(model, Y)
        return solve_cg(op, rhs, cfg, timer=timer)
    if method == "lanczos-sylvester":
        with timer.phase("setup"):
            problem = sylvester_problem(grid, model, Y)
        return solve_sylvester(problem, tol=tol, max_iter=max_iter, timer=timer)
    if method == "sparse-dense":
        with timer.phase("setup"):
            problem = sylvester_problem(grid, model, Y)
        # a direct factorization whenever it is allowed, like the baseline it stands for
        assembled = mem_budget is not None or grid.level <= MAX_ASSEMBLED_LEVEL
        kwargs = {"max_inner_iter": max_iter} if max_iter is not None else {}
        return solve_sparse_dense(problem, assembled=assembled, mem_budget=mem_budget,
                                  timer=timer, **kwargs)
    if method == "dense":
        t0 = time.perf_counter()
        with timer.phase("assemble"):
            Qhat, rhs_builder = assemble_dense(grid, model)
            rhs = rhs_builder(Y)
        with timer.phase("factor_solve"):
            x = solve_dense(Qhat, rhs)
        with timer.phase("final_residual"):
            res = np.linalg.norm(Qhat @ x - rhs) / max(np.linalg.norm(rhs), np.finfo(float).tiny)
        report = SolveReport("dense", 0, float(res), time.perf_counter() - t0,
                             Qhat.nbytes + 3 * rhs.nbytes, True, None)
        return x.reshape((grid.npix, model.m), order="F"), report
    raise ConfigurationError(f"unknown method {method!r}; choose from {', '.join(METHODS)}")


def make_model(grid, model_kwargs=None):
    """Default model for ``grid`` with overrides; a scalar ``Nhits`` fills every pixel."""
    kw = dict(model_kwargs or {})
    if "Nhits" in kw and np.ndim(kw["Nhits"]) == 0:
        kw["Nhits"] = np.full(grid.npix, float(kw["Nhits"]))
    return planck_model(grid.npix, **kw)


def simulated_problem(level, seed=0, model_kwargs=None):
    """Grid, model and simulated ``(S_true, Y)`` at ``level``."""
    grid = new_grid(level)
    model = make_model(grid, model_kwargs)
    S, Y = simulate(SimConfig(level=level, m=model.m, n=model.n, seed=seed), grid, model)
    return grid, model, S, Y


def compare_rows(levels, methods, *, seed=0, tol=1e-8, max_iter=None, mem_budget=None, repeat=1,
                 model_kwargs=None):
    """One result row per ``(level, method)``; failures become status fields.

    ``wall_time_s`` is the fastest of ``repeat`` runs.
    """
    rows = []
    for level in levels:
        grid, model, _, Y = simulated_problem(level, seed, model_kwargs)
        for method in methods:
            row = {"level": level, "N": grid.npix, "method": method, "iterations": "",
                   "rel_residual": "", "wall_time_s": "", "peak_mem_bytes": "", "status": "ok"}
            try:
                best = None
                for _ in range(max(1, repeat)):
                    _, rep = run_method(method, grid, model, Y, tol=tol, max_iter=max_iter,
                                        mem_budget=mem_budget)
                    if best is None or rep.wall_time < best.wall_time:
                        best = rep
            except OutOfMemoryError:
                row["status"] = "out-of-memory"
            except SizeGuardError:
                row["status"] = "refused"
            except (ArithmeticError, ValueError) as exc:
                row["status"] = f"error: {type(exc).__name__}"
            else:
                row.update(iterations=best.iterations, rel_residual=f"{best.rel_residual:.6e}",
                           wall_time_s=f"{best.wall_time:.6e}", peak_mem_bytes=best.peak_mem_estimate,
                           status="ok" if best.converged else "not-converged")
            rows.append(row)
    return rows


def rows_to_csv(rows, fh=None):
    """Write rows under :data:`CSV_HEADER`; returns the text when ``fh`` is None."""
    out = fh or io.StringIO()
    writer = csv.DictWriter(out, fieldnames=CSV_HEADER, lineterminator="\n")
    writer.writeheader()
    writer.writerows(rows)
    return None if fh is not None else out.getvalue()


def profile_run(method, grid, model, Y, *, tol=1e-8, max_iter=None, mem_budget=None, sink=None):
    """Run one solve under a :class:`PhaseTimer`.

    Python control flow between instrumented kernels is charged to a
    ``driver`` phase so every instant lands somewhere. ``coverage`` is the
    share of wall time held by all phases, ``kernel_coverage`` the share
    held by the phases other than ``driver``. ``sink``, if
    given, is called with the solution inside an ``io`` phase.

    Returns
    -------
    dict
        Keys ``PROFILE_FIELDS``; ``phases`` maps phase names to seconds.
    """
    timer = PhaseTimer()
    t0 = time.perf_counter()
    with timer.phase("driver"):
        M, report = run_method(method, grid, model, Y, tol=tol, max_iter=max_iter,
                               mem_budget=mem_budget, timer=timer)
        if sink is not None:
            with timer.phase("io"):
                sink(M)
    wall = time.perf_counter() - t0
    phases = dict(timer.totals)
    kernel = sum(v for k, v in phases.items() if k != "driver")
    return {
        "method": method,
        "level": grid.level,
        "N": grid.npix,
        "wall_time_s": wall,
        "phases": phases,
        "coverage": sum(phases.values()) / wall if wall > 0 else 1.0,
        "kernel_coverage": kernel / wall if wall > 0 else 1.0,
        "peak_mem_bytes": report.peak_mem_estimate,
        "report": report.to_dict(),
    }
