"""Run orchestration: one CSV per dynamics, plus a report in compare mode."""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field

from . import exact as ex
from .analysis import compare
from .config import RunConfig
from .dynamics import DynamicsError
from .export import exact_columns, trajectory_columns, write_csv
from .integrator import integrate, record_times

REPORT_NAME = "report.txt"


class RunError(RuntimeError):
    """One or more dynamics failed; partial output was written and marked."""

    def __init__(self, message, files, failures, time=None):
        super().__init__(message)
        self.files = files
        self.failures = failures
        self.time = time


@dataclass
class RunResult:
    files: dict = field(default_factory=dict)  # name -> path
    columns: dict = field(default_factory=dict)  # name -> column dict
    report: object = None
    failures: dict = field(default_factory=dict)


def exact_initial(config: RunConfig) -> ex.ExactState:
    """Exact counterpart of the configured Gaussian state (coherent field, pure atom)."""
    bo, fe = config.initial.boson, config.initial.fermion
    if bo.nu > 1e-12 or abs(bo.y) > 1e-12:
        raise ValueError("the exact run needs a coherent initial field (nu0=0, y0=0)")
    if fe.p1 == 1.0 and fe.pm1 == 0.0:
        atom = (fe.u, -fe.v)  # occupied quasi-level alpha_1^+ = u a_1^+ - v a_-1^+
    elif fe.p1 == 0.0 and fe.pm1 == 1.0:
        atom = (fe.v.conjugate(), fe.u.conjugate())
    else:
        raise ValueError("the exact run needs a pure atom state ({p1_0, pm1_0} = {0, 1})")
    return ex.prepare_coherent_excited(bo.B, config.n_max, atom)


def run_exact(config: RunConfig):
    times = record_times(config.integrator)
    series = ex.exact_series(exact_initial(config), config.params, times)
    return exact_columns(times, series)


def run_gaussian(config: RunConfig, mode):
    """Return ``(columns, failure message or None)``."""
    try:
        traj = integrate(config.initial, config.params, mode, config.integrator, config.rhs)
    except DynamicsError as err:
        return trajectory_columns(err.trajectory), err
    return trajectory_columns(traj), None


def run(config: RunConfig, out=None) -> RunResult:
    """Execute the configured mode and write its files into ``out`` (default ``config.out``)."""
    out = config.out if out is None else out
    os.makedirs(out, exist_ok=True)
    modes = ("exact", "meanfield", "collisional") if config.mode == "compare" else (config.mode,)
    res = RunResult()
    errors = {}
    for mode in modes:
        if mode == "exact":
            cols, err = run_exact(config), None
        else:
            cols, err = run_gaussian(config, mode)
        path = os.path.join(out, f"{mode}.csv")
        failure = f"{type(err).__name__} at t={err.time:.6g}: {err}" if err else None
        write_csv(path, cols, failure)
        res.files[mode] = path
        res.columns[mode] = cols
        if err:
            res.failures[mode] = failure
            errors[mode] = err
    if config.mode == "compare":
        approx = {m: res.columns[m] for m in ("meanfield", "collisional")}
        res.report = compare(res.columns["exact"], approx, config.window, config.threshold, res.failures)
        path = os.path.join(out, REPORT_NAME)
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(res.report.to_text())
        res.files["report"] = path
    if errors:
        first = min(errors.values(), key=lambda e: e.time if e.time is not None else math.inf)
        msg = "; ".join(f"{m}: {f}" for m, f in res.failures.items())
        raise RunError(msg, res.files, res.failures, first.time) from first
    return res
