"""CSV time series: writing, reading and conversion of trajectories to rows."""

from __future__ import annotations

import csv

import numpy as np

from .model import ExtendedBosonDensity, boson_diagonalize

COLUMNS = ("t", "sigma3", "sigma_p", "photon", "energy", "B_re", "B_im", "nu", "p1", "pm1")
FAILURE_MARK = "# run stopped: "


def fmt(x):
    return format(float(x), ".17g")


def trajectory_columns(traj):
    """Column dict of a Gaussian trajectory."""
    rows = {k: [] for k in COLUMNS}
    for smp in traj.samples:
        bo, fe = smp.state.boson, smp.state.fermion
        for k, val in zip(COLUMNS, (smp.time, smp.obs.sigma3, smp.obs.sigmaP, smp.obs.photon,
                                    smp.obs.energyMF, bo.B.real, bo.B.imag, bo.nu, fe.p1, fe.pm1)):
            rows[k].append(val)
    return {k: np.array(v, dtype=float) for k, v in rows.items()}


def exact_columns(times, series):
    """Column dict of an exact run.

    ``nu`` comes from the field fluctuation moments; ``p1``/``pm1`` are the
    larger/smaller eigenvalue of the reduced atom density.
    """
    B = series["B"]
    nu = np.empty(len(times))
    for i in range(len(times)):
        R = series["photon"][i] - abs(B[i]) ** 2
        Pi = series["bb"][i] - B[i] ** 2
        # rounding can push a pure coherent state's R a hair below zero
        nu[i] = boson_diagonalize(ExtendedBosonDensity(max(R, 0.0), complex(Pi)), tol=1e-7)[0]
    sp = series["sigmaP"]
    return {"t": np.asarray(times, dtype=float), "sigma3": series["sigma3"], "sigma_p": sp,
            "photon": series["photon"], "energy": series["energy"], "B_re": B.real, "B_im": B.imag,
            "nu": nu, "p1": 0.5 * (1 + sp), "pm1": 0.5 * (1 - sp)}


def write_csv(path, cols, failure=None):
    """Write a column dict; a failed run gets a trailing marker line."""
    n = len(cols["t"])
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(COLUMNS)
        for i in range(n):
            w.writerow([fmt(cols[k][i]) for k in COLUMNS])
        if failure:
            fh.write(FAILURE_MARK + " ".join(str(failure).split()) + "\n")


def read_csv(path):
    """Return ``(columns, failure)``; ``failure`` is None for a complete run."""
    failure = None
    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        header = None
        for line in fh:
            if line.startswith(FAILURE_MARK):
                failure = line[len(FAILURE_MARK):].strip()
                continue
            fields = next(csv.reader([line]))
            if header is None:
                header = fields
                if tuple(header) != COLUMNS:
                    raise ValueError(f"unexpected CSV header {header}")
            else:
                rows.append([float(x) for x in fields])
    data = np.array(rows, dtype=float).reshape(-1, len(COLUMNS))
    return {k: data[:, i] for i, k in enumerate(COLUMNS)}, failure
