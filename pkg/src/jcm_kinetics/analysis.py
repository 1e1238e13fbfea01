"""Spectral and error metrics used to compare approximate and exact runs."""

from __future__ import annotations

import configparser
import io
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import trapezoid
from scipy.ndimage import maximum_filter1d, minimum_filter1d

MIN_SAMPLES = 16


class AnalysisError(ValueError):
    pass


def dominant_frequency(series, dt, pad=8):
    """Angular frequency of the largest nonzero spectral peak of a uniformly sampled series.

    The mean is removed and a Hann window applied; the peak bin of the zero-padded
    spectrum is refined by a parabola through the log-magnitudes of its neighbours.
    """
    y = np.asarray(series, dtype=float)
    if y.ndim != 1 or len(y) < MIN_SAMPLES:
        raise AnalysisError(f"series too short for a spectral estimate ({y.size} samples)")
    if not dt > 0:
        raise AnalysisError("sample spacing must be positive")
    y = y - y.mean()
    if np.max(np.abs(y)) <= 1e-12 * max(1.0, np.max(np.abs(series))):
        raise AnalysisError("series is constant: no nonzero spectral peak")
    nfft = 1 << int(math.ceil(math.log2(pad * len(y))))
    power = np.abs(np.fft.rfft(y * np.hanning(len(y)), nfft))
    # skip the main lobe of the zero-frequency leakage
    k0 = 1
    while k0 < len(power) - 1 and power[k0] <= power[k0 - 1]:
        k0 += 1
    if k0 >= len(power) - 1:
        raise AnalysisError("no nonzero spectral peak")
    k = k0 + int(np.argmax(power[k0:-1]))
    a, b, c = np.log(power[k - 1:k + 2] + 1e-300)
    denom = a - 2 * b + c
    shift = 0.5 * (a - c) / denom if denom != 0 else 0.0
    return 2 * math.pi * (k + shift) / (nfft * dt)


def oscillation_envelope(series, dt, period):
    """Half the local peak-to-peak excursion over a sliding window of one ``period``."""
    y = np.asarray(series, dtype=float)
    width = max(3, int(round(period / dt)) | 1)
    return 0.5 * (maximum_filter1d(y, width, mode="nearest") - minimum_filter1d(y, width, mode="nearest"))


def l2_error(times, a, b, window=None):
    """sqrt(int |a - b|^2 dt) over ``[0, window]`` (trapezoid rule)."""
    t = np.asarray(times, dtype=float)
    err = np.abs(np.asarray(a) - np.asarray(b)) ** 2
    if window is not None:
        keep = t <= window + 1e-12
        t, err = t[keep], err[keep]
    if len(t) < 2:
        return 0.0
    return float(math.sqrt(trapezoid(err, t)))


def validity_horizon(times, a, b, threshold=0.2):
    """First recorded time where |a - b| exceeds ``threshold`` (inf if never)."""
    over = np.nonzero(np.abs(np.asarray(a) - np.asarray(b)) > threshold)[0]
    return float(times[over[0]]) if len(over) else math.inf


@dataclass
class ErrorMetrics:
    l2: float
    max_abs: float
    horizon: float


@dataclass
class ComparisonReport:
    """Error metrics of each approximate run against the exact one."""

    window: float
    threshold: float
    t_max: float
    metrics: dict = field(default_factory=dict)  # (mode, observable) -> ErrorMetrics
    frequency: dict = field(default_factory=dict)  # mode -> sigma3 frequency (nan if unavailable)
    failures: dict = field(default_factory=dict)  # mode -> message

    def horizon(self, mode, observable="sigma3"):
        return self.metrics[(mode, observable)].horizon

    def to_text(self):
        """Structured-text (INI) rendering."""
        cp = configparser.ConfigParser()
        cp["settings"] = {"window": repr(self.window), "threshold": repr(self.threshold),
                          "t_max": repr(self.t_max)}
        for (mode, obs), m in sorted(self.metrics.items()):
            if not cp.has_section(mode):
                cp[mode] = {}
            sec = cp[mode]
            sec[f"{obs}.l2"] = repr(float(m.l2))
            sec[f"{obs}.max_abs"] = repr(float(m.max_abs))
            sec[f"{obs}.horizon"] = repr(float(m.horizon))
        cp["frequency"] = {mode: repr(float(w)) for mode, w in self.frequency.items()}
        if self.failures:
            cp["failures"] = dict(self.failures)
        buf = io.StringIO()
        cp.write(buf)
        return buf.getvalue()


COMPARED = ("sigma3", "sigma_p", "photon")


def compare(exact, approx, window=6.0, threshold=0.2, failures=None):
    """Build a report from column dicts sharing a time grid.

    ``exact`` and each entry of ``approx`` map column names to arrays with a
    common ``t`` column; an approximate run that stopped early is compared over
    the span it covers.
    """
    t_ex = np.asarray(exact["t"])
    dt = t_ex[1] - t_ex[0] if len(t_ex) > 1 else 0.0
    rep = ComparisonReport(window=window, threshold=threshold, t_max=float(t_ex[-1]),
                           failures=dict(failures or {}))
    if window < 0 or window > rep.t_max + 1e-12:
        raise AnalysisError(f"window {window} outside [0, {rep.t_max}]")
    for name, cols in [("exact", exact)] + sorted(approx.items()):
        try:
            rep.frequency[name] = dominant_frequency(cols["sigma3"], dt)
        except AnalysisError:
            rep.frequency[name] = math.nan
    for mode, cols in sorted(approx.items()):
        t = np.asarray(cols["t"])
        n = len(t)
        if n > len(t_ex) or np.any(t != t_ex[:n]):
            raise AnalysisError(f"{mode} run does not share the exact time grid")
        for obs in COMPARED:
            a, b = np.asarray(cols[obs]), np.asarray(exact[obs])[:n]
            horizon = validity_horizon(t, a, b, threshold)
            if mode in rep.failures and math.isinf(horizon):
                # never exceeded, but only known up to where the run stopped
                horizon = float(t[-1])
            rep.metrics[(mode, obs)] = ErrorMetrics(
                l2=l2_error(t, a, b, window),
                max_abs=float(np.max(np.abs(a - b))) if n else 0.0,
                horizon=horizon,
            )
    return rep
