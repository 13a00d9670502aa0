"""
Phase matching for degenerate-pump four-wave mixing.

Energy conservation 2 w_p = w_s + w_i is built in by parameterizing the
daughters with a symmetric detuning Omega > 0:

    w_s = w_p + Omega,   w_i = w_p - Omega

so a single residual remains,

    dk = 2 beta_pump(w_p) - beta_daughter(w_s) - beta_daughter(w_i) - 2 gamma P,

whose roots in Omega are bracketed on a scan and refined by bisection.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .dispersion import (
    TWO_PI,
    FiberSpec,
    ProcessConfig,
    group_index,
    omega_from_wavelength,
    wavelength_from_omega,
)
from .errors import PhaseMatchError

OMEGA_MIN = TWO_PI * 1e12
SLOPE_THRESHOLD = 0.05
SLOPE_STEP = 0.05e-9
_SCAN_SAMPLES = 4096
_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


def delta_k(fiber: FiberSpec, process: ProcessConfig, omega_s, omega_i, peak_power: float = 0.0):
    """Phase mismatch (rad/m) with the pump frequency taken as (w_s + w_i)/2."""
    omega_s = np.asarray(omega_s, dtype=float)
    omega_i = np.asarray(omega_i, dtype=float)
    pump = fiber.axis(process.pump)
    daughter = fiber.axis(process.daughter)
    omega_p = 0.5 * (omega_s + omega_i)
    return (
        2.0 * pump.derivative(omega_p)
        - daughter.derivative(omega_s)
        - daughter.derivative(omega_i)
        - 2.0 * fiber.gamma * peak_power
    )


def mismatch_slopes(fiber: FiberSpec, process: ProcessConfig, omega_s, omega_i):
    """Partial derivatives (d dk/d w_s, d dk/d w_i) in s/m.

    The idler slope vanishes exactly when the pump and idler group
    velocities match.
    """
    pump = fiber.axis(process.pump)
    daughter = fiber.axis(process.daughter)
    b1p = pump.derivative(0.5 * (omega_s + omega_i), 1)
    return b1p - daughter.derivative(omega_s, 1), b1p - daughter.derivative(omega_i, 1)


@dataclass(frozen=True)
class PhaseMatchPoint:
    lambda_p: float
    lambda_s: float
    lambda_i: float
    process: ProcessConfig
    residual: float

    @property
    def omega_p(self):
        return float(omega_from_wavelength(self.lambda_p))

    @property
    def omega_s(self):
        return float(omega_from_wavelength(self.lambda_s))

    @property
    def omega_i(self):
        return float(omega_from_wavelength(self.lambda_i))


@dataclass(frozen=True)
class PhaseMatchCurve:
    process: ProcessConfig
    points: tuple

    def __len__(self):
        return len(self.points)

    def __iter__(self):
        return iter(self.points)

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(p, name) for p in self.points])

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["lambda_p_nm", "lambda_s_nm", "lambda_i_nm", "delta_k_residual"])
        for p in self.points:
            w.writerow([f"{p.lambda_p * 1e9:.6g}", f"{p.lambda_s * 1e9:.6g}", f"{p.lambda_i * 1e9:.6g}", f"{p.residual:.6g}"])
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", newline="") as fh:
                fh.write(text)
        return text

    def to_dict(self) -> dict:
        return {
            "process": self.process.label,
            "points": [
                {
                    "lambda_p_nm": p.lambda_p * 1e9,
                    "lambda_s_nm": p.lambda_s * 1e9,
                    "lambda_i_nm": p.lambda_i * 1e9,
                    "delta_k_residual": p.residual,
                }
                for p in self.points
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def _detuning_range(fiber: FiberSpec, process: ProcessConfig, omega_p: float):
    pump = fiber.axis(process.pump)
    pump.check(omega_p)
    lo, hi = fiber.axis(process.daughter).bounds
    return OMEGA_MIN, min(omega_p - lo, hi - omega_p)


def all_roots(fiber: FiberSpec, process: ProcessConfig, lambda_p: float, peak_power: float = 0.0):
    """Every detuning root Omega > 2 pi * 1 THz (ascending) at pump ``lambda_p``."""
    omega_p = float(omega_from_wavelength(lambda_p))
    om_lo, om_hi = _detuning_range(fiber, process, omega_p)
    if om_hi <= om_lo:
        return []

    def f(om):
        return delta_k(fiber, process, omega_p + om, omega_p - om, peak_power)

    grid = np.linspace(om_lo, om_hi, _SCAN_SAMPLES)
    vals = f(grid)
    roots = list(grid[vals == 0.0])
    idx = np.flatnonzero(np.sign(vals[:-1]) * np.sign(vals[1:]) < 0)
    if idx.size:
        # vectorized bisection over every bracket at once
        a, b = grid[idx].copy(), grid[idx + 1].copy()
        fa = vals[idx].copy()
        for _ in range(200):
            m = 0.5 * (a + b)
            fm = f(m)
            left = np.sign(fm) == np.sign(fa)
            a = np.where(left, m, a)
            fa = np.where(left, fm, fa)
            b = np.where(left, b, m)
            if np.all((b - a) <= 2 * np.spacing(b)):
                break
        fa_end, fb_end = np.abs(f(a)), np.abs(f(b))
        roots.extend(np.where(fa_end <= fb_end, a, b))
    return sorted(float(r) for r in roots)


def _point(fiber, process, omega_p, om, peak_power):
    omega_s, omega_i = omega_p + om, omega_p - om
    res = float(delta_k(fiber, process, omega_s, omega_i, peak_power))
    return PhaseMatchPoint(
        lambda_p=float(wavelength_from_omega(omega_p)),
        lambda_s=float(wavelength_from_omega(omega_s)),
        lambda_i=float(wavelength_from_omega(omega_i)),
        process=process,
        residual=res,
    )


def solve_signal_idler(fiber: FiberSpec, process: ProcessConfig, lambda_p: float, peak_power: float = 0.0):
    """Phase-matched (signal, idler) for pump ``lambda_p``, or None.

    When several detuning roots exist the smallest one above 2 pi * 1 THz is
    returned; see :func:`all_roots` for the rest.
    """
    roots = all_roots(fiber, process, lambda_p, peak_power)
    if not roots:
        return None
    omega_p = float(omega_from_wavelength(lambda_p))
    return _point(fiber, process, omega_p, roots[0], peak_power)


def _workers():
    env = os.environ.get("FWM_NUM_THREADS")
    try:
        return max(1, int(env)) if env else 1
    except ValueError:
        return 1


def scan_curve(
    fiber: FiberSpec,
    process: ProcessConfig,
    lambda_min: float,
    lambda_max: float,
    step: float,
    peak_power: float = 0.0,
    workers: int | None = None,
) -> PhaseMatchCurve:
    """Phase-matching curve over an ascending pump-wavelength range."""
    if not step > 0:
        raise ValueError(f"step must be > 0, got {step!r}")
    if not lambda_max > lambda_min:
        raise ValueError(f"pump range must be ascending, got [{lambda_min!r}, {lambda_max!r}]")
    n = int(math.floor((lambda_max - lambda_min) / step * (1 + 1e-12))) + 1
    pumps = lambda_min + step * np.arange(n)
    # check the whole range up front so a bad endpoint fails before any work
    fiber.axis(process.pump).check(omega_from_wavelength(pumps))

    def one(lp):
        return solve_signal_idler(fiber, process, float(lp), peak_power)

    workers = workers or _workers()
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(one, pumps))
    else:
        results = [one(lp) for lp in pumps]
    points = tuple(p for p in results if p is not None)
    if not points:
        raise PhaseMatchError(
            f"no phase matching in range {lambda_min * 1e9:.3f}-{lambda_max * 1e9:.3f} nm for {process.label}"
        )
    return PhaseMatchCurve(process, points)


def signal_slope(fiber, process, lambda_p, peak_power=0.0, h=SLOPE_STEP):
    """d(lambda_s)/d(lambda_p) by a centred difference with step ``h``."""
    lo = solve_signal_idler(fiber, process, lambda_p - h, peak_power)
    hi = solve_signal_idler(fiber, process, lambda_p + h, peak_power)
    if lo is None or hi is None:
        return math.inf
    return (hi.lambda_s - lo.lambda_s) / (2 * h)


def find_factorable_point(
    fiber: FiberSpec,
    process: ProcessConfig,
    bracket: tuple,
    peak_power: float = 0.0,
    samples: int = 81,
    threshold: float = SLOPE_THRESHOLD,
) -> float:
    """Pump wavelength (m) where the signal becomes independent of the pump.

    A coarse scan of |d lambda_s / d lambda_p| locates the best cell, which
    golden-section search then refines.
    """
    a, b = bracket
    if not b > a:
        raise ValueError("bracket must be ascending")
    fiber.axis(process.pump).check(omega_from_wavelength([a - SLOPE_STEP, b + SLOPE_STEP]))

    def g(lp):
        return abs(signal_slope(fiber, process, lp, peak_power))

    grid = np.linspace(a, b, samples)
    vals = np.array([g(x) for x in grid])
    if not np.any(np.isfinite(vals)):
        raise PhaseMatchError(f"no factorable point: {process.label} has no phase matching in bracket")
    k = int(np.nanargmin(np.where(np.isfinite(vals), vals, np.nan)))
    lo, hi = grid[max(k - 1, 0)], grid[min(k + 1, samples - 1)]
    x1 = hi - _GOLDEN * (hi - lo)
    x2 = lo + _GOLDEN * (hi - lo)
    g1, g2 = g(x1), g(x2)
    while hi - lo > 1e-13:
        if g1 < g2:
            hi, x2, g2 = x2, x1, g1
            x1 = hi - _GOLDEN * (hi - lo)
            g1 = g(x1)
        else:
            lo, x1, g1 = x1, x2, g2
            x2 = lo + _GOLDEN * (hi - lo)
            g2 = g(x2)
    best, gbest = (x1, g1) if g1 < g2 else (x2, g2)
    if vals[k] < gbest:
        best, gbest = grid[k], vals[k]
    if not gbest < threshold:
        raise PhaseMatchError(
            f"no factorable point: |d lambda_s/d lambda_p| >= {threshold} everywhere in "
            f"[{a * 1e9:.3f}, {b * 1e9:.3f}] nm for {process.label} (min {gbest:.3g})"
        )
    return float(best)


def group_velocity_mismatch(fiber: FiberSpec, process: ProcessConfig, lambda_p: float, peak_power: float = 0.0):
    """Relative pump-idler group-index mismatch at the phase-matched point."""
    pt = solve_signal_idler(fiber, process, lambda_p, peak_power)
    if pt is None:
        raise PhaseMatchError(f"no phase matching at {lambda_p * 1e9:.3f} nm")
    ngp = group_index(fiber, process.pump, pt.omega_p)
    ngi = group_index(fiber, process.daughter, pt.omega_i)
    return float(abs(ngp - ngi) / ngp)

