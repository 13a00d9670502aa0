"""
Two-source Hong-Ou-Mandel interference of heralded photons.

For independent heralded states rho1, rho2 on a lossless 50/50 splitter the
coincidence probability at relative delay dt is

    C(dt) = 1/2 (1 - Re sum_{w,w'} rho1(w,w') rho2(w',w) e^{-i(w-w')dt} dw^2)

and the visibility (fractional depth against the large-delay baseline 1/2)
is Tr(rho1 rho2).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .dispersion import FiberSpec, ProcessConfig, apply_temperature
from .errors import FitError
from .jsa import JSAmplitude, PumpSpec, SpectralGrid, build_jsa, default_grid
from .schmidt import SpectralDensityMatrix, heralded_density_matrix

FIT_MAX_ITER = 200
FIT_STEP_TOL = 1e-10


@dataclass(frozen=True)
class NoiseBudget:
    reflectance: float = 0.5
    multipair: float = 0.0
    raman: float = 0.0

    def __post_init__(self):
        if not 0 < self.reflectance < 1:
            raise ValueError(f"reflectance must lie in (0, 1), got {self.reflectance!r}")
        for name in ("multipair", "raman"):
            v = getattr(self, name)
            if not 0 <= v < 0.5:
                raise ValueError(f"{name} penalty must lie in [0, 0.5), got {v!r}")

    @property
    def splitter_factor(self) -> float:
        r = self.reflectance
        t = 1 - r
        return 2 * r * t / (r * r + t * t)

    @property
    def factor(self) -> float:
        return self.splitter_factor * (1 - self.multipair) * (1 - self.raman)

    @classmethod
    def from_factors(cls, splitter: float = 1.0, multipair: float = 1.0, raman: float = 1.0) -> "NoiseBudget":
        """Budget from the three multiplicative visibility factors (each in (0.5, 1])."""
        return cls(reflectance_for_factor(splitter), 1 - multipair, 1 - raman)


def reflectance_for_factor(factor: float) -> float:
    """R >= 1/2 with 2R(1-R)/(R^2 + (1-R)^2) = ``factor``."""
    if not 0 < factor <= 1:
        raise ValueError(f"splitter factor must lie in (0, 1], got {factor!r}")
    x = factor / (2 * (1 + factor))  # x = R(1-R)
    return 0.5 * (1 + math.sqrt(max(0.0, 1 - 4 * x)))


def apply_noise(v_ideal: float, budget: NoiseBudget) -> float:
    if not 0 <= v_ideal <= 1:
        raise ValueError(f"visibility must lie in [0, 1], got {v_ideal!r}")
    return v_ideal * budget.factor


@dataclass(frozen=True, eq=False)
class DipCurve:
    delta_t: np.ndarray  # s
    coincidence: np.ndarray
    baseline: float = 0.5

    def __post_init__(self):
        t = np.asarray(self.delta_t, dtype=float)
        c = np.asarray(self.coincidence, dtype=float)
        if t.shape != c.shape or t.ndim != 1:
            raise ValueError("delay and coincidence arrays must be 1-D and equal length")
        if np.any(c < -1e-9) or np.any(c > self.baseline + 1e-9):
            raise ValueError("coincidence probabilities must lie in [0, baseline]")
        t.setflags(write=False)
        c.setflags(write=False)
        object.__setattr__(self, "delta_t", t)
        object.__setattr__(self, "coincidence", c)

    def to_csv(self, path=None) -> str:
        lines = ["delta_t_ps,coincidence_prob"]
        lines += [f"{t * 1e12:.9g},{c:.9g}" for t, c in zip(self.delta_t, self.coincidence)]
        text = "\n".join(lines) + "\n"
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text)
        return text


def _check_axes(rho1: SpectralDensityMatrix, rho2: SpectralDensityMatrix):
    if rho1.omega.shape != rho2.omega.shape or not np.allclose(rho1.omega, rho2.omega, rtol=1e-12, atol=0):
        raise ValueError("density matrices are defined on different frequency axes")


def hom_visibility(rho1: SpectralDensityMatrix, rho2: SpectralDensityMatrix) -> float:
    _check_axes(rho1, rho2)
    # Tr(m1 m2) = sum m1 * m2^T elementwise
    v = float(np.real(np.sum(rho1.matrix * rho2.matrix.T)))
    return min(1.0, max(0.0, v))


def hom_dip(rho1: SpectralDensityMatrix, rho2: SpectralDensityMatrix, delta_t) -> DipCurve:
    """Coincidence probability at each delay in ``delta_t`` (s)."""
    _check_axes(rho1, rho2)
    t = np.asarray(delta_t, dtype=float)
    if t.ndim != 1 or t.size < 2:
        raise ValueError("need at least two delay samples")
    if not np.allclose(np.sort(t), np.sort(-t), rtol=0, atol=1e-12 * max(np.max(np.abs(t)), 1e-300)):
        raise ValueError("delay grid must be symmetric about zero")
    m = rho1.matrix * rho2.matrix.T
    n = m.shape[0]
    # on a uniform axis the phase depends only on j - k: sum the diagonals once
    d = np.arange(-(n - 1), n)
    s = np.array([np.trace(m, offset=-k) for k in d])
    phase = np.exp(-1j * np.outer(t, d * rho1.d_omega))
    c = 0.5 * (1 - np.real(phase @ s))
    return DipCurve(t, np.clip(c, 0.0, 0.5))


def noisy_dip(curve: DipCurve, budget: NoiseBudget) -> DipCurve:
    """Scale the dip depth by the budget's visibility factor."""
    b = curve.baseline
    depth = 1 - curve.coincidence / b
    return DipCurve(curve.delta_t, b * (1 - budget.factor * depth), b)


def detuned_visibility(jsa1: JSAmplitude, jsa2: JSAmplitude, herald_arm: str = "idler") -> float:
    if not jsa1.grid.same_as(jsa2.grid):
        raise ValueError("both JSAs must share one grid")
    return hom_visibility(heralded_density_matrix(jsa1, herald_arm), heralded_density_matrix(jsa2, herald_arm))


def temperature_visibility(
    fiber: FiberSpec,
    pump: PumpSpec,
    process: ProcessConfig,
    delta_t: float,
    grid: SpectralGrid | None = None,
    phasematch: str = "sinc",
):
    """(V(0), V(dT)): identical sources vs one source detuned by ``delta_t`` kelvin."""
    if grid is None:
        grid = default_grid(fiber, pump, process)
    ref = build_jsa(fiber, pump, process, grid, phasematch)
    hot = build_jsa(apply_temperature(fiber, delta_t), pump, process, grid, phasematch)
    return detuned_visibility(ref, ref), detuned_visibility(ref, hot)


# dip fitting -----------------------------------------------------------------

def _shape(kind: str, u):
    if kind == "lorentzian":
        return 1 / (1 + u * u)
    return np.exp(-math.log(2) * u * u)


def _shape_du(kind: str, u):
    if kind == "lorentzian":
        return -2 * u / (1 + u * u) ** 2
    return -2 * math.log(2) * u * np.exp(-math.log(2) * u * u)


@dataclass(frozen=True)
class DipFit:
    visibility: float
    width: float  # half width at half depth, s
    centre: float  # s
    baseline: float
    residual_rms: float
    shape: str
    iterations: int

    def model(self, delta_t):
        u = (np.asarray(delta_t, dtype=float) - self.centre) / self.width
        return self.baseline * (1 - self.visibility * _shape(self.shape, u))

    def to_dict(self) -> dict:
        return {
            "visibility": float(f"{self.visibility:.9g}"),
            "width_ps": float(f"{self.width * 1e12:.9g}"),
            "centre_ps": float(f"{self.centre * 1e12:.9g}"),
            "baseline": float(f"{self.baseline:.9g}"),
            "residual_rms": float(f"{self.residual_rms:.9g}"),
            "shape": self.shape,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def _initial_guess(t, c):
    order = np.argsort(t)
    t, c = t[order], c[order]
    q = max(1, t.size // 4)
    base = float(np.mean(np.concatenate([c[:q], c[-q:]])))
    k = int(np.argmin(c))
    centre = float(t[k])
    depth = 1 - c[k] / base if base > 0 else 0.0
    half = base * (1 - depth / 2)
    span = float(t[-1] - t[0])
    widths = []
    right = np.flatnonzero(c[k:] >= half)
    if right.size:
        widths.append(t[k + right[0]] - centre)
    left = np.flatnonzero(c[: k + 1] >= half)
    if left.size:
        widths.append(centre - t[left[-1]])
    width = float(np.mean(widths)) if widths else span / 4
    if not width > 0:
        width = span / 4
    return np.array([depth, width, centre, base])


def fit_dip(curve: DipCurve, shape: str = "lorentzian") -> DipFit:
    """Least-squares fit of baseline * (1 - V * shape((dt - centre)/width)).

    Levenberg-Marquardt with analytic Jacobian; width is the half width at
    half depth for both shapes.
    """
    shape = shape.lower()
    if shape not in ("lorentzian", "gaussian"):
        raise ValueError(f"shape must be 'lorentzian' or 'gaussian', got {shape!r}")
    if curve.delta_t.size < 8:
        raise ValueError("need at least 8 samples to fit a dip")
    # work in ps so that all parameters are O(1)
    t = curve.delta_t * 1e12
    y = curve.coincidence
    p = _initial_guess(t, y)

    def resid(p):
        u = (t - p[2]) / p[1]
        return p[3] * (1 - p[0] * _shape(shape, u)) - y

    def jac(p):
        v, w, c0, b = p
        u = (t - c0) / w
        g, dg = _shape(shape, u), _shape_du(shape, u)
        return np.column_stack([-b * g, b * v * dg * u / w, b * v * dg / w, 1 - v * g])

    r = resid(p)
    cost = float(r @ r)
    lam = 1e-3
    converged = False
    it = 0
    for it in range(1, FIT_MAX_ITER + 1):
        j = jac(p)
        a = j.T @ j
        g = j.T @ r
        diag = np.diag(a).copy()
        diag[diag <= 0] = max(float(np.max(diag)), 1.0) * 1e-12
        while True:
            try:
                step = -np.linalg.solve(a + lam * np.diag(diag), g)
            except np.linalg.LinAlgError:
                step = np.zeros_like(p)
            trial = p + step
            if trial[1] <= 0:
                lam *= 10
                if lam > 1e16:
                    break
                continue
            r_new = resid(trial)
            c_new = float(r_new @ r_new)
            if c_new <= cost:
                p, r, cost = trial, r_new, c_new
                lam = max(lam / 10, 1e-15)
                break
            lam *= 10
            if lam > 1e16:
                step = np.zeros_like(p)
                break
        if np.linalg.norm(step) <= FIT_STEP_TOL * (np.linalg.norm(p) + FIT_STEP_TOL):
            converged = True
            break
    rms = math.sqrt(cost / t.size)
    if not converged:
        raise FitError(f"dip fit did not converge in {FIT_MAX_ITER} iterations (residual rms {rms:.3g})", rms)
    v, w, c0, b = (float(x) for x in p)
    return DipFit(v, abs(w) * 1e-12, c0 * 1e-12, b, rms, shape, it)


def delay_grid(max_delay: float, samples: int = 401) -> np.ndarray:
    """Symmetric delays in [-max_delay, max_delay] (s)."""
    if not max_delay > 0:
        raise ValueError(f"maximum delay must be > 0, got {max_delay!r}")
    if samples < 8:
        raise ValueError("need at least 8 delay samples")
    # (k - (n-1)/2) is exact, so the grid is exactly antisymmetric
    k = np.arange(samples) - (samples - 1) / 2
    return k * (max_delay / ((samples - 1) / 2))
