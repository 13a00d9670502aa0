"""Schmidt decomposition, heralded spectral density matrices and purity."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .dispersion import FiberSpec, ProcessConfig
from .errors import NumericError
from .jsa import (
    DEFAULT_POINTS,
    DEFAULT_SPAN,
    FilterSpec,
    JSAmplitude,
    PumpSpec,
    _arm,
    build_jsa,
    default_grid,
)

PROB_FLOOR = 1e-12


@dataclass(frozen=True, eq=False)
class SchmidtResult:
    probabilities: np.ndarray  # descending, sums to 1

    @property
    def K(self) -> float:
        return float(1.0 / np.sum(self.probabilities**2))

    @property
    def purity(self) -> float:
        return 1.0 / self.K

    @property
    def correlation(self) -> float:
        """1 - 1/K, the fraction of the state outside the leading mode pair (by purity)."""
        return 1.0 - self.purity

    def to_dict(self, max_modes: int = 50) -> dict:
        return {
            "schmidt_probs": [float(f"{p:.9g}") for p in self.probabilities[:max_modes]],
            "K": float(f"{self.K:.9g}"),
            "purity": float(f"{self.purity:.9g}"),
        }

    def to_json(self, max_modes: int = 50) -> str:
        return json.dumps(self.to_dict(max_modes), indent=2, sort_keys=True)


def _weighted(jsa: JSAmplitude) -> np.ndarray:
    return jsa.amplitude * math.sqrt(jsa.grid.d_omega_s * jsa.grid.d_omega_i)


def schmidt_decompose(jsa: JSAmplitude) -> SchmidtResult:
    m = _weighted(jsa)
    try:
        sv = np.linalg.svd(m, compute_uv=False)
    except np.linalg.LinAlgError as exc:
        finite = bool(np.all(np.isfinite(m)))
        raise NumericError(f"SVD did not converge (finite entries: {finite}, shape {m.shape}): {exc}") from exc
    p = sv**2
    total = p.sum()
    if not total > 0:
        raise NumericError("zero amplitude: nothing to decompose")
    p = p / total
    p = p[p >= PROB_FLOOR]
    return SchmidtResult(p / p.sum())


@dataclass(frozen=True, eq=False)
class SpectralDensityMatrix:
    omega: np.ndarray
    rho: np.ndarray  # density per unit frequency squared: trace = sum diag * d_omega

    def __post_init__(self):
        omega = np.asarray(self.omega, dtype=float)
        rho = np.asarray(self.rho, dtype=complex)
        if rho.shape != (omega.size, omega.size):
            raise ValueError(f"rho shape {rho.shape} does not match axis length {omega.size}")
        if omega.size < 2 or not np.all(np.diff(omega) > 0):
            raise ValueError("frequency axis must be strictly increasing")
        m = rho * self.d_omega
        scale = max(float(np.max(np.abs(m))), 1e-300)
        if np.max(np.abs(m - m.conj().T)) > 1e-10 * max(scale, 1.0):
            raise NumericError("density matrix is not Hermitian")
        tr = float(np.real(np.trace(m)))
        if abs(tr - 1) > 1e-9:
            raise NumericError(f"density matrix trace {tr!r} differs from 1")
        if np.linalg.eigvalsh(0.5 * (m + m.conj().T))[0] < -1e-8:
            raise NumericError("density matrix is not positive semidefinite")
        omega.setflags(write=False)
        rho.setflags(write=False)
        object.__setattr__(self, "omega", omega)
        object.__setattr__(self, "rho", rho)

    @property
    def d_omega(self) -> float:
        return float((self.omega[-1] - self.omega[0]) / (self.omega.size - 1))

    @property
    def matrix(self) -> np.ndarray:
        """Dimensionless matrix rho * d_omega (unit trace)."""
        return self.rho * self.d_omega

    @classmethod
    def from_matrix(cls, omega, m) -> "SpectralDensityMatrix":
        omega = np.asarray(omega, dtype=float)
        d = (omega[-1] - omega[0]) / (omega.size - 1)
        return cls(omega, np.asarray(m) / d)


def heralded_density_matrix(
    jsa: JSAmplitude, herald_arm: str = "idler", herald_filter: FilterSpec | None = None
) -> SpectralDensityMatrix:
    """Reduced state of the photon opposite ``herald_arm``.

    The heralding detector is assumed frequency-blind apart from
    ``herald_filter``.
    """
    herald_arm = _arm(herald_arm)
    f = jsa.amplitude if herald_arm == "idler" else jsa.amplitude.T
    omega_h = jsa.grid.axis(herald_arm)
    omega = jsa.grid.omega_s if herald_arm == "idler" else jsa.grid.omega_i
    d_h = jsa.grid.spacing(herald_arm)
    if herald_filter is not None:
        t = herald_filter.power_transmission(omega_h)
        f = f * np.sqrt(t)[None, :]
    g = f * math.sqrt(d_h)
    rho = g @ g.conj().T
    d = jsa.grid.d_omega_s if herald_arm == "idler" else jsa.grid.d_omega_i
    tr = float(np.real(np.trace(rho))) * d
    if not tr > 0:
        raise ValueError("heralding filter removes the whole state")
    rho = rho / tr
    rho = 0.5 * (rho + rho.conj().T)
    return SpectralDensityMatrix(omega, rho)


def purity(rho: SpectralDensityMatrix) -> float:
    m = rho.matrix
    # Tr(m^2) for Hermitian m is the squared Frobenius norm
    return float(np.real(np.vdot(m, m)))


def k_vs_length(
    fiber: FiberSpec,
    pump: PumpSpec,
    process: ProcessConfig,
    lengths,
    n_points: int = DEFAULT_POINTS,
    span: float = DEFAULT_SPAN,
    phasematch: str = "sinc",
):
    """[(L, K)] with the grid rebuilt for each length."""
    out = []
    for length in lengths:
        length = float(length)
        if not 0 < length <= 2:
            raise ValueError(f"fibre length must lie in (0, 2] m, got {length!r}")
        fib = fiber.with_length(length)
        grid = default_grid(fib, pump, process, n_points, n_points, span)
        out.append((length, schmidt_decompose(build_jsa(fib, pump, process, grid, phasematch)).K))
    return out


def k_vs_length_csv(rows, path=None) -> str:
    text = "L_m,K\n" + "".join(f"{length:.9g},{k:.9g}\n" for length, k in rows)
    if path is not None:
        with open(path, "w") as fh:
            fh.write(text)
    return text
