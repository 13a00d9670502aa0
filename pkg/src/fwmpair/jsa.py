"""
Joint spectral amplitude F(w_s, w_i) = phi(w_s, w_i) * alpha(w_s, w_i).

phi is the phase-matching function sinc(dk L / 2) and alpha the pump
envelope exp(-(dw_s + dw_i)^2 / (8 sigma^2)).  sigma is fixed so that the
implied pump intensity spectrum exp(-dw_p^2 / sigma^2), with
dw_p = (dw_s + dw_i)/2, has the configured intensity FWHM:

    sigma = dw_FWHM / (2 sqrt(ln 2)),   dw_FWHM = 2 pi c dlambda / lambda^2

Amplitudes live on a uniform (w_s, w_i) grid; "normalized" means
sum |F|^2 dw_s dw_i = 1.
"""

from __future__ import annotations

import dataclasses
import enum
import json
import math
from dataclasses import dataclass

import numpy as np
from scipy.constants import c as C_LIGHT

from .dispersion import FiberSpec, ProcessConfig, omega_from_wavelength, wavelength_from_omega
from .errors import PhaseMatchError, ResolutionError, SpectrumClippedError
from .phasematch import delta_k, mismatch_slopes, solve_signal_idler

SINC_HALF_POWER_X = 1.3915573782515103
# exp(-g x^2) with the same intensity FWHM as sinc(x)^2
GAUSSIAN_PM_COEFF = math.log(2) / (2 * SINC_HALF_POWER_X**2)
DEFAULT_POINTS = 512
DEFAULT_SPAN = 4.0
WIDE_SPAN = 10.0


def bandwidth_to_omega(fwhm: float, wavelength: float) -> float:
    """First-order conversion of a wavelength FWHM to angular frequency."""
    return 2 * math.pi * C_LIGHT * fwhm / wavelength**2


def omega_to_bandwidth(d_omega: float, wavelength: float) -> float:
    return d_omega * wavelength**2 / (2 * math.pi * C_LIGHT)


@dataclass(frozen=True)
class PumpSpec:
    wavelength: float = 705e-9
    fwhm: float = 0.9e-9
    peak_power: float = 10.0
    rep_rate: float = 80e6

    def __post_init__(self):
        for name in ("wavelength", "fwhm", "rep_rate"):
            if not getattr(self, name) > 0:
                raise ValueError(f"pump {name} must be > 0, got {getattr(self, name)!r}")
        if not self.peak_power >= 0:
            raise ValueError(f"pump peak_power must be >= 0, got {self.peak_power!r}")
        if not self.fwhm < 0.05 * self.wavelength:
            raise ValueError("pump bandwidth must be < 5% of its wavelength")

    @property
    def omega(self) -> float:
        return float(omega_from_wavelength(self.wavelength))

    @property
    def omega_fwhm(self) -> float:
        return bandwidth_to_omega(self.fwhm, self.wavelength)

    @property
    def sigma(self) -> float:
        return self.omega_fwhm / (2 * math.sqrt(math.log(2)))


@dataclass(frozen=True, eq=False)
class SpectralGrid:
    omega_s: np.ndarray
    omega_i: np.ndarray

    def __post_init__(self):
        for name in ("omega_s", "omega_i"):
            ax = np.asarray(getattr(self, name), dtype=float)
            ax.setflags(write=False)
            object.__setattr__(self, name, ax)
            if ax.ndim != 1 or ax.size < 16:
                raise ValueError(f"{name} needs at least 16 samples")
            if not np.all(np.diff(ax) > 0):
                raise ValueError(f"{name} must be strictly increasing")

    @classmethod
    def centred(cls, centre_s, centre_i, half_span_s, half_span_i, n_s=DEFAULT_POINTS, n_i=DEFAULT_POINTS):
        return cls(
            np.linspace(centre_s - half_span_s, centre_s + half_span_s, n_s),
            np.linspace(centre_i - half_span_i, centre_i + half_span_i, n_i),
        )

    @property
    def d_omega_s(self) -> float:
        return float((self.omega_s[-1] - self.omega_s[0]) / (self.omega_s.size - 1))

    @property
    def d_omega_i(self) -> float:
        return float((self.omega_i[-1] - self.omega_i[0]) / (self.omega_i.size - 1))

    @property
    def shape(self):
        return self.omega_s.size, self.omega_i.size

    def axis(self, arm: str) -> np.ndarray:
        return self.omega_s if _arm(arm) == "signal" else self.omega_i

    def spacing(self, arm: str) -> float:
        return self.d_omega_s if _arm(arm) == "signal" else self.d_omega_i

    def same_as(self, other: "SpectralGrid") -> bool:
        return np.array_equal(self.omega_s, other.omega_s) and np.array_equal(self.omega_i, other.omega_i)

    def to_dict(self) -> dict:
        return {
            "rows": "signal",
            "columns": "idler",
            "n_signal": int(self.omega_s.size),
            "n_idler": int(self.omega_i.size),
            "omega_signal_first_rad_per_s": float(self.omega_s[0]),
            "omega_signal_step_rad_per_s": self.d_omega_s,
            "omega_idler_first_rad_per_s": float(self.omega_i[0]),
            "omega_idler_step_rad_per_s": self.d_omega_i,
            "lambda_signal_nm": [float(x) for x in wavelength_from_omega(self.omega_s) * 1e9],
            "lambda_idler_nm": [float(x) for x in wavelength_from_omega(self.omega_i) * 1e9],
        }


def _arm(arm: str) -> str:
    arm = str(arm).lower()
    if arm not in ("signal", "idler"):
        raise ValueError(f"arm must be 'signal' or 'idler', got {arm!r}")
    return arm


@dataclass(frozen=True, eq=False)
class JSAmplitude:
    grid: SpectralGrid
    amplitude: np.ndarray
    normalized: bool = False
    # probability retained relative to the normalized state (filters lower it)
    weight: float = 1.0

    def __post_init__(self):
        amp = np.asarray(self.amplitude, dtype=complex)
        if amp.shape != self.grid.shape:
            raise ValueError(f"amplitude shape {amp.shape} does not match grid {self.grid.shape}")
        amp.setflags(write=False)
        object.__setattr__(self, "amplitude", amp)

    @property
    def norm(self) -> float:
        """sum |F|^2 dw_s dw_i."""
        return float(np.sum(np.abs(self.amplitude) ** 2) * self.grid.d_omega_s * self.grid.d_omega_i)

    def normalize(self) -> "JSAmplitude":
        n = self.norm
        if not n > 0:
            raise ValueError("cannot normalize a zero amplitude")
        return JSAmplitude(self.grid, self.amplitude / math.sqrt(n), True, 1.0)

    @property
    def intensity(self) -> np.ndarray:
        return np.abs(self.amplitude) ** 2

    def to_csv(self, path=None) -> str:
        rows = "\n".join(",".join(f"{v:.9g}" for v in row) for row in self.intensity)
        text = rows + "\n"
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text)
        return text


def pump_sigma(pump: PumpSpec) -> float:
    return pump.sigma


def pump_envelope(pump: PumpSpec, omega_s, omega_i):
    """exp(-(dw_s + dw_i)^2 / (8 sigma^2)); depends only on w_s + w_i."""
    total = np.asarray(omega_s, dtype=float) + np.asarray(omega_i, dtype=float) - 2 * pump.omega
    return np.exp(-(total**2) / (8 * pump.sigma**2))


def _sinc(x):
    return np.sinc(np.asarray(x) / np.pi)


def phase_matching_function(
    fiber: FiberSpec, process: ProcessConfig, omega_s, omega_i, peak_power: float = 0.0, shape: str = "sinc"
):
    """sinc(dk L / 2); ``shape="gaussian"`` substitutes the FWHM-matched Gaussian."""
    x = delta_k(fiber, process, omega_s, omega_i, peak_power) * fiber.length / 2
    if shape == "sinc":
        return _sinc(x)
    if shape == "gaussian":
        return np.exp(-GAUSSIAN_PM_COEFF * x**2)
    raise ValueError(f"unknown phase-matching shape {shape!r}")


def expected_marginal_widths(fiber: FiberSpec, pump: PumpSpec, process: ProcessConfig, centre=None):
    """Approximate (signal, idler) marginal FWHMs in rad/s.

    Uses a Gaussian stand-in for the sinc and the local slopes of dk, which
    is enough to size a grid.
    """
    if centre is None:
        centre = phase_matched_centre(fiber, pump, process)
    ws, wi = centre
    a_s, a_i = (float(v) for v in mismatch_slopes(fiber, process, ws, wi))
    g = 2 * GAUSSIAN_PM_COEFF * (fiber.length / 2) ** 2
    q = 1 / (4 * pump.sigma**2)
    m = np.array([[g * a_s * a_s + q, g * a_s * a_i + q], [g * a_s * a_i + q, g * a_i * a_i + q]])
    cov = np.linalg.inv(m) / 2
    k = 2 * math.sqrt(2 * math.log(2))
    return k * math.sqrt(cov[0, 0]), k * math.sqrt(cov[1, 1])


def phase_matched_centre(fiber: FiberSpec, pump: PumpSpec, process: ProcessConfig):
    pt = solve_signal_idler(fiber, process, pump.wavelength, pump.peak_power)
    if pt is None:
        raise PhaseMatchError(f"no phase matching for {process.label} at {pump.wavelength * 1e9:.3f} nm")
    return pt.omega_s, pt.omega_i


def default_grid(
    fiber: FiberSpec,
    pump: PumpSpec,
    process: ProcessConfig,
    n_s: int = DEFAULT_POINTS,
    n_i: int = DEFAULT_POINTS,
    span: float = DEFAULT_SPAN,
) -> SpectralGrid:
    """Grid spanning +-``span`` expected marginal FWHMs around the phase-matched centres."""
    centre = phase_matched_centre(fiber, pump, process)
    fs, fi = expected_marginal_widths(fiber, pump, process, centre)
    return SpectralGrid.centred(centre[0], centre[1], span * fs, span * fi, n_s, n_i)


def _check_resolution(x: np.ndarray):
    # the sinc's central lobe spans 2 pi in x; ask for >= 4 samples across it
    step = max(np.max(np.abs(np.diff(x, axis=0)), initial=0), np.max(np.abs(np.diff(x, axis=1)), initial=0))
    if step > math.pi / 2:
        raise ResolutionError(
            f"grid too coarse to resolve the sinc: {2 * math.pi / step:.2f} samples per central lobe (need >= 4)"
        )


def build_jsa(
    fiber: FiberSpec,
    pump: PumpSpec,
    process: ProcessConfig,
    grid: SpectralGrid | None = None,
    phasematch: str = "sinc",
    peak_power: float | None = None,
) -> JSAmplitude:
    """Normalized phi * alpha on ``grid`` (default: 512^2, +-4 marginal FWHMs)."""
    if grid is None:
        grid = default_grid(fiber, pump, process)
    power = pump.peak_power if peak_power is None else peak_power
    ws, wi = np.meshgrid(grid.omega_s, grid.omega_i, indexing="ij")
    x = delta_k(fiber, process, ws, wi, power) * fiber.length / 2
    _check_resolution(x)
    if phasematch == "sinc":
        phi = _sinc(x)
    elif phasematch == "gaussian":
        phi = np.exp(-GAUSSIAN_PM_COEFF * x**2)
    else:
        raise ValueError(f"unknown phase-matching shape {phasematch!r}")
    amp = phi * pump_envelope(pump, ws, wi)
    return JSAmplitude(grid, amp).normalize()


class FilterShape(str, enum.Enum):
    TOP_HAT = "tophat"
    GAUSSIAN = "gaussian"


@dataclass(frozen=True)
class FilterSpec:
    centre: float
    fwhm: float
    transmission: float = 1.0
    shape: FilterShape = FilterShape.TOP_HAT

    def __post_init__(self):
        object.__setattr__(self, "shape", FilterShape(self.shape))
        if not self.fwhm > 0:
            raise ValueError(f"filter FWHM must be > 0, got {self.fwhm!r}")
        if not 0 <= self.transmission <= 1:
            raise ValueError(f"filter transmission must lie in [0, 1], got {self.transmission!r}")
        if not self.centre > 0:
            raise ValueError("filter centre must be a positive wavelength")

    def power_transmission(self, omega) -> np.ndarray:
        lam = wavelength_from_omega(omega)
        d = lam - self.centre
        if self.shape is FilterShape.TOP_HAT:
            return np.where(np.abs(d) <= self.fwhm / 2, self.transmission, 0.0)
        return self.transmission * np.exp(-4 * math.log(2) * d**2 / self.fwhm**2)


def apply_filter(jsa: JSAmplitude, arm: str, filt: FilterSpec) -> JSAmplitude:
    """Multiply one arm by the amplitude transmission sqrt(T).

    The result is not renormalized; its ``weight`` is the probability carried
    through the filter relative to the input.
    """
    arm = _arm(arm)
    t = filt.power_transmission(jsa.grid.axis(arm))
    if not np.any(t > 0):
        raise ValueError(
            f"{arm} filter at {filt.centre * 1e9:.3f} nm (FWHM {filt.fwhm * 1e9:.3f} nm) has zero overlap with the grid"
        )
    amp = np.sqrt(t)
    amp = jsa.amplitude * (amp[:, None] if arm == "signal" else amp[None, :])
    before = jsa.norm
    out = JSAmplitude(jsa.grid, amp, False, jsa.weight)
    return dataclasses.replace(out, weight=jsa.weight * out.norm / before)


def transmitted_probability(before: JSAmplitude, after: JSAmplitude) -> float:
    return after.weight / before.weight


@dataclass(frozen=True, eq=False)
class MarginalSpectrum:
    omega: np.ndarray
    intensity: np.ndarray  # per unit angular frequency
    arm: str

    @property
    def wavelength(self) -> np.ndarray:
        return wavelength_from_omega(self.omega)

    @property
    def total(self) -> float:
        d = (self.omega[-1] - self.omega[0]) / (self.omega.size - 1)
        return float(np.sum(self.intensity) * d)

    def to_csv(self, path=None) -> str:
        # ascending wavelength; intensity per unit wavelength
        lam = self.wavelength[::-1]
        per_lambda = (self.intensity * self.omega**2 / (2 * math.pi * C_LIGHT))[::-1]
        lines = ["lambda_nm,intensity"] + [f"{l * 1e9:.9g},{v:.9g}" for l, v in zip(lam, per_lambda)]
        text = "\n".join(lines) + "\n"
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text)
        return text


def marginal_spectrum(jsa: JSAmplitude, arm: str) -> MarginalSpectrum:
    arm = _arm(arm)
    inten = jsa.intensity
    if arm == "signal":
        spec = inten.sum(axis=1) * jsa.grid.d_omega_i
    else:
        spec = inten.sum(axis=0) * jsa.grid.d_omega_s
    return MarginalSpectrum(jsa.grid.axis(arm), spec, arm)


def _half_max_crossings(omega, y):
    k = int(np.argmax(y))
    if k == 0 or k == y.size - 1:
        raise SpectrumClippedError("spectrum clipped: peak on the grid boundary")
    half = y[k] / 2
    below = np.flatnonzero(y < half)
    left, right = below[below < k], below[below > k]
    if left.size == 0 or right.size == 0:
        raise SpectrumClippedError("spectrum clipped: half maximum not reached inside the grid")
    l0, r0 = left[-1], right[0]
    wl = np.interp(half, [y[l0], y[l0 + 1]], [omega[l0], omega[l0 + 1]])
    wr = np.interp(half, [y[r0], y[r0 - 1]], [omega[r0], omega[r0 - 1]])
    return float(wl), float(wr)


def fwhm_omega(spectrum: MarginalSpectrum) -> float:
    """FWHM in rad/s, by linear interpolation at the outermost half-maximum crossings."""
    wl, wr = _half_max_crossings(spectrum.omega, spectrum.intensity)
    return wr - wl


def bandwidth_fwhm(spectrum: MarginalSpectrum) -> float:
    """FWHM in metres (wavelength difference of the half-maximum crossings)."""
    wl, wr = _half_max_crossings(spectrum.omega, spectrum.intensity)
    return float(wavelength_from_omega(wl) - wavelength_from_omega(wr))


def coherence_time(fwhm: float, wavelength: float) -> float:
    """Transform-limited Gaussian coherence time 0.441 lambda^2 / (c dlambda)."""
    if not (fwhm > 0 and wavelength > 0):
        raise ValueError("bandwidth and wavelength must be positive")
    return 0.441 * wavelength**2 / (C_LIGHT * fwhm)


def sidecar(jsa: JSAmplitude, **extra) -> str:
    doc = {"quantity": "|F|^2", "normalized": jsa.normalized, **jsa.grid.to_dict(), **extra}
    return json.dumps(doc, indent=2, sort_keys=True)
