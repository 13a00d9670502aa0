"""
Per-axis propagation constants of a birefringent photonic crystal fibre.

Each polarization axis carries a Taylor polynomial of beta(omega) about a
shared reference frequency omega0:

    beta(omega) = sum_k beta_k (omega - omega0)^k / k!

Units (SI throughout):
    omega       rad/s
    beta_0      rad/m
    beta_k      s^k/m
    length      m
    gamma       1/(W m)
    dn_dT       1/K   (change of the slow-fast index splitting per kelvin)

Temperature is carried as an offset from the reference temperature and only
moves the fast-axis beta_0 and beta_1 (a constant shift of the modal index);
keeping the offset as a field makes repeated tuning exactly additive.
"""

from __future__ import annotations

import dataclasses
import enum
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.constants import c as C_LIGHT

from .errors import DomainError, NoZeroDispersionError

TWO_PI = 2.0 * math.pi
FIBER_SCHEMA = "fwmpair.fiber/1"
MAX_TEMPERATURE_STEP = 100.0


def omega_from_wavelength(wavelength):
    return TWO_PI * C_LIGHT / np.asarray(wavelength, dtype=float)


def wavelength_from_omega(omega):
    return TWO_PI * C_LIGHT / np.asarray(omega, dtype=float)


class Axis(str, enum.Enum):
    SLOW = "slow"
    FAST = "fast"

    @property
    def letter(self) -> str:
        return self.value[0]


@dataclass(frozen=True)
class ProcessConfig:
    """Polarization of the pump and of both daughter photons."""

    pump: Axis
    daughter: Axis

    def __post_init__(self):
        object.__setattr__(self, "pump", Axis(self.pump))
        object.__setattr__(self, "daughter", Axis(self.daughter))

    @property
    def label(self) -> str:
        p, d = self.pump.letter, self.daughter.letter
        return f"{p}{p}->{d}{d}"

    @property
    def cross_polarized(self) -> bool:
        return self.pump is not self.daughter

    @classmethod
    def from_label(cls, label: str) -> "ProcessConfig":
        """Parse ``"ss->ff"``, ``"ss→ff"`` or the reversed ``"ff<-ss"``."""
        text = label.strip().lower().replace("→", "->").replace("←", "<-")
        if "<-" in text:
            daughters, pump = text.split("<-")
        elif "->" in text:
            pump, daughters = text.split("->")
        else:
            raise ValueError(f"unrecognised process label {label!r}")
        letters = {"s": Axis.SLOW, "f": Axis.FAST}
        pump, daughters = pump.strip(), daughters.strip()
        if len(pump) != 2 or len(daughters) != 2 or pump[0] != pump[1] or daughters[0] != daughters[1]:
            raise ValueError(f"unrecognised process label {label!r}")
        try:
            return cls(letters[pump[0]], letters[daughters[0]])
        except KeyError:
            raise ValueError(f"unrecognised process label {label!r}") from None

    def __str__(self):
        return self.label


SS_SS = ProcessConfig(Axis.SLOW, Axis.SLOW)
FF_FF = ProcessConfig(Axis.FAST, Axis.FAST)
SS_FF = ProcessConfig(Axis.SLOW, Axis.FAST)
FF_SS = ProcessConfig(Axis.FAST, Axis.SLOW)


@dataclass(frozen=True)
class AxisDispersion:
    """Taylor coefficients beta_0..beta_m about ``omega0`` (m >= 4).

    ``window`` is the half-width of the validity window as a fraction of
    omega0; evaluation outside it raises :class:`DomainError`.
    """

    omega0: float
    coefficients: tuple
    window: float = 0.25

    def __post_init__(self):
        coeffs = tuple(float(b) for b in self.coefficients)
        object.__setattr__(self, "coefficients", coeffs)
        if len(coeffs) < 5:
            raise ValueError(f"need beta_0..beta_m with m >= 4, got {len(coeffs)} coefficients")
        if not all(math.isfinite(b) for b in coeffs):
            raise ValueError("dispersion coefficients must be finite")
        if not (self.omega0 > 0 and math.isfinite(self.omega0)):
            raise ValueError(f"omega0 must be positive, got {self.omega0!r}")
        if not 0 < self.window < 1:
            raise ValueError(f"window must lie in (0, 1), got {self.window!r}")

    @property
    def order(self) -> int:
        return len(self.coefficients) - 1

    @property
    def bounds(self) -> tuple:
        return self.omega0 * (1 - self.window), self.omega0 * (1 + self.window)

    def check(self, omega):
        omega = np.asarray(omega, dtype=float)
        lo, hi = self.bounds
        if np.any(omega < lo) or np.any(omega > hi) or not np.all(np.isfinite(omega)):
            bad = omega[(omega < lo) | (omega > hi) | ~np.isfinite(omega)].ravel()[0]
            raise DomainError(
                f"omega={bad:.6g} rad/s (lambda={wavelength_from_omega(bad) * 1e9:.3f} nm) outside "
                f"validity window [{lo:.6g}, {hi:.6g}] rad/s = "
                f"[{wavelength_from_omega(hi) * 1e9:.3f}, {wavelength_from_omega(lo) * 1e9:.3f}] nm"
            )
        return omega

    def derivative(self, omega, order: int = 0):
        """d^order beta / d omega^order, evaluated analytically."""
        omega = self.check(omega)
        tail = self.coefficients[order:]
        if not tail:
            return np.zeros_like(omega)
        scaled = [b / math.factorial(k) for k, b in enumerate(tail)]
        return np.polynomial.polynomial.polyval(omega - self.omega0, scaled)

    def shifted(self, d_beta0: float, d_beta1: float) -> "AxisDispersion":
        coeffs = list(self.coefficients)
        coeffs[0] += d_beta0
        coeffs[1] += d_beta1
        return dataclasses.replace(self, coefficients=tuple(coeffs))


@dataclass(frozen=True)
class FiberSpec:
    slow: AxisDispersion
    fast: AxisDispersion
    length: float
    gamma: float = 0.08
    dn_dT: float = 0.0
    reference_temperature: float = 20.0
    temperature_offset: float = 0.0
    name: str = field(default="", compare=False)

    def __post_init__(self):
        if not self.length > 0:
            raise ValueError(f"length must be > 0, got {self.length!r}")
        if not self.gamma >= 0:
            raise ValueError(f"gamma must be >= 0, got {self.gamma!r}")
        if self.slow.omega0 != self.fast.omega0:
            raise ValueError("both axes must share the same omega0")
        if not math.isfinite(self.dn_dT):
            raise ValueError("dn_dT must be finite")

    @property
    def omega0(self) -> float:
        return self.slow.omega0

    @property
    def bounds(self) -> tuple:
        lo = max(self.slow.bounds[0], self.fast.bounds[0])
        hi = min(self.slow.bounds[1], self.fast.bounds[1])
        return lo, hi

    def axis(self, axis: Axis) -> AxisDispersion:
        """Effective dispersion of ``axis`` at the current temperature."""
        axis = Axis(axis)
        if axis is Axis.SLOW:
            return self.slow
        if self.temperature_offset == 0.0:
            return self.fast
        dn = self.dn_dT * self.temperature_offset
        return self.fast.shifted(-dn * self.omega0 / C_LIGHT, -dn / C_LIGHT)

    def with_length(self, length: float) -> "FiberSpec":
        return dataclasses.replace(self, length=length)

    # serialization -------------------------------------------------------

    def to_dict(self) -> dict:
        def axis_doc(ad: AxisDispersion):
            return {
                "coefficients": list(ad.coefficients),
                "units": ["rad/m"] + [f"s^{k}/m" for k in range(1, ad.order + 1)],
                "window_fraction": ad.window,
            }

        return {
            "schema": FIBER_SCHEMA,
            "name": self.name,
            "omega0_rad_per_s": self.omega0,
            "axes": {"slow": axis_doc(self.slow), "fast": axis_doc(self.fast)},
            "length_m": self.length,
            "gamma_per_W_m": self.gamma,
            "dn_dT_per_K": self.dn_dT,
            "reference_temperature_C": self.reference_temperature,
            "temperature_offset_K": self.temperature_offset,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "FiberSpec":
        if doc.get("schema") != FIBER_SCHEMA:
            raise ValueError(f"unsupported fibre schema {doc.get('schema')!r}; expected {FIBER_SCHEMA!r}")
        omega0 = float(doc["omega0_rad_per_s"])

        def axis(name):
            a = doc["axes"][name]
            return AxisDispersion(omega0, tuple(a["coefficients"]), float(a.get("window_fraction", 0.25)))

        return cls(
            slow=axis("slow"),
            fast=axis("fast"),
            length=float(doc["length_m"]),
            gamma=float(doc.get("gamma_per_W_m", 0.08)),
            dn_dT=float(doc.get("dn_dT_per_K", 0.0)),
            reference_temperature=float(doc.get("reference_temperature_C", 20.0)),
            temperature_offset=float(doc.get("temperature_offset_K", 0.0)),
            name=str(doc.get("name", "")),
        )

    def to_json(self, path=None) -> str:
        text = json.dumps(self.to_dict(), indent=2) + "\n"
        if path is not None:
            Path(path).write_text(text)
        return text

    @classmethod
    def from_json(cls, path_or_text) -> "FiberSpec":
        text = str(path_or_text)
        if not text.lstrip().startswith("{"):
            text = Path(path_or_text).read_text()
        return cls.from_dict(json.loads(text))


def beta(fiber: FiberSpec, axis: Axis, omega):
    """Propagation constant (rad/m) on ``axis`` at angular frequency ``omega``."""
    return fiber.axis(axis).derivative(omega, 0)


def group_index(fiber: FiberSpec, axis: Axis, omega):
    """n_g = c * d(beta)/d(omega), from the analytic polynomial derivative."""
    return C_LIGHT * fiber.axis(axis).derivative(omega, 1)


def gvd(fiber: FiberSpec, axis: Axis, omega):
    """Group-velocity dispersion beta_2 (s^2/m)."""
    return fiber.axis(axis).derivative(omega, 2)


def zero_dispersion_wavelength(fiber: FiberSpec, axis: Axis, samples: int = 4001) -> float:
    """Wavelength (m) where beta_2 changes sign inside the validity window.

    If beta_2 crosses zero more than once, crossings where the dispersion
    turns anomalous with increasing wavelength (beta_2 going from positive to
    negative) are preferred, and among those the one closest to omega0.
    """
    ad = fiber.axis(axis)
    lo, hi = ad.bounds
    omega = np.linspace(lo, hi, samples)
    b2 = ad.derivative(omega, 2)
    sign = np.sign(b2)
    exact = np.flatnonzero(sign == 0)
    crossings = np.flatnonzero(sign[:-1] * sign[1:] < 0)
    if exact.size == 0 and crossings.size == 0:
        raise NoZeroDispersionError(
            f"no ZDW in window: beta_2 on the {Axis(axis).value} axis keeps one sign over "
            f"[{wavelength_from_omega(hi) * 1e9:.1f}, {wavelength_from_omega(lo) * 1e9:.1f}] nm"
        )
    roots = [(omega[k], False) for k in exact]
    for k in crossings:
        # omega ascending means wavelength descending: normal-to-anomalous
        # with increasing wavelength is negative-to-positive in omega
        turns_anomalous = b2[k] < 0 < b2[k + 1]
        a, b = omega[k], omega[k + 1]
        fa = b2[k]
        for _ in range(200):
            m = 0.5 * (a + b)
            if m in (a, b):
                break
            fm = float(ad.derivative(m, 2))
            if fm == 0.0:
                a = b = m
                break
            if np.sign(fm) == np.sign(fa):
                a, fa = m, fm
            else:
                b = m
        roots.append((0.5 * (a + b), turns_anomalous))
    preferred = [w for w, ok in roots if ok] or [w for w, _ in roots]
    best = min(preferred, key=lambda w: abs(w - ad.omega0))
    return float(wavelength_from_omega(best))


def apply_temperature(fiber: FiberSpec, delta_t: float) -> FiberSpec:
    """Copy of ``fiber`` heated by ``delta_t`` kelvin (|delta_t| <= 100 K)."""
    if not abs(delta_t) <= MAX_TEMPERATURE_STEP:
        raise ValueError(f"|delta_t| must be <= {MAX_TEMPERATURE_STEP} K, got {delta_t!r}")
    if delta_t == 0:
        return fiber
    return dataclasses.replace(fiber, temperature_offset=fiber.temperature_offset + delta_t)
