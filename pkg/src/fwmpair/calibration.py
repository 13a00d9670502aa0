"""
Calibration of a preset fibre against the observed operating point.

No index data exist for the fibre, so its dispersion is inferred from
observables: the phase-matched wavelengths, the location of the horizontal
tangent, the zero-dispersion wavelengths, the sinc-limited signal bandwidth
and the residual pump-idler group-velocity mismatch at the pump wavelength.
Together with a nominal group index and the position of the same-axis
(ss->ss) sideband these pin beta_1..beta_4 on both axes; beta_0 is fixed by
the nominal index and birefringence.

The fit is a deterministic Levenberg-Marquardt run from a seed polynomial
obtained by Taylor-expanding bulk fused silica (Malitson Sellmeier) about
the pump frequency.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass
from importlib import resources

import numpy as np
from scipy.constants import c as C_LIGHT
from scipy.optimize import least_squares

from .dispersion import (
    SS_FF,
    AxisDispersion,
    FiberSpec,
    ProcessConfig,
    apply_temperature,
    group_index,
    gvd,
    omega_from_wavelength,
    wavelength_from_omega,
    zero_dispersion_wavelength,
)
from .errors import CalibrationError, FwmError
from .phasematch import (
    delta_k,
    find_factorable_point,
    group_velocity_mismatch,
    mismatch_slopes,
    solve_signal_idler,
)

SINC_HALF_POWER_X = 1.3915573782515103  # sinc(x)^2 = 1/2
_SCALES = np.array([1e-9, 1e-26, 1e-40, 1e-54])
_MAX_NFEV = 2000


@dataclass(frozen=True)
class CalibrationTargets:
    """Observables a preset fibre is calibrated to reproduce (SI units)."""

    pump_wavelength: float = 705e-9
    signal_wavelength: float = 597e-9
    idler_wavelength: float = 860e-9
    process: ProcessConfig = SS_FF
    length: float = 0.40
    gamma: float = 0.08
    peak_power: float = 10.0
    # sinc-limited signal bandwidth; the realized marginal is slightly wider
    signal_sinc_fwhm: float = 0.156e-9
    # (d dk/d w_i)/(d dk/d w_s) at the pump wavelength; sets the residual
    # spectral correlation and hence the heralded purity
    gvm_ratio: float = -0.078
    factorable_pump_wavelength: float = 705.55e-9
    zdw_slow: float = 800e-9
    zdw_fast: float = 800e-9
    same_axis_signal_wavelength: float = 620e-9
    group_index: float = 1.47
    nominal_index: float = 1.45
    birefringence: float = 2.5e-4
    tuning_rate: float = 11e-12  # signal shift per kelvin, m/K
    # acceptance tolerances checked after the fit
    tol_signal: float = 2e-9
    tol_idler: float = 3e-9
    tol_factorable: float = 1e-9
    zdw_band: tuple = (780e-9, 820e-9)
    tol_gvm: float = 1e-3
    tol_tuning: float = 0.1


def silica_index(wavelength):
    """Malitson (1965) Sellmeier index of fused silica."""
    x2 = (np.asarray(wavelength, dtype=float) * 1e6) ** 2
    return np.sqrt(
        1
        + 0.6961663 * x2 / (x2 - 0.0684043**2)
        + 0.4079426 * x2 / (x2 - 0.1162414**2)
        + 0.8974794 * x2 / (x2 - 9.896161**2)
    )


def seed_coefficients(omega0: float, order: int = 4) -> np.ndarray:
    """beta_1..beta_order of bulk silica about ``omega0`` (polynomial fit, +-8%)."""
    delta = np.linspace(-0.08, 0.08, 401) * omega0
    omega = omega0 + delta
    b = silica_index(wavelength_from_omega(omega)) * omega / C_LIGHT
    u = delta / omega0
    poly = np.polynomial.polynomial.polyfit(u, b, order + 4)
    return np.array([poly[k] * math.factorial(k) / omega0**k for k in range(1, order + 1)])


def _beta0(targets: CalibrationTargets, omega0: float):
    slow = targets.nominal_index * omega0 / C_LIGHT
    fast = (targets.nominal_index - targets.birefringence) * omega0 / C_LIGHT
    return slow, fast


def _build(targets: CalibrationTargets, omega0: float, x: np.ndarray, dn_dT: float = 0.0, name: str = "") -> FiberSpec:
    b0s, b0f = _beta0(targets, omega0)
    slow = AxisDispersion(omega0, (b0s, *(x[0:4] * _SCALES)))
    fast = AxisDispersion(omega0, (b0f, *(x[4:8] * _SCALES)))
    return FiberSpec(slow, fast, targets.length, targets.gamma, dn_dT, name=name)


def _half_separation(targets: CalibrationTargets) -> float:
    ws = omega_from_wavelength(targets.signal_wavelength)
    wi = omega_from_wavelength(targets.idler_wavelength)
    return float(0.5 * (ws - wi))


def _signal_slope_target(targets: CalibrationTargets, omega_s: float) -> float:
    """d dk/d w_s that gives the requested sinc-limited signal FWHM.

    Negative: the daughter group index at the signal exceeds the pump's.
    """
    d_omega = 2 * math.pi * C_LIGHT * targets.signal_sinc_fwhm / targets.signal_wavelength**2
    return -4 * SINC_HALF_POWER_X / (d_omega * targets.length)


def _residuals(x, targets: CalibrationTargets, omega0: float):
    fiber = _build(targets, omega0, x[:8])
    proc, p = targets.process, targets.peak_power
    wp = omega0
    # the stated pair need not conserve energy with the stated pump exactly;
    # dk takes its pump frequency from the pair, so the pair itself is matched
    ws = float(omega_from_wavelength(targets.signal_wavelength))
    wi = float(omega_from_wavelength(targets.idler_wavelength))
    a_s_t = _signal_slope_target(targets, ws)
    # spectral widths and correlation belong to the pump's own phase-matched point
    om_op = x[9] * 1e14
    a_s, a_i = mismatch_slopes(fiber, proc, wp + om_op, wp - om_op)

    w_star = float(omega_from_wavelength(targets.factorable_pump_wavelength))
    om_star = x[8] * 1e14
    _, a_i_star = mismatch_slopes(fiber, proc, w_star + om_star, w_star - om_star)

    om_ss = float(omega_from_wavelength(targets.same_axis_signal_wavelength)) - wp
    pump_axis, daughter_axis = proc.pump, proc.daughter
    w_zs = float(omega_from_wavelength(targets.zdw_slow))
    w_zf = float(omega_from_wavelength(targets.zdw_fast))
    return np.array(
        [
            float(delta_k(fiber, proc, ws, wi, p)),
            float(delta_k(fiber, proc, wp + om_op, wp - om_op, p)),
            100 * (a_s / a_s_t - 1),
            100 * (a_i - targets.gvm_ratio * a_s_t) / abs(a_s_t),
            float(delta_k(fiber, proc, w_star + om_star, w_star - om_star, p)),
            100 * a_i_star / abs(a_s_t),
            float(delta_k(fiber, ProcessConfig(pump_axis, pump_axis), wp + om_ss, wp - om_ss, p)),
            float(gvd(fiber, "slow", w_zs)) / 1e-27,
            float(gvd(fiber, "fast", w_zf)) / 1e-27,
            1e4 * (float(group_index(fiber, pump_axis, wp)) - targets.group_index),
        ]
    )


def _tune_temperature(fiber: FiberSpec, targets: CalibrationTargets) -> float:
    """dn/dT giving ``targets.tuning_rate`` of signal shift per kelvin (10 K probe)."""
    proc, p = targets.process, targets.peak_power
    base = solve_signal_idler(fiber, proc, targets.pump_wavelength, p)
    trial = 1e-6
    for _ in range(3):
        hot = solve_signal_idler(
            apply_temperature(dataclasses.replace(fiber, dn_dT=trial), 10.0), proc, targets.pump_wavelength, p
        )
        if hot is None or base is None:
            raise CalibrationError("temperature probe lost phase matching")
        shift = (hot.lambda_s - base.lambda_s) / 10.0
        trial = trial * targets.tuning_rate / shift
    return trial


def verify(fiber: FiberSpec, targets: CalibrationTargets) -> dict:
    """Per-target (achieved, target, tolerance, ok) for a calibrated fibre."""
    proc, p = targets.process, targets.peak_power
    out = {}
    pt = solve_signal_idler(fiber, proc, targets.pump_wavelength, p)
    if pt is None:
        out["operating_point"] = (None, targets.signal_wavelength, targets.tol_signal, False)
        return out
    out["signal_wavelength"] = (pt.lambda_s, targets.signal_wavelength, targets.tol_signal,
                                abs(pt.lambda_s - targets.signal_wavelength) <= targets.tol_signal)
    out["idler_wavelength"] = (pt.lambda_i, targets.idler_wavelength, targets.tol_idler,
                               abs(pt.lambda_i - targets.idler_wavelength) <= targets.tol_idler)
    lo, hi = targets.zdw_band
    for axis in ("slow", "fast"):
        try:
            z = zero_dispersion_wavelength(fiber, axis)
        except FwmError:
            z = float("nan")
        out[f"zdw_{axis}"] = (z, 0.5 * (lo + hi), 0.5 * (hi - lo), lo <= z <= hi)
    bracket = (targets.pump_wavelength - 10e-9, targets.pump_wavelength + 10e-9)
    try:
        star = find_factorable_point(fiber, proc, bracket, p)
    except FwmError:
        star = float("nan")
    out["factorable_point"] = (star, targets.pump_wavelength, targets.tol_factorable,
                               abs(star - targets.pump_wavelength) <= targets.tol_factorable)
    gvm = group_velocity_mismatch(fiber, proc, targets.pump_wavelength, p)
    out["gvm_at_pump"] = (gvm, 0.0, targets.tol_gvm, gvm < targets.tol_gvm)
    if fiber.dn_dT:
        hot = solve_signal_idler(apply_temperature(fiber, 10.0), proc, targets.pump_wavelength, p)
        shift = (hot.lambda_s - pt.lambda_s) / 10.0 if hot else float("nan")
        out["tuning_rate"] = (shift, targets.tuning_rate, targets.tol_tuning * targets.tuning_rate,
                              abs(shift - targets.tuning_rate) <= targets.tol_tuning * targets.tuning_rate)
    same = solve_signal_idler(fiber, ProcessConfig(proc.pump, proc.pump), targets.pump_wavelength, p)
    out["same_axis_signal"] = (same.lambda_s if same else float("nan"), targets.same_axis_signal_wavelength,
                               2e-9, bool(same) and abs(same.lambda_s - targets.same_axis_signal_wavelength) <= 2e-9)
    return out


def calibrate_preset(targets: CalibrationTargets | None = None, name: str = "paper_fibre") -> FiberSpec:
    """Fit both axes' beta_1..beta_4 to ``targets`` and return the fibre.

    Raises :class:`CalibrationError` (with per-target residuals) when the
    fitted fibre misses any tolerance.
    """
    targets = targets or CalibrationTargets()
    omega0 = float(omega_from_wavelength(targets.pump_wavelength))
    seed = seed_coefficients(omega0)
    x0 = np.concatenate([seed / _SCALES, seed / _SCALES, [_half_separation(targets) / 1e14] * 2])
    # split the group index between the axes by the nominal birefringence
    x0[4] -= targets.birefringence / C_LIGHT / _SCALES[0]
    fit = least_squares(_residuals, x0, args=(targets, omega0), method="lm", xtol=1e-15, ftol=1e-15,
                        gtol=1e-15, max_nfev=_MAX_NFEV)
    fiber = _build(targets, omega0, fit.x[:8], name=name)
    try:
        dn_dT = _tune_temperature(fiber, targets)
    except FwmError as exc:
        raise CalibrationError(f"temperature calibration failed: {exc}") from exc
    fiber = dataclasses.replace(fiber, dn_dT=dn_dT)
    report = verify(fiber, targets)
    failed = {k: v for k, v in report.items() if not v[-1]}
    if failed or np.max(np.abs(fit.fun)) > 1e-3:
        raise CalibrationError(
            "calibration missed targets: " + ", ".join(failed) if failed else
            f"fit residual too large ({np.max(np.abs(fit.fun)):.3g})",
            residuals={k: v[:3] for k, v in report.items()} | {"fit_max_residual": float(np.max(np.abs(fit.fun)))},
        )
    return fiber


def targets_from_fiber(fiber: FiberSpec, **overrides) -> CalibrationTargets:
    """Observables of an existing fibre, in the form :func:`calibrate_preset` consumes."""
    base = CalibrationTargets(**overrides)
    proc, p = base.process, base.peak_power
    omega0 = fiber.omega0
    lp = float(wavelength_from_omega(omega0))
    pt = solve_signal_idler(fiber, proc, lp, p)
    a_s, a_i = mismatch_slopes(fiber, proc, pt.omega_s, pt.omega_i)
    d_omega = -4 * SINC_HALF_POWER_X / (a_s * fiber.length)
    star = find_factorable_point(fiber, proc, (lp - 10e-9, lp + 10e-9), p)
    same = solve_signal_idler(fiber, ProcessConfig(proc.pump, proc.pump), lp, p)
    b0s, b0f = fiber.slow.coefficients[0], fiber.fast.coefficients[0]
    n_nom = b0s * C_LIGHT / omega0
    return dataclasses.replace(
        base,
        pump_wavelength=lp,
        signal_wavelength=pt.lambda_s,
        idler_wavelength=pt.lambda_i,
        length=fiber.length,
        gamma=fiber.gamma,
        signal_sinc_fwhm=float(d_omega * pt.lambda_s**2 / (2 * math.pi * C_LIGHT)),
        gvm_ratio=float(a_i / a_s),
        factorable_pump_wavelength=star,
        zdw_slow=zero_dispersion_wavelength(fiber, "slow"),
        zdw_fast=zero_dispersion_wavelength(fiber, "fast"),
        same_axis_signal_wavelength=same.lambda_s,
        group_index=float(group_index(fiber, proc.pump, omega0)),
        nominal_index=n_nom,
        birefringence=n_nom - b0f * C_LIGHT / omega0,
    )


def load_preset(name: str = "paper") -> FiberSpec:
    """The shipped preset fibre (``presets/paper_fibre.json``)."""
    files = {"paper": "paper_fibre.json", "paper_fibre": "paper_fibre.json"}
    try:
        fname = files[name]
    except KeyError:
        raise ValueError(f"unknown preset {name!r}; available: paper") from None
    text = resources.files("fwmpair").joinpath("presets", fname).read_text()
    return FiberSpec.from_json(text)


PRESETS = ("paper",)
