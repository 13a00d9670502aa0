"""
Command-line front end.

    fwm phasematch --preset paper --out results/
    fwm jsa --config experiment.json --out results/ [--wide] [--gaussian-phasematch]
    fwm hom --preset paper --out results/ [--delta-t-max 20]
    fwm budget --config rates.json --out results/
    fwm calibrate --out results/

Exit status: 0 success, 2 invalid configuration, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from dataclasses import dataclass, field
from pathlib import Path

from .budget import IDLER_CHAIN, SIGNAL_CHAIN, EfficiencyChain, RateReport, accidental_rate, chain_efficiency
from .calibration import PRESETS, CalibrationTargets, calibrate_preset, load_preset, verify
from .dispersion import SS_FF, FiberSpec, ProcessConfig, apply_temperature
from .errors import FwmError, PhaseMatchError
from .interference import NoiseBudget, delay_grid, fit_dip, hom_dip, hom_visibility, noisy_dip
from .jsa import (
    DEFAULT_POINTS,
    DEFAULT_SPAN,
    WIDE_SPAN,
    FilterShape,
    FilterSpec,
    PumpSpec,
    apply_filter,
    bandwidth_fwhm,
    build_jsa,
    coherence_time,
    default_grid,
    marginal_spectrum,
    sidecar,
)
from .phasematch import find_factorable_point, group_velocity_mismatch, scan_curve, signal_slope, solve_signal_idler
from .schmidt import heralded_density_matrix, schmidt_decompose

EXPERIMENT_SCHEMA = "fwmpair.experiment/1"
RATES_SCHEMA = "fwmpair.rates/1"
EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3


class ConfigError(ValueError):
    pass


def _g(x: float) -> float:
    """Round to 9 significant digits so JSON output is stable."""
    return float(f"{x:.9g}")


def _dump(path: Path, doc) -> None:
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


# configuration ---------------------------------------------------------------

@dataclass(frozen=True)
class ExperimentConfig:
    fiber: FiberSpec
    pump: PumpSpec = PumpSpec()
    process: ProcessConfig = SS_FF
    grid_points: int = DEFAULT_POINTS
    grid_span: float = DEFAULT_SPAN
    wide_span: float = WIDE_SPAN
    filters: dict = field(default_factory=lambda: {"signal": (), "idler": ()})
    noise: NoiseBudget = NoiseBudget()
    source_offsets: tuple = (0.0, 0.0)
    lambda_min: float = 695e-9
    lambda_max: float = 715e-9
    lambda_step: float = 0.5e-9
    factorable_bracket: tuple = (695e-9, 715e-9)
    delta_t_max: float = 20e-12
    delay_samples: int = 401
    fit_shape: str = "lorentzian"
    use_nonlinear_shift: bool = True
    budget: dict = field(default_factory=dict)

    @property
    def peak_power(self) -> float:
        return self.pump.peak_power if self.use_nonlinear_shift else 0.0


def _section(name):
    """Context manager re-raising validation errors as ConfigError prefixed by ``name``."""

    class _Ctx:
        def __enter__(self):
            return self

        def __exit__(self, et, ev, tb):
            if et is not None and issubclass(et, (ValueError, KeyError, TypeError)) and not issubclass(et, ConfigError):
                msg = ev.args[0] if isinstance(ev, KeyError) and ev.args else ev
                raise ConfigError(f"{name}: {msg}") from ev
            return False

    return _Ctx()


def _number(doc, key, default, path):
    v = doc.get(key, default)
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{path}.{key}: expected a number, got {v!r}")
    return float(v)


def _load_fiber(spec, base: Path) -> FiberSpec:
    if isinstance(spec, str):
        spec = {"preset": spec}
    if not isinstance(spec, dict):
        raise ConfigError("fiber: expected a preset name or an object")
    overrides = {k: spec[k] for k in ("length_m", "gamma_per_W_m", "dn_dT_per_K", "temperature_offset_K") if k in spec}
    if "preset" in spec:
        if spec["preset"] not in PRESETS:
            raise ConfigError(f"fiber.preset: unknown preset {spec['preset']!r}; available: {', '.join(PRESETS)}")
        doc = load_preset(spec["preset"]).to_dict()
    elif "path" in spec:
        path = (base / spec["path"]).resolve()
        if not path.is_file():
            raise ConfigError(f"fiber.path: file not found: {path}")
        with _section("fiber.path"):
            doc = json.loads(path.read_text())
    elif "axes" in spec:
        doc = dict(spec)
    else:
        raise ConfigError("fiber: need one of 'preset', 'path' or an inline fibre document")
    doc.update(overrides)
    for key in ("length_m", "gamma_per_W_m"):
        v = doc.get(key)
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise ConfigError(f"fiber.{key}: expected a number, got {v!r}")
    if not doc["length_m"] > 0:
        raise ConfigError(f"fiber.length_m: must be > 0, got {doc['length_m']!r}")
    with _section("fiber"):
        return FiberSpec.from_dict(doc)


def _filters(doc) -> dict:
    out = {"signal": (), "idler": ()}
    for arm in ("signal", "idler"):
        items = doc.get(arm, [])
        if isinstance(items, dict):
            items = [items]
        specs = []
        for n, item in enumerate(items):
            path = f"filters.{arm}[{n}]"
            with _section(path):
                specs.append(
                    FilterSpec(
                        centre=_number(item, "centre_nm", None, path) * 1e-9,
                        fwhm=_number(item, "fwhm_nm", None, path) * 1e-9,
                        transmission=_number(item, "transmission", 1.0, path),
                        shape=FilterShape(item.get("shape", "tophat")),
                    )
                )
        out[arm] = tuple(specs)
    return out


def _noise(doc) -> NoiseBudget:
    with _section("noise"):
        if "reflectance" in doc:
            r = _number(doc, "reflectance", 0.5, "noise")
            return NoiseBudget(r, _number(doc, "multipair", 0.0, "noise"), _number(doc, "raman", 0.0, "noise"))
        return NoiseBudget.from_factors(
            _number(doc, "splitter_factor", 1.0, "noise"),
            1 - _number(doc, "multipair", 0.0, "noise"),
            1 - _number(doc, "raman", 0.0, "noise"),
        )


def default_config_doc() -> dict:
    """The default experiment on the shipped preset fibre."""
    return {
        "schema": EXPERIMENT_SCHEMA,
        "fiber": {"preset": "paper"},
        "pump": {"wavelength_nm": 705.0, "fwhm_nm": 0.9, "peak_power_W": 10.0, "rep_rate_Hz": 80e6},
        "process": "ss->ff",
        "grid": {"points": DEFAULT_POINTS, "span": DEFAULT_SPAN, "wide_span": WIDE_SPAN},
        "filters": {
            "signal": [{"shape": "tophat", "centre_nm": 597.0, "fwhm_nm": 40.0, "transmission": 1.0}],
            "idler": [{"shape": "tophat", "centre_nm": 860.0, "fwhm_nm": 10.0, "transmission": 1.0}],
        },
        "noise": {"splitter_factor": 0.99, "multipair": 0.01, "raman": 0.01},
        "sources": [{"temperature_offset_K": 0.0}, {"temperature_offset_K": 0.0}],
        "phasematch": {"lambda_min_nm": 695.0, "lambda_max_nm": 715.0, "step_nm": 0.5, "factorable_bracket_nm": [695.0, 715.0]},
        "hom": {"delta_t_max_ps": 20.0, "samples": 401, "fit_shape": "lorentzian"},
        "budget": {"rep_rate_Hz": 80e6, "p_pair": 0.1, "efficiencies": [0.2] * 6},
    }


def parse_config(doc: dict, base: Path = Path(".")) -> ExperimentConfig:
    if not isinstance(doc, dict):
        raise ConfigError("config: expected a JSON object")
    if doc.get("schema") != EXPERIMENT_SCHEMA:
        raise ConfigError(f"schema: expected {EXPERIMENT_SCHEMA!r}, got {doc.get('schema')!r}")
    fiber = _load_fiber(doc.get("fiber", "paper"), base)

    p = doc.get("pump", {})
    with _section("pump"):
        pump = PumpSpec(
            wavelength=_number(p, "wavelength_nm", 705.0, "pump") * 1e-9,
            fwhm=_number(p, "fwhm_nm", 0.9, "pump") * 1e-9,
            peak_power=_number(p, "peak_power_W", 10.0, "pump"),
            rep_rate=_number(p, "rep_rate_Hz", 80e6, "pump"),
        )
    with _section("process"):
        process = ProcessConfig.from_label(str(doc.get("process", "ss->ff")))

    g = doc.get("grid", {})
    points = g.get("points", DEFAULT_POINTS)
    if isinstance(points, bool) or not isinstance(points, int) or points < 16:
        raise ConfigError(f"grid.points: expected an integer >= 16, got {points!r}")
    span = _number(g, "span", DEFAULT_SPAN, "grid")
    wide = _number(g, "wide_span", WIDE_SPAN, "grid")
    if not (span > 0 and wide > 0):
        raise ConfigError("grid.span: spans must be > 0")

    filters = _filters(doc.get("filters", {}))
    noise = _noise(doc.get("noise", {}))

    sources = doc.get("sources", [{}, {}])
    if not isinstance(sources, list) or len(sources) != 2:
        raise ConfigError("sources: expected a list of two source objects")
    offsets = tuple(_number(s, "temperature_offset_K", 0.0, f"sources[{n}]") for n, s in enumerate(sources))
    for n, off in enumerate(offsets):
        if abs(off) > 100:
            raise ConfigError(f"sources[{n}].temperature_offset_K: |offset| must be <= 100 K")

    pm = doc.get("phasematch", {})
    lmin = _number(pm, "lambda_min_nm", 695.0, "phasematch") * 1e-9
    lmax = _number(pm, "lambda_max_nm", 715.0, "phasematch") * 1e-9
    step = _number(pm, "step_nm", 0.5, "phasematch") * 1e-9
    if not step > 0:
        raise ConfigError(f"phasematch.step_nm: must be > 0, got {step * 1e9!r}")
    if not lmax > lmin:
        raise ConfigError("phasematch.lambda_max_nm: range must be ascending")
    bracket = pm.get("factorable_bracket_nm", [lmin * 1e9, lmax * 1e9])
    if not (isinstance(bracket, list) and len(bracket) == 2 and bracket[1] > bracket[0]):
        raise ConfigError("phasematch.factorable_bracket_nm: expected an ascending pair")

    h = doc.get("hom", {})
    tmax = _number(h, "delta_t_max_ps", 20.0, "hom") * 1e-12
    if not tmax > 0:
        raise ConfigError("hom.delta_t_max_ps: must be > 0")
    samples = h.get("samples", 401)
    if isinstance(samples, bool) or not isinstance(samples, int) or samples < 8:
        raise ConfigError(f"hom.samples: expected an integer >= 8, got {samples!r}")
    shape = str(h.get("fit_shape", "lorentzian")).lower()
    if shape not in ("lorentzian", "gaussian"):
        raise ConfigError(f"hom.fit_shape: expected 'lorentzian' or 'gaussian', got {shape!r}")

    return ExperimentConfig(
        fiber=fiber,
        pump=pump,
        process=process,
        grid_points=points,
        grid_span=span,
        wide_span=wide,
        filters=filters,
        noise=noise,
        source_offsets=offsets,
        lambda_min=lmin,
        lambda_max=lmax,
        lambda_step=step,
        factorable_bracket=(bracket[0] * 1e-9, bracket[1] * 1e-9),
        delta_t_max=tmax,
        delay_samples=samples,
        fit_shape=shape,
        budget=doc.get("budget", {}),
    )


def load_config(args) -> ExperimentConfig:
    if args.config:
        path = Path(args.config)
        if not path.is_file():
            raise ConfigError(f"config: file not found: {path}")
        try:
            doc = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config: invalid JSON: {exc}") from exc
        cfg = parse_config(doc, path.parent)
    else:
        if args.preset not in PRESETS:
            raise ConfigError(f"--preset: unknown preset {args.preset!r}")
        cfg = parse_config(default_config_doc())
    if getattr(args, "ignore_nonlinear_shift", False):
        cfg = dataclasses.replace(cfg, use_nonlinear_shift=False)
    return cfg


# commands --------------------------------------------------------------------

def _tag(process: ProcessConfig) -> str:
    return process.label.replace("->", "_")


def cmd_phasematch(cfg: ExperimentConfig, out: Path, args) -> None:
    lmin = args.lambda_min * 1e-9 if args.lambda_min is not None else cfg.lambda_min
    lmax = args.lambda_max * 1e-9 if args.lambda_max is not None else cfg.lambda_max
    step = args.step * 1e-9 if args.step is not None else cfg.lambda_step
    if not step > 0:
        raise ConfigError(f"--step: must be > 0, got {args.step!r}")
    if not lmax > lmin:
        raise ConfigError("--lambda-min/--lambda-max: range must be ascending")
    fib, proc, power = cfg.fiber, cfg.process, cfg.peak_power
    curve = scan_curve(fib, proc, lmin, lmax, step, power)
    tag = _tag(proc)
    curve.to_csv(out / f"phasematch_{tag}.csv")

    report = {"process": proc.label, "peak_power_W": _g(power), "pump_nm": _g(cfg.pump.wavelength * 1e9)}
    pt = solve_signal_idler(fib, proc, cfg.pump.wavelength, power)
    if pt is not None:
        report["operating_point"] = {
            "lambda_s_nm": _g(pt.lambda_s * 1e9),
            "lambda_i_nm": _g(pt.lambda_i * 1e9),
            "delta_k_residual": _g(pt.residual),
        }
    try:
        star = find_factorable_point(fib, proc, cfg.factorable_bracket, power)
    except PhaseMatchError as exc:
        report["factorable_point"] = None
        report["factorable_message"] = str(exc)
    else:
        report["factorable_point"] = {
            "lambda_p_nm": _g(star * 1e9),
            "slope": _g(signal_slope(fib, proc, star, power)),
            "group_index_mismatch": _g(group_velocity_mismatch(fib, proc, star, power)),
        }
    _dump(out / f"factorable_{tag}.json", report)


def _build(cfg: ExperimentConfig, fiber: FiberSpec, grid=None, span=None, phasematch="sinc"):
    if grid is None:
        grid = default_grid(fiber, cfg.pump, cfg.process, cfg.grid_points, cfg.grid_points, span or cfg.grid_span)
    return build_jsa(fiber, cfg.pump, cfg.process, grid, phasematch, cfg.peak_power)


def cmd_jsa(cfg: ExperimentConfig, out: Path, args) -> None:
    span = cfg.wide_span if args.wide else cfg.grid_span
    shape = "gaussian" if args.gaussian_phasematch else "sinc"
    jsa = _build(cfg, cfg.fiber, span=span, phasematch=shape)
    filtered = jsa
    for arm in ("signal", "idler"):
        for f in cfg.filters[arm]:
            filtered = apply_filter(filtered, arm, f)

    jsa.to_csv(out / "jsa.csv")
    (out / "jsa.json").write_text(sidecar(jsa, span_fwhm=span, phasematch=shape, process=cfg.process.label) + "\n")
    res = schmidt_decompose(jsa)
    doc = res.to_dict()
    fwhm = {}
    for arm in ("signal", "idler"):
        m = marginal_spectrum(jsa, arm)
        m.to_csv(out / f"marginal_{arm}.csv")
        fwhm[arm] = bandwidth_fwhm(m)
    centre = solve_signal_idler(cfg.fiber, cfg.process, cfg.pump.wavelength, cfg.peak_power)
    doc.update(
        {
            "correlation_1_minus_1_over_K": _g(res.correlation),
            "signal_fwhm_nm": _g(fwhm["signal"] * 1e9),
            "idler_fwhm_nm": _g(fwhm["idler"] * 1e9),
            "signal_coherence_time_ps": _g(coherence_time(fwhm["signal"], centre.lambda_s) * 1e12),
            "pump_coherence_time_ps": _g(coherence_time(cfg.pump.fwhm, cfg.pump.wavelength) * 1e12),
            "filter_transmitted_probability": _g(filtered.weight),
            "phasematch": shape,
            "grid_points": list(jsa.grid.shape),
        }
    )
    _dump(out / "schmidt.json", doc)


def cmd_hom(cfg: ExperimentConfig, out: Path, args) -> None:
    tmax = args.delta_t_max * 1e-12 if args.delta_t_max is not None else cfg.delta_t_max
    if not tmax > 0:
        raise ConfigError(f"--delta-t-max: must be > 0, got {args.delta_t_max!r}")
    herald = cfg.filters["idler"][0] if cfg.filters["idler"] else None
    states = []
    grid = None
    for off in cfg.source_offsets:
        jsa = _build(cfg, apply_temperature(cfg.fiber, off), grid=grid)
        grid = jsa.grid
        for f in cfg.filters["signal"]:
            jsa = apply_filter(jsa, "signal", f)
        states.append(heralded_density_matrix(jsa, "idler", herald))
    v_ideal = hom_visibility(*states)
    ideal = hom_dip(states[0], states[1], delay_grid(tmax, cfg.delay_samples))
    noisy = noisy_dip(ideal, cfg.noise)
    noisy.to_csv(out / "hom_dip.csv")
    ideal.to_csv(out / "hom_dip_ideal.csv")
    fits = {s: fit_dip(noisy, s) for s in ("lorentzian", "gaussian")}
    doc = fits[cfg.fit_shape].to_dict()
    other = "gaussian" if cfg.fit_shape == "lorentzian" else "lorentzian"
    doc.update(
        {
            "alternative_fit": fits[other].to_dict(),
            "visibility_ideal": _g(v_ideal),
            "noise_factor": _g(cfg.noise.factor),
            "visibility_predicted": _g(v_ideal * cfg.noise.factor),
            "visibility_deficit": _g(1 - v_ideal),
            "source_temperature_offsets_K": [_g(x) for x in cfg.source_offsets],
        }
    )
    _dump(out / "hom_fit.json", doc)


def _rates_from(doc: dict) -> RateReport:
    if not isinstance(doc, dict):
        raise ConfigError("budget: expected an object")
    rep = _number(doc, "rep_rate_Hz", 80e6, "budget")
    p = _number(doc, "p_pair", 0.1, "budget")
    if "chains" in doc:
        chains = []
        for n, c in enumerate(doc["chains"]):
            with _section(f"budget.chains[{n}]"):
                chains.append(EfficiencyChain.from_dict(c))
        eff = [chain_efficiency(c) for c in chains]
    elif "efficiencies" in doc:
        eff = doc["efficiencies"]
        if not isinstance(eff, list) or any(isinstance(e, bool) or not isinstance(e, (int, float)) for e in eff):
            raise ConfigError("budget.efficiencies: expected a list of numbers")
    else:
        eff = [chain_efficiency(SIGNAL_CHAIN), chain_efficiency(IDLER_CHAIN)] * 2
    acc = None
    if "singles_rates_Hz" in doc:
        with _section("budget.singles_rates_Hz"):
            acc = accidental_rate(doc["singles_rates_Hz"], _number(doc, "coincidence_window_s", 1e-9, "budget"))
    with _section("budget"):
        return RateReport(rep, p, tuple(eff), acc)


def cmd_budget(cfg: ExperimentConfig | None, out: Path, args) -> None:
    doc = cfg.budget if cfg is not None else default_config_doc()["budget"]
    report = _rates_from(doc)
    result = report.to_dict()
    result["chains"] = {
        c.arm: {"stages": c.to_dict()["stages"], "efficiency": _g(chain_efficiency(c))} for c in (SIGNAL_CHAIN, IDLER_CHAIN)
    }
    _dump(out / "rates.json", result)


def cmd_calibrate(cfg, out: Path, args) -> None:
    fiber = calibrate_preset()
    fiber.to_json(out / "paper_fibre.json")
    report = {k: {"achieved": _g(a), "target": _g(t), "tolerance": _g(tol), "ok": ok} for k, (a, t, tol, ok) in verify(fiber, CalibrationTargets()).items()}
    _dump(out / "calibration.json", report)


# entry point -----------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    src = common.add_mutually_exclusive_group()
    src.add_argument("--config", help="experiment configuration (JSON)")
    src.add_argument("--preset", default="paper", help="built-in experiment preset (default: paper)")
    common.add_argument("--out", default=".", help="output directory (created if missing)")
    common.add_argument("--ignore-nonlinear-shift", action="store_true", help="drop the 2 gamma P term")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="fwm", description="SFWM photon-pair source modelling")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("phasematch", parents=[common], help="phase-matching curve and factorable point")
    p.add_argument("--lambda-min", type=float, help="pump scan start (nm)")
    p.add_argument("--lambda-max", type=float, help="pump scan end (nm)")
    p.add_argument("--step", type=float, help="pump scan step (nm)")

    p = sub.add_parser("jsa", parents=[common], help="joint spectrum, marginals and Schmidt number")
    p.add_argument("--wide", action="store_true", help="wide grid showing the sinc side lobes")
    p.add_argument("--gaussian-phasematch", action="store_true", help="replace the sinc by a matched Gaussian")

    p = sub.add_parser("hom", parents=[common], help="two-source HOM dip and fit")
    p.add_argument("--delta-t-max", type=float, help="largest delay (ps)")

    sub.add_parser("budget", parents=[common], help="n-fold coincidence rate")
    sub.add_parser("calibrate", parents=[common], help="refit the preset fibre")
    return parser


COMMANDS = {
    "phasematch": cmd_phasematch,
    "jsa": cmd_jsa,
    "hom": cmd_hom,
    "budget": cmd_budget,
    "calibrate": cmd_calibrate,
}


def _load_budget_config(args):
    if not args.config:
        return None
    path = Path(args.config)
    if not path.is_file():
        raise ConfigError(f"config: file not found: {path}")
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config: invalid JSON: {exc}") from exc
    if isinstance(doc, dict) and doc.get("schema") == RATES_SCHEMA:
        return dataclasses.replace(parse_config(default_config_doc()), budget=doc)
    return parse_config(doc, path.parent)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    try:
        if args.command == "budget":
            cfg = _load_budget_config(args)
        elif args.command == "calibrate":
            cfg = None
        else:
            cfg = load_config(args)
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        COMMANDS[args.command](cfg, out, args)
    except FwmError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ConfigError, ValueError, KeyError, TypeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
