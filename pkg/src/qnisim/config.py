"""Scenario files: schema, validation, canonical form, and overrides.

A scenario is one YAML document with a ``schema_version`` field.  Loading
produces a :class:`Scenario` whose canonical dictionary (and its SHA-256)
defines the run identity recorded in output manifests.
"""

from __future__ import annotations

import hashlib
import json
import warnings
from dataclasses import dataclass, field
from typing import Any

import yaml

from .bench import BenchLayout, ObjectSpec
from .fields import (
    FieldGrid,
    GridSpec,
    IDLER,
    PUMP,
    SIGNAL,
    make_coherent_pulse,
    make_flat_field,
)
from .propagate import MaterialParams

SCHEMA_VERSION = 1

FIELD_KEYS = {"pump": PUMP, "signal": SIGNAL, "idler": IDLER}

SWEEPABLE = {
    "object.dphi",
    "object.r",
    "object.eta",
    "object.gamma_o",
    "bench.delta_tau_s_ps",
    "bench.delta_tau_i_ps",
    "scales.vg_scale",
    "scales.gvd_scale",
}

# Sweeps eligible for the background/reference/target workflow: only the
# object and timing knobs, so reference and target share all propagation
# parameters except the declared variation.
ESTIMATOR_SWEEPABLE = {
    "object.dphi",
    "object.r",
    "object.eta",
    "object.gamma_o",
    "bench.delta_tau_s_ps",
    "bench.delta_tau_i_ps",
}

_OBJECT_PARAM_VARIANTS = {
    "object.dphi": "phase",
    "object.r": "reflect",
    "object.eta": "dynamic",
    "object.gamma_o": "dynamic",
}


class ConfigError(ValueError):
    """Scenario file rejected; ``path`` points at the offending key."""

    def __init__(self, path: str, message: str):
        self.path = path
        super().__init__(f"{path}: {message}")


def _get(d: dict, key: str, path: str, kind, default=None, required=False):
    if key not in d or d[key] is None:
        if required:
            raise ConfigError(f"{path}.{key}", "missing required key")
        return default
    val = d[key]
    if kind is float and isinstance(val, int):
        val = float(val)
    if kind is not None and not isinstance(val, kind):
        raise ConfigError(
            f"{path}.{key}", f"expected {getattr(kind, '__name__', kind)}, got {type(val).__name__}"
        )
    return val


def _field_map(d: dict, path: str, default: dict) -> dict:
    out = dict(default)
    for key, val in d.items():
        if key not in FIELD_KEYS:
            raise ConfigError(f"{path}.{key}", "unknown field (use pump/signal/idler)")
        if isinstance(val, int):
            val = float(val)
        if not isinstance(val, float):
            raise ConfigError(f"{path}.{key}", "expected a number")
        out[FIELD_KEYS[key]] = val
    return out


@dataclass(frozen=True)
class PumpSpec:
    profile: str = "gaussian"
    peak_flux_per_ps: float = 4.0e8
    fwhm_ps: float = 40.0
    center_ps: float | None = None
    phase: float = 0.0

    def build(self, spec: GridSpec) -> FieldGrid:
        if self.profile == "flat":
            return make_flat_field(spec, PUMP, self.peak_flux_per_ps, self.phase)
        center = self.center_ps
        if center is None:
            center = spec.t0_ps + 0.5 * spec.window_ps
        return make_coherent_pulse(
            spec, PUMP, self.peak_flux_per_ps, self.fwhm_ps, center, self.phase
        )


@dataclass(frozen=True)
class Scenario:
    """Validated scenario: grid, pump, medium, bench, detection, ensemble."""

    grid: GridSpec
    pump: PumpSpec
    material: MaterialParams
    vg_scale: float
    gvd_scale: float
    bench: BenchLayout
    avg_bins: tuple[int, ...]
    offset_fraction: float
    trajectories: int
    seed: int
    sweep_parameter: str | None = None
    sweep_values: tuple[float, ...] = ()
    background_trajectories: int | None = None

    def scaled_material(self) -> MaterialParams:
        return self.material.scaled(self.vg_scale, self.gvd_scale)

    def pump_grid(self) -> FieldGrid:
        return self.pump.build(self.grid)

    def runtime_warnings(self) -> list[str]:
        notes = []
        total_len = self.bench.nl1_length_m + self.bench.nl2_length_m
        for m, dvg in self.material.dvg_ps_per_m.items():
            walk = abs(dvg * self.vg_scale) * total_len
            if walk > 0.4 * self.grid.window_ps:
                notes.append(
                    f"walk-off of {m} ({walk:.0f} ps) exceeds 40% of the "
                    f"{self.grid.window_ps:.0f} ps window; wrap-around likely"
                )
        return notes

    # -- canonical form -------------------------------------------------

    def to_dict(self) -> dict:
        inv = {v: k for k, v in FIELD_KEYS.items()}
        obj = self.bench.object
        return {
            "schema_version": SCHEMA_VERSION,
            "grid": {
                "window_ps": self.grid.window_ps,
                "dt_ps": self.grid.dt_ps,
                "t0_ps": self.grid.t0_ps,
            },
            "pump": {
                "profile": self.pump.profile,
                "peak_flux_per_ps": self.pump.peak_flux_per_ps,
                "fwhm_ps": self.pump.fwhm_ps,
                "center_ps": self.pump.center_ps,
                "phase": self.pump.phase,
            },
            "material": {
                "chi": [self.material.chi.real, self.material.chi.imag]
                if isinstance(self.material.chi, complex)
                else [float(self.material.chi), 0.0],
                "loss_per_m": {inv[k]: v for k, v in self.material.loss_per_m.items()},
                "dvg_ps_per_m": {inv[k]: v for k, v in self.material.dvg_ps_per_m.items()},
                "gvd_ps2_per_km": {inv[k]: v for k, v in self.material.gvd_ps2_per_km.items()},
                "center_freq_THz": {inv[k]: v for k, v in self.material.center_freq_THz.items()},
            },
            "scales": {"vg_scale": self.vg_scale, "gvd_scale": self.gvd_scale},
            "bench": {
                "nl1_length_m": self.bench.nl1_length_m,
                "nl2_length_m": self.bench.nl2_length_m,
                "steps_per_stage": self.bench.steps_per_stage,
                "delta_tau_s_ps": self.bench.delta_tau_s_ps,
                "delta_tau_i_ps": self.bench.delta_tau_i_ps,
                "object": {
                    "variant": obj.variant,
                    "dphi": obj.dphi,
                    "r": obj.r,
                    "eta": [complex(obj.eta).real, complex(obj.eta).imag],
                    "gamma_o": obj.gamma_o,
                    "beta0": [complex(obj.beta0).real, complex(obj.beta0).imag],
                    "t_o_ps": obj.t_o_ps,
                    "interaction_length_m": obj.interaction_length_m,
                },
            },
            "detection": {
                "avg_bins": list(self.avg_bins),
                "offset_fraction": self.offset_fraction,
            },
            "ensemble": {"trajectories": self.trajectories, "seed": self.seed},
            "sweep": (
                {"parameter": self.sweep_parameter, "values": list(self.sweep_values)}
                if self.sweep_parameter
                else None
            ),
            "estimator": (
                {"background_trajectories": self.background_trajectories}
                if self.background_trajectories
                else None
            ),
        }

    def sha256(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()

    def with_overrides(self, **pairs) -> "Scenario":
        """New scenario with dotted-path overrides applied and revalidated."""
        d = self.to_dict()
        for dotted, value in pairs.items():
            node = d
            parts = dotted.split(".")
            # the object block nests under bench in the file layout
            if parts[0] == "object":
                parts = ["bench"] + parts
            for p in parts[:-1]:
                if node.get(p) is None:
                    node[p] = {}
                node = node[p]
            node[parts[-1]] = value
        return scenario_from_dict(d)


def _complex_value(raw, path: str) -> complex:
    if isinstance(raw, (int, float)):
        return complex(raw)
    if isinstance(raw, (list, tuple)) and len(raw) == 2:
        return complex(float(raw[0]), float(raw[1]))
    raise ConfigError(path, "expected a number or [re, im] pair")


def scenario_from_dict(doc: dict) -> Scenario:
    if not isinstance(doc, dict):
        raise ConfigError("$", "scenario document must be a mapping")
    version = _get(doc, "schema_version", "$", int, required=True)
    if version != SCHEMA_VERSION:
        raise ConfigError("schema_version", f"unsupported version {version}")

    g = _get(doc, "grid", "$", dict, default={})
    window = _get(g, "window_ps", "grid", float, default=512.0)
    dt = _get(g, "dt_ps", "grid", float, default=2.0)
    t0 = _get(g, "t0_ps", "grid", float, default=0.0)
    if dt <= 0:
        raise ConfigError("grid.dt_ps", "must be > 0")
    n_bins = window / dt
    if abs(n_bins - round(n_bins)) > 1e-9 or round(n_bins) < 1:
        raise ConfigError("grid.window_ps", "window must be a whole number of bins")
    grid = GridSpec(int(round(n_bins)), dt, t0)

    p = _get(doc, "pump", "$", dict, default={})
    profile = _get(p, "profile", "pump", str, default="gaussian")
    if profile not in ("gaussian", "flat"):
        raise ConfigError("pump.profile", f"unknown profile {profile!r}")
    pump = PumpSpec(
        profile=profile,
        peak_flux_per_ps=_get(p, "peak_flux_per_ps", "pump", float, default=4.0e8),
        fwhm_ps=_get(p, "fwhm_ps", "pump", float, default=40.0),
        center_ps=_get(p, "center_ps", "pump", float, default=None),
        phase=_get(p, "phase", "pump", float, default=0.0),
    )
    if pump.peak_flux_per_ps < 0:
        raise ConfigError("pump.peak_flux_per_ps", "must be >= 0")

    m = _get(doc, "material", "$", dict, default={})
    defaults = MaterialParams()
    try:
        material = MaterialParams(
            chi=_complex_value(m.get("chi", [defaults.chi.real if isinstance(defaults.chi, complex) else defaults.chi, 0.0]), "material.chi"),
            loss_per_m=_field_map(_get(m, "loss_per_m", "material", dict, default={}), "material.loss_per_m", defaults.loss_per_m),
            dvg_ps_per_m=_field_map(_get(m, "dvg_ps_per_m", "material", dict, default={}), "material.dvg_ps_per_m", defaults.dvg_ps_per_m),
            gvd_ps2_per_km=_field_map(_get(m, "gvd_ps2_per_km", "material", dict, default={}), "material.gvd_ps2_per_km", defaults.gvd_ps2_per_km),
            center_freq_THz=_field_map(_get(m, "center_freq_THz", "material", dict, default={}), "material.center_freq_THz", defaults.center_freq_THz),
        )
    except ValueError as exc:
        raise ConfigError("material", str(exc)) from exc

    s = _get(doc, "scales", "$", dict, default={})
    vg_scale = _get(s, "vg_scale", "scales", float, default=1.0)
    gvd_scale = _get(s, "gvd_scale", "scales", float, default=1.0)

    b = _get(doc, "bench", "$", dict, default={})
    o = _get(b, "object", "bench", dict, default={})
    try:
        obj = ObjectSpec(
            variant=_get(o, "variant", "bench.object", str, default="none"),
            dphi=_get(o, "dphi", "bench.object", float, default=0.0),
            r=_get(o, "r", "bench.object", float, default=0.0),
            eta=_complex_value(o.get("eta", 0.0), "bench.object.eta"),
            gamma_o=_get(o, "gamma_o", "bench.object", float, default=1.0),
            beta0=_complex_value(o.get("beta0", 0.0), "bench.object.beta0"),
            t_o_ps=_get(o, "t_o_ps", "bench.object", float, default=t0),
            interaction_length_m=_get(o, "interaction_length_m", "bench.object", float, default=1.0),
        )
        layout = BenchLayout(
            nl1_length_m=_get(b, "nl1_length_m", "bench", float, default=1.0),
            nl2_length_m=_get(b, "nl2_length_m", "bench", float, default=1.0),
            steps_per_stage=_get(b, "steps_per_stage", "bench", int, default=100),
            delta_tau_s_ps=_get(b, "delta_tau_s_ps", "bench", float, default=20.0),
            delta_tau_i_ps=_get(b, "delta_tau_i_ps", "bench", float, default=0.0),
            object=obj,
        )
    except ValueError as exc:
        raise ConfigError("bench", str(exc)) from exc

    d = _get(doc, "detection", "$", dict, default={})
    default_avg = [1, 32] if grid.n_bins >= 32 else [1]
    avg_bins = _get(d, "avg_bins", "detection", list, default=default_avg)
    for mm in avg_bins:
        if not isinstance(mm, int) or mm < 1:
            raise ConfigError("detection.avg_bins", "entries must be integers >= 1")
        if mm > grid.n_bins:
            raise ConfigError(
                "detection.avg_bins", f"window of {mm} bins exceeds the {grid.n_bins}-bin grid"
            )
    offset_fraction = _get(d, "offset_fraction", "detection", float, default=5e-4)
    if offset_fraction < 0:
        raise ConfigError("detection.offset_fraction", "must be >= 0")

    e = _get(doc, "ensemble", "$", dict, default={})
    trajectories = _get(e, "trajectories", "ensemble", int, default=4096)
    seed = _get(e, "seed", "ensemble", int, default=1)
    if trajectories < 1:
        raise ConfigError("ensemble.trajectories", "must be >= 1")

    sweep = doc.get("sweep")
    sweep_parameter = None
    sweep_values: tuple[float, ...] = ()
    if sweep:
        sweep_parameter = _get(sweep, "parameter", "sweep", str, required=True)
        raw_values = _get(sweep, "values", "sweep", list, required=True)
        if sweep_parameter not in SWEEPABLE:
            raise ConfigError(
                "sweep.parameter",
                f"{sweep_parameter!r} is not sweepable (allowed: {sorted(SWEEPABLE)})",
            )
        want_variant = _OBJECT_PARAM_VARIANTS.get(sweep_parameter)
        if want_variant and obj.variant != want_variant:
            raise ConfigError(
                "sweep.parameter",
                f"sweeping {sweep_parameter} requires bench.object.variant = {want_variant!r}",
            )
        try:
            sweep_values = tuple(float(v) for v in raw_values)
        except (TypeError, ValueError) as exc:
            raise ConfigError("sweep.values", "values must be numbers") from exc
        if not sweep_values:
            raise ConfigError("sweep.values", "sweep needs at least one value")

    est = doc.get("estimator")
    background_trajectories = None
    if est:
        background_trajectories = _get(
            est, "background_trajectories", "estimator", int, required=True
        )
        if background_trajectories < trajectories:
            raise ConfigError(
                "estimator.background_trajectories",
                "background ensemble must be at least as large as the reference",
            )

    scenario = Scenario(
        grid=grid,
        pump=pump,
        material=material,
        vg_scale=vg_scale,
        gvd_scale=gvd_scale,
        bench=layout,
        avg_bins=tuple(avg_bins),
        offset_fraction=offset_fraction,
        trajectories=trajectories,
        seed=seed,
        sweep_parameter=sweep_parameter,
        sweep_values=sweep_values,
        background_trajectories=background_trajectories,
    )
    # pump consistency with the grid (raises on unbuildable pulses)
    try:
        scenario.pump_grid()
    except ValueError as exc:
        raise ConfigError("pump", str(exc)) from exc
    return scenario


def load_scenario(path: str) -> Scenario:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            doc = yaml.safe_load(fh)
        except yaml.YAMLError as exc:
            raise ConfigError("$", f"invalid YAML: {exc}") from exc
    return scenario_from_dict(doc)
