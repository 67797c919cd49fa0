"""Shared JSON configuration: one file carries the spin system, the design
problem, optimizer options, and acquisition settings so that design and
verification can never drift apart.

Validation errors name the offending key by its full path (for example
``system.spins[1].offset_hz``).
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass

from .grape import (AscentOptions, EnsembleMember, GrapeProblem,
                    default_robust_ensemble)
from .spectro import AcquisitionSettings, Window
from .spins import (Channel, Coupling, ExpressionError, Spin, SpinSystem,
                    SpinSystemError, build_control_operators,
                    build_drift_hamiltonian, parse_operator_expression)


class ConfigError(ValueError):
    """Malformed configuration; message names the key path."""


def _fail(path: str, message: str):
    raise ConfigError(f"{path}: {message}")


def _get(d: dict, path: str, key: str, kind, required=True, default=None):
    here = f"{path}.{key}" if path else key
    if not isinstance(d, dict):
        _fail(path or key, f"expected an object, got {type(d).__name__}")
    if key not in d:
        if required:
            _fail(here, "missing required key")
        return default
    value = d[key]
    if kind is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            _fail(here, f"expected a number, got {value!r}")
        return float(value)
    if kind is int:
        if isinstance(value, bool) or not isinstance(value, int):
            _fail(here, f"expected an integer, got {value!r}")
        return value
    if kind is str:
        if not isinstance(value, str):
            _fail(here, f"expected a string, got {value!r}")
        return value
    if kind is list:
        if not isinstance(value, list):
            _fail(here, f"expected a list, got {value!r}")
        return value
    if kind is dict:
        if not isinstance(value, dict):
            _fail(here, f"expected an object, got {value!r}")
        return value
    raise AssertionError(kind)


def system_from_dict(d: dict, path: str = "system") -> SpinSystem:
    spins = []
    spin_list = _get(d, path, "spins", list)
    for i, item in enumerate(spin_list):
        p = f"{path}.spins[{i}]"
        if not isinstance(item, dict):
            _fail(p, "expected an object")
        spins.append(Spin(
            name=_get(item, p, "name", str),
            channel=_get(item, p, "channel", str),
            offset_hz=_get(item, p, "offset_hz", float),
            weight=_get(item, p, "weight", float, required=False, default=1.0),
            t1_s=_get(item, p, "t1_s", float, required=False),
            t2star_s=_get(item, p, "t2star_s", float, required=False),
        ))
    couplings = []
    for i, item in enumerate(_get(d, path, "couplings", list, required=False, default=[])):
        p = f"{path}.couplings[{i}]"
        if not isinstance(item, dict):
            _fail(p, "expected an object")
        couplings.append(Coupling(
            a=_get(item, p, "a", str),
            b=_get(item, p, "b", str),
            j_hz=_get(item, p, "j_hz", float),
        ))
    channels = []
    for i, item in enumerate(_get(d, path, "channels", list)):
        p = f"{path}.channels[{i}]"
        if not isinstance(item, dict):
            _fail(p, "expected an object")
        channels.append(Channel(
            name=_get(item, p, "name", str),
            max_rf_hz=_get(item, p, "max_rf_hz", float),
        ))
    try:
        return SpinSystem(spins=tuple(spins), couplings=tuple(couplings),
                          channels=tuple(channels))
    except SpinSystemError as e:
        raise ConfigError(f"{path}: {e}") from None


def ensemble_from_list(items: list, channels: tuple[str, ...],
                       path: str) -> tuple[EnsembleMember, ...]:
    members = []
    for i, item in enumerate(items):
        p = f"{path}[{i}]"
        if not isinstance(item, dict):
            _fail(p, "expected an object")
        scales = _get(item, p, "rf_scale", dict)
        for ch, s in scales.items():
            if ch not in channels:
                _fail(f"{p}.rf_scale", f"unknown channel {ch!r}")
            if isinstance(s, bool) or not isinstance(s, (int, float)):
                _fail(f"{p}.rf_scale.{ch}", f"expected a number, got {s!r}")
        members.append(EnsembleMember(
            rf_scale={ch: float(scales.get(ch, 1.0)) for ch in channels},
            weight=_get(item, p, "weight", float),
        ))
    return tuple(members)


def options_from_dict(d: dict | None, path: str = "options") -> AscentOptions:
    if d is None:
        return AscentOptions()
    kwargs = {}
    for key, kind in (("max_iters", int), ("target_fidelity", float),
                      ("initial_step", float), ("backtrack_factor", float),
                      ("min_step", float), ("growth_factor", float),
                      ("robust_max_iters", int)):
        value = _get(d, path, key, kind, required=False)
        if value is not None:
            kwargs[key] = value
    return AscentOptions(**kwargs)


def acquisition_from_dict(d: dict | None, path: str = "acquisition") -> AcquisitionSettings:
    if d is None:
        return AcquisitionSettings()
    kwargs = {}
    for key, kind in (("dwell_s", float), ("points", int), ("zero_fill", int),
                      ("readout_phase", float), ("linewidth_factor", float)):
        value = _get(d, path, key, kind, required=False)
        if value is not None:
            kwargs[key] = value
    return AcquisitionSettings(**kwargs)


def windows_from_list(items: list, path: str = "acquisition.windows") -> tuple[Window, ...]:
    windows = []
    for i, item in enumerate(items):
        p = f"{path}[{i}]"
        if not isinstance(item, dict):
            _fail(p, "expected an object")
        windows.append(Window(
            spin=_get(item, p, "spin", str),
            f_lo_hz=_get(item, p, "f_lo_hz", float),
            f_hi_hz=_get(item, p, "f_hi_hz", float),
        ))
    return tuple(windows)


@dataclass(frozen=True)
class JobConfig:
    """Everything a design or verification run needs, from one file."""

    system: SpinSystem
    problem: GrapeProblem
    options: AscentOptions
    acquisition: AcquisitionSettings
    windows: tuple[Window, ...] | None
    seeds: tuple[int, ...]


def config_from_dict(data: dict) -> JobConfig:
    if not isinstance(data, dict):
        raise ConfigError("config root: expected an object")
    system = system_from_dict(_get(data, "", "system", dict))
    prob_d = _get(data, "", "problem", dict)
    drift = build_drift_hamiltonian(system)
    controls = build_control_operators(system)
    channels = tuple(controls.keys())

    def state(key: str):
        text = _get(prob_d, "problem", key, str)
        try:
            op = parse_operator_expression(text, system)
        except ExpressionError as e:
            raise ConfigError(f"problem.{key}: {e}") from None
        if op.role != "state":
            raise ConfigError(f"problem.{key}: expression is not traceless")
        return op

    ensemble_items = _get(prob_d, "problem", "ensemble", list, required=False)
    ensemble = (ensemble_from_list(ensemble_items, channels, "problem.ensemble")
                if ensemble_items is not None else default_robust_ensemble(channels))
    max_rf = {ch.name: ch.max_rf_hz for ch in system.channels}
    try:
        problem = GrapeProblem(
            system=system,
            drift=drift,
            controls=controls,
            rho0=state("initial_state"),
            target=state("target_state"),
            duration_s=_get(prob_d, "problem", "duration_s", float),
            steps=_get(prob_d, "problem", "steps", int),
            max_rf_hz=max_rf,
            ensemble=ensemble,
        )
    except ValueError as e:
        if isinstance(e, ConfigError):
            raise
        raise ConfigError(f"problem: {e}") from None

    options = options_from_dict(_get(data, "", "options", dict, required=False))
    acq_d = _get(data, "", "acquisition", dict, required=False)
    acquisition = acquisition_from_dict(acq_d)
    windows = None
    if acq_d is not None:
        win_items = _get(acq_d, "acquisition", "windows", list, required=False)
        if win_items is not None:
            windows = windows_from_list(win_items)

    seeds_raw = _get(data, "", "seeds", list, required=False, default=[])
    seeds = []
    for i, s in enumerate(seeds_raw):
        if isinstance(s, bool) or not isinstance(s, int):
            _fail(f"seeds[{i}]", f"expected an integer, got {s!r}")
        seeds.append(s)
    return JobConfig(system=system, problem=problem, options=options,
                     acquisition=acquisition, windows=windows,
                     seeds=tuple(seeds))


def load_config(path: str | os.PathLike) -> JobConfig:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as e:
            raise ConfigError(f"{path}: invalid JSON: {e}") from None
    return config_from_dict(data)
