"""
TOML experiment configuration.

Layout::

    [experiment]            # channel, snr_db, taps, delay, projection_order,
                            # n_train, n_dd, train_order, dd_order,
                            # realizations, seed
    [defaults]              # eps, beta: applied to every algorithm entry
    [[algorithm]]           # name, variant, L, mu, mu_max, eps, beta, alpha, psi
    [ser]                   # snr_db = [...], dd_orders = [...]
    [scatter]               # algorithm, start, stop
    [output]                # svg = true/false

``psi`` is a positive number (fixed), ``"snr"`` (L / SNR) or ``"adaptive"``.
Channel taps are real numbers or ``[re, im]`` pairs. Every section and key is
optional; unknown keys are rejected.
"""

from __future__ import annotations

import json
import sys
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Optional

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .adaptive_filters import AlgorithmSpec, PsiMode
from .equalizer import ExperimentConfig
from .errors import ConfigurationError, VssprError

PRESETS = ("paper-fig3", "paper-fig4a", "paper-fig4b", "paper-fig6")

DEFAULT_EPS = 1e-4
DEFAULT_BETA = 0.99

_EXPERIMENT_KEYS = {
    "channel": "channel",
    "snr_db": "snr_db",
    "taps": "M",
    "delay": "delta",
    "projection_order": "L",
    "n_train": "n_train",
    "n_dd": "n_dd",
    "train_order": "train_order",
    "dd_order": "dd_order",
    "realizations": "realizations",
    "seed": "base_seed",
}
_ALGORITHM_KEYS = {"name", "variant", "L", "mu", "mu_max", "eps", "beta", "alpha", "psi"}
_SECTIONS = {"experiment", "defaults", "algorithm", "ser", "scatter", "output"}

DEFAULT_ALGORITHMS = (
    {"name": "NLMS", "variant": "NLMS", "mu": 0.4},
    {"name": "PRA", "variant": "PRA", "L": 4, "mu": 0.4, "alpha": 1},
    {"name": "APA", "variant": "R-APA", "L": 4, "mu": 0.06},
    {"name": "VSSPR", "variant": "VSSPR", "L": 4, "mu_max": 1.7, "alpha": 1, "psi": "adaptive"},
)
DEFAULT_SER_SNR = tuple(float(s) for s in range(10, 31, 2))


@dataclass(frozen=True)
class RunConfig:
    """Parsed configuration plus the normalized dictionary it came from."""

    experiment: ExperimentConfig
    ser_snr_db: tuple = DEFAULT_SER_SNR
    ser_dd_orders: tuple = (256,)
    scatter_algorithm: str = "VSSPR"
    scatter_start: Optional[int] = None
    scatter_stop: Optional[int] = None
    svg: bool = False
    normalized: dict = field(default_factory=dict, compare=False)


def _check_keys(table, allowed, where):
    if not isinstance(table, dict):
        raise ConfigurationError(f"{where}: expected a table")
    for key in table:
        if key not in allowed:
            raise ConfigurationError(f"{where}.{key}: unknown key")


def _channel(value):
    if not isinstance(value, list) or not value:
        raise ConfigurationError("experiment.channel: expected a nonempty list of taps")
    taps = []
    for i, tap in enumerate(value):
        if isinstance(tap, (int, float)) and not isinstance(tap, bool):
            taps.append(complex(float(tap), 0.0))
        elif isinstance(tap, list) and len(tap) == 2:
            taps.append(complex(float(tap[0]), float(tap[1])))
        else:
            raise ConfigurationError(f"experiment.channel[{i}]: expected a number or [re, im]")
    return tuple(taps)


def _psi(value, where):
    if isinstance(value, str):
        if value == "snr":
            return PsiMode.from_snr()
        if value == "adaptive":
            return PsiMode.adaptive()
        raise ConfigurationError(f"{where}.psi: expected a number, 'snr' or 'adaptive'")
    try:
        return PsiMode.fixed(float(value))
    except (TypeError, VssprError) as exc:
        raise ConfigurationError(f"{where}.psi: {exc}") from None


def _algorithm(entry, defaults, index, default_L):
    where = f"algorithm[{index}]"
    _check_keys(entry, _ALGORITHM_KEYS, where)
    if "variant" not in entry:
        raise ConfigurationError(f"{where}.variant: required")
    kwargs = {
        "variant": entry["variant"],
        "eps": float(entry.get("eps", defaults.get("eps", DEFAULT_EPS))),
        "beta": float(entry.get("beta", defaults.get("beta", DEFAULT_BETA))),
        "L": int(entry.get("L", default_L)),
        "alpha": int(entry.get("alpha", 1)),
        "name": entry.get("name"),
    }
    for key in ("mu", "mu_max"):
        if key in entry:
            kwargs[key] = float(entry[key])
    if "psi" in entry:
        kwargs["psi_mode"] = _psi(entry["psi"], where)
    try:
        return AlgorithmSpec(**kwargs)
    except VssprError as exc:
        bad = next((k for k in ("mu_max", "mu", "beta", "eps", "L", "alpha", "variant") if k in str(exc)), "")
        raise ConfigurationError(f"{where}.{bad}: {exc}" if bad else f"{where}: {exc}") from None


def _psi_to_plain(mode: PsiMode):
    return mode.value if mode.kind == "fixed" else mode.kind


def config_from_dict(raw: dict) -> RunConfig:
    """Validate a configuration mapping and apply defaults."""
    _check_keys(raw, _SECTIONS, "config")
    exp = raw.get("experiment", {})
    _check_keys(exp, _EXPERIMENT_KEYS, "experiment")
    defaults = raw.get("defaults", {})
    _check_keys(defaults, {"eps", "beta"}, "defaults")

    kwargs = {}
    for key, attr in _EXPERIMENT_KEYS.items():
        if key not in exp:
            continue
        value = exp[key]
        if key == "channel":
            value = _channel(value)
        elif key == "snr_db":
            value = float(value)
        else:
            if isinstance(value, bool) or not isinstance(value, int):
                raise ConfigurationError(f"experiment.{key}: expected an integer")
        kwargs[attr] = value
    default_L = kwargs.get("L", 4)
    entries = raw.get("algorithm", list(DEFAULT_ALGORITHMS))
    if not isinstance(entries, list) or not entries:
        raise ConfigurationError("algorithm: expected at least one [[algorithm]] entry")
    specs = tuple(_algorithm(e, defaults, i, default_L) for i, e in enumerate(entries))
    labels = [s.label for s in specs]
    if len(set(labels)) != len(labels):
        raise ConfigurationError(f"algorithm: duplicate names {labels}")
    kwargs["algorithms"] = specs
    try:
        experiment = ExperimentConfig(**kwargs)
    except VssprError as exc:
        raise ConfigurationError(f"experiment: {exc}") from None

    ser = raw.get("ser", {})
    _check_keys(ser, {"snr_db", "dd_orders"}, "ser")
    scatter = raw.get("scatter", {})
    _check_keys(scatter, {"algorithm", "start", "stop"}, "scatter")
    output = raw.get("output", {})
    _check_keys(output, {"svg"}, "output")

    snr = tuple(float(s) for s in ser.get("snr_db", DEFAULT_SER_SNR))
    if not snr:
        raise ConfigurationError("ser.snr_db: need at least one SNR point")
    orders = tuple(int(o) for o in ser.get("dd_orders", [experiment.dd_order]))
    for o in orders:
        if o not in (4, 16, 256):
            raise ConfigurationError(f"ser.dd_orders: unsupported order {o}")
    scatter_alg = scatter.get("algorithm", labels[-1])
    if scatter_alg not in labels:
        raise ConfigurationError(f"scatter.algorithm: {scatter_alg!r} is not one of {labels}")
    start = scatter.get("start")
    stop = scatter.get("stop")

    normalized = {
        "experiment": {
            "channel": [[t.real, t.imag] for t in experiment.channel],
            "snr_db": experiment.snr_db,
            "taps": experiment.M,
            "delay": experiment.delta,
            "projection_order": experiment.L,
            "n_train": experiment.n_train,
            "n_dd": experiment.n_dd,
            "train_order": experiment.train_order,
            "dd_order": experiment.dd_order,
            "realizations": experiment.realizations,
            "seed": experiment.base_seed,
        },
        "algorithm": [
            {
                "name": s.label,
                "variant": s.variant.value,
                "L": s.L,
                "mu": s.mu,
                "mu_max": s.mu_max,
                "eps": s.eps,
                "beta": s.beta,
                "alpha": s.alpha,
                "psi": _psi_to_plain(s.psi_mode),
            }
            for s in specs
        ],
        "ser": {"snr_db": list(snr), "dd_orders": list(orders)},
        "scatter": {"algorithm": scatter_alg, **({"start": start} if start is not None else {}),
                    **({"stop": stop} if stop is not None else {})},
        "output": {"svg": bool(output.get("svg", False))},
    }
    return RunConfig(
        experiment=experiment,
        ser_snr_db=snr,
        ser_dd_orders=orders,
        scatter_algorithm=scatter_alg,
        scatter_start=None if start is None else int(start),
        scatter_stop=None if stop is None else int(stop),
        svg=bool(output.get("svg", False)),
        normalized=normalized,
    )


def load_preset_text(name: str) -> str:
    if name not in PRESETS:
        raise ConfigurationError(f"unknown preset {name!r}; choose from {PRESETS}")
    return resources.files("vsspr.presets").joinpath(f"{name}.toml").read_text()


def parse_config(path=None, preset: Optional[str] = None, text: Optional[str] = None) -> RunConfig:
    """Load a configuration from a TOML file, a run manifest, a preset or a string.

    A ``.json`` path is read as a manifest and its recorded configuration is
    replayed.
    """
    if preset is not None:
        text = load_preset_text(preset)
    elif path is not None:
        path = Path(path)
        try:
            text = path.read_text()
        except OSError as exc:
            raise ConfigurationError(f"cannot read config {path}: {exc.strerror}") from None
        if path.suffix == ".json":
            try:
                manifest = json.loads(text)
            except json.JSONDecodeError as exc:
                raise ConfigurationError(f"{path}: invalid manifest: {exc}") from None
            if "config" not in manifest:
                raise ConfigurationError(f"{path}: manifest has no 'config' section")
            return config_from_dict(manifest["config"])
    elif text is None:
        text = ""
    try:
        raw = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigurationError(f"invalid TOML: {exc}") from None
    return config_from_dict(raw)
