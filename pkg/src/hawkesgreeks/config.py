"""Flat ``key = value`` run configuration.

Lines are ``key = value``; ``#`` starts a comment. Command-line flags
override the file, and every key has a default, so an empty file is valid.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from pathlib import Path

from .asset import ModelParams
from .convergence import DEFAULT_GRIDS
from .estimators import McConfig
from .hawkes import HawkesParams

OUTPUT_ENV = "HAWKESGREEKS_OUT"


class ConfigError(ValueError):
    pass


def _bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _grids(text: str) -> tuple[int, ...]:
    vals = tuple(int(v) for v in text.replace(",", " ").split())
    if not vals:
        raise ValueError("empty grid list")
    return vals


# key -> (section, field, parser)
KEYS = {
    "mu": ("model", "mu", float),
    "sigma": ("model", "sigma", float),
    "s0": ("model", "s0", float),
    "gamma": ("model", "gamma", float),
    "horizon": ("model", "horizon", float),
    "jump": ("model", "jump", str),
    "lambda0": ("hawkes", "lambda0", float),
    "alpha": ("hawkes", "alpha", float),
    "beta": ("hawkes", "beta", float),
    "paths": ("mc", "n_paths", int),
    "grid": ("mc", "grid_n", int),
    "seed": ("mc", "seed", int),
    "strike": ("mc", "strike", float),
    "kind": ("mc", "kind", str),
    "fd_bump": ("mc", "fd_bump", float),
    "discount": ("mc", "discount", _bool),
    "workers": ("mc", "workers", int),
    "pm_empty_branch": ("mc", "pm_empty_branch", str),
    "wm_jump_free_only": ("mc", "wm_jump_free_only", _bool),
    "grids": ("run", "grids", _grids),
    "output_dir": ("run", "output_dir", str),
}


@dataclass(frozen=True)
class RunConfig:
    model: ModelParams
    hawkes: HawkesParams
    mc: McConfig
    grids: tuple[int, ...] = DEFAULT_GRIDS
    output_dir: Path = Path(".")


def read_file(path: str | os.PathLike) -> dict[str, str]:
    """Raw key/value pairs from a config file."""
    out: dict[str, str] = {}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key = value, got {raw.strip()!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            raise ConfigError(f"{path}:{lineno}: missing key")
        out[key] = value
    return out


def parse_config(path: str | os.PathLike | None = None,
                 overrides: dict[str, str] | None = None) -> RunConfig:
    """Merge file values and overrides (overrides win) into a RunConfig."""
    raw = read_file(path) if path is not None else {}
    raw.update({k: v for k, v in (overrides or {}).items() if v is not None})
    unknown = sorted(set(raw) - set(KEYS))
    if unknown:
        raise ConfigError(f"unknown config key(s): {', '.join(unknown)}")

    sections: dict[str, dict] = {"model": {}, "hawkes": {}, "mc": {}, "run": {}}
    for key, value in raw.items():
        section, name, parse = KEYS[key]
        try:
            sections[section][name] = parse(str(value))
        except ValueError as exc:
            raise ConfigError(f"invalid value for {key}: {value!r} ({exc})") from None

    def build(cls, section):
        try:
            return cls(**sections[section])
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    run = sections["run"]
    default_out = os.environ.get(OUTPUT_ENV, ".")
    return RunConfig(
        model=build(ModelParams, "model"),
        hawkes=build(HawkesParams, "hawkes"),
        mc=build(McConfig, "mc"),
        grids=run.get("grids", DEFAULT_GRIDS),
        output_dir=Path(run.get("output_dir", default_out)),
    )


def config_keys() -> list[str]:
    return sorted(KEYS)

