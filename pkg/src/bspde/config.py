"""Run configuration: flat ``dotted.key = <JSON literal>`` lines, ``#`` comments."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

from .drift_ops import OPERATOR_NAMES
from .function_space import TRIPLES
from .noise_terminal import TERMINAL_KINDS


class ConfigError(ValueError):
    pass


# dotted key -> RunConfig attribute
_KEYS = {
    "operator.name": "operator",
    "triple": "triple",
    "terminal.kind": "terminal_kind",
    "terminal.coeffs": "terminal_coeffs",
    "grid.T": "T",
    "grid.steps": "steps",
    "paths": "paths",
    "noise.d_u": "d_u",
    "galerkin.n": "galerkin_n",
    "taming.mode": "taming",
    "taming.m": "taming_m",
    "taming.n": "taming_n",
    "regression.degree": "regression_degree",
    "solver.picard_max": "picard_max",
    "solver.picard_tol": "picard_tol",
    "solver.ridge": "ridge",
    "seed": "seed",
    "output.dir": "output_dir",
    "check.samples": "check_samples",
    "check.modes": "check_modes",
}
_ATTR_TO_KEY = {v: k for k, v in _KEYS.items()}
OPERATOR_PARAM_PREFIX = "operator."


@dataclass
class RunConfig:
    operator: str = "heat"
    operator_params: dict = field(default_factory=dict)
    triple: str | None = None
    terminal_kind: str = "deterministic"
    terminal_coeffs: list = field(default_factory=lambda: [1.0, 0.5])
    T: float = 0.1
    steps: int = 64
    paths: int = 4096
    d_u: int = 2
    galerkin_n: int = 8
    taming: str = "none"  # none | auto | fixed
    taming_m: float | None = None
    taming_n: float | None = None
    regression_degree: int = 2
    picard_max: int = 50
    picard_tol: float = 1e-10
    ridge: float = 1e-10
    seed: int = 0
    output_dir: str = "bspde-out"
    check_samples: int = 10_000
    check_modes: int = 16

    def validate(self) -> "RunConfig":
        if self.operator not in OPERATOR_NAMES:
            raise ConfigError(f"unknown operator {self.operator!r}; known: {', '.join(OPERATOR_NAMES)}")
        if self.triple is not None and self.triple not in TRIPLES:
            raise ConfigError(f"unknown triple {self.triple!r}")
        if self.terminal_kind not in TERMINAL_KINDS:
            raise ConfigError(f"unknown terminal kind {self.terminal_kind!r}")
        if not isinstance(self.terminal_coeffs, list) or not all(
            isinstance(c, (int, float)) and math.isfinite(c) for c in self.terminal_coeffs
        ):
            raise ConfigError("terminal.coeffs must be a list of finite numbers")
        if len(self.terminal_coeffs) > self.galerkin_n:
            raise ConfigError("terminal.coeffs longer than galerkin.n")
        if self.terminal_kind != "deterministic" and len(self.terminal_coeffs) > self.d_u:
            raise ConfigError("random terminal uses more noise modes than noise.d_u")
        checks = [
            ("grid.T", self.T, lambda v: v > 0 and math.isfinite(v)),
            ("grid.steps", self.steps, lambda v: isinstance(v, int) and v >= 2),
            ("paths", self.paths, lambda v: isinstance(v, int) and v >= 1),
            ("noise.d_u", self.d_u, lambda v: isinstance(v, int) and v >= 1),
            ("galerkin.n", self.galerkin_n, lambda v: isinstance(v, int) and v >= 1),
            ("regression.degree", self.regression_degree, lambda v: isinstance(v, int) and 1 <= v <= 6),
            ("solver.picard_max", self.picard_max, lambda v: isinstance(v, int) and v >= 1),
            ("solver.picard_tol", self.picard_tol, lambda v: v > 0),
            ("solver.ridge", self.ridge, lambda v: v >= 0),
            ("seed", self.seed, lambda v: isinstance(v, int) and 0 <= v < 2**64),
            ("check.samples", self.check_samples, lambda v: isinstance(v, int) and v >= 1),
            ("check.modes", self.check_modes, lambda v: isinstance(v, int) and v >= 1),
        ]
        for key, val, ok in checks:
            if isinstance(val, bool) or not isinstance(val, (int, float)) or not ok(val):
                raise ConfigError(f"{key}={val!r} out of range")
        if self.taming not in ("none", "auto", "fixed"):
            raise ConfigError(f"taming.mode must be none, auto or fixed, got {self.taming!r}")
        if self.taming == "fixed":
            for key, val in (("taming.m", self.taming_m), ("taming.n", self.taming_n)):
                if not isinstance(val, (int, float)) or not (val > 0 and math.isfinite(val)):
                    raise ConfigError(f"{key} must be positive when taming.mode = fixed")
        return self

    def to_text(self) -> str:
        lines = []
        for f in fields(self):
            if f.name == "operator_params":
                continue
            val = getattr(self, f.name)
            lines.append(f"{_ATTR_TO_KEY[f.name]} = {json.dumps(val)}")
        for k in sorted(self.operator_params):
            lines.append(f"{OPERATOR_PARAM_PREFIX}{k} = {json.dumps(self.operator_params[k])}")
        return "\n".join(lines) + "\n"

    def echo(self) -> dict:
        out = {_ATTR_TO_KEY[k]: v for k, v in asdict(self).items() if k != "operator_params"}
        out.update({OPERATOR_PARAM_PREFIX + k: v for k, v in self.operator_params.items()})
        return out


def parse_config(text: str) -> RunConfig:
    values, params = {}, {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, _, val = line.partition("=")
        key, val = key.strip(), val.strip()
        try:
            parsed = json.loads(val)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"line {lineno}: value for {key!r} is not a JSON literal: {exc.msg}") from None
        if key in _KEYS:
            values[_KEYS[key]] = parsed
        elif key.startswith(OPERATOR_PARAM_PREFIX):
            params[key[len(OPERATOR_PARAM_PREFIX):]] = parsed
        else:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
    cfg = RunConfig(**values, operator_params=params)
    if isinstance(cfg.T, int) and not isinstance(cfg.T, bool):
        cfg.T = float(cfg.T)
    return cfg.validate()


def load_config(path: str | Path) -> RunConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_config(text)
