"""Run configuration: flat ``section.key = value`` text files.

Lines are ``key = value``; ``#`` starts a comment; lists are comma separated.
Recognised sections and keys (defaults in brackets):

    domain.d [1]  domain.n [128]  domain.L [2 pi]  domain.M [64]
    physics.g [1]  physics.kappa [0]  physics.depth [1]  physics.bottom_file []
    physics.h0 [0.1]  physics.backend [exact]
    initial.preset [single_mode]  (equilibrium | single_mode | gaussian_bump | from_file)
    initial.k [1]  initial.amplitude [1e-4]  initial.width [0.5]
    initial.zeta_file []  initial.psi_file []
    integrator.dt [auto]  integrator.T [1]  integrator.stride [10]  integrator.c_cfl [0.5]
    shape.amplitude [0.1]  shape.bottom_amplitude [0]  shape.random [false]
    dispersion.k [1,2,3]  dispersion.kappa [0,0.1]  dispersion.amplitude [1e-4]
    dispersion.periods [2.5]
    limit.kappa0 [1e-2]  limit.amplitude [1e-3]  limit.T [2]
    orders.frequencies [2,4,8,16]
    linear.amplitude [0.02]  linear.T [2]  linear.dt [auto]
    taylor.amplitude [0.02]  taylor.kappa [0]
"""
from __future__ import annotations

import math
import os
from dataclasses import dataclass, field


class ConfigError(ValueError):
    """Malformed or out-of-range configuration."""


_SCHEMA: dict[str, dict[str, str]] = {
    "domain": {"d": "1", "n": "128", "L": repr(2 * math.pi), "M": "64"},
    "physics": {"g": "1", "kappa": "0", "depth": "1", "bottom_file": "", "h0": "0.1",
                "backend": "exact"},
    "initial": {"preset": "single_mode", "k": "1", "amplitude": "1e-4", "width": "0.5",
                "zeta_file": "", "psi_file": ""},
    "integrator": {"dt": "auto", "T": "1", "stride": "10", "c_cfl": "0.5"},
    "shape": {"amplitude": "0.1", "bottom_amplitude": "0", "random": "false"},
    "dispersion": {"k": "1,2,3", "kappa": "0,0.1", "amplitude": "1e-4", "periods": "2.5"},
    "limit": {"kappa0": "1e-2", "amplitude": "1e-3", "T": "2"},
    "orders": {"frequencies": "2,4,8,16"},
    "linear": {"amplitude": "0.02", "T": "2", "dt": "auto"},
    "taylor": {"amplitude": "0.02", "kappa": "0"},
}

PRESETS = ("equilibrium", "single_mode", "gaussian_bump", "from_file")


def parse_text(text: str) -> dict[str, dict[str, str]]:
    """Raw ``{section: {key: value}}`` from config text; unknown keys are rejected."""
    out: dict[str, dict[str, str]] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'section.key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        if "." not in key:
            raise ConfigError(f"line {lineno}: key {key!r} has no section")
        section, name = key.split(".", 1)
        if section not in _SCHEMA or name not in _SCHEMA[section]:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if name in out.get(section, {}):
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        out.setdefault(section, {})[name] = value
    return out


def _fft_friendly(n: int) -> bool:
    for p in (2, 3, 5):
        while n % p == 0:
            n //= p
    return n == 1


@dataclass
class RunConfig:
    raw: dict[str, dict[str, str]] = field(default_factory=dict)
    base_dir: str = "."

    def __post_init__(self):
        self.validate()

    @classmethod
    def from_text(cls, text: str, base_dir: str = ".") -> RunConfig:
        return cls(parse_text(text), base_dir)

    @classmethod
    def from_file(cls, path: str) -> RunConfig:
        try:
            with open(path, encoding="utf-8") as fh:
                text = fh.read()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        return cls.from_text(text, os.path.dirname(os.path.abspath(path)))

    # -- typed access ---------------------------------------------------------
    def get(self, key: str) -> str:
        section, name = key.split(".", 1)
        return self.raw.get(section, {}).get(name, _SCHEMA[section][name])

    def is_set(self, key: str) -> bool:
        section, name = key.split(".", 1)
        return name in self.raw.get(section, {})

    def _convert(self, key: str, kind):
        value = self.get(key)
        try:
            return kind(value)
        except ValueError as exc:
            raise ConfigError(f"{key} = {value!r}: {exc}") from exc

    def int(self, key: str) -> int:
        return self._convert(key, int)

    def float(self, key: str) -> float:
        return self._convert(key, float)

    def bool(self, key: str) -> bool:
        value = self.get(key).lower()
        if value in ("true", "yes", "1"):
            return True
        if value in ("false", "no", "0"):
            return False
        raise ConfigError(f"{key} = {value!r} is not a boolean")

    def floats(self, key: str) -> list[float]:
        return [self._convert_item(key, s, float) for s in self.get(key).split(",") if s.strip()]

    def ints(self, key: str) -> list[int]:
        return [self._convert_item(key, s, int) for s in self.get(key).split(",") if s.strip()]

    def _convert_item(self, key, s, kind):
        try:
            return kind(s.strip())
        except ValueError as exc:
            raise ConfigError(f"{key}: bad list entry {s!r}") from exc

    def path(self, key: str) -> str:
        value = self.get(key)
        return value if os.path.isabs(value) else os.path.join(self.base_dir, value)

    def dt(self, key: str = "integrator.dt") -> float | None:
        return None if self.get(key) == "auto" else self.float(key)

    def as_dict(self) -> dict[str, dict[str, str]]:
        """Every key with its effective value (config echo for manifests)."""
        return {s: {k: self.get(f"{s}.{k}") for k in keys} for s, keys in _SCHEMA.items()}

    # -- validation ------------------------------------------------------------
    def validate(self):
        d, n, M = self.int("domain.d"), self.int("domain.n"), self.int("domain.M")
        if d not in (1, 2):
            raise ConfigError("domain.d must be 1 or 2")
        if n < 8 or n % 2 or not _fft_friendly(n):
            raise ConfigError("domain.n must be even, >= 8 and a product of 2, 3 and 5")
        if M < 8:
            raise ConfigError("domain.M must be >= 8")
        if not self.float("domain.L") > 0:
            raise ConfigError("domain.L must be positive")
        if not self.float("physics.g") > 0:
            raise ConfigError("physics.g must be positive")
        if self.float("physics.kappa") < 0:
            raise ConfigError("physics.kappa must be non-negative")
        if not self.float("physics.depth") > 0:
            raise ConfigError("physics.depth must be positive")
        if not self.float("physics.h0") > 0:
            raise ConfigError("physics.h0 must be positive")
        if self.get("physics.backend") not in ("exact", "symbol"):
            raise ConfigError("physics.backend must be 'exact' or 'symbol'")
        if self.get("initial.preset") not in PRESETS:
            raise ConfigError(f"initial.preset must be one of {', '.join(PRESETS)}")
        for key in ("physics.bottom_file", "initial.zeta_file", "initial.psi_file"):
            if self.get(key) and not os.path.isfile(self.path(key)):
                raise ConfigError(f"{key}: file {self.path(key)} does not exist")
        if self.get("initial.preset") == "from_file" and not self.get("initial.zeta_file"):
            raise ConfigError("initial.preset = from_file needs initial.zeta_file")
        if self.int("initial.k") < 1:
            raise ConfigError("initial.k must be a positive integer")
        if not self.float("initial.width") > 0:
            raise ConfigError("initial.width must be positive")
        dt = self.dt()
        if dt is not None and not dt > 0:
            raise ConfigError("integrator.dt must be positive or 'auto'")
        if not self.float("integrator.T") > 0:
            raise ConfigError("integrator.T must be positive")
        if self.int("integrator.stride") < 1:
            raise ConfigError("integrator.stride must be >= 1")
        if not 0 < self.float("integrator.c_cfl") <= 1:
            raise ConfigError("integrator.c_cfl must lie in (0, 1]")
        ks = self.ints("dispersion.k")
        if not ks or min(ks) < 1:
            raise ConfigError("dispersion.k must list positive wavenumbers (k = 0 is not a wave)")
        if max(ks) > n // 3:
            raise ConfigError("dispersion.k exceeds the dealiased range n/3")
        if any(k < 0 for k in self.floats("dispersion.kappa")):
            raise ConfigError("dispersion.kappa entries must be non-negative")
        if not self.float("dispersion.periods") >= 2:
            raise ConfigError("dispersion.periods must be >= 2 (4 zero crossings)")
        if self.float("limit.kappa0") < 0:
            raise ConfigError("limit.kappa0 must be non-negative")
        freqs = self.floats("orders.frequencies")
        if len(freqs) < 2 or min(freqs) <= 0:
            raise ConfigError("orders.frequencies needs at least two positive entries")
