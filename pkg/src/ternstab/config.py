"""Experiment configuration: flat ``section.key = value`` text.

Lines starting with ``#`` are comments. Values are plain text; list-valued
keys (the ``sweep.*`` grid) are comma separated. Example::

    algebra.k = 2
    perturbation.theta_prime = 0.01
    perturbation.p = 0.5
    stabilizer.mode = EXPAND
    sweep.p = 0.25, 0.5, 0.75
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields, replace
from itertools import product

from .maps import Mode


class ConfigError(ValueError):
    """Invalid configuration; ``field`` names the offending key."""

    def __init__(self, field_name: str, message: str):
        self.field = field_name
        super().__init__(f"{field_name}: {message}")


def _opt_float(text):
    return None if text.lower() in ("", "none") else float(text)


def _floats(text):
    return tuple(float(v) for v in text.split(",") if v.strip())


def _ints(text):
    return tuple(int(v) for v in text.split(",") if v.strip())


def _key(section: str, name: str, parse=float, **kw):
    return field(metadata={"key": f"{section}.{name}", "parse": parse}, **kw)


@dataclass(frozen=True)
class ExperimentConfig:
    k: int = _key("algebra", "k", int, default=2)
    norm_tolerance: float = _key("algebra", "norm_tolerance", default=1e-10)
    derivation_seed: int = _key("derivation", "seed", int, default=1)
    derivation_norm: float = _key("derivation", "norm", default=1.0)
    theta_prime: float = _key("perturbation", "theta_prime", default=0.01)
    p: float = _key("perturbation", "p", default=0.5)
    direction_seed: int = _key("perturbation", "direction_seed", int, default=2)
    theta: float | None = _key("control", "theta", _opt_float, default=None)
    theta_factor: float = _key("control", "theta_factor", default=4.0)
    arity: int = _key("control", "arity", int, default=6)
    mode: str = _key("stabilizer", "mode", str, default="AUTO")
    max_iterations: int = _key("stabilizer", "max_iterations", int, default=40)
    tolerance: float = _key("stabilizer", "tolerance", default=1e-9)
    ratio_cap: float = _key("stabilizer", "ratio_cap", default=1e12)
    probe_seed: int = _key("probes", "seed", int, default=0)
    element_count: int = _key("probes", "element_count", int, default=24)
    r_min: float = _key("probes", "r_min", default=0.1)
    r_max: float = _key("probes", "r_max", default=10.0)
    mu_count: int = _key("probes", "mu_count", int, default=8)
    triple_count: int = _key("probes", "triple_count", int, default=64)
    output_format: str = _key("outputs", "format", str, default="json")
    output_path: str = _key("outputs", "path", str, default="certificate.json")
    grid_p: tuple = _key("sweep", "p", _floats, default=())
    grid_theta_prime: tuple = _key("sweep", "theta_prime", _floats, default=())
    grid_k: tuple = _key("sweep", "k", _ints, default=())
    grid_seed: tuple = _key("sweep", "seed", _ints, default=())

    @classmethod
    def keys(cls) -> dict:
        return {f.metadata["key"]: f for f in fields(cls)}

    @classmethod
    def from_text(cls, text: str) -> "ExperimentConfig":
        known = cls.keys()
        values = {}
        for lineno, line in enumerate(text.splitlines(), 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ConfigError(f"line {lineno}", f"expected 'section.key = value', got {line!r}")
            key, _, raw = (s.strip() for s in line.partition("="))
            if key == "seed":
                values["seed"] = raw
                continue
            if key not in known:
                raise ConfigError(key, "unknown key")
            f = known[key]
            try:
                values[f.name] = f.metadata["parse"](raw)
            except ValueError as exc:
                raise ConfigError(key, f"cannot parse {raw!r} ({exc})") from None
        seed = values.pop("seed", None)
        cfg = cls(**values)
        if seed is not None:
            try:
                cfg = cfg.with_seed(int(seed))
            except ValueError:
                raise ConfigError("seed", f"cannot parse {seed!r}") from None
        return cfg

    @classmethod
    def from_file(cls, path) -> "ExperimentConfig":
        try:
            with open(path) as fh:
                text = fh.read()
        except OSError as exc:
            raise ConfigError("--config", f"cannot read {path}: {exc.strerror}") from None
        return cls.from_text(text)

    def with_seed(self, seed: int) -> "ExperimentConfig":
        """One master seed: derivation = seed, direction = seed + 1, probes = seed + 2."""
        return replace(self, derivation_seed=seed, direction_seed=seed + 1, probe_seed=seed + 2)

    def to_text(self) -> str:
        lines = []
        for f in fields(self):
            v = getattr(self, f.name)
            if isinstance(v, tuple):
                if not v:
                    continue
                v = ", ".join(repr(x) for x in v)
            elif v is None:
                continue
            elif isinstance(v, float):
                v = repr(v)
            lines.append(f"{f.metadata['key']} = {v}")
        return "\n".join(lines) + "\n"

    @property
    def resolved_mode(self) -> Mode:
        if self.mode.strip().upper() == "AUTO":
            return Mode.EXPAND if self.p < 1 else Mode.CONTRACT
        return Mode.parse(self.mode)

    @property
    def resolved_theta(self) -> float:
        if self.theta is not None:
            return self.theta
        return self.theta_factor * self.theta_prime

    def warnings(self) -> list:
        mode = self.resolved_mode
        if mode is Mode.EXPAND and not (0 < self.p < 1):
            return [f"perturbation.p = {self.p!r} is outside the corollary range (0, 1)"]
        if mode is Mode.CONTRACT and not self.p > 3:
            return [f"perturbation.p = {self.p!r} is outside the corollary range (3, inf)"]
        return []

    def validate(self) -> "ExperimentConfig":
        """Raise ``ConfigError`` naming the first invalid field."""
        keys = {f.name: f.metadata["key"] for f in fields(self)}
        for f in fields(self):
            v = getattr(self, f.name)
            vals = v if isinstance(v, tuple) else (v,)
            for x in vals:
                if isinstance(x, float) and not math.isfinite(x):
                    raise ConfigError(keys[f.name], f"must be finite, got {x!r}")

        def need(cond, name, msg):
            if not cond:
                raise ConfigError(keys[name], msg)

        need(self.k >= 1, "k", "matrix size must be at least 1")
        need(0 < self.norm_tolerance < 1, "norm_tolerance", "must lie in (0, 1)")
        need(self.derivation_norm > 0, "derivation_norm", "must be positive")
        need(self.theta_prime >= 0, "theta_prime", "must be nonnegative")
        need(self.arity in (4, 6), "arity", "must be 6 or 4")
        need(self.max_iterations >= 1, "max_iterations", "must be at least 1")
        need(self.tolerance > 0, "tolerance", "must be positive")
        need(self.ratio_cap > 0, "ratio_cap", "must be positive")
        need(self.element_count >= 1, "element_count", "probe set must not be empty")
        need(0 < self.r_min <= self.r_max, "r_min", "need 0 < probes.r_min <= probes.r_max")
        need(self.r_min <= 1, "r_min", "must be <= 1 so the bracket premise has unit-ball probes")
        need(self.mu_count >= 1, "mu_count", "must be at least 1")
        need(self.triple_count >= 1, "triple_count", "must be at least 1")
        need(self.output_format.lower() in ("csv", "json"), "output_format", "must be csv or json")
        try:
            mode = self.resolved_mode
        except ValueError as exc:
            raise ConfigError(keys["mode"], str(exc)) from None
        if mode is Mode.EXPAND:
            need(self.p < 1, "mode", f"EXPAND requires perturbation.p < 1, got p = {self.p!r}")
        else:
            need(self.p > 1, "mode", f"CONTRACT requires perturbation.p > 1, got p = {self.p!r}")
        if self.theta is not None:
            need(self.theta > 0, "theta", "must be positive")
        else:
            need(self.resolved_theta > 0, "theta_factor",
                 "control.theta_factor * perturbation.theta_prime must be positive; "
                 "set control.theta when theta_prime = 0")
        need(all(k >= 1 for k in self.grid_k), "grid_k", "matrix sizes must be at least 1")
        return self

    def grid(self) -> list:
        """Configs for every sweep point, in (p, theta_prime, k, seed) product order."""
        ps = self.grid_p or (self.p,)
        tps = self.grid_theta_prime or (self.theta_prime,)
        ks = self.grid_k or (self.k,)
        seeds = self.grid_seed or (None,)
        out = []
        for p, tp, k, seed in product(ps, tps, ks, seeds):
            cfg = replace(self, p=p, theta_prime=tp, k=k,
                          grid_p=(), grid_theta_prime=(), grid_k=(), grid_seed=())
            if seed is not None:
                cfg = cfg.with_seed(seed)
            out.append(cfg)
        return out
