"""Run configuration: a strict, versioned JSON schema.

Unknown keys are rejected at every level.  Parse, serialize, parse is the
identity on the parsed object, and serialization is canonical (sorted keys,
two-space indent, trailing newline), so equal configs produce byte-equal
files.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

SCHEMA_VERSION = 1

_PRESETS = ("theorem1", "prop4", "custom")
_THETA_KINDS = ("zero", "scalar", "concave-minorant")


class ConfigError(ValueError):
    """Configuration file violates the schema."""


def _require(d: dict, key: str, where: str):
    if key not in d:
        raise ConfigError(f"missing key {key!r} in {where}")
    return d[key]


def _reject_unknown(d: dict, allowed, where: str):
    unknown = set(d) - set(allowed)
    if unknown:
        raise ConfigError(f"unknown keys in {where}: {sorted(unknown)}")


def _clean(d: dict) -> dict:
    return {k: v for k, v in d.items() if v is not None}


@dataclass(frozen=True)
class ThetaSpec:
    kind: str = "scalar"
    eta0: float = 0.0

    @classmethod
    def from_dict(cls, d: dict) -> "ThetaSpec":
        _reject_unknown(d, {"kind", "eta0"}, "params.theta")
        kind = d.get("kind", "scalar")
        if kind not in _THETA_KINDS:
            raise ConfigError(f"theta kind must be one of {_THETA_KINDS}, got {kind!r}")
        eta0 = float(d.get("eta0", 0.0))
        if kind == "zero" and eta0 != 0.0:
            raise ConfigError("theta kind 'zero' does not take eta0")
        if eta0 < 0.0:
            raise ConfigError("eta0 must be nonnegative")
        return cls(kind=kind, eta0=eta0)

    def to_dict(self) -> dict:
        d = {"kind": self.kind}
        if self.kind != "zero":
            d["eta0"] = self.eta0
        return d


@dataclass(frozen=True)
class InnerSpec:
    max_iters: int = 10_000
    tol: float | None = None

    @classmethod
    def from_dict(cls, d: dict) -> "InnerSpec":
        _reject_unknown(d, {"max_iters", "tol"}, "params.inner")
        max_iters = int(d.get("max_iters", 10_000))
        tol = d.get("tol")
        if tol is not None:
            tol = float(tol)
            if tol <= 0.0:
                raise ConfigError("inner.tol must be positive when given")
        if max_iters < 1:
            raise ConfigError("inner.max_iters must be positive")
        return cls(max_iters=max_iters, tol=tol)

    def to_dict(self) -> dict:
        return _clean({"max_iters": self.max_iters, "tol": self.tol})


@dataclass(frozen=True)
class ParamSpec:
    """Penalty and proximal weights, either a named preset or explicit values.

    theorem1 expands to sigma = T^(-1/4), alpha = T^(1/4); prop4 to
    sigma = T^(-1/2), alpha = T^(1/2); custom requires sigma and alpha.
    """

    preset: str = "theorem1"
    sigma: float | None = None
    alpha: float | None = None
    theta: ThetaSpec = field(default_factory=ThetaSpec)
    inner: InnerSpec = field(default_factory=InnerSpec)

    @classmethod
    def from_dict(cls, d: dict) -> "ParamSpec":
        _reject_unknown(d, {"preset", "sigma", "alpha", "theta", "inner"}, "params")
        preset = d.get("preset", "theorem1")
        if preset not in _PRESETS:
            raise ConfigError(f"preset must be one of {_PRESETS}, got {preset!r}")
        sigma, alpha = d.get("sigma"), d.get("alpha")
        if preset == "custom":
            if sigma is None or alpha is None:
                raise ConfigError("custom preset requires explicit sigma and alpha")
            sigma, alpha = float(sigma), float(alpha)
            if sigma <= 0.0 or alpha <= 0.0:
                raise ConfigError("sigma and alpha must be positive")
        elif sigma is not None or alpha is not None:
            raise ConfigError(f"preset {preset!r} fixes sigma and alpha; drop them or use custom")
        return cls(
            preset=preset, sigma=sigma, alpha=alpha,
            theta=ThetaSpec.from_dict(dict(d.get("theta", {}))),
            inner=InnerSpec.from_dict(dict(d.get("inner", {}))),
        )

    def to_dict(self) -> dict:
        return _clean({
            "preset": self.preset,
            "sigma": self.sigma,
            "alpha": self.alpha,
            "theta": self.theta.to_dict(),
            "inner": self.inner.to_dict(),
        })

    def resolve(self, T: int):
        if self.preset == "theorem1":
            return T ** -0.25, T ** 0.25
        if self.preset == "prop4":
            return T ** -0.5, T ** 0.5
        return self.sigma, self.alpha


def _freeze(v):
    if isinstance(v, dict):
        return tuple(sorted((k, _freeze(x)) for k, x in v.items()))
    if isinstance(v, (list, tuple)):
        return tuple(_freeze(x) for x in v)
    return v


def _thaw(v):
    if isinstance(v, tuple) and v and all(isinstance(x, tuple) and len(x) == 2 and isinstance(x[0], str) for x in v):
        return {k: _thaw(x) for k, x in v}
    if isinstance(v, tuple):
        return [_thaw(x) for x in v]
    return v


@dataclass(frozen=True)
class SectionSpec:
    """A dispatch id plus free-form parameters, validated by the factory."""

    id: str
    params: tuple = ()

    @classmethod
    def from_dict(cls, d: dict, where: str) -> "SectionSpec":
        _reject_unknown(d, {"id", "params"}, where)
        sid = _require(d, "id", where)
        if not isinstance(sid, str):
            raise ConfigError(f"{where}.id must be a string")
        return cls(id=sid, params=_freeze(dict(d.get("params", {}))))

    def to_dict(self) -> dict:
        d = {"id": self.id}
        params = _thaw(self.params)
        if params:
            d["params"] = params
        return d

    def params_dict(self) -> dict:
        out = _thaw(self.params)
        return out if isinstance(out, dict) else {}


@dataclass(frozen=True)
class RunConfig:
    """One benchmark run: problem instance, horizon, parameters, output path."""

    schema_version: int
    seed: int
    T: int
    set: tuple
    constraints: SectionSpec
    stream: SectionSpec
    params: ParamSpec
    x1: tuple | str = "center"
    output: str | None = None

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        _reject_unknown(d, {"schema_version", "seed", "T", "set", "constraints",
                            "stream", "params", "x1", "output"}, "config")
        version = _require(d, "schema_version", "config")
        if version != SCHEMA_VERSION:
            raise ConfigError(f"unsupported schema_version {version!r}, expected {SCHEMA_VERSION}")
        seed = _require(d, "seed", "config")
        if not isinstance(seed, int) or isinstance(seed, bool) or not 0 <= seed < 2**64:
            raise ConfigError("seed must be an unsigned 64-bit integer")
        T = _require(d, "T", "config")
        if not isinstance(T, int) or isinstance(T, bool) or T < 1:
            raise ConfigError("T must be a positive integer")
        set_spec = dict(_require(d, "set", "config"))
        if "kind" not in set_spec:
            raise ConfigError("set requires a 'kind'")
        x1 = d.get("x1", "center")
        if isinstance(x1, str):
            if x1 not in ("center", "slater"):
                raise ConfigError("x1 must be 'center', 'slater' or an explicit vector")
        else:
            x1 = tuple(float(v) for v in x1)
        output = d.get("output")
        if output is not None and not isinstance(output, str):
            raise ConfigError("output must be a path string")
        return cls(
            schema_version=SCHEMA_VERSION,
            seed=seed,
            T=T,
            set=_freeze(set_spec),
            constraints=SectionSpec.from_dict(dict(_require(d, "constraints", "config")),
                                              "constraints"),
            stream=SectionSpec.from_dict(dict(_require(d, "stream", "config")), "stream"),
            params=ParamSpec.from_dict(dict(_require(d, "params", "config"))),
            x1=x1,
            output=output,
        )

    def to_dict(self) -> dict:
        return _clean({
            "schema_version": self.schema_version,
            "seed": self.seed,
            "T": self.T,
            "set": _thaw(self.set),
            "constraints": self.constraints.to_dict(),
            "stream": self.stream.to_dict(),
            "params": self.params.to_dict(),
            "x1": list(self.x1) if isinstance(self.x1, tuple) else self.x1,
            "output": self.output,
        })

    def set_dict(self) -> dict:
        return _thaw(self.set)

    def with_overrides(self, seed: int | None = None, T: int | None = None,
                       output: str | None = None) -> "RunConfig":
        d = self.to_dict()
        if seed is not None:
            d["seed"] = seed
        if T is not None:
            d["T"] = T
        if output is not None:
            d["output"] = output
        return RunConfig.from_dict(d)


def dumps(cfg: RunConfig) -> str:
    return json.dumps(cfg.to_dict(), indent=2, sort_keys=True) + "\n"


def loads(text: str) -> RunConfig:
    try:
        d = json.loads(text)
    except json.JSONDecodeError as err:
        raise ConfigError(f"invalid JSON: {err}") from err
    if not isinstance(d, dict):
        raise ConfigError("config must be a JSON object")
    return RunConfig.from_dict(d)


def load(path) -> RunConfig:
    return loads(Path(path).read_text())


def save(cfg: RunConfig, path) -> None:
    Path(path).write_text(dumps(cfg))
