"""Run configuration: YAML in, validated :class:`RunConfig` out.

Every block is optional except ``potential`` and ``window``; unknown keys
are rejected.  ``configs/schema.json`` documents the same tree.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Any

import yaml

from .errors import ConfigError, PotentialBoundError, WindowError
from .lattice import ImpulseParams, LatticeWindow, PotentialSpec


@dataclass(frozen=True)
class Tolerances:
    identity_tol: float = 1e-10
    disk_tol: float = 1e-8
    eigen_tol: float = 1e-8


@dataclass(frozen=True)
class IvpBlock:
    n0: int = 1
    c0: complex = 1.0 + 0j
    c1: complex = 0j
    lam: complex = 0j


@dataclass(frozen=True)
class WeylBlock:
    samples: tuple[int, ...] = ()


@dataclass(frozen=True)
class GreenBlock:
    slices: tuple[int, ...] = (2,)
    random_f: int = 10
    seed: int = 0


@dataclass(frozen=True)
class SpectrumBlock:
    which: str = "A"
    disk_radius: float = 10.0
    ladder: tuple[int, ...] = ()
    tail_epsilon: float = 1e-6


@dataclass(frozen=True)
class VerifyBlock:
    seed: int = 0
    trials: int = 20


@dataclass(frozen=True)
class RunConfig:
    potential: PotentialSpec
    window: LatticeWindow
    delta: float = 0.0
    tolerances: Tolerances = field(default_factory=Tolerances)
    ivp: IvpBlock = field(default_factory=IvpBlock)
    weyl: WeylBlock = field(default_factory=WeylBlock)
    green: GreenBlock = field(default_factory=GreenBlock)
    spectrum: SpectrumBlock = field(default_factory=SpectrumBlock)
    verify: VerifyBlock = field(default_factory=VerifyBlock)

    @property
    def impulse(self) -> ImpulseParams:
        return ImpulseParams.standard(self.delta)


# scalar coercion -------------------------------------------------------------

def _real(value: Any, name: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{name} must be a real number, got {value!r}")
    x = float(value)
    if not math.isfinite(x):
        raise ConfigError(f"{name} must be finite, got {value!r}")
    return x


def _int(value: Any, name: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"{name} must be an integer, got {value!r}")
    return int(value)


def _positive(value: Any, name: str) -> float:
    x = _real(value, name)
    if x <= 0:
        raise ConfigError(f"{name} must be > 0, got {value!r}")
    return x


def parse_complex(value: Any, name: str = "value") -> complex:
    """Accept a real number or a string like ``1.5-2i`` / ``3i``."""
    if isinstance(value, bool):
        raise ConfigError(f"{name} must be a number, got {value!r}")
    if isinstance(value, (int, float)):
        return complex(_real(value, name))
    if isinstance(value, str):
        text = value.strip().replace(" ", "")
        try:
            z = complex(text.replace("i", "j"))
        except ValueError:
            z = None
        if z is not None and math.isfinite(z.real) and math.isfinite(z.imag):
            return z
    raise ConfigError(f"{name} must be a number or a complex string like '1+2i', got {value!r}")


def _int_list(value: Any, name: str) -> tuple[int, ...]:
    if not isinstance(value, list):
        raise ConfigError(f"{name} must be a list of integers")
    return tuple(_int(v, f"{name}[{i}]") for i, v in enumerate(value))


def _mapping(value: Any, name: str, allowed: set[str]) -> dict:
    if value is None:
        return {}
    if not isinstance(value, dict):
        raise ConfigError(f"{name} must be a mapping")
    unknown = sorted(str(k) for k in value if k not in allowed)
    if unknown:
        raise ConfigError(f"unknown key(s) in {name}: {', '.join(unknown)} (allowed: {', '.join(sorted(allowed))})")
    return value


# blocks ----------------------------------------------------------------------

def _potential(raw: Any) -> PotentialSpec:
    d = _mapping(raw, "potential", {"kind", "c", "m", "values"})
    kind = d.get("kind", "constant")
    if kind not in ("constant", "power", "explicit"):
        raise ConfigError(f"potential.kind must be one of constant, power, explicit; got {kind!r}")
    try:
        if kind == "explicit":
            vals = d.get("values")
            if not isinstance(vals, dict) or not vals:
                raise ConfigError("potential.values must map site indices to real numbers")
            table = {_int(k, "potential.values key"): _real(v, f"potential.values[{k}]") for k, v in vals.items()}
            c = _real(d["c"], "potential.c") if "c" in d else None
            if c is not None and c <= 0:
                raise ConfigError(f"potential.c must be > 0, got {c!r}")
            if c is None and min(table.values()) <= 0:
                raise ConfigError("potential.values must all be > 0 (q_n >= c > 0)")
            return PotentialSpec.explicit(table, c)
        if "values" in d:
            raise ConfigError("potential.values is only allowed with kind: explicit")
        if "c" not in d:
            raise ConfigError("potential.c is required")
        c = _real(d["c"], "potential.c")
        if c <= 0:
            raise ConfigError(f"potential.c must be > 0 (q_n >= c > 0), got {c!r}")
        if kind == "constant":
            if "m" in d:
                raise ConfigError("potential.m is only allowed with kind: power")
            return PotentialSpec.constant(c)
        m = _real(d.get("m", 1.0), "potential.m")
        if m < 0:
            raise ConfigError(f"potential.m must be >= 0, got {m!r}")
        return PotentialSpec.power(c, m)
    except (PotentialBoundError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"potential: {exc}") from None


def _window(raw: Any) -> LatticeWindow:
    d = _mapping(raw, "window", {"a", "b"})
    if "a" not in d or "b" not in d:
        raise ConfigError("window needs both a and b")
    a, b = _int(d["a"], "window.a"), _int(d["b"], "window.b")
    try:
        return LatticeWindow(a, b)
    except WindowError as exc:
        raise ConfigError(f"window: {exc}") from None


def _tolerances(raw: Any) -> Tolerances:
    d = _mapping(raw, "tolerances", {"identity_tol", "disk_tol", "eigen_tol"})
    return Tolerances(**{k: _positive(v, f"tolerances.{k}") for k, v in d.items()})


def _ivp(raw: Any, window: LatticeWindow) -> IvpBlock:
    d = _mapping(raw, "ivp", {"n0", "c0", "c1", "lambda"})
    block = IvpBlock(
        n0=_int(d.get("n0", 1), "ivp.n0"),
        c0=parse_complex(d.get("c0", 1.0), "ivp.c0"),
        c1=parse_complex(d.get("c1", 0.0), "ivp.c1"),
        lam=parse_complex(d.get("lambda", 0.0), "ivp.lambda"),
    )
    if not window.lo <= block.n0 < window.hi:
        raise ConfigError(f"ivp.n0 must lie in [{window.lo}, {window.hi - 1}], got {block.n0}")
    if block.c0 == 0 and block.c1 == 0:
        raise ConfigError("ivp.c0 and ivp.c1 cannot both be zero")
    return block


def _in_range(values: tuple[int, ...], lo: int, hi: int, name: str) -> None:
    for v in values:
        if not lo <= v <= hi:
            raise ConfigError(f"{name} entry {v} outside the window range [{lo}, {hi}]")


def _weyl(raw: Any, window: LatticeWindow) -> WeylBlock:
    d = _mapping(raw, "weyl", {"samples"})
    samples = _int_list(d.get("samples", []), "weyl.samples")
    _in_range(samples, window.lo, window.hi, "weyl.samples")
    return WeylBlock(samples)


def _green(raw: Any, window: LatticeWindow) -> GreenBlock:
    d = _mapping(raw, "green", {"slices", "random_f", "seed"})
    slices = _int_list(d.get("slices", [2]), "green.slices")
    for k in slices:
        if k not in window.z0_sites:
            raise ConfigError(f"green.slices entry {k} is not a site of the window")
    n = _int(d.get("random_f", 10), "green.random_f")
    if n < 0:
        raise ConfigError("green.random_f must be >= 0")
    return GreenBlock(slices, n, _int(d.get("seed", 0), "green.seed"))


def _spectrum(raw: Any) -> SpectrumBlock:
    d = _mapping(raw, "spectrum", {"which", "disk_radius", "ladder", "tail_epsilon"})
    which = d.get("which", "A")
    if which not in ("A", "L"):
        raise ConfigError(f"spectrum.which must be A or L, got {which!r}")
    ladder = _int_list(d.get("ladder", []), "spectrum.ladder")
    if any(n < 2 for n in ladder):
        raise ConfigError("spectrum.ladder sizes must be >= 2")
    if any(n1 <= n0 for n0, n1 in zip(ladder, ladder[1:])):
        raise ConfigError("spectrum.ladder must be strictly increasing")
    eps = _positive(d.get("tail_epsilon", 1e-6), "spectrum.tail_epsilon")
    if eps > 1:
        raise ConfigError("spectrum.tail_epsilon must be <= 1")
    return SpectrumBlock(which, _positive(d.get("disk_radius", 10.0), "spectrum.disk_radius"), ladder, eps)


def _verify(raw: Any) -> VerifyBlock:
    d = _mapping(raw, "verify", {"seed", "trials"})
    trials = _int(d.get("trials", 20), "verify.trials")
    if trials < 1:
        raise ConfigError("verify.trials must be >= 1")
    return VerifyBlock(_int(d.get("seed", 0), "verify.seed"), trials)


TOP_KEYS = {"delta", "potential", "window", "tolerances", "ivp", "weyl", "green", "spectrum", "verify"}


def config_from_tree(tree: Any) -> RunConfig:
    d = _mapping(tree, "config", TOP_KEYS)
    if "potential" not in d:
        raise ConfigError("missing required block: potential")
    if "window" not in d:
        raise ConfigError("missing required block: window")
    delta = _real(d.get("delta", 0.0), "delta")
    if not 0.0 <= delta < math.pi / 2:
        raise ConfigError(f"delta must lie in [0, pi/2), got {delta!r}")
    window = _window(d["window"])
    return RunConfig(
        potential=_potential(d["potential"]),
        window=window,
        delta=delta,
        tolerances=_tolerances(d.get("tolerances")),
        ivp=_ivp(d.get("ivp"), window),
        weyl=_weyl(d.get("weyl"), window),
        green=_green(d.get("green"), window),
        spectrum=_spectrum(d.get("spectrum")),
        verify=_verify(d.get("verify")),
    )


def parse_config(text: bytes | str) -> RunConfig:
    """Parse and validate a YAML config; errors carry line and column."""
    if isinstance(text, bytes):
        try:
            text = text.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise ConfigError(f"config is not valid UTF-8: {exc}") from None
    try:
        tree = yaml.safe_load(text)
    except yaml.MarkedYAMLError as exc:
        mark = exc.problem_mark or exc.context_mark
        where = f"line {mark.line + 1}, column {mark.column + 1}" if mark else "unknown position"
        raise ConfigError(f"config parse error at {where}: {exc.problem or exc}") from None
    except yaml.YAMLError as exc:
        raise ConfigError(f"config parse error: {exc}") from None
    if tree is None:
        raise ConfigError("config is empty")
    return config_from_tree(tree)


def load_config(path) -> tuple[RunConfig, bytes]:
    try:
        with open(path, "rb") as fh:
            raw = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_config(raw), raw


# serialization ---------------------------------------------------------------

def format_complex(z: complex) -> str:
    z = complex(z)
    sign = "-" if math.copysign(1.0, z.imag) < 0 else "+"
    return f"{z.real:.17g}{sign}{abs(z.imag):.17g}i"


def _plain(value):
    if isinstance(value, complex):
        return format_complex(value)
    if isinstance(value, tuple):
        return [_plain(v) for v in value]
    return value


def config_to_tree(cfg: RunConfig) -> dict:
    q = cfg.potential
    pot: dict[str, Any] = {"kind": q.kind, "c": q.c}
    if q.kind == "power":
        pot["m"] = q.m
    if q.kind == "explicit":
        pot["values"] = {int(k): float(v) for k, v in sorted(q.explicit_values.items())}
    ivp = {"n0": cfg.ivp.n0, "c0": format_complex(cfg.ivp.c0), "c1": format_complex(cfg.ivp.c1), "lambda": format_complex(cfg.ivp.lam)}
    return {
        "delta": cfg.delta,
        "potential": pot,
        "window": {"a": cfg.window.a, "b": cfg.window.b},
        "tolerances": asdict(cfg.tolerances),
        "ivp": ivp,
        "weyl": {k: _plain(v) for k, v in asdict(cfg.weyl).items()},
        "green": {k: _plain(v) for k, v in asdict(cfg.green).items()},
        "spectrum": {k: _plain(v) for k, v in asdict(cfg.spectrum).items()},
        "verify": asdict(cfg.verify),
    }


def dump_config(cfg: RunConfig) -> str:
    """Normalized YAML with every default spelled out."""
    return yaml.safe_dump(config_to_tree(cfg), sort_keys=True, default_flow_style=False)


__all__ = [
    "RunConfig",
    "Tolerances",
    "IvpBlock",
    "WeylBlock",
    "GreenBlock",
    "SpectrumBlock",
    "VerifyBlock",
    "parse_config",
    "load_config",
    "config_from_tree",
    "config_to_tree",
    "dump_config",
    "parse_complex",
    "format_complex",
]
