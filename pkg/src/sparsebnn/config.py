"""Run configuration: a versioned JSON schema with strict validation.

A config fully determines a run: data source, architecture, inference
method and its blocks, and the single seed every named RNG stream derives
from.  ``parse -> serialize -> parse`` is the identity on parsed configs.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

SCHEMA_VERSION = 1
METHODS = ("standard", "nsbl", "hier", "laplace", "laplace-nsbl")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class DataBlock:
    generate: dict | None = None     # {n, x_lo, x_hi, noise_var, seed}
    load: str | None = None

    def __post_init__(self):
        if (self.generate is None) == (self.load is None):
            raise ConfigError("data block needs exactly one of 'generate' or 'load'")
        if self.generate is not None:
            allowed = {"n", "x_lo", "x_hi", "noise_var", "seed"}
            unknown = set(self.generate) - allowed
            if unknown:
                raise ConfigError(f"unknown data.generate keys: {sorted(unknown)}")


@dataclass(frozen=True)
class NetworkBlock:
    layer_sizes: tuple = (1, 3, 1)
    activation: str = "tanh"

    def __post_init__(self):
        object.__setattr__(self, "layer_sizes", tuple(int(s) for s in self.layer_sizes))


@dataclass(frozen=True)
class PriorBlock:
    box_lo: float = -30.0
    box_hi: float = 30.0

    def __post_init__(self):
        if not self.box_lo < self.box_hi:
            raise ConfigError("prior box needs box_lo < box_hi")


@dataclass(frozen=True)
class TmcmcBlock:
    n_samples: int = 20000
    target_cov: float = 1.0
    proposal_scale: float = 0.2
    max_stages: int = 100
    n_mh_steps: int = 1


@dataclass(frozen=True)
class GmmBlock:
    k_min: int = 1
    k_max: int = 12
    n_restarts: int = 2

    def __post_init__(self):
        if not 1 <= self.k_min <= self.k_max:
            raise ConfigError("gmm needs 1 <= k_min <= k_max")


@dataclass(frozen=True)
class HyperpriorBlock:
    mode: str = "jeffreys"
    s: float = 0.0
    r: float = 0.0


@dataclass(frozen=True)
class NsblBlock:
    hyperprior: HyperpriorBlock = HyperpriorBlock()
    n_starts: int = 16
    log_alpha_lo: float = -12.0
    log_alpha_hi: float = 12.0
    ard: str = "all"                 # ARD on every parameter (hybrid via API)

    def __post_init__(self):
        if self.ard != "all":
            raise ConfigError("config-driven runs support ard='all' only")


@dataclass(frozen=True)
class HierBlock:
    gamma_shape: float = 1.0 + 4.5399929762484854e-05   # 1 + exp(-10)
    gamma_rate: float = 4.5399929762484854e-05          # exp(-10)
    log_alpha_lo: float = -10.0
    log_alpha_hi: float = 10.0


@dataclass(frozen=True)
class LaplaceBlock:
    start_combination: int = 5       # mode catalog entry used as the start
    max_iter: int = 2000

    def __post_init__(self):
        if not 1 <= self.start_combination <= 8:
            raise ConfigError("laplace.start_combination must be in 1..8")


@dataclass(frozen=True)
class PredictBlock:
    x_lo: float = -5.0
    x_hi: float = 5.0
    n_points: int = 201
    n_draws: int = 1000
    include_noise: bool = False
    levels: tuple = (0.5, 0.95)

    def __post_init__(self):
        object.__setattr__(self, "levels", tuple(float(l) for l in self.levels))


_REQUIRED_BLOCKS = {
    "standard": ("tmcmc",),
    "nsbl": ("tmcmc", "gmm", "nsbl"),
    "hier": ("tmcmc", "hier"),
    "laplace": ("laplace",),
    "laplace-nsbl": ("laplace", "nsbl"),
}

_BLOCK_TYPES = {
    "data": DataBlock, "network": NetworkBlock, "prior": PriorBlock,
    "tmcmc": TmcmcBlock, "gmm": GmmBlock, "nsbl": NsblBlock,
    "hier": HierBlock, "laplace": LaplaceBlock, "predict": PredictBlock,
}


@dataclass(frozen=True)
class RunConfig:
    method: str
    data: DataBlock
    seed: int = 0
    output_dir: str = "runs/out"
    network: NetworkBlock = NetworkBlock()
    prior: PriorBlock = PriorBlock()
    tmcmc: TmcmcBlock | None = None
    gmm: GmmBlock | None = None
    nsbl: NsblBlock | None = None
    hier: HierBlock | None = None
    laplace: LaplaceBlock | None = None
    predict: PredictBlock = PredictBlock()

    def __post_init__(self):
        if self.method not in METHODS:
            raise ConfigError(f"unknown method {self.method!r}; "
                              f"choose from {METHODS}")
        for block in _REQUIRED_BLOCKS[self.method]:
            if getattr(self, block) is None:
                raise ConfigError(f"method {self.method!r} requires a "
                                  f"'{block}' block")


def _build(cls, value, where):
    if value is None:
        return None
    if not isinstance(value, dict):
        raise ConfigError(f"{where} must be an object")
    if cls is NsblBlock and "hyperprior" in value:
        value = dict(value)
        value["hyperprior"] = HyperpriorBlock(**value["hyperprior"])
    try:
        return cls(**value)
    except TypeError as exc:
        raise ConfigError(f"invalid {where} block: {exc}") from None


def parse_config(raw: dict) -> RunConfig:
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    raw = dict(raw)
    version = raw.pop("schema_version", None)
    if version != SCHEMA_VERSION:
        raise ConfigError(f"schema_version must be {SCHEMA_VERSION}, got {version!r}")
    known = {"method", "seed", "output_dir"} | set(_BLOCK_TYPES)
    unknown = set(raw) - known
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    if "method" not in raw or "data" not in raw:
        raise ConfigError("config requires 'method' and 'data'")
    kwargs = {"method": raw["method"], "seed": int(raw.get("seed", 0)),
              "output_dir": str(raw.get("output_dir", "runs/out"))}
    # method blocks must be present (an empty object selects the defaults);
    # only the always-used blocks default in silently
    for name, cls in _BLOCK_TYPES.items():
        if name in raw:
            kwargs[name] = _build(cls, raw[name], name)
        elif name in ("network", "prior", "predict"):
            kwargs[name] = cls()
    return RunConfig(**kwargs)


def serialize_config(cfg: RunConfig) -> dict:
    out = {"schema_version": SCHEMA_VERSION, "method": cfg.method,
           "seed": cfg.seed, "output_dir": cfg.output_dir}
    for name in _BLOCK_TYPES:
        block = getattr(cfg, name)
        if block is not None:
            d = asdict(block)
            if name == "network":
                d["layer_sizes"] = list(d["layer_sizes"])
            if name == "predict":
                d["levels"] = list(d["levels"])
            out[name] = d
    return out


def load_config(path: str | Path) -> RunConfig:
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from None
    return parse_config(raw)


def save_config(cfg: RunConfig, path: str | Path) -> None:
    with open(path, "w") as fh:
        json.dump(serialize_config(cfg), fh, indent=2, sort_keys=True)
        fh.write("\n")


def config_hash(cfg: RunConfig) -> str:
    canon = json.dumps(serialize_config(cfg), sort_keys=True,
                       separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()
