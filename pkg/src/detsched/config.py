"""Experiment configuration (one JSON file, every key overridable from the CLI)."""
from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field

from .coverage import SinrParams
from .errors import InvalidArgument
from .fairness import MAX_OPT_PAIRS, OptimizerSettings
from .geometry import BOUNDED, SINGULAR, PathLossModel

SCHEDULERS = ("fixed", "adaptive", "determinantal")


@dataclass(frozen=True)
class ExperimentConfig:
    seed: int = 1
    n_pairs: int = 5
    realizations: int = 100
    window: float = 1.0
    r_max: float = 0.1
    tau: float = 10.0
    beta: float = 4.0
    kappa: float = 1.0
    pathloss_kind: str = BOUNDED
    # noise power W; 0 is the interference-limited regime
    noise: float = 0.0
    fading_mean: float = 1.0
    sigma: float = 10.0
    R0: float = 1.0
    optimizer: OptimizerSettings = field(default_factory=OptimizerSettings)
    schedulers: tuple = SCHEDULERS
    output_dir: str = "results"
    # verify / sample
    verify_instances: int = 3
    mc_samples: int = 20_000
    enumerate: bool = True
    sample_count: int = 1000

    def __post_init__(self):
        def positive(name):
            if not getattr(self, name) > 0:
                raise InvalidArgument(f"{name} must be > 0")

        if not isinstance(self.n_pairs, int) or self.n_pairs < 1:
            raise InvalidArgument("n_pairs must be >= 1")
        if self.n_pairs > MAX_OPT_PAIRS:
            raise InvalidArgument(f"n_pairs must be <= {MAX_OPT_PAIRS}")
        if not isinstance(self.realizations, int) or self.realizations < 1:
            raise InvalidArgument("realizations must be >= 1")
        for name in ("window", "r_max", "tau", "beta", "fading_mean", "sigma", "R0"):
            positive(name)
        if self.pathloss_kind == SINGULAR:
            positive("kappa")
        elif self.pathloss_kind != BOUNDED:
            raise InvalidArgument(f"pathloss_kind must be {SINGULAR!r} or {BOUNDED!r}")
        if not self.noise >= 0:
            raise InvalidArgument("noise must be >= 0")
        scheds = tuple(self.schedulers)
        if not scheds or any(s not in SCHEDULERS for s in scheds):
            raise InvalidArgument(f"schedulers must be a nonempty subset of {SCHEDULERS}")
        object.__setattr__(self, "schedulers", scheds)
        if self.verify_instances < 1:
            raise InvalidArgument("verify_instances must be >= 1")
        if self.mc_samples != 0 and self.mc_samples < 100:
            raise InvalidArgument("mc_samples must be 0 (disabled) or >= 100")
        if self.sample_count < 0:
            raise InvalidArgument("sample_count must be >= 0")

    @property
    def pathloss(self) -> PathLossModel:
        if self.pathloss_kind == SINGULAR:
            return PathLossModel.singular(self.kappa, self.beta)
        return PathLossModel.bounded(self.beta)

    @property
    def sinr(self) -> SinrParams:
        return SinrParams(self.tau, self.noise, self.fading_mean)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["optimizer"]["w_bounds"] = list(self.optimizer.w_bounds)
        d["schedulers"] = list(self.schedulers)
        return d

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        d = dict(d)
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise InvalidArgument(f"unknown config keys: {sorted(unknown)}")
        if "optimizer" in d and not isinstance(d["optimizer"], OptimizerSettings):
            opt = dict(d["optimizer"])
            if "w_bounds" in opt:
                opt["w_bounds"] = tuple(opt["w_bounds"])
            try:
                d["optimizer"] = OptimizerSettings(**opt)
            except TypeError as exc:
                raise InvalidArgument(f"bad optimizer settings: {exc}") from exc
        if "schedulers" in d:
            d["schedulers"] = tuple(d["schedulers"])
        return cls(**d)

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        with open(path) as fh:
            try:
                return cls.from_dict(json.load(fh))
            except json.JSONDecodeError as exc:
                raise InvalidArgument(f"config {path} is not valid JSON: {exc}") from exc

    def replace(self, **overrides) -> "ExperimentConfig":
        return dataclasses.replace(self, **overrides)
