"""Run configuration: defaults, file parsing, validation, provenance.

The config file is a flat YAML mapping whose keys mirror RunConfig fields
(`lambda` maps to the arrival rate). Unknown keys are rejected so typos
fail loudly. `soc_range`, `user_type_mix` and `profile` are the only
non-scalar values.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field, replace
from typing import Optional

import yaml

from .agents import ChargingProfile, SamplingSettings
from .station import ScenarioKind


class ConfigError(ValueError):
    """Invalid configuration; `field` names the offending key."""

    def __init__(self, field_name: str, message: str):
        super().__init__(f"{field_name}: {message}")
        self.field = field_name


# Arrival-rate presets: rush hours vs low-demand hours.
PRESET_RATES = {"rush": 0.6, "low": 0.1}


@dataclass(frozen=True)
class RunConfig:
    scenario: ScenarioKind = ScenarioKind.INFORMED_FC
    lam: float = 0.1                     # arrivals per minute ("lambda" in files)
    horizon: float = 1019.0              # minutes per replication
    rounds: int = 1000
    seed: int = 12345
    queue_capacity: int = 5              # waiting slots
    impatience_factor: float = 0.6
    soc_range: tuple = (5.0, 60.0)       # arrival SoC drawn uniformly from here
    user_type_mix: tuple = (1 / 3, 1 / 3, 1 / 3)   # pessimist, standard, optimist
    target_soc_policy: str = "fraction-80"         # "all-100" or "fraction-80"
    fraction_80: float = 0.85            # share stopping at the knee under fraction-80
    profile: ChargingProfile = field(default_factory=ChargingProfile)
    wq_estimator: str = "cumulative"     # or "ewma"
    ewma_alpha: float = 0.2
    patience_target: str = "knee"        # or "target": patience scales with full charge
    avg_wait_includes_reneged: bool = True

    # -------- validation --------

    def validate(self) -> "RunConfig":
        if self.lam <= 0:
            raise ConfigError("lambda", f"arrival rate must be > 0, got {self.lam}")
        if self.horizon <= 0:
            raise ConfigError("horizon", f"must be > 0, got {self.horizon}")
        if self.rounds < 1:
            raise ConfigError("rounds", f"must be >= 1, got {self.rounds}")
        if not isinstance(self.queue_capacity, int) or self.queue_capacity < 1:
            raise ConfigError("queue_capacity", f"must be an integer >= 1, got {self.queue_capacity}")
        if self.impatience_factor < 0:
            raise ConfigError("impatience_factor", f"must be >= 0, got {self.impatience_factor}")
        m, M = self.soc_range
        if not 0 <= m < M:
            raise ConfigError("soc_range", f"need 0 <= min < max, got [{m}, {M}]")
        if M > self.profile.knee_soc:
            raise ConfigError("soc_range",
                              f"max {M} exceeds the knee SoC {self.profile.knee_soc}; "
                              "arrivals must still need fast charging")
        mix = self.user_type_mix
        if len(mix) != 3 or any(w < 0 for w in mix):
            raise ConfigError("user_type_mix", f"needs three non-negative weights, got {mix}")
        if abs(sum(mix) - 1.0) > 1e-9:
            raise ConfigError("user_type_mix", f"weights must sum to 1, got {sum(mix)}")
        if self.target_soc_policy not in ("all-100", "fraction-80"):
            raise ConfigError("target_soc_policy",
                              f"must be 'all-100' or 'fraction-80', got {self.target_soc_policy!r}")
        if not 0.0 <= self.fraction_80 <= 1.0:
            raise ConfigError("fraction_80", f"must lie in [0, 1], got {self.fraction_80}")
        if self.wq_estimator not in ("cumulative", "ewma"):
            raise ConfigError("wq_estimator",
                              f"must be 'cumulative' or 'ewma', got {self.wq_estimator!r}")
        if not 0.0 < self.ewma_alpha <= 1.0:
            raise ConfigError("ewma_alpha", f"must lie in (0, 1], got {self.ewma_alpha}")
        if self.patience_target not in ("knee", "target"):
            raise ConfigError("patience_target",
                              f"must be 'knee' or 'target', got {self.patience_target!r}")
        try:
            self.sampling()
        except ValueError as exc:
            raise ConfigError("soc_range", str(exc)) from exc
        return self

    # -------- derived --------

    def sampling(self) -> SamplingSettings:
        stop_fraction = self.fraction_80 if self.target_soc_policy == "fraction-80" else 0.0
        return SamplingSettings(
            soc_min=self.soc_range[0], soc_max=self.soc_range[1],
            user_type_weights=tuple(self.user_type_mix),
            impatience_factor=self.impatience_factor,
            stop_at_knee_fraction=stop_fraction,
            patience_target=self.patience_target,
        )

    # -------- serialization --------

    def to_mapping(self) -> dict:
        return {
            "scenario": self.scenario.value,
            "lambda": self.lam,
            "horizon": self.horizon,
            "rounds": self.rounds,
            "seed": self.seed,
            "queue_capacity": self.queue_capacity,
            "impatience_factor": self.impatience_factor,
            "soc_range": list(self.soc_range),
            "user_type_mix": list(self.user_type_mix),
            "target_soc_policy": self.target_soc_policy,
            "fraction_80": self.fraction_80,
            "profile": {
                "battery_kwh": self.profile.battery_kwh,
                "fast_rate": self.profile.fast_rate,
                "slow_rate": self.profile.slow_rate,
                "knee_soc": self.profile.knee_soc,
            },
            "wq_estimator": self.wq_estimator,
            "ewma_alpha": self.ewma_alpha,
            "patience_target": self.patience_target,
            "avg_wait_includes_reneged": self.avg_wait_includes_reneged,
        }

    def digest(self) -> str:
        canonical = json.dumps(self.to_mapping(), sort_keys=True)
        return hashlib.sha256(canonical.encode()).hexdigest()[:16]

    def with_overrides(self, **kwargs) -> "RunConfig":
        """Replace selected fields; `scenario` accepts the name string."""
        if "scenario" in kwargs and isinstance(kwargs["scenario"], str):
            try:
                kwargs["scenario"] = ScenarioKind.from_name(kwargs["scenario"])
            except ValueError as exc:
                raise ConfigError("scenario", str(exc)) from exc
        return replace(self, **kwargs).validate()


def from_mapping(mapping: dict) -> RunConfig:
    """Build a RunConfig from flat file keys, rejecting unknown ones."""
    known = set(RunConfig().to_mapping())
    unknown = set(mapping) - known
    if unknown:
        raise ConfigError(sorted(unknown)[0], "unknown configuration key")
    kwargs = {}
    if "scenario" in mapping:
        kwargs["scenario"] = ScenarioKind.from_name(str(mapping["scenario"]))
    if "lambda" in mapping:
        kwargs["lam"] = float(mapping["lambda"])
    for key, cast in (("horizon", float), ("rounds", int), ("seed", int),
                      ("queue_capacity", int), ("impatience_factor", float),
                      ("fraction_80", float), ("ewma_alpha", float)):
        if key in mapping:
            kwargs[key] = cast(mapping[key])
    for key in ("target_soc_policy", "wq_estimator", "patience_target"):
        if key in mapping:
            kwargs[key] = str(mapping[key])
    if "avg_wait_includes_reneged" in mapping:
        kwargs["avg_wait_includes_reneged"] = bool(mapping["avg_wait_includes_reneged"])
    if "soc_range" in mapping:
        rng = mapping["soc_range"]
        if not isinstance(rng, (list, tuple)) or len(rng) != 2:
            raise ConfigError("soc_range", f"expected [min, max], got {rng!r}")
        kwargs["soc_range"] = (float(rng[0]), float(rng[1]))
    if "user_type_mix" in mapping:
        mix = mapping["user_type_mix"]
        if not isinstance(mix, (list, tuple)) or len(mix) != 3:
            raise ConfigError("user_type_mix", f"expected three weights, got {mix!r}")
        kwargs["user_type_mix"] = tuple(float(w) for w in mix)
    if "profile" in mapping:
        prof = mapping["profile"]
        if not isinstance(prof, dict):
            raise ConfigError("profile", f"expected a mapping, got {prof!r}")
        base = ChargingProfile()
        try:
            kwargs["profile"] = ChargingProfile(
                battery_kwh=float(prof.get("battery_kwh", base.battery_kwh)),
                fast_rate=float(prof.get("fast_rate", base.fast_rate)),
                slow_rate=float(prof.get("slow_rate", base.slow_rate)),
                knee_soc=float(prof.get("knee_soc", base.knee_soc)),
            )
        except ValueError as exc:
            raise ConfigError("profile", str(exc)) from exc
    try:
        return RunConfig(**kwargs).validate()
    except TypeError as exc:
        raise ConfigError("config", str(exc)) from exc


def from_file(path) -> RunConfig:
    with open(path) as fh:
        data = yaml.safe_load(fh)
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError("config", f"expected a flat mapping in {path}")
    return from_mapping(data)


def to_yaml(config: RunConfig) -> str:
    return yaml.safe_dump(config.to_mapping(), sort_keys=True)
