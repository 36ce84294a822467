"""Strict JSON run-configuration files.

Unknown keys are rejected and every error names the offending field path,
e.g. ``policy.theta``.
"""
from __future__ import annotations

import json
from pathlib import Path
from typing import Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, ValidationError

from .environments import make_environment
from .indices import DEFAULT_THETA, Phi
from .simulation import POLICY_KINDS, ConfigError, PolicySpec, RunConfig


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", strict=False)


class EnvironmentModel(_Strict):
    kind: Literal["flip_line", "bump_cube", "embedded_circle"]
    ambient_dim: Optional[int] = Field(default=None, ge=1)
    arms: Optional[int] = Field(default=None, ge=1)
    noise: Literal["bernoulli", "gaussian_unit"] = "bernoulli"
    params: dict[str, float] = Field(default_factory=dict)


class PhiModel(_Strict):
    kind: Literal["const", "log"] = "const"
    scale: float = Field(default=1.0, gt=0)


class PolicyModel(_Strict):
    kind: Literal[POLICY_KINDS]
    theta: Optional[float] = Field(default=None, gt=0)
    phi: PhiModel = Field(default_factory=PhiModel)
    arm: int = Field(default=0, ge=0)
    tol: float = Field(default=1e-9, gt=0)


class OutputModel(_Strict):
    dir: str = "results"
    formats: list[Literal["csv", "json"]] = Field(default_factory=lambda: ["csv", "json"])


class ConfigModel(_Strict):
    environment: EnvironmentModel
    policy: PolicyModel
    horizon: int = Field(ge=1)
    replications: int = Field(default=1, ge=1)
    master_seed: int = Field(default=0, ge=0)
    record_every: int = Field(default=1, ge=1)
    n_jobs: int = 1
    output: OutputModel = Field(default_factory=OutputModel)


def _from_validation_error(err: ValidationError) -> ConfigError:
    first = err.errors()[0]
    path = ".".join(str(p) for p in first["loc"])
    return ConfigError(path, first["msg"])


def parse_config(data: dict) -> ConfigModel:
    try:
        return ConfigModel.model_validate(data)
    except ValidationError as err:
        raise _from_validation_error(err) from None


def load_config(path) -> ConfigModel:
    """Read and validate a config file. ``OSError`` propagates for I/O failures."""
    text = Path(path).read_text(encoding="utf-8")
    try:
        data = json.loads(text)
    except json.JSONDecodeError as err:
        raise ConfigError("", f"invalid JSON: {err}") from None
    if not isinstance(data, dict):
        raise ConfigError("", "top level must be an object")
    return parse_config(data)


def resolve(model: ConfigModel) -> ConfigModel:
    """Fill defaults that depend on other fields (theta per index kind)."""
    pol = model.policy
    if pol.theta is None and pol.kind.endswith("ucb"):
        kind = "klucb" if pol.kind.endswith("klucb") else "ucb"
        pol = pol.model_copy(update={"theta": DEFAULT_THETA[kind]})
    return model.model_copy(update={"policy": pol})


def to_run_config(model: ConfigModel) -> RunConfig:
    e = model.environment
    try:
        env = make_environment(e.kind, e.ambient_dim, e.arms, e.noise, **e.params)
    except (TypeError, ValueError) as err:
        raise ConfigError("environment", str(err)) from None
    p = model.policy
    try:
        phi = Phi(p.phi.kind, p.phi.scale)
    except ValueError as err:
        raise ConfigError("policy.phi", str(err)) from None
    spec = PolicySpec(p.kind, p.theta, phi, p.arm, p.tol)
    cfg = RunConfig(env, spec, model.horizon, model.master_seed, model.replications,
                    model.record_every, model.n_jobs)
    return cfg.validate()
