"""Configuration loading: JSON file, defaults, then environment overrides."""

from __future__ import annotations

import json
import logging
import os
from dataclasses import replace
from pathlib import Path
from typing import Any, Mapping

from .errors import ConfigError, ContractViolation
from .model import BackendConfig, PipelineConfig

logger = logging.getLogger(__name__)

_TOP_LEVEL_TYPES: dict[str, type | tuple[type, ...]] = {
    "tau_text": (int, float),
    "tau_visual": (int, float),
    "i_max_text": int,
    "i_max_diagram": int,
    "alpha": (int, float),
    "beta": (int, float),
    "gamma": (int, float),
    "sandbox_timeout": int,
    "sandbox_slots": int,
    "artifact_format": str,
    "sandbox_cmd": str,
    "prompt_dir": str,
    "backend": dict,
    "judge_backend": dict,
}

_BACKEND_TYPES: dict[str, type | tuple[type, ...]] = {
    "api_base": str,
    "model": str,
    "api_key": str,
    "retries": int,
    "backoff_s": (int, float),
}


def _check_types(data: Mapping[str, Any], expected: Mapping[str, Any], prefix: str = "") -> None:
    for key, value in data.items():
        if key not in expected:
            logger.warning("ignoring unknown config key %s%s", prefix, key)
            continue
        if value is None:
            continue
        wanted = expected[key]
        if isinstance(value, bool) or not isinstance(value, wanted):
            raise ConfigError(f"config key {prefix}{key}: expected {wanted}, got {type(value).__name__}")


ENV_API_BASE = "MAGMA_API_BASE"
ENV_API_KEY = "MAGMA_API_KEY"
ENV_MODEL = "MAGMA_MODEL"
ENV_JUDGE_MODEL = "MAGMA_JUDGE_MODEL"
ENV_SANDBOX_CMD = "MAGMA_SANDBOX_CMD"


def load_config(
    path: str | Path | None = None, env: Mapping[str, str] | None = None
) -> PipelineConfig:
    """Build the effective config: defaults, file values, env overrides last.

    Unknown keys warn rather than fail; mistyped or out-of-range values
    raise ConfigError naming the key.
    """
    env = os.environ if env is None else env
    data: dict[str, Any] = {}
    if path is not None:
        text = Path(path).read_text(encoding="utf-8").strip()
        if text:
            try:
                data = json.loads(text)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"config file is not valid JSON: {exc}") from exc
            if not isinstance(data, dict):
                raise ConfigError("config file must hold a JSON object")

    _check_types(data, _TOP_LEVEL_TYPES)
    for nested in ("backend", "judge_backend"):
        if isinstance(data.get(nested), dict):
            _check_types(data[nested], _BACKEND_TYPES, prefix=f"{nested}.")

    known = {key: value for key, value in data.items() if key in _TOP_LEVEL_TYPES}
    try:
        config = PipelineConfig.from_dict(known)
    except ContractViolation as exc:
        raise ConfigError(str(exc)) from exc
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"malformed config: {exc}") from exc

    backend = config.backend
    if env.get(ENV_API_BASE):
        backend = replace(backend, api_base=env[ENV_API_BASE])
    if env.get(ENV_MODEL):
        backend = replace(backend, model=env[ENV_MODEL])
    if env.get(ENV_API_KEY):
        backend = replace(backend, api_key=env[ENV_API_KEY])

    judge = config.judge_backend
    if env.get(ENV_JUDGE_MODEL):
        base = judge if judge is not None else BackendConfig()
        judge = replace(base, model=env[ENV_JUDGE_MODEL])

    sandbox_cmd = env.get(ENV_SANDBOX_CMD) or config.sandbox_cmd
    return replace(config, backend=backend, judge_backend=judge, sandbox_cmd=sandbox_cmd)
