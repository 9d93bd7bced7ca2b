"""Run configuration: model endpoints per role plus pipeline knobs.

The config file is JSON (schema in ``docs/formats.md``). Unknown keys are
rejected so typos fail loudly. Endpoint base URLs and model names can be
overridden with ``DOCQA_<ROLE>_BASE_URL`` / ``DOCQA_<ROLE>_MODEL``; secrets
only ever come from the environment variable named by ``api_key_env``.
"""
from __future__ import annotations

import json
import os
from dataclasses import dataclass, field, fields
from pathlib import Path

from .agent_loop import AgentConfig
from .errors import ConfigError
from .model_clients import EndpointConfig, HTTPClient, SamplingParams, ScriptedClient
from .synthesis import DEFAULT_DEPTHS, SynthesisConfig
from .toolkit import ToolkitConfig

ROLES = ("policy", "summarizer", "captioner", "explorer", "synthesizer", "teacher", "judge", "extractor")
_HTTP_KEYS = {f.name for f in fields(EndpointConfig)}


@dataclass(frozen=True)
class RoleEndpoint:
    """Either a scripted scenario file or an HTTP endpoint."""

    role: str
    scripted: str | None = None
    http: EndpointConfig | None = None

    def build(self, document: str | None = None):
        if self.scripted is not None:
            try:
                return ScriptedClient.load(self.scripted, role=self.role, document=document, identity=f"scripted:{self.role}")
            except KeyError as exc:
                raise ConfigError(f"{self.role}: {exc.args[0]}") from exc
            except (OSError, json.JSONDecodeError) as exc:
                raise ConfigError(f"{self.role}: cannot load scenario {self.scripted}: {exc}") from exc
        return HTTPClient(self.http, identity=f"{self.role}:{self.http.model}")


@dataclass(frozen=True)
class RunConfig:
    endpoints: dict = field(default_factory=dict)
    sampling: SamplingParams = SamplingParams()
    depths: dict = field(default_factory=lambda: dict(DEFAULT_DEPTHS))
    default_depth: int = 20
    window: int = 300
    max_hits: int = 50
    max_steps: int = 20
    retry_on_malformed: int = 2
    k_rejection_samples: int = 3
    acceptance_rule: str = "judge"
    explorations_per_doc: int = 1
    paths: dict = field(default_factory=dict)

    def agent_config(self) -> AgentConfig:
        return AgentConfig(max_steps=self.max_steps, sampling=self.sampling, retry_on_malformed=self.retry_on_malformed)

    def toolkit_config(self) -> ToolkitConfig:
        return ToolkitConfig(window=self.window, max_hits=self.max_hits)

    def synthesis_config(self) -> SynthesisConfig:
        return SynthesisConfig(
            max_depth_by_source=dict(self.depths),
            default_depth=self.default_depth,
            k_rejection_samples=self.k_rejection_samples,
            acceptance_rule=self.acceptance_rule,
            explorations_per_doc=self.explorations_per_doc,
            sampling=self.sampling,
            agent=self.agent_config(),
        )

    def client(self, role: str, document: str | None = None, required: bool = True):
        ep = self.endpoints.get(role)
        if ep is None:
            if required:
                raise ConfigError(f"no endpoint configured for role {role!r}")
            return None
        return ep.build(document)

    def with_scripted(self, role: str, path) -> "RunConfig":
        eps = dict(self.endpoints)
        eps[role] = RoleEndpoint(role, scripted=str(path))
        return RunConfig(**{**self.__dict__, "endpoints": eps})


_TOP_KEYS = {f.name for f in fields(RunConfig)}
_PATH_KEYS = {"manifest", "out_dir", "trace_dir"}


def _endpoint(role: str, spec, base: Path) -> RoleEndpoint:
    if not isinstance(spec, dict) or len(spec) != 1 or not ({"scripted", "http"} & spec.keys()):
        raise ConfigError(f"endpoints.{role}: expected {{'scripted': path}} or {{'http': {{...}}}}")
    if "scripted" in spec:
        return RoleEndpoint(role, scripted=str(_resolve(spec["scripted"], base)))
    http = dict(spec["http"])
    unknown = set(http) - _HTTP_KEYS
    if unknown:
        raise ConfigError(f"endpoints.{role}.http: unknown keys {sorted(unknown)}")
    if "api_key" in http:
        raise ConfigError(f"endpoints.{role}.http: put secrets in the environment (api_key_env), not the config file")
    env = role.upper()
    http["base_url"] = os.environ.get(f"DOCQA_{env}_BASE_URL", http.get("base_url"))
    http["model"] = os.environ.get(f"DOCQA_{env}_MODEL", http.get("model"))
    if not http["base_url"] or not http["model"]:
        raise ConfigError(f"endpoints.{role}.http: base_url and model are required")
    if http.get("replay_log"):
        http["replay_log"] = str(_resolve(http["replay_log"], base))
    try:
        return RoleEndpoint(role, http=EndpointConfig(**http))
    except TypeError as exc:
        raise ConfigError(f"endpoints.{role}.http: {exc}") from exc


def _resolve(p, base: Path) -> Path:
    p = Path(p)
    return p if p.is_absolute() else base / p


def config_from_dict(data: dict, base_dir=".") -> RunConfig:
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")
    unknown = set(data) - _TOP_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys {sorted(unknown)}")
    base = Path(base_dir)
    kw = dict(data)
    eps = kw.get("endpoints", {})
    if not isinstance(eps, dict):
        raise ConfigError("endpoints must be an object")
    bad_roles = set(eps) - set(ROLES)
    if bad_roles:
        raise ConfigError(f"unknown roles {sorted(bad_roles)}; expected some of {', '.join(ROLES)}")
    kw["endpoints"] = {role: _endpoint(role, spec, base) for role, spec in eps.items()}
    if "sampling" in kw:
        try:
            kw["sampling"] = SamplingParams(**kw["sampling"])
        except TypeError as exc:
            raise ConfigError(f"sampling: {exc}") from exc
    if "depths" in kw:
        kw["depths"] = {**DEFAULT_DEPTHS, **kw["depths"]}
    paths = kw.get("paths", {})
    unknown = set(paths) - _PATH_KEYS
    if unknown:
        raise ConfigError(f"paths: unknown keys {sorted(unknown)}")
    kw["paths"] = {k: str(_resolve(v, base)) for k, v in paths.items()}
    cfg = RunConfig(**kw)
    try:
        cfg.synthesis_config()
        cfg.toolkit_config()
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    return cfg


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: line {exc.lineno}: invalid JSON ({exc.msg})") from exc
    return config_from_dict(data, path.parent)
