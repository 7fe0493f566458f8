"""Run configuration: TOML file parsing, dotted-path overrides, strict
schema validation, deterministic hashing, and the resolved config echo.

Every run artifact directory carries an echo of its fully resolved config
plus the config hash, so any run is reproducible from the echo alone.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

try:
    import tomllib  # Python >= 3.11
except ModuleNotFoundError:  # pragma: no cover - depends on interpreter
    import tomli as tomllib

from .data import LeadLagLink, SplitSpec
from .exceptions import ConfigError
from .model import ModelConfig
from .multiscale import ScaleSpec

_SCHEMA: dict[str, dict[str, type | tuple]] = {
    "data": {
        "source": str,
        "prices": str,
        "industries": str,
    },
    "data.synth": {
        "n_stocks": int,
        "n_industries": int,
        "n_days": int,
        "noise": (int, float),
        "factor_vol": (int, float),
        "links": list,
    },
    "split": {"train": int, "valid": int, "test": int},
    "model": {
        "lookback": int,
        "latent_dim": int,
        "head_hidden": int,
        "scales": list,
        "lead_lag_windows": list,
        "alpha": (int, float),
    },
    "train": {"lr": (int, float), "epochs": int, "seed": int},
    "ablation": {
        "no_fusion": bool,
        "no_total_multiscale": bool,
        "no_lead_lag": bool,
        "no_skip": bool,
    },
    "eval": {"prec_n": int, "annualize": bool},
}

_LINK_KEYS = {"leader": str, "follower": str, "lag": int, "strength": (int, float)}


@dataclass
class SynthSpec:
    n_stocks: int = 24
    n_industries: int = 3
    n_days: int = 300
    noise: float = 0.2
    factor_vol: float = 0.01
    links: list[LeadLagLink] = field(default_factory=list)


@dataclass
class RunConfig:
    source: str = "synthetic"
    prices: str = ""
    industries: str = ""
    synth: SynthSpec = field(default_factory=SynthSpec)
    split: SplitSpec = field(default_factory=lambda: SplitSpec(train=210, valid=45, test=45))
    lookback: int = 16
    latent_dim: int = 8
    head_hidden: int = 16
    scales: list[list[int]] = field(default_factory=lambda: [[1, 1], [2, 2], [4, 4]])
    lead_lag_windows: list[int] = field(default_factory=lambda: [4, 3, 2])
    alpha: float = 1.0
    lr: float = 5e-3
    epochs: int = 100
    seed: int = 0
    no_fusion: bool = False
    no_total_multiscale: bool = False
    no_lead_lag: bool = False
    no_skip: bool = False
    prec_n: int = 10
    annualize: bool = False

    # -- derived views ---------------------------------------------------

    def scale_specs(self) -> tuple[ScaleSpec, ...]:
        if len(self.lead_lag_windows) != len(self.scales):
            raise ConfigError(
                f"{len(self.scales)} scales need {len(self.scales)} lead-lag windows, "
                f"got {len(self.lead_lag_windows)}"
            )
        return tuple(
            ScaleSpec(kernel=int(k), stride=int(s), lead_lag_window=int(w))
            for (k, s), w in zip(self.scales, self.lead_lag_windows)
        )

    def model_config(self, n_features: int = 5) -> ModelConfig:
        return ModelConfig(
            lookback=self.lookback,
            n_features=n_features,
            latent_dim=self.latent_dim,
            head_hidden=self.head_hidden,
            scales=self.scale_specs(),
            alpha=self.alpha,
            no_fusion=self.no_fusion,
            no_total_multiscale=self.no_total_multiscale,
            no_lead_lag=self.no_lead_lag,
            no_skip=self.no_skip,
        )

    def validate(self) -> None:
        if self.source not in ("synthetic", "csv"):
            raise ConfigError(f"data.source must be 'synthetic' or 'csv', got {self.source!r}")
        if self.source == "csv" and (not self.prices or not self.industries):
            raise ConfigError("csv source needs data.prices and data.industries paths")
        for scale in self.scales:
            if len(scale) != 2:
                raise ConfigError(f"each scale is a [kernel, stride] pair, got {scale}")
        if self.epochs < 0:
            raise ConfigError(f"train.epochs must be non-negative, got {self.epochs}")
        if self.lr <= 0:
            raise ConfigError(f"train.lr must be positive, got {self.lr}")
        if self.prec_n < 1:
            raise ConfigError(f"eval.prec_n must be positive, got {self.prec_n}")
        self.model_config().validate()

    def resolved(self) -> dict:
        """Fully resolved nested dict; the hashing and echo source of truth."""
        return {
            "data": {
                "source": self.source,
                "prices": self.prices,
                "industries": self.industries,
                "synth": {
                    "n_stocks": self.synth.n_stocks,
                    "n_industries": self.synth.n_industries,
                    "n_days": self.synth.n_days,
                    "noise": self.synth.noise,
                    "factor_vol": self.synth.factor_vol,
                    "links": [
                        {
                            "leader": l.leader,
                            "follower": l.follower,
                            "lag": l.lag,
                            "strength": l.strength,
                        }
                        for l in self.synth.links
                    ],
                },
            },
            "split": {"train": self.split.train, "valid": self.split.valid, "test": self.split.test},
            "model": {
                "lookback": self.lookback,
                "latent_dim": self.latent_dim,
                "head_hidden": self.head_hidden,
                "scales": [list(s) for s in self.scales],
                "lead_lag_windows": list(self.lead_lag_windows),
                "alpha": self.alpha,
            },
            "train": {"lr": self.lr, "epochs": self.epochs, "seed": self.seed},
            "ablation": {
                "no_fusion": self.no_fusion,
                "no_total_multiscale": self.no_total_multiscale,
                "no_lead_lag": self.no_lead_lag,
                "no_skip": self.no_skip,
            },
            "eval": {"prec_n": self.prec_n, "annualize": self.annualize},
        }

    def config_hash(self) -> str:
        canon = json.dumps(self.resolved(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode("utf-8")).hexdigest()


# -- parsing -------------------------------------------------------------------


def _validate_tree(tree: dict) -> None:
    for section, content in tree.items():
        if section not in {s.split(".")[0] for s in _SCHEMA}:
            raise ConfigError(f"unknown config section [{section}]")
        if not isinstance(content, dict):
            raise ConfigError(f"config section [{section}] must be a table")
        for key, value in content.items():
            if section == "data" and key == "synth":
                if not isinstance(value, dict):
                    raise ConfigError("[data.synth] must be a table")
                for skey, sval in value.items():
                    expected = _SCHEMA["data.synth"].get(skey)
                    if expected is None:
                        raise ConfigError(f"unknown config key data.synth.{skey}")
                    _check_type(f"data.synth.{skey}", sval, expected)
                continue
            expected = _SCHEMA.get(section, {}).get(key)
            if expected is None:
                raise ConfigError(f"unknown config key {section}.{key}")
            _check_type(f"{section}.{key}", value, expected)


def _check_type(path: str, value, expected) -> None:
    if expected is bool:
        if not isinstance(value, bool):
            raise ConfigError(f"config key {path} must be a boolean")
        return
    if expected is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"config key {path} must be an integer")
        return
    if not isinstance(value, expected):
        name = expected.__name__ if isinstance(expected, type) else "number"
        raise ConfigError(f"config key {path} must be of type {name}")


def _parse_links(raw: list) -> list[LeadLagLink]:
    links = []
    for i, entry in enumerate(raw):
        if not isinstance(entry, dict):
            raise ConfigError(f"data.synth.links[{i}] must be a table")
        unknown = set(entry) - set(_LINK_KEYS)
        if unknown:
            raise ConfigError(f"unknown key in data.synth.links[{i}]: {sorted(unknown)}")
        missing = set(_LINK_KEYS) - set(entry)
        if missing:
            raise ConfigError(f"data.synth.links[{i}] missing {sorted(missing)}")
        links.append(
            LeadLagLink(
                leader=str(entry["leader"]),
                follower=str(entry["follower"]),
                lag=int(entry["lag"]),
                strength=float(entry["strength"]),
            )
        )
    return links


def config_from_tree(tree: dict) -> RunConfig:
    _validate_tree(tree)
    cfg = RunConfig()
    data = tree.get("data", {})
    cfg.source = data.get("source", cfg.source)
    cfg.prices = data.get("prices", cfg.prices)
    cfg.industries = data.get("industries", cfg.industries)
    synth = data.get("synth", {})
    cfg.synth = SynthSpec(
        n_stocks=int(synth.get("n_stocks", cfg.synth.n_stocks)),
        n_industries=int(synth.get("n_industries", cfg.synth.n_industries)),
        n_days=int(synth.get("n_days", cfg.synth.n_days)),
        noise=float(synth.get("noise", cfg.synth.noise)),
        factor_vol=float(synth.get("factor_vol", cfg.synth.factor_vol)),
        links=_parse_links(synth.get("links", [])),
    )
    split = tree.get("split", {})
    cfg.split = SplitSpec(
        train=int(split.get("train", cfg.split.train)),
        valid=int(split.get("valid", cfg.split.valid)),
        test=int(split.get("test", cfg.split.test)),
    )
    model = tree.get("model", {})
    cfg.lookback = int(model.get("lookback", cfg.lookback))
    cfg.latent_dim = int(model.get("latent_dim", cfg.latent_dim))
    cfg.head_hidden = int(model.get("head_hidden", cfg.head_hidden))
    cfg.scales = [list(map(int, s)) for s in model.get("scales", cfg.scales)]
    cfg.lead_lag_windows = [int(w) for w in model.get("lead_lag_windows", cfg.lead_lag_windows)]
    cfg.alpha = float(model.get("alpha", cfg.alpha))
    train = tree.get("train", {})
    cfg.lr = float(train.get("lr", cfg.lr))
    cfg.epochs = int(train.get("epochs", cfg.epochs))
    cfg.seed = int(train.get("seed", cfg.seed))
    ablation = tree.get("ablation", {})
    cfg.no_fusion = bool(ablation.get("no_fusion", cfg.no_fusion))
    cfg.no_total_multiscale = bool(ablation.get("no_total_multiscale", cfg.no_total_multiscale))
    cfg.no_lead_lag = bool(ablation.get("no_lead_lag", cfg.no_lead_lag))
    cfg.no_skip = bool(ablation.get("no_skip", cfg.no_skip))
    ev = tree.get("eval", {})
    cfg.prec_n = int(ev.get("prec_n", cfg.prec_n))
    cfg.annualize = bool(ev.get("annualize", cfg.annualize))
    cfg.validate()
    return cfg


def apply_overrides(tree: dict, overrides: list[str]) -> dict:
    """Apply ``section.key=value`` pairs; values parse as TOML literals."""
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override must look like section.key=value, got {item!r}")
        path, raw_value = item.split("=", 1)
        parts = [p.strip() for p in path.strip().split(".")]
        if not all(parts) or len(parts) < 2:
            raise ConfigError(f"override path must be section.key, got {path!r}")
        try:
            value = tomllib.loads(f"v = {raw_value}")["v"]
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"cannot parse override value {raw_value!r}: {exc}") from exc
        node = tree
        for part in parts[:-1]:
            node = node.setdefault(part, {})
            if not isinstance(node, dict):
                raise ConfigError(f"override path {path!r} crosses a non-table value")
        node[parts[-1]] = value
    return tree


def load_config(
    path: str | Path | None,
    overrides: list[str] | None = None,
    seed: int | None = None,
) -> RunConfig:
    if path is None:
        tree: dict = {}
    else:
        try:
            with open(path, "rb") as fh:
                tree = tomllib.load(fh)
        except FileNotFoundError as exc:
            raise ConfigError(f"config file not found: {path}") from exc
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"malformed config {path}: {exc}") from exc
    tree = apply_overrides(tree, overrides or [])
    if seed is not None:
        tree.setdefault("train", {})["seed"] = int(seed)
    return config_from_tree(tree)


# -- echo ----------------------------------------------------------------------


def _toml_value(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, float)):
        return repr(value)
    if isinstance(value, str):
        return json.dumps(value)
    if isinstance(value, list):
        return "[" + ", ".join(_toml_value(v) for v in value) + "]"
    if isinstance(value, dict):
        pairs = ", ".join(f"{k} = {_toml_value(v)}" for k, v in value.items())
        return "{" + pairs + "}"
    raise ConfigError(f"cannot serialize config value {value!r}")


def write_config_echo(config: RunConfig, path: str | Path) -> None:
    """Write the fully resolved config as TOML, hash noted in a comment."""
    resolved = config.resolved()
    lines = [f"# config_hash: {config.config_hash()}"]
    synth = resolved["data"].pop("synth")
    for section in ("data", "split", "model", "train", "ablation", "eval"):
        lines.append("")
        lines.append(f"[{section}]")
        for key, value in resolved[section].items():
            lines.append(f"{key} = {_toml_value(value)}")
        if section == "data":
            lines.append("")
            lines.append("[data.synth]")
            for key, value in synth.items():
                lines.append(f"{key} = {_toml_value(value)}")
    Path(path).write_text("\n".join(lines) + "\n")
