"""
This module defines the configuration classes of the toolkit: SelectionConfig for frame
selection, EpisodeConfig for the multi-turn tool loop, IngestionConfig for preprocessing
constants and AppConfig, which aggregates them together with service endpoints, paths and
curation settings. AppConfig loads a YAML file, applies ``LAST_`` environment overrides and
finally command-line overrides (flag > env > file).
"""

import os
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional

import yaml

from vistrace_lib.utils.common import read_yaml
from vistrace_lib.utils.errors import ConfigError
from vistrace_lib.utils.logger import logger

SELECTION_METHODS = ["uniform", "relevance", "dpp", "combined"]
PAD_MODES = [None, "uniform"]
DEFAULT_DECODING = {"temperature": 0, "top_k": 1, "top_p": 0.001}

ENV_PREFIX = "LAST_"
ENV_ALIASES = {
    "LAST_MODEL_URL": ("endpoints", "model_url"),
    "LAST_TOOLS_URL": ("endpoints", "tools_url"),
    "LAST_EMBED_URL": ("endpoints", "embed_url"),
    "LAST_LOG_DIR": ("paths", "log_dir"),
}
INPUT_PATH_KEYS = ["manifest", "embeddings", "query_embedding", "fixtures", "corpus", "records", "traces"]


class SelectionConfig:
    """
    Configuration of a frame-selection run.
    Holds the target count K, the relevance-pool multiplier of the combined recipe, the
    numerical stopping threshold of greedy MAP inference and the selection strategy.
    """
    def __init__(self,
                 k: int,
                 pool_multiplier: int = 4,
                 epsilon: float = 1e-5,
                 method: str = "combined",
                 pad: Optional[str] = None):
        """
        Initialize the SelectionConfig with the given parameters.
        Args:
            k (int): Target number of selected frames (K >= 1).
            pool_multiplier (int): Relevance pool size as a multiple of K (default 4).
            epsilon (float): Stop greedy MAP inference once the best pivot falls below it.
            method (str): One of 'uniform', 'relevance', 'dpp', 'combined'.
            pad (Optional[str]): None or 'uniform'; tops up early-stopped selections.
        """
        if int(k) < 1:
            raise ConfigError(f"K must be >= 1, got {k}.")
        if int(pool_multiplier) < 1:
            raise ConfigError(f"pool_multiplier must be >= 1, got {pool_multiplier}.")
        if not float(epsilon) > 0:
            raise ConfigError(f"epsilon must be > 0, got {epsilon}.")
        self.k = int(k)
        self.pool_multiplier = int(pool_multiplier)
        self.epsilon = float(epsilon)

        if method not in SELECTION_METHODS:
            logger.warning(f"Invalid selection method '{method}'. Must be one of {SELECTION_METHODS}; using 'combined'.")
            method = "combined"
        self.method = method

        if pad not in PAD_MODES:
            logger.warning(f"Invalid pad mode '{pad}'. Must be one of {PAD_MODES}; padding disabled.")
            pad = None
        self.pad = pad

    @property
    def pool_size(self) -> int:
        return self.pool_multiplier * self.k

    def summary(self) -> str:
        """
        Generate a one-line summary of the selection settings.
        Returns:
            str: A formatted string summarizing the configuration.
        """
        pad = self.pad or "none"
        return (f"SelectionConfig(method={self.method}, K={self.k}, pool={self.pool_multiplier}K={self.pool_size}, "
                f"epsilon={self.epsilon:g}, pad={pad})")

    def __repr__(self) -> str:
        return self.summary()


class EpisodeConfig:
    """
    Configuration of one multi-turn episode: round limit, context budget in tokens,
    single-turn mode and the decoding parameters passed verbatim to the model client.
    """
    def __init__(self,
                 max_rounds: int = 8,
                 context_budget: int = 32000,
                 single_turn: bool = False,
                 decoding: Optional[Mapping[str, Any]] = None):
        """
        Initialize the EpisodeConfig with the given parameters.
        Args:
            max_rounds (int): Maximum number of model queries per episode (>= 1).
            context_budget (int): Token budget of the assembled context.
            single_turn (bool): Allow at most one tool call before the final answer.
            decoding (Optional[Mapping[str, Any]]): Opaque decoding fields (temperature, top_k, top_p, ...).
        """
        if int(max_rounds) < 1:
            raise ConfigError(f"max_rounds must be >= 1, got {max_rounds}.")
        if int(context_budget) < 1:
            raise ConfigError(f"context_budget must be >= 1, got {context_budget}.")
        self.max_rounds = int(max_rounds)
        self.context_budget = int(context_budget)
        self.single_turn = bool(single_turn)
        self.decoding = dict(DEFAULT_DECODING if decoding is None else decoding)

    def summary(self) -> str:
        mode = "single-turn" if self.single_turn else "multi-turn"
        return (f"EpisodeConfig({mode}, max_rounds={self.max_rounds}, "
                f"context_budget={self.context_budget}, decoding={self.decoding})")

    def __repr__(self) -> str:
        return self.summary()


class IngestionConfig:
    """
    Preprocessing constants: resampling rate, per-frame pixel budget and the patch size
    used to estimate visual tokens.
    """
    def __init__(self, target_fps: float = 4.0, max_pixels: int = 50176, patch: int = 14):
        """
        Args:
            target_fps (float): Downsampling rate in frames per second.
            max_pixels (int): Every frame must end strictly below this pixel count.
            patch (int): Patch edge in pixels for the visual-token estimate.
        """
        if not float(target_fps) > 0:
            raise ConfigError(f"target_fps must be > 0, got {target_fps}.")
        if int(max_pixels) < 2:
            raise ConfigError(f"max_pixels must be >= 2, got {max_pixels}.")
        if int(patch) < 1:
            raise ConfigError(f"patch must be >= 1, got {patch}.")
        self.target_fps = float(target_fps)
        self.max_pixels = int(max_pixels)
        self.patch = int(patch)

    def summary(self) -> str:
        return f"IngestionConfig(target_fps={self.target_fps:g}, max_pixels={self.max_pixels}, patch={self.patch})"

    def __repr__(self) -> str:
        return self.summary()


def _coerce(raw: str) -> Any:
    """Turn an environment string into int, float, bool or a YAML scalar."""
    for cast in (int, float):
        try:
            return cast(raw)
        except ValueError:
            pass
    try:
        return yaml.safe_load(raw)
    except yaml.YAMLError:
        return raw


def _deep_merge(base: Dict[str, Any], update: Mapping[str, Any]) -> Dict[str, Any]:
    merged = dict(base)
    for key, value in update.items():
        if isinstance(value, Mapping):
            current = merged.get(key)
            merged[key] = _deep_merge(dict(current) if isinstance(current, Mapping) else {}, value)
        elif value is not None:
            merged[key] = value
    return merged


def env_overrides(environ: Optional[Mapping[str, str]] = None) -> Dict[str, Dict[str, Any]]:
    """
    Collect ``LAST_`` overrides from the environment.

    ``LAST_MODEL_URL`` / ``LAST_TOOLS_URL`` / ``LAST_EMBED_URL`` / ``LAST_LOG_DIR`` are aliases;
    any other variable of the form ``LAST_<SECTION>_<KEY>`` sets ``<section>.<key>``.

    Args:
        environ (Optional[Mapping[str, str]]): Environment to read (defaults to os.environ).
    Returns:
        Dict[str, Dict[str, Any]]: Nested override mapping.
    """
    environ = os.environ if environ is None else environ
    overrides: Dict[str, Dict[str, Any]] = {}
    for name, raw in environ.items():
        if not name.startswith(ENV_PREFIX):
            continue
        if name in ENV_ALIASES:
            section, key = ENV_ALIASES[name]
            overrides.setdefault(section, {})[key] = raw
            continue
        rest = name[len(ENV_PREFIX):].lower()
        for section in AppConfig.SECTIONS:
            if rest.startswith(section + "_"):
                overrides.setdefault(section, {})[rest[len(section) + 1:]] = _coerce(raw)
                break
    return overrides


class AppConfig:
    """
    Aggregated configuration of the toolkit, built from a YAML file, ``LAST_`` environment
    variables and command-line overrides, in increasing order of precedence.
    """
    SECTIONS = ["selection", "episode", "ingestion", "endpoints", "paths", "curation", "tools"]

    def __init__(self,
                 selection: SelectionConfig,
                 episode: EpisodeConfig,
                 ingestion: IngestionConfig,
                 endpoints: Optional[Dict[str, Any]] = None,
                 paths: Optional[Dict[str, str]] = None,
                 curation: Optional[Dict[str, Any]] = None,
                 tools: Optional[Dict[str, Any]] = None):
        """
        Initialize the AppConfig with the given parts.
        Args:
            selection (SelectionConfig): Frame-selection settings.
            episode (EpisodeConfig): Episode-loop settings.
            ingestion (IngestionConfig): Preprocessing constants.
            endpoints (Optional[Dict[str, Any]]): model_url, tools_url, embed_url, timeout, retries.
            paths (Optional[Dict[str, str]]): Input and output locations.
            curation (Optional[Dict[str, Any]]): workers (bounded pool size) and judge name.
            tools (Optional[Dict[str, Any]]): disabled (list of tool names) and marker_radius.
        """
        self.selection = selection
        self.episode = episode
        self.ingestion = ingestion
        self.endpoints = {"model_url": None, "tools_url": None, "embed_url": None,
                          "timeout": 60.0, "retries": 1, **(endpoints or {})}
        self.paths = dict(paths or {})
        self.curation = {"workers": 4, "judge": "auto", **(curation or {})}
        if int(self.curation["workers"]) < 1:
            raise ConfigError(f"curation.workers must be >= 1, got {self.curation['workers']}.")
        self.tools = {"disabled": [], "marker_radius": 4, **(tools or {})}
        self._check_paths()

    def _check_paths(self):
        for key in INPUT_PATH_KEYS:
            value = self.paths.get(key)
            if value and not Path(value).exists():
                raise ConfigError(f"paths.{key} points to a missing file: {value}")

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "AppConfig":
        unknown = set(data) - set(cls.SECTIONS)
        if unknown:
            logger.warning(f"Ignoring unknown configuration sections {sorted(unknown)}.")
        selection = dict(data.get("selection") or {})
        selection.setdefault("k", 8)
        try:
            return cls(
                selection=SelectionConfig(**selection),
                episode=EpisodeConfig(**dict(data.get("episode") or {})),
                ingestion=IngestionConfig(**dict(data.get("ingestion") or {})),
                endpoints=dict(data.get("endpoints") or {}),
                paths=dict(data.get("paths") or {}),
                curation=dict(data.get("curation") or {}),
                tools=dict(data.get("tools") or {}),
            )
        except TypeError as exc:
            raise ConfigError(f"invalid configuration key: {exc}") from exc

    @classmethod
    def load(cls,
             path: Optional[str] = None,
             overrides: Optional[Mapping[str, Mapping[str, Any]]] = None,
             environ: Optional[Mapping[str, str]] = None) -> "AppConfig":
        """
        Load the configuration with precedence flag > env > file.
        Args:
            path (Optional[str]): YAML configuration file; None means defaults only.
            overrides (Optional[Mapping]): Section -> key -> value from command-line flags (None values ignored).
            environ (Optional[Mapping[str, str]]): Environment used for ``LAST_`` overrides.
        Returns:
            AppConfig: The merged configuration.
        """
        data: Dict[str, Any] = {}
        if path is not None:
            if not Path(path).exists():
                raise ConfigError(f"configuration file not found: {path}")
            data = read_yaml(path)
        data = _deep_merge(data, env_overrides(environ))
        data = _deep_merge(data, overrides or {})
        config = cls.from_dict(data)
        logger.info("Configuration loaded: %s", config.summary())
        return config

    @property
    def disabled_tools(self) -> List[str]:
        return list(self.tools.get("disabled") or [])

    def summary(self) -> str:
        lines = [
            self.selection.summary(),
            self.episode.summary(),
            self.ingestion.summary(),
            f"endpoints={self.endpoints}",
            f"curation={self.curation}",
        ]
        return "; ".join(lines)

    def __repr__(self) -> str:
        return self.summary()
