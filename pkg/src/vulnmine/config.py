"""Run configuration from an INI file, environment variables and command-line flags.

Precedence, lowest first: built-in defaults, the ``[vulnmine]`` section of the
INI file, ``VULNMINE_<KEY>`` environment variables, explicit overrides.
"""

from __future__ import annotations

import configparser
import os
from dataclasses import dataclass, fields
from datetime import datetime, timezone
from pathlib import Path
from typing import Mapping

from vulnmine.feeds import FIRST_YEAR
from vulnmine.forges import Credentials
from vulnmine.references import Forge

SECTION = "vulnmine"
ENV_PREFIX = "VULNMINE_"
DEFAULT_FILE = Path(".vulnmine.ini")


class ConfigError(ValueError):
    pass


@dataclass
class Config:
    database_path: Path = Path("vulnmine.sqlite")
    sample_limit: int = 0
    github_username: str | None = None
    github_token: str | None = None
    gitlab_token: str | None = None
    bitbucket_username: str | None = None
    bitbucket_token: str | None = None
    cache_dir: Path = Path("cache")
    workdir: Path = Path("work")
    worker_count: int = 4
    # recorded HTTP answers; with offline set nothing goes past them
    http_cache_dir: Path | None = None
    offline: bool = False
    first_year: int = FIRST_YEAR
    last_year: int = datetime.now(timezone.utc).year
    cwe_source: Path | None = None
    keep_clones: bool = False
    max_retries: int = 3

    def validate(self) -> Config:
        if self.sample_limit < 0:
            raise ConfigError(f"sample_limit must be >= 0, got {self.sample_limit}")
        if self.worker_count < 1:
            raise ConfigError(f"worker_count must be >= 1, got {self.worker_count}")
        if self.max_retries < 0:
            raise ConfigError(f"max_retries must be >= 0, got {self.max_retries}")
        if not FIRST_YEAR <= self.first_year <= self.last_year:
            raise ConfigError(f"year range {self.first_year}-{self.last_year} is invalid "
                              f"(feeds start in {FIRST_YEAR})")
        return self

    @property
    def years(self) -> range:
        return range(self.first_year, self.last_year + 1)

    def credentials(self) -> dict[Forge, Credentials]:
        return {
            Forge.GITHUB: Credentials(self.github_username, self.github_token),
            Forge.GITLAB: Credentials(None, self.gitlab_token),
            Forge.BITBUCKET: Credentials(self.bitbucket_username, self.bitbucket_token),
        }


_TRUE = {"1", "true", "yes", "on"}
_FALSE = {"0", "false", "no", "off", ""}


def _convert(name: str, kind: type, raw: str):
    text = raw.strip()
    if kind is bool:
        if text.lower() in _TRUE:
            return True
        if text.lower() in _FALSE:
            return False
        raise ConfigError(f"{name}: expected a boolean, got {raw!r}")
    if kind is int:
        try:
            return int(text)
        except ValueError:
            raise ConfigError(f"{name}: expected an integer, got {raw!r}") from None
    if kind is Path:
        return Path(text).expanduser() if text else None
    return text or None


def _kinds() -> dict[str, type]:
    kinds = {}
    for f in fields(Config):
        hint = str(f.type)
        kinds[f.name] = bool if "bool" in hint else int if "int" in hint else Path if "Path" in hint else str
    return kinds


def load_config(path: str | Path | None = None, env: Mapping[str, str] | None = None,
                overrides: Mapping[str, object] | None = None) -> Config:
    """Assemble and validate a Config.

    ``path`` defaults to ``.vulnmine.ini`` in the working directory when that
    file exists. Overrides whose value is None are ignored, so unset flags do
    not mask file values.
    """
    env = os.environ if env is None else env
    kinds = _kinds()
    values: dict[str, object] = {}

    if path is None and DEFAULT_FILE.exists():
        path = DEFAULT_FILE
    if path is not None:
        parser = configparser.ConfigParser(interpolation=None)
        try:
            with open(path, encoding="utf-8") as fh:
                parser.read_file(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config file {path}: {exc}") from exc
        except configparser.Error as exc:
            raise ConfigError(f"malformed config file {path}: {exc}") from exc
        if parser.has_section(SECTION):
            for key, raw in parser.items(SECTION):
                if key not in kinds:
                    raise ConfigError(f"unknown config key {key!r} in {path}")
                values[key] = _convert(key, kinds[key], raw)

    for key, kind in kinds.items():
        raw = env.get(ENV_PREFIX + key.upper())
        if raw is not None:
            values[key] = _convert(key, kind, raw)

    for key, value in (overrides or {}).items():
        if key not in kinds:
            raise ConfigError(f"unknown setting {key!r}")
        if value is not None:
            values[key] = _convert(key, kinds[key], value) if isinstance(value, str) else value

    config = Config(**values)
    for name in ("database_path", "cache_dir", "workdir"):
        if getattr(config, name) is None:
            raise ConfigError(f"{name} must not be empty")
    return config.validate()
