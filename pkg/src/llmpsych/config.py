"""Run configuration: a TOML file with command-line overrides.

Sections are ``[provider]``, ``[campaign]``, ``[analysis]`` and ``[paths]``.
Credentials never go in the file; ``provider.api_key_env`` names the
environment variable that holds the key.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass, field
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

SECTIONS = ("provider", "campaign", "analysis", "paths")
# config key -> argparse dest, where they differ
_RENAMES = {("provider", "kind"): "provider"}
_FORBIDDEN = {"api_key", "key", "token", "secret"}


@dataclass
class RunConfig:
    values: dict = field(default_factory=dict)
    source: Path | None = None

    def get(self, dest, default=None):
        return self.values.get(dest, default)


def load_config(path) -> RunConfig:
    path = Path(path)
    with open(path, "rb") as fh:
        raw = tomllib.load(fh)
    values = {}
    for section, body in raw.items():
        if section not in SECTIONS or not isinstance(body, dict):
            raise ValueError(f"{path}: unknown config section [{section}]")
        for key, value in body.items():
            if key in _FORBIDDEN:
                raise ValueError(f"{path}: credentials must not be stored in the config; set [provider] api_key_env")
            values[_RENAMES.get((section, key), key)] = value
    return RunConfig(values, path)
