"""Versioned prompt templates.

Templates are ``<name>.v<N>.txt`` files; the highest version wins unless one
is pinned. Placeholders are ``{name}`` and are substituted literally (no
``str.format``), so templates may contain JSON braces.
"""
from __future__ import annotations

import re
from functools import lru_cache
from importlib import resources
from pathlib import Path

_VERSIONED = re.compile(r"^(?P<name>[a-z_]+)\.v(?P<version>\d+)\.txt$")


def _candidates(prompt_dir: Path | None):
    if prompt_dir is not None:
        yield from Path(prompt_dir).iterdir()
    yield from resources.files("docqa.prompts").iterdir()


@lru_cache(maxsize=None)
def _load(name: str, version: int | None, prompt_dir: str | None) -> tuple[int, str]:
    best = None
    for entry in _candidates(Path(prompt_dir) if prompt_dir else None):
        m = _VERSIONED.match(entry.name)
        if not m or m["name"] != name:
            continue
        v = int(m["version"])
        if version is not None and v != version:
            continue
        # strict >: an override directory (scanned first) wins ties
        if best is None or v > best[0]:
            best = (v, entry.read_text(encoding="utf-8"))
    if best is None:
        raise KeyError(f"no prompt template {name!r}" + (f" v{version}" if version else ""))
    return best


def load_prompt(name: str, version: int | None = None, prompt_dir=None) -> str:
    return _load(name, version, str(prompt_dir) if prompt_dir else None)[1].rstrip("\n")


def prompt_version(name: str, prompt_dir=None) -> int:
    return _load(name, None, str(prompt_dir) if prompt_dir else None)[0]


def fill(template: str, **values: str) -> str:
    for key, value in values.items():
        template = template.replace("{" + key + "}", value)
    return template
