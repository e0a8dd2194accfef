"""Prompt templates stored as UTF-8 text files with ``{name}`` placeholders."""

from __future__ import annotations

import re
from functools import lru_cache
from importlib import resources
from pathlib import Path

_PLACEHOLDER = re.compile(r"\{([a-z_]+)\}")


class TemplateError(KeyError):
    pass


@lru_cache(maxsize=None)
def _packaged(name: str) -> str:
    return resources.files(__package__).joinpath("templates", f"{name}.txt").read_text(encoding="utf-8")


def load_template(name: str, directory: str | Path | None = None) -> str:
    """Read ``<name>.txt`` from ``directory`` or from the bundled templates.

    Raises:
        TemplateError: no such template.
    """
    try:
        if directory is not None:
            return (Path(directory) / f"{name}.txt").read_text(encoding="utf-8").rstrip("\n")
        return _packaged(name).rstrip("\n")
    except FileNotFoundError as exc:
        raise TemplateError(f"no template named {name!r}") from exc


def placeholders(template: str) -> list[str]:
    return list(dict.fromkeys(_PLACEHOLDER.findall(template)))


def render(template: str, **values) -> str:
    """Fill ``{name}`` placeholders. Other braces (JSON examples) pass through.

    Raises:
        TemplateError: a placeholder has no value.
    """
    missing = [p for p in placeholders(template) if p not in values]
    if missing:
        raise TemplateError(f"missing template values: {', '.join(missing)}")
    return _PLACEHOLDER.sub(lambda m: str(values[m.group(1)]), template)


def prompt(name: str, directory: str | Path | None = None, **values) -> str:
    return render(load_template(name, directory), **values)
