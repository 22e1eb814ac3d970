"""Prompt templates shipped as plain-text files with ``{Named Placeholder}`` slots.

Templates are filled by literal string replacement rather than ``str.format``:
several of them contain JSON braces (and one a stray unbalanced brace) that
must reach the model untouched.
"""

from __future__ import annotations

import hashlib
from collections.abc import Mapping
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

PLACEHOLDERS: dict[str, tuple[str, ...]] = {
    "summarize": ("{Protein Description}", "{BioAssay JSON}"),
    "generate": ("{Protein Description}", "{Assay Content}"),
    "relevance": ("{protein description}", "{BioAssay content}"),
    "ablation": ("{protein_description}",),
    "optimize": ("{hERG description}", "{hERG BioAssays}", "{Input SMILES}"),
    "keywords": ("{Protein Description}",),
    "table_header": (),
}


class TemplateError(KeyError):
    pass


@dataclass(frozen=True)
class Template:
    name: str
    text: str

    @property
    def placeholders(self) -> tuple[str, ...]:
        return PLACEHOLDERS.get(self.name, ())

    @property
    def digest(self) -> str:
        return hashlib.sha256(self.text.encode("utf-8")).hexdigest()

    def render(self, values: Mapping[str, str] | None = None) -> str:
        """Substitute placeholders by exact token match.

        Keys may be given with or without the surrounding braces.  Unknown keys
        raise; placeholders left out stay in the output verbatim, so
        ``render({})`` returns the stored text unchanged.
        """
        out = self.text
        for key, value in (values or {}).items():
            token = key if key.startswith("{") else "{" + key + "}"
            if token not in self.placeholders:
                raise TemplateError(f"template {self.name!r} has no placeholder {token}")
            out = out.replace(token, value)
        return out


def load_template(name: str, template_dir: str | Path | None = None) -> Template:
    """Load ``name`` from ``template_dir`` if given, else from the packaged copies."""
    if name not in PLACEHOLDERS:
        raise TemplateError(f"unknown template {name!r}")
    if template_dir is not None:
        text = (Path(template_dir) / f"{name}.txt").read_text(encoding="utf-8")
    else:
        text = resources.files(__name__).joinpath(f"{name}.txt").read_text(encoding="utf-8")
    return Template(name, text)


def template_digests(template_dir: str | Path | None = None) -> dict[str, str]:
    return {name: load_template(name, template_dir).digest for name in sorted(PLACEHOLDERS)}
