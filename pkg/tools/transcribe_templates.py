"""Mechanically transcribe LaTeX prompt boxes in a Markdown source to plain text.

The output lands in ``tests/golden/`` and is the oracle the package templates
are compared against, so the rules here stay deliberately dumb:

* ``lstlisting`` bodies are copied verbatim;
* ``\\textbf``, ``\\texttt``, ``\\paragraph`` and bare ``{...}`` groups are unwrapped;
* ``\\mbox{}``, ``\\label{..}`` and trailing ``\\\\`` line breaks are dropped;
* escapes ``\\{ \\} \\_ \\&`` become their literal characters;
* ``$\\vdots$`` becomes ``...`` and the ```x'`` quote pair becomes ``'x'``;
* trailing whitespace is stripped from every line; the file ends with one newline.

    python tools/transcribe_templates.py path/to/source.md
"""

from __future__ import annotations

import re
import sys
from pathlib import Path

ROOT = Path(__file__).resolve().parents[1]
OUT = ROOT / "tests" / "golden"

BOXES = {
    "Prompt for BioAssays Summarization": "summarize.txt",
    "Molecule Generation Prompt": "generate.txt",
    "Relevance Assessment Prompt": "relevance.txt",
    "Ablation study prompt": "ablation.txt",
    "Molecule optimization prompt": "optimize.txt",
}

_LBRACE, _RBRACE = "\x00", "\x01"
_CMD = re.compile(r"\\(?:textbf|texttt|paragraph)\{([^{}]*)\}")
_GROUP = re.compile(r"(?<![\\A-Za-z])\{([^{}]*)\}")


def _plain(line: str) -> str:
    line = line.replace(r"\{", _LBRACE).replace(r"\}", _RBRACE)
    line = re.sub(r"\\label\{[^{}]*\}", "", line)
    line = line.replace(r"\mbox{}", "")
    prev = None
    while prev != line:
        prev = line
        line = _CMD.sub(r"\1", line)
        line = _GROUP.sub(r"\1", line)
    line = line.replace(r"\_", "_").replace(r"\&", "&").replace(r"$\vdots$", "...")
    line = re.sub(r"`([^`']*)'", r"'\1'", line)
    line = line.rstrip()
    line = line.removesuffix("\\\\")
    line = line.replace(_LBRACE, "{").replace(_RBRACE, "}")
    return line.rstrip()


def transcribe(body: list[str]) -> str:
    out: list[str] = []
    verbatim = False
    for raw in body:
        if raw.startswith(r"\begin{lstlisting}"):
            verbatim = True
            continue
        if raw.startswith(r"\end{lstlisting}"):
            verbatim = False
            continue
        if verbatim:
            out.append(raw.rstrip())
            continue
        if raw.strip().startswith(r"\label{"):
            continue
        out.append(_plain(raw))
    while out and not out[0]:
        out.pop(0)
    while out and not out[-1]:
        out.pop()
    return "\n".join(out) + "\n"


def extract(source: str) -> dict[str, str]:
    lines = source.splitlines()
    found: dict[str, str] = {}
    i = 0
    while i < len(lines):
        m = re.match(r"\\begin\{tcolorbox\}\[.*title=([^\]]+)\]", lines[i])
        if m and m.group(1) in BOXES:
            j = i + 1
            while not lines[j].startswith(r"\end{tcolorbox}"):
                j += 1
            found[BOXES[m.group(1)]] = transcribe(lines[i + 1:j])
            i = j
        i += 1
    return found


def main(argv: list[str]) -> None:
    source = Path(argv[1] if len(argv) > 1 else ROOT.parent / "paper.md").read_text(encoding="utf-8")
    OUT.mkdir(parents=True, exist_ok=True)
    for name, text in sorted(extract(source).items()):
        (OUT / name).write_text(text, encoding="utf-8")
        print(f"{name}: {len(text)} chars")


if __name__ == "__main__":
    main(sys.argv)
