"""Prompt templates against the golden transcriptions in ``tests/golden``."""

from __future__ import annotations

import importlib.util
from pathlib import Path

import pytest
from hypothesis import given
from hypothesis import strategies as st

from assaygen.templates import (
    PLACEHOLDERS,
    TemplateError,
    load_template,
    template_digests,
)

ROOT = Path(__file__).resolve().parents[1]
GOLDEN = Path(__file__).parent / "golden"
GOLDEN_NAMES = ("summarize", "generate", "relevance", "ablation", "optimize")


@pytest.mark.parametrize("name", GOLDEN_NAMES)
def test_empty_render_is_byte_identical_to_golden(name):
    rendered = load_template(name).render({})
    assert rendered.encode("utf-8") == (GOLDEN / f"{name}.txt").read_bytes()


@pytest.mark.parametrize("name", GOLDEN_NAMES)
def test_every_placeholder_appears_in_golden(name):
    text = (GOLDEN / f"{name}.txt").read_text(encoding="utf-8")
    for token in PLACEHOLDERS[name]:
        assert token in text


def test_goldens_regenerate_from_source_document(tmp_path):
    source = ROOT / "paper.md"
    tool = ROOT / "tools" / "transcribe_templates.py"
    if not source.exists() or not tool.exists():
        pytest.skip("source document not available")
    spec = importlib.util.spec_from_file_location("transcribe_templates", tool)
    mod = importlib.util.module_from_spec(spec)
    spec.loader.exec_module(mod)
    out = mod.extract(source.read_text(encoding="utf-8"))
    for name in GOLDEN_NAMES:
        assert out[f"{name}.txt"].encode("utf-8") == (GOLDEN / f"{name}.txt").read_bytes(), name


def test_generation_template_landmarks():
    text = load_template("generate").text
    assert "Step 3: Generate 10 High-Affinity Molecules" in text
    assert "[BOS]" in text and "[EOS]" in text


def test_render_substitutes_literally():
    t = load_template("relevance")
    out = t.render({"protein description": "P {x}", "{BioAssay content}": '{"aid": 1}'})
    assert "{protein description}" not in out and "P {x}" in out and '{"aid": 1}' in out
    assert t.text.count("{") >= out.count("{") - 2  # only the two inserted braces are new


def test_unknown_placeholder_and_template():
    with pytest.raises(TemplateError):
        load_template("generate").render({"Nope": "x"})
    with pytest.raises(TemplateError):
        load_template("missing")


@given(st.text(max_size=50))
def test_render_never_interprets_values(value):
    t = load_template("keywords")
    assert t.render({"Protein Description": value}) == t.text.replace("{Protein Description}", value)


def test_digests_are_stable_and_overridable(tmp_path):
    d = template_digests()
    assert set(d) == set(PLACEHOLDERS) and all(len(v) == 64 for v in d.values())
    for name in PLACEHOLDERS:
        (tmp_path / f"{name}.txt").write_text(load_template(name).text, encoding="utf-8")
    (tmp_path / "keywords.txt").write_text("Custom {Protein Description}\n", encoding="utf-8")
    custom = template_digests(tmp_path)
    assert custom["keywords"] != d["keywords"] and custom["generate"] == d["generate"]
