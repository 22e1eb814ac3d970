from __future__ import annotations

import json
from decimal import Decimal

import pytest
from hypothesis import given
from hypothesis import strategies as st

from assaygen.store import (
    OUTCOME_TABLE,
    AssayStore,
    DuplicateAid,
    MalformedRow,
    MissingAid,
    MissingDescription,
    NotFound,
    Outcome,
    StoreError,
    UnknownOutcome,
    ingest_assay,
    ingest_directory,
    map_outcome,
    parse_row,
    read_activity_table,
)
from assaygen.synthetic import make_corpus, write_raw


def _doc(aid=1, **extra):
    return {"aid": aid, "description": "x", "rows": [], **extra}


def test_minimal_document_has_no_rows():
    rec = ingest_assay(_doc())
    assert rec.aid == 1 and rec.rows == ()


def test_ic50_row_is_parsed():
    rec = ingest_assay(_doc(rows=[{"smiles": "CCO", "outcome": "Active", "activity_kind": "IC50",
                                   "relation": "=", "value": 2100, "unit": "nM"}]))
    (row,) = rec.rows
    assert row.outcome is Outcome.ACTIVE
    assert row.measure.kind == "IC50"
    assert row.measure.relation == "="
    assert row.measure.value == Decimal(2100)
    assert row.measure.unit == "nM"
    assert row.measure.render() == "IC50 = 2100 nM"


def test_bogus_outcome_is_malformed_row():
    with pytest.raises(MalformedRow) as exc:
        ingest_assay(_doc(rows=[{"smiles": "C", "outcome": "Active"}, {"smiles": "C", "outcome": "Bogus"}]))
    assert exc.value.index == 1


@pytest.mark.parametrize("doc, error", [
    ({"description": "x"}, MissingAid),
    ({"aid": "abc", "description": "x"}, MissingAid),
    ({"aid": 0, "description": "x"}, MissingAid),
    ({"aid": True, "description": "x"}, MissingAid),
    ({"aid": 5}, MissingDescription),
    ({"aid": 5, "description": "   "}, MissingDescription),
])
def test_document_level_errors(doc, error):
    with pytest.raises(error):
        ingest_assay(doc)


@pytest.mark.parametrize("row, reason", [
    ({"outcome": "Active"}, "missing smiles"),
    ({"smiles": "  ", "outcome": "Active"}, "missing smiles"),
    ({"smiles": "C", "outcome": "Active", "value": 1, "relation": "~"}, "bad relation"),
    ("not a row", "not an object"),
])
def test_row_errors(row, reason):
    with pytest.raises(MalformedRow, match=reason):
        parse_row(row, 3)


def test_unparsable_value_keeps_row_without_measure():
    row = parse_row({"smiles": "C", "outcome": "Inactive", "value": "n/a", "activity_kind": "Ki"})
    assert row.measure is None and row.outcome is Outcome.INACTIVE


@pytest.mark.parametrize("value", ["inf", "NaN", "-Infinity"])
def test_non_finite_values_are_not_measures(value):
    assert parse_row({"smiles": "C", "outcome": "Active", "value": value}).measure is None


def test_percent_inhibition_label_and_decimal_rendering():
    row = parse_row({"smiles": "C", "outcome": "Active", "activity_kind": "% inhibition",
                     "relation": ">", "value": "52.50", "unit": "%"})
    assert row.measure.kind == "PercentInhibition"
    assert row.measure.render() == "Inhibition > 52.50 %"


def test_other_kinds_keep_their_label():
    row = parse_row({"smiles": "C", "outcome": "Active", "activity_kind": "EC50", "value": "1e-3", "unit": "M"})
    assert row.measure.kind == "EC50"
    assert row.measure.render() == "EC50 = 0.001 M"


@pytest.mark.parametrize("label, outcome", [
    ("active", Outcome.ACTIVE),
    ("Unspecified", Outcome.UNSPECIFIED),
    ("Inconclusive", Outcome.UNSPECIFIED),
    ("INACTIVE", Outcome.INACTIVE),
    (" Probe ", Outcome.ACTIVE),
])
def test_outcome_decision_table(label, outcome):
    assert map_outcome(label) is outcome


@pytest.mark.parametrize("label", ["", "  ", "Bogus", "actve"])
def test_unknown_outcomes(label):
    with pytest.raises(UnknownOutcome):
        map_outcome(label)


@given(st.text(max_size=20))
def test_fuzzed_labels_map_to_three_values_or_raise(label):
    try:
        out = map_outcome(label)
    except UnknownOutcome:
        assert label.strip().lower() not in OUTCOME_TABLE
    else:
        assert out in set(Outcome) and len(set(Outcome)) == 3


def test_lookup_round_trip_and_not_found():
    store = AssayStore([ingest_assay(_doc(775998)), ingest_assay(_doc(2, description="y"))]).freeze()
    assert store.lookup(775998).aid == 775998
    assert store.lookup(2).description == "y"
    assert store.lookup(775998) is not store.lookup(2)
    with pytest.raises(NotFound):
        store.lookup(3)


def test_duplicate_and_frozen():
    store = AssayStore([ingest_assay(_doc(1))])
    with pytest.raises(DuplicateAid):
        store.add(ingest_assay(_doc(1)))
    store.freeze()
    with pytest.raises(StoreError):
        store.add(ingest_assay(_doc(2)))


def test_save_load_is_a_fixed_point(tmp_path):
    docs = make_corpus(12, seed=3)
    store = AssayStore(ingest_assay(d) for d in docs if "C1CC(N" not in json.dumps(d)).freeze()
    m1 = store.save(tmp_path / "a")
    loaded = AssayStore.load(tmp_path / "a")
    assert [r.to_json() for r in loaded] == [r.to_json() for r in store]
    m2 = loaded.save(tmp_path / "b")
    assert m1 == m2
    assert (tmp_path / "a" / "assays" / f"{store.aids[0]}.jsonl").read_text() == \
        (tmp_path / "b" / "assays" / f"{store.aids[0]}.jsonl").read_text()


@given(st.lists(st.fixed_dictionaries({
    "smiles": st.sampled_from(["C", "CCO", "c1ccccc1", "not-a-smiles"]),
    "outcome": st.sampled_from(["Active", "inactive", "Unspecified", "Inconclusive", "probe"]),
    "activity_kind": st.sampled_from(["IC50", "Ki", "Kd", "PercentInhibition", "EC50", ""]),
    "relation": st.sampled_from(["<", "=", ">"]),
    "value": st.one_of(st.none(), st.decimals(allow_nan=False, allow_infinity=False, places=3).map(str)),
    "unit": st.sampled_from(["nM", "uM", "%", ""]),
}), max_size=15))
def test_row_count_and_serialization_round_trip(rows):
    rec = ingest_assay(_doc(rows=rows))
    assert len(rec.rows) == len(rows)
    again = ingest_assay(json.loads(json.dumps(rec.to_json())))
    assert again == rec


def test_ingest_directory_reads_sibling_tables_and_reports_problems(tmp_path):
    docs = make_corpus(9, seed=1)
    write_raw(tmp_path, docs)
    (tmp_path / "broken.json").write_text(json.dumps({"aid": 77}))
    store, problems = ingest_directory(tmp_path)
    assert len(store) == 9
    assert len(problems) == 1 and "broken.json" in problems[0]
    assert store.lookup(docs[0]["aid"]).rows  # came from the CSV side file
    assert len(store.lookup(docs[0]["aid"]).rows) == len(docs[0]["rows"])


def test_activity_table_header_is_checked(tmp_path):
    p = tmp_path / "t.csv"
    p.write_text("A,B\nC,Active\n")
    with pytest.raises(StoreError):
        read_activity_table(p)
    p.write_text("SMILES\tOUTCOME\tKIND\tRELATION\tVALUE\tUNIT\nCCO\tActive\tIC50\t<\t10\tnM\nC\tInactive\t\t\t\t\n")
    rows = read_activity_table(p)
    assert rows[0].measure.render() == "IC50 < 10 nM" and rows[1].measure is None
