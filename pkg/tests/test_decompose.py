"""Note decomposition: sub-query parsing, clamping, and fallbacks."""

from bluemed.debate.orchestrator import Gateways
from bluemed.llm.decompose import (
    MAX_QUERIES,
    MIN_QUERIES,
    decompose_note,
    parse_subqueries,
)
from bluemed.llm.provider import MockProvider


def gateway_for(response: str):
    provider = MockProvider({"defaults": {"decompose": response}})
    return Gateways.single(provider, backoff=0.0).decomposer


def test_parse_numbered_with_aspects():
    text = (
        "1. medication: metformin use in rheumatoid arthritis\n"
        "2. diagnosis: first-line DMARD selection\n"
        "3. monitoring of inflammatory markers\n"
    )
    queries = parse_subqueries(text)
    assert [q.aspect for q in queries] == ["medication", "diagnosis", "general"]
    assert queries[0].text == "metformin use in rheumatoid arthritis"


def test_parse_bullets_and_parenthesis_markers():
    assert len(parse_subqueries("- one query\n- two query")) == 2
    assert len(parse_subqueries("1) first\n2) second\n3) third")) == 3


def test_parse_plain_lines_without_markers():
    queries = parse_subqueries("first focused query\nsecond focused query")
    assert [q.text for q in queries] == ["first focused query", "second focused query"]


def test_parse_prose_returns_nothing():
    assert parse_subqueries("I cannot split this note, sorry.") == []
    assert parse_subqueries("") == []


def test_parse_overlong_unmarked_lines_are_prose():
    # Without list markers, a long line means paragraph output, not queries.
    text = "short opening line\n" + "x" * 400
    assert parse_subqueries(text) == []


def test_decompose_in_range_passes_through():
    gws = gateway_for("1. alpha query\n2. beta query\n3. gamma query\n4. delta query")
    queries, warnings = decompose_note("a clinical note", gws)
    assert [q.text for q in queries] == ["alpha query", "beta query", "gamma query", "delta query"]
    assert warnings == []


def test_decompose_clamps_to_max():
    lines = "\n".join(f"{i}. query number {i}" for i in range(1, 8))
    queries, warnings = decompose_note("note", gateway_for(lines))
    assert len(queries) == MAX_QUERIES
    assert [q.text for q in queries] == [f"query number {i}" for i in range(1, 6)]
    assert any("7" in w for w in warnings)


def test_decompose_pads_below_min_with_whole_note():
    note = "the full note text"
    queries, warnings = decompose_note(note, gateway_for("1. only one query\n2. second query"))
    assert len(queries) == MIN_QUERIES
    assert queries[-1].text == note
    assert any("padded" in w for w in warnings)


def test_decompose_unparseable_falls_back_to_note():
    note = "whole note becomes the query"
    queries, warnings = decompose_note(note, gateway_for("no list at all, just refusal prose"))
    assert len(queries) == 1
    assert queries[0].text == note
    assert len(warnings) == 1


def test_decompose_sends_note_in_user_content():
    provider = MockProvider({"defaults": {"decompose": "1. a\n2. b\n3. c"}})
    gws = Gateways.single(provider, backoff=0.0)
    decompose_note("SENTINEL-NOTE-TEXT", gws.decomposer)
    call = provider.calls[0]
    assert call.tag == "decompose"
    assert "SENTINEL-NOTE-TEXT" in call.user_content
    assert call.system_prompt == ""


def test_decompose_fixture_note(gateways, fixture_notes):
    queries, warnings = decompose_note(fixture_notes["n6"], gateways.decomposer)
    assert len(queries) == MIN_QUERIES
    assert queries[-1].text == fixture_notes["n6"]
    assert warnings
