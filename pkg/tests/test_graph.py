import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from paccmann.errors import DisconnectedGraph, ParseError
from paccmann.smiles import (
    AROMATIC, augment, is_isomorphic, morgan_fingerprint, parse, random_smiles, serialize,
)

ETHANOL_FORMS = {"CCO", "OCC", "C(C)O", "C(O)C"}


def test_parse_basic():
    g = parse("CC")
    assert [a.element for a in g.atoms] == ["C", "C"] and g.bonds == [(0, 1, 1)]
    tri = parse("C1CC1")
    assert len(tri.atoms) == 3 and sorted(tri.bonds) == [(0, 1, 1), (0, 2, 1), (1, 2, 1)]
    benz = parse("c1ccccc1")
    assert all(a.aromatic for a in benz.atoms)
    assert len(benz.bonds) == 6 and all(o == AROMATIC for _, _, o in benz.bonds)


def test_parse_brackets_and_hydrogens():
    g = parse("C[NH3+]")
    n = g.atoms[1]
    assert (n.element, n.charge, n.hcount) == ("N", 1, 3)
    assert parse("CO").hydrogens(1) == 1
    assert parse("C=O").hydrogens(0) == 2
    assert parse("c1ccccc1").hydrogens(0) == 1
    assert parse("[13CH4]").atoms[0].isotope == 13


@pytest.mark.parametrize("bad", ["C1CC", "CC=", "C=(C)C", "[Xy]", "C11"])
def test_parse_errors(bad):
    with pytest.raises(ParseError):
        parse(bad)


def test_serialize_start_atom():
    g = parse("CO")
    assert serialize(g, 0) == "CO"
    assert serialize(g, 1) == "OC"


def test_serialize_disconnected():
    with pytest.raises(DisconnectedGraph):
        serialize(parse("C.C"))
    assert random_smiles(parse("[Na+].[Cl-]"), np.random.default_rng(0)).count(".") == 1


def test_ethanol_forms_are_exhaustive():
    g = parse("CCO")
    seen = set()
    for start in range(3):
        for seed in range(30):
            s = serialize(g, start, np.random.default_rng(seed))
            assert is_isomorphic(g, parse(s))
            seen.add(s)
    assert seen == ETHANOL_FORMS


def test_augment_contract():
    assert augment("C", 32, 5) == ["C"]
    assert augment("CCOc1ccccc1", 1, 5) == ["CCOc1ccccc1"]
    variants = augment("CCO", 4, seed=7)
    assert len(variants) == 4 == len(set(variants))
    assert set(variants) <= ETHANOL_FORMS
    assert augment("CCO", 4, seed=7) == variants


def test_isomorphism_distinguishes():
    assert not is_isomorphic(parse("CCO"), parse("COC"))
    assert not is_isomorphic(parse("C=CC"), parse("CCC"))
    assert not is_isomorphic(parse("[NH4+]"), parse("N"))
    assert is_isomorphic(parse("OCC"), parse("C(O)C"))


def test_corpus_round_trip(corpus):
    assert len(corpus) >= 50
    for s in corpus:
        g = parse(s)
        assert is_isomorphic(g, parse(random_smiles(g, np.random.default_rng(1)))), s


def test_fingerprint_invariance(corpus):
    for s in corpus[:15]:
        fp = morgan_fingerprint(parse(s))
        for v in augment(s, 8, 0):
            assert np.array_equal(morgan_fingerprint(parse(v)), fp), (s, v)


@st.composite
def chain_smiles(draw):
    n = draw(st.integers(1, 8))
    parts = [draw(st.sampled_from(["C", "N", "O"]))]
    for _ in range(n):
        if draw(st.booleans()):
            parts.append("(" + draw(st.sampled_from(["C", "O", "Cl", "N"])) + ")")
        parts.append(draw(st.sampled_from(["C", "N", "O"])))
    if draw(st.booleans()) and n >= 3:
        parts[0] += "1"
        parts.append("C1")
    return "".join(parts)


@settings(max_examples=60, deadline=None)
@given(chain_smiles(), st.integers(0, 2**32 - 1))
def test_random_serialization_is_isomorphic(smiles, seed):
    g = parse(smiles)
    out = random_smiles(g, np.random.default_rng(seed))
    assert is_isomorphic(g, parse(out))
