import numpy as np
import pytest
from hypothesis import given, strategies as st

from paccmann.errors import EmptyCorpus, IllegalCharacter, SequenceTooLong, UnbalancedBracket
from paccmann.smiles import PAD, UNK, SmilesEncoder, build_dictionary, encode_tokens, tokenize


@pytest.mark.parametrize("smiles, tokens", [
    ("CCl", ["C", "Cl"]),
    ("c1ccccc1", ["c", "1", "c", "c", "c", "c", "c", "1"]),
    ("C(=O)[NH2+]", ["C", "(", "=", "O", ")", "[NH2+]"]),
    ("BrCCBr", ["Br", "C", "C", "Br"]),
    ("C%12CC%12", ["C", "%12", "C", "C", "%12"]),
    ("[Na+].[Cl-]", ["[Na+]", ".", "[Cl-]"]),
])
def test_tokenize(smiles, tokens):
    assert tokenize(smiles) == tokens


@pytest.mark.parametrize("bad", ["C[NH", "C]", "C[N[H]]", "C(C", "CC)"])
def test_unbalanced(bad):
    with pytest.raises(UnbalancedBracket):
        tokenize(bad)


@pytest.mark.parametrize("bad", ["", "C&C", "CXC", "C C"])
def test_illegal(bad):
    with pytest.raises(IllegalCharacter):
        tokenize(bad)


def test_error_reports_position():
    with pytest.raises(IllegalCharacter, match="position 1"):
        tokenize("C&C")


def test_dictionary_order():
    assert build_dictionary(["CC"]).as_dict() == {PAD: 0, UNK: 1, "C": 2}
    assert build_dictionary(["CCl", "CO"]).as_dict() == {PAD: 0, UNK: 1, "C": 2, "Cl": 3, "O": 4}
    with pytest.raises(EmptyCorpus):
        build_dictionary([])


def test_encode_tokens():
    d = build_dictionary(["CCl", "CO"])
    idx, mask = encode_tokens(["C", "Cl"], d, 4)
    assert idx.tolist() == [2, 3, 0, 0]
    assert mask.tolist() == [True, True, False, False]
    idx, mask = encode_tokens(["C", "Xx"], d, 2)
    assert idx.tolist() == [2, 1] and mask.all()
    with pytest.raises(SequenceTooLong):
        encode_tokens(["C", "C", "C"], d, 2)


def test_encoder_estimator():
    enc = SmilesEncoder().fit(["CCO", "c1ccccc1"])
    idx, mask = enc.transform(["CCO", "CN"])
    assert idx.shape == (2, 8)
    assert mask.sum(axis=1).tolist() == [3, 2]
    assert idx[1, 1] == enc.dictionary_[UNK]


@given(st.lists(st.sampled_from(["C", "N", "O", "Cl", "Br", "c", "n", "[NH4+]", "=", "1", "(", ")", "%10"]),
                min_size=1, max_size=30))
def test_tokens_concatenate_back(parts):
    s = "".join(parts)
    try:
        toks = tokenize(s)
    except UnbalancedBracket:
        return
    assert "".join(toks) == s
