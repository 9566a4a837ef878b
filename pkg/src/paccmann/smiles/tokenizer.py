"""SMILES tokenization, token dictionaries and index encoding."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ..errors import EmptyCorpus, IllegalCharacter, SequenceTooLong, UnbalancedBracket

PAD = "<PAD>"
UNK = "<UNK>"

_TWO_LETTER = ("Cl", "Br")
_SINGLE = set("BCNOPSFIbcnops()=#-+\\/:.@*$~")
_DIGITS = set("0123456789")


def tokenize(smiles: str) -> list[str]:
    """Split a SMILES string into atom, bond, branch and ring-closure tokens.

    Bracket expressions, ``Cl``/``Br`` and ``%nn`` ring closures are kept as
    single tokens, so ``"".join(tokenize(s)) == s`` always holds.
    """
    if not smiles:
        raise IllegalCharacter("empty SMILES string", 0)
    tokens = []
    depth = 0
    i, n = 0, len(smiles)
    while i < n:
        ch = smiles[i]
        if not ch.isascii():
            raise IllegalCharacter(f"non-ASCII character {ch!r}", i)
        if ch == "[":
            end = smiles.find("]", i + 1)
            nxt = smiles.find("[", i + 1)
            if end < 0 or (0 <= nxt < end):
                raise UnbalancedBracket("unclosed '['", i)
            tokens.append(smiles[i:end + 1])
            i = end + 1
            continue
        if ch == "]":
            raise UnbalancedBracket("']' without matching '['", i)
        if smiles.startswith(_TWO_LETTER, i):
            tokens.append(smiles[i:i + 2])
            i += 2
            continue
        if ch == "%":
            if i + 2 < n and smiles[i + 1] in _DIGITS and smiles[i + 2] in _DIGITS:
                tokens.append(smiles[i:i + 3])
                i += 3
                continue
            raise IllegalCharacter("'%' must be followed by two digits", i)
        if ch in _DIGITS or ch in _SINGLE:
            if ch == "(":
                depth += 1
            elif ch == ")":
                depth -= 1
                if depth < 0:
                    raise UnbalancedBracket("')' without matching '('", i)
            tokens.append(ch)
            i += 1
            continue
        raise IllegalCharacter(f"illegal character {ch!r}", i)
    if depth:
        raise UnbalancedBracket("unclosed '('", smiles.rfind("("))
    return tokens


@dataclass
class TokenDictionary:
    """Dense token → index mapping with PAD at 0 and UNK at 1."""

    tokens: list[str] = field(default_factory=lambda: [PAD, UNK])

    def __post_init__(self):
        if self.tokens[:2] != [PAD, UNK]:
            raise ValueError("dictionary must start with PAD and UNK")
        self.index = {t: i for i, t in enumerate(self.tokens)}
        if len(self.index) != len(self.tokens):
            raise ValueError("duplicate tokens in dictionary")

    def __len__(self):
        return len(self.tokens)

    def __getitem__(self, token):
        return self.index.get(token, 1)

    def __contains__(self, token):
        return token in self.index

    def as_dict(self) -> dict[str, int]:
        return dict(self.index)


def build_dictionary(corpus: Iterable[str]) -> TokenDictionary:
    corpus = list(corpus)
    if not corpus:
        raise EmptyCorpus("cannot build a dictionary from an empty corpus")
    seen = set()
    for s in corpus:
        seen.update(tokenize(s))
    seen.discard(PAD)
    seen.discard(UNK)
    return TokenDictionary([PAD, UNK] + sorted(seen))


def encode_tokens(tokens: Sequence[str], dictionary: TokenDictionary, max_len: int):
    """Map tokens to a PAD-filled index vector of length ``max_len`` plus a mask."""
    if max_len < 1:
        raise ValueError("max_len must be positive")
    if len(tokens) > max_len:
        raise SequenceTooLong(f"{len(tokens)} tokens exceed max_len={max_len}")
    idx = np.zeros(max_len, dtype=np.int64)
    mask = np.zeros(max_len, dtype=bool)
    idx[:len(tokens)] = [dictionary[t] for t in tokens]
    mask[:len(tokens)] = True
    return idx, mask


class SmilesEncoder(TransformerMixin, BaseEstimator):
    """Fit a token dictionary on a corpus and encode SMILES to index arrays.

    ``transform`` returns ``(indices, mask)``, both of shape ``(n, max_len)``.
    When ``max_len`` is None the longest fitted sequence is used.
    """

    def __init__(self, max_len=None):
        self.max_len = max_len

    def fit(self, X, y=None):
        X = list(X)
        self.dictionary_ = build_dictionary(X)
        longest = max(len(tokenize(s)) for s in X)
        self.max_len_ = self.max_len if self.max_len is not None else longest
        return self

    def transform(self, X):
        check_is_fitted(self, "dictionary_")
        X = list(X)
        idx = np.zeros((len(X), self.max_len_), dtype=np.int64)
        mask = np.zeros((len(X), self.max_len_), dtype=bool)
        for row, s in enumerate(X):
            idx[row], mask[row] = encode_tokens(tokenize(s), self.dictionary_, self.max_len_)
        return idx, mask
