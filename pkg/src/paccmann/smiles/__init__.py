"""SMILES tokenization, parsing, augmentation and fingerprints."""

from .fingerprint import MorganFingerprinter, atom_identifiers, fnv1a_64, morgan_fingerprint
from .graph import (
    AROMATIC,
    Atom,
    MolecularGraph,
    augment,
    is_isomorphic,
    parse,
    random_smiles,
    refinement_signature,
    serialize,
)
from .tokenizer import PAD, UNK, SmilesEncoder, TokenDictionary, build_dictionary, encode_tokens, tokenize

__all__ = [
    "AROMATIC", "Atom", "MolecularGraph", "MorganFingerprinter", "PAD", "SmilesEncoder",
    "TokenDictionary", "UNK", "atom_identifiers", "augment", "build_dictionary",
    "encode_tokens", "fnv1a_64", "is_isomorphic", "morgan_fingerprint", "parse",
    "random_smiles", "refinement_signature", "serialize", "tokenize",
]
