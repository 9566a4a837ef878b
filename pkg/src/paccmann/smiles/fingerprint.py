"""Circular (Morgan-style) bit fingerprints over :class:`MolecularGraph`."""

from __future__ import annotations

import struct

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from .graph import MolecularGraph, parse

FNV_OFFSET = 0xCBF29CE484222325
FNV_PRIME = 0x100000001B3
_MASK64 = 0xFFFFFFFFFFFFFFFF


def fnv1a_64(data: bytes) -> int:
    h = FNV_OFFSET
    for byte in data:
        h ^= byte
        h = (h * FNV_PRIME) & _MASK64
    return h


def atom_invariant(graph: MolecularGraph, i: int) -> int:
    atom = graph.atoms[i]
    key = (
        atom.element.encode()
        + b"\x00"
        + struct.pack("<iiiB", graph.degree(i), atom.charge, graph.hydrogens(i), atom.aromatic)
    )
    return fnv1a_64(key)


def atom_identifiers(graph: MolecularGraph, radius: int = 2) -> list[list[int]]:
    """Per-iteration atom identifiers; element ``r`` holds the radius-``r`` layer."""
    ids = [atom_invariant(graph, i) for i in range(len(graph))]
    layers = [ids]
    for _ in range(radius):
        nxt = []
        for i in range(len(graph)):
            env = sorted((order, ids[j]) for j, order in graph.neighbors(i))
            payload = struct.pack("<Q", ids[i]) + b"".join(
                struct.pack("<BQ", order, nid) for order, nid in env
            )
            nxt.append(fnv1a_64(payload))
        ids = nxt
        layers.append(ids)
    return layers


def morgan_fingerprint(graph: MolecularGraph, radius: int = 2, width: int = 512) -> np.ndarray:
    """Fold every atom identifier from iterations ``0..radius`` into a ``width``-bit vector."""
    if len(graph) == 0:
        raise ValueError("empty graph")
    if radius < 0:
        raise ValueError("radius must be non-negative")
    bits = np.zeros(width, dtype=np.uint8)
    for layer in atom_identifiers(graph, radius):
        for ident in layer:
            bits[ident % width] = 1
    return bits


class MorganFingerprinter(TransformerMixin, BaseEstimator):
    """Stateless transformer: SMILES strings → ``(n, width)`` uint8 bit matrix."""

    def __init__(self, radius=2, width=512):
        self.radius = radius
        self.width = width

    def fit(self, X=None, y=None):
        return self

    def transform(self, X):
        return np.stack([morgan_fingerprint(parse(s), self.radius, self.width) for s in X])
