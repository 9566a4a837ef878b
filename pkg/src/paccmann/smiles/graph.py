"""Molecular graphs: SMILES parsing, randomized serialization and augmentation."""

from __future__ import annotations

import hashlib
import re
from dataclasses import dataclass, field
from typing import Optional

import networkx as nx
import numpy as np

from ..errors import DisconnectedGraph, ParseError, SmilesError
from .tokenizer import tokenize

AROMATIC = 4  # bond-order code for aromatic bonds

ORGANIC = {"B", "C", "N", "O", "P", "S", "F", "Cl", "Br", "I"}
AROMATIC_ORGANIC = {"b", "c", "n", "o", "p", "s"}
AROMATIC_BRACKET = AROMATIC_ORGANIC | {"se", "as", "te"}
ELEMENTS = set(
    "H He Li Be B C N O F Ne Na Mg Al Si P S Cl Ar K Ca Sc Ti V Cr Mn Fe Co Ni Cu "
    "Zn Ga Ge As Se Br Kr Rb Sr Y Zr Nb Mo Tc Ru Rh Pd Ag Cd In Sn Sb Te I Xe Cs "
    "Ba La Ce Pr Nd Pm Sm Eu Gd Tb Dy Ho Er Tm Yb Lu Hf Ta W Re Os Ir Pt Au Hg Tl "
    "Pb Bi Po At Rn Fr Ra Ac Th Pa U Np Pu Am Cm Bk Cf Es Fm Md No Lr".split()
)
# default valences of the organic subset, used for implicit hydrogens
VALENCES = {
    "B": (3,), "C": (4,), "N": (3, 5), "O": (2,), "P": (3, 5),
    "S": (2, 4, 6), "F": (1,), "Cl": (1,), "Br": (1,), "I": (1,),
}
BOND_SYMBOLS = {"-": 1, "=": 2, "#": 3, ":": AROMATIC, "/": 1, "\\": 1}

_BRACKET = re.compile(
    r"^(?P<iso>\d+)?"
    r"(?P<sym>[A-Z][a-z]?|[a-z][a-z]?)"
    r"(?P<chiral>@@?(?:TH[12]|AL[12]|SP[1-3]|TB\d{1,2}|OH\d{1,2})?)?"
    r"(?P<h>H\d*)?"
    r"(?P<chg>\+\d+|-\d+|\++|-+)?"
    r"(?::\d+)?$"
)


@dataclass(frozen=True)
class Atom:
    element: str
    aromatic: bool = False
    charge: int = 0
    hcount: Optional[int] = None  # None: organic-subset atom with implicit hydrogens
    isotope: Optional[int] = None

    @property
    def bracket(self) -> bool:
        return self.hcount is not None


@dataclass
class MolecularGraph:
    atoms: list[Atom] = field(default_factory=list)
    bonds: list[tuple[int, int, int]] = field(default_factory=list)

    def __post_init__(self):
        self._adj = None

    def __len__(self):
        return len(self.atoms)

    def add_atom(self, atom: Atom) -> int:
        self.atoms.append(atom)
        self._adj = None
        return len(self.atoms) - 1

    def add_bond(self, a: int, b: int, order: int):
        if a == b:
            raise ValueError("self-bond")
        if not (0 <= a < len(self.atoms) and 0 <= b < len(self.atoms)):
            raise ValueError("bond endpoint out of range")
        a, b = min(a, b), max(a, b)
        if any(x == a and y == b for x, y, _ in self.bonds):
            raise ValueError(f"duplicate bond {a}-{b}")
        self.bonds.append((a, b, order))
        self._adj = None

    def neighbors(self, i: int) -> list[tuple[int, int]]:
        if self._adj is None:
            adj = [[] for _ in self.atoms]
            for a, b, order in self.bonds:
                adj[a].append((b, order))
                adj[b].append((a, order))
            self._adj = adj
        return self._adj[i]

    def degree(self, i: int) -> int:
        return len(self.neighbors(i))

    def hydrogens(self, i: int) -> int:
        """Total hydrogen count: explicit for bracket atoms, implied by valence otherwise."""
        atom = self.atoms[i]
        if atom.hcount is not None:
            return atom.hcount
        used = sum(1 if order == AROMATIC else order for _, order in self.neighbors(i))
        if atom.aromatic:
            used += 1
        for valence in VALENCES.get(atom.element, ()):
            if valence >= used:
                return valence - used
        return 0

    def components(self) -> list[list[int]]:
        seen = [False] * len(self.atoms)
        out = []
        for root in range(len(self.atoms)):
            if seen[root]:
                continue
            comp, stack = [], [root]
            seen[root] = True
            while stack:
                u = stack.pop()
                comp.append(u)
                for v, _ in self.neighbors(u):
                    if not seen[v]:
                        seen[v] = True
                        stack.append(v)
            out.append(sorted(comp))
        return out

    def is_connected(self) -> bool:
        return len(self.atoms) > 0 and len(self.components()) == 1

    def subgraph(self, nodes: list[int]) -> "MolecularGraph":
        remap = {old: new for new, old in enumerate(nodes)}
        sub = MolecularGraph([self.atoms[i] for i in nodes])
        for a, b, order in self.bonds:
            if a in remap and b in remap:
                sub.add_bond(remap[a], remap[b], order)
        return sub


def _parse_bracket(token: str, pos: int) -> Atom:
    m = _BRACKET.match(token[1:-1])
    if not m:
        raise ParseError(f"bad bracket atom {token!r}", pos)
    sym = m["sym"]
    aromatic = sym.islower()
    if aromatic:
        if sym not in AROMATIC_BRACKET:
            raise ParseError(f"unknown aromatic element {sym!r}", pos)
        element = sym.capitalize()
    else:
        element = sym
        if element not in ELEMENTS:
            raise ParseError(f"unknown element {sym!r}", pos)
    h = m["h"]
    hcount = 0 if h is None else (int(h[1:]) if len(h) > 1 else 1)
    chg = m["chg"]
    if chg is None:
        charge = 0
    elif chg[-1].isdigit():
        charge = int(chg)
    else:
        charge = len(chg) * (1 if chg[0] == "+" else -1)
    iso = int(m["iso"]) if m["iso"] else None
    return Atom(element, aromatic, charge, hcount, iso)


def parse(smiles: str) -> MolecularGraph:
    """Parse SMILES into a :class:`MolecularGraph`. Stereo markers are dropped."""
    graph = MolecularGraph()
    prev: Optional[int] = None
    pending: Optional[tuple[int, int]] = None  # (order, position)
    stack: list[Optional[int]] = []
    rings: dict[str, tuple[int, Optional[int], int]] = {}

    def default_order(a, b):
        if graph.atoms[a].aromatic and graph.atoms[b].aromatic:
            return AROMATIC
        return 1

    def bond(a, b, order, where):
        try:
            graph.add_bond(a, b, order)
        except ValueError as exc:
            raise ParseError(str(exc), where) from None

    pos = 0
    for tok in tokenize(smiles):
        where = pos
        pos += len(tok)
        if tok[0] == "[" or tok in ORGANIC or tok in AROMATIC_ORGANIC:
            if tok[0] == "[":
                atom = _parse_bracket(tok, where)
            elif tok in AROMATIC_ORGANIC:
                atom = Atom(tok.upper(), aromatic=True)
            else:
                atom = Atom(tok)
            idx = graph.add_atom(atom)
            if prev is not None:
                order = pending[0] if pending else default_order(prev, idx)
                bond(prev, idx, order, where)
            elif pending:
                raise ParseError("bond without a preceding atom", pending[1])
            pending = None
            prev = idx
        elif tok in BOND_SYMBOLS:
            if prev is None or pending is not None:
                raise ParseError(f"dangling bond {tok!r}", where)
            pending = (BOND_SYMBOLS[tok], where)
        elif tok == "(":
            if prev is None or pending is not None:
                raise ParseError("branch without a preceding atom", where)
            stack.append(prev)
        elif tok == ")":
            if pending is not None:
                raise ParseError("dangling bond before ')'", pending[1])
            prev = stack.pop()
        elif tok == ".":
            if pending is not None or prev is None:
                raise ParseError("misplaced '.'", where)
            prev = None
        elif tok[0] == "%" or tok.isdigit():
            if prev is None:
                raise ParseError("ring closure without an atom", where)
            order = pending[0] if pending else None
            if tok in rings:
                other, open_order, _ = rings.pop(tok)
                if order is not None and open_order is not None and order != open_order:
                    raise ParseError(f"conflicting ring bond for {tok}", where)
                order = order or open_order or default_order(other, prev)
                bond(other, prev, order, where)
            else:
                rings[tok] = (prev, order, where)
            pending = None
        else:
            raise ParseError(f"unsupported token {tok!r}", where)
    if pending is not None:
        raise ParseError("dangling bond at end of string", pending[1])
    if rings:
        digit, (_, _, where) = next(iter(rings.items()))
        raise ParseError(f"unpaired ring closure {digit}", where)
    if not graph.atoms:
        raise ParseError("no atoms", 0)
    return graph


def _atom_text(atom: Atom) -> str:
    sym = atom.element.lower() if atom.aromatic else atom.element
    if atom.hcount is None:
        return sym
    parts = ["[", str(atom.isotope) if atom.isotope is not None else "", sym]
    if atom.hcount:
        parts.append("H" if atom.hcount == 1 else f"H{atom.hcount}")
    if atom.charge:
        sign = "+" if atom.charge > 0 else "-"
        parts.append(sign if abs(atom.charge) == 1 else f"{sign}{abs(atom.charge)}")
    parts.append("]")
    return "".join(parts)


def _bond_text(graph: MolecularGraph, a: int, b: int, order: int) -> str:
    both_aromatic = graph.atoms[a].aromatic and graph.atoms[b].aromatic
    if order == 1:
        return "-" if both_aromatic else ""
    if order == AROMATIC:
        return "" if both_aromatic else ":"
    return "=" if order == 2 else "#"


def _ring_label(d: int) -> str:
    return str(d) if d < 10 else f"%{d:02d}"


def serialize(graph: MolecularGraph, start_atom: int = 0, rng=None) -> str:
    """Write a connected graph as SMILES by depth-first traversal from ``start_atom``.

    Neighbor visiting order is shuffled with ``rng`` (a numpy Generator) when given.
    """
    n = len(graph)
    if not graph.is_connected():
        raise DisconnectedGraph("cannot serialize a disconnected or empty graph")
    if not 0 <= start_atom < n:
        raise IndexError(f"start atom {start_atom} out of range")

    rank = [-1] * n
    children: list[list[tuple[int, int]]] = [[] for _ in range(n)]
    ring_edges: dict[frozenset, int] = {}

    def visit(u, parent):
        rank[u] = visit.counter
        visit.counter += 1
        nbrs = [(v, o) for v, o in graph.neighbors(u) if v != parent]
        if rng is not None and len(nbrs) > 1:
            nbrs = [nbrs[k] for k in rng.permutation(len(nbrs))]
        for v, order in nbrs:
            if rank[v] < 0:
                children[u].append((v, order))
                visit(v, u)
            else:
                ring_edges.setdefault(frozenset((u, v)), order)

    visit.counter = 0
    visit(start_atom, -1)

    events: list[list[tuple[int, int, int]]] = [[] for _ in range(n)]
    for edge, order in ring_edges.items():
        a, b = sorted(edge, key=rank.__getitem__)
        events[a].append((rank[b], b, order))
        events[b].append((rank[a], a, order))

    open_digits: dict[frozenset, int] = {}
    in_use: set[int] = set()

    def emit(u, out):
        out.append(_atom_text(graph.atoms[u]))
        closing, opening = [], []
        for _, v, order in sorted(events[u]):
            (closing if rank[v] < rank[u] else opening).append((v, order))
        freed = []
        for v, _ in sorted(closing, key=lambda e: open_digits[frozenset((u, e[0]))]):
            d = open_digits.pop(frozenset((u, v)))
            out.append(_ring_label(d))
            freed.append(d)
        for v, order in opening:
            d = 1
            while d in in_use:
                d += 1
            in_use.add(d)
            open_digits[frozenset((u, v))] = d
            out.append(_bond_text(graph, u, v, order) + _ring_label(d))
        in_use.difference_update(freed)
        kids = children[u]
        for i, (v, order) in enumerate(kids):
            last = i == len(kids) - 1
            if not last:
                out.append("(")
            out.append(_bond_text(graph, u, v, order))
            emit(v, out)
            if not last:
                out.append(")")

    out: list[str] = []
    emit(start_atom, out)
    return "".join(out)


def random_smiles(graph: MolecularGraph, rng) -> str:
    """One randomized serialization; disconnected fragments are joined with '.'."""
    parts = []
    for comp in graph.components():
        sub = graph.subgraph(comp) if len(comp) < len(graph) else graph
        parts.append(serialize(sub, int(rng.integers(len(sub))), rng))
    return ".".join(parts)


def augment(smiles: str, n: int, seed=None) -> list[str]:
    """Return up to ``n`` distinct SMILES for the molecule, ``smiles`` itself first.

    Draws random (start atom, neighbor order) serializations, rejecting
    duplicates, for at most ``10 * n`` attempts.
    """
    if n < 1:
        raise ValueError("n must be positive")
    graph = parse(smiles)
    rng = np.random.default_rng(seed)
    out, seen = [smiles], {smiles}
    attempts = 0
    while len(out) < n and attempts < 10 * n:
        attempts += 1
        variant = random_smiles(graph, rng)
        if variant not in seen:
            seen.add(variant)
            out.append(variant)
    return out


def _atom_label(graph: MolecularGraph, i: int):
    a = graph.atoms[i]
    return (a.element, a.aromatic, a.charge, graph.hydrogens(i), a.isotope)


def refinement_signature(graph: MolecularGraph) -> list[str]:
    """Sorted per-atom colors after iterative neighborhood refinement.

    Colors are digests of (own color, sorted (bond order, neighbor color)),
    so signatures are comparable between graphs. Equal signatures are
    necessary, not sufficient, for isomorphism.
    """
    colors = [repr(_atom_label(graph, i)) for i in range(len(graph))]
    n_classes = len(set(colors))
    for _ in range(len(graph)):
        colors = [
            hashlib.sha1(
                repr((colors[i], sorted((o, colors[j]) for j, o in graph.neighbors(i)))).encode()
            ).hexdigest()
            for i in range(len(graph))
        ]
        if len(set(colors)) == n_classes:
            break
        n_classes = len(set(colors))
    return sorted(colors)


def _to_networkx(graph: MolecularGraph):
    G = nx.Graph()
    for i in range(len(graph)):
        G.add_node(i, label=_atom_label(graph, i))
    for a, b, o in graph.bonds:
        G.add_edge(a, b, order=o)
    return G


def is_isomorphic(g1: MolecularGraph, g2: MolecularGraph) -> bool:
    """Labelled-graph isomorphism (element, aromaticity, charge, H count, isotope, bond order)."""
    if len(g1) != len(g2) or len(g1.bonds) != len(g2.bonds):
        return False
    if refinement_signature(g1) != refinement_signature(g2):
        return False
    return nx.is_isomorphic(
        _to_networkx(g1), _to_networkx(g2),
        node_match=lambda x, y: x["label"] == y["label"],
        edge_match=lambda x, y: x["order"] == y["order"],
    )


__all__ = [
    "AROMATIC", "Atom", "MolecularGraph", "SmilesError", "augment", "is_isomorphic",
    "parse", "random_smiles", "refinement_signature", "serialize",
]
