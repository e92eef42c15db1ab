"""Constraint bags as dataflow graphs.

Each constraint `(m1, m2) |> m3` contributes three vertices (left, middle,
result) and two directed bind edges (left -> result, middle -> result).
Vertices carrying the same variable are linked by equality edges; the subset
of those that run from one constraint's result into another's argument are
*flow edges* — they witness how an intermediate computation is produced and
then consumed.

A bag is unambiguous when some choice of flow edges covers every vertex
holding an open variable without creating a path from any constraint's
result back into its own arguments.  The chosen subgraph is the bag's core;
each chosen edge has a canonical interpretation as a composite of the two
binds it connects, which is what coherence checking evaluates.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from .syntax import Constraint, MVar, MonadicType


@dataclass(frozen=True)
class Vertex:
    cid: int
    slot: int  # 0 = left argument, 1 = middle argument, 2 = result


@dataclass(frozen=True)
class FlowEdge:
    src: Vertex  # always a result vertex
    dst: Vertex  # an argument vertex of a different constraint


@dataclass
class ConstraintGraph:
    bag: list[Constraint]
    vertices: list[Vertex]
    assign: dict[Vertex, MonadicType]
    bind_edges: list[tuple[Vertex, Vertex]]
    eq_edges: list[tuple[Vertex, Vertex]]
    flow_edges: list[FlowEdge]

    def constraint(self, cid: int) -> Constraint:
        for c in self.bag:
            if c.cid == cid:
                return c
        raise KeyError(cid)


def build_graph(bag: list[Constraint]) -> ConstraintGraph:
    vertices: list[Vertex] = []
    assign: dict[Vertex, MonadicType] = {}
    bind_edges: list[tuple[Vertex, Vertex]] = []
    by_var: dict[int, list[Vertex]] = {}
    for c in bag:
        vs = [Vertex(c.cid, 0), Vertex(c.cid, 1), Vertex(c.cid, 2)]
        for v, m in zip(vs, (c.left, c.middle, c.result)):
            vertices.append(v)
            assign[v] = m
            if isinstance(m, MVar):
                by_var.setdefault(m.ident, []).append(v)
        bind_edges.append((vs[0], vs[2]))
        bind_edges.append((vs[1], vs[2]))

    eq_edges: list[tuple[Vertex, Vertex]] = []
    flow_edges: list[FlowEdge] = []
    for ident, group in by_var.items():
        for i in range(len(group)):
            for j in range(i + 1, len(group)):
                a, b = group[i], group[j]
                eq_edges.append((a, b))
                for src, dst in ((a, b), (b, a)):
                    if src.slot == 2 and dst.slot != 2 and src.cid != dst.cid:
                        flow_edges.append(FlowEdge(src, dst))
    return ConstraintGraph(list(bag), vertices, assign, bind_edges, eq_edges,
                           flow_edges)


def _open_vertices(g: ConstraintGraph, protected: set[int]) -> list[Vertex]:
    out = []
    for v in g.vertices:
        m = g.assign[v]
        if isinstance(m, MVar) and m.ident not in protected:
            out.append(v)
    return out


def _violation_flow_edges(g: ConstraintGraph, chosen: frozenset[int]
                          ) -> Optional[list[int]]:
    """Is there a path from some constraint's result vertex back to one of
    its own argument vertices?  Bind edges are directed; chosen flow edges
    connect both ways.  Returns the flow-edge indexes along one violating
    path, or None if the subgraph is sound."""
    adj: dict[Vertex, list[tuple[Vertex, Optional[int]]]] = {}

    def add(a: Vertex, b: Vertex, idx: Optional[int]) -> None:
        adj.setdefault(a, []).append((b, idx))

    for a, b in g.bind_edges:
        add(a, b, None)
    for i in sorted(chosen):
        e = g.flow_edges[i]
        add(e.src, e.dst, i)
        add(e.dst, e.src, i)

    for c in g.bag:
        start = Vertex(c.cid, 2)
        targets = {Vertex(c.cid, 0), Vertex(c.cid, 1)}
        parent: dict[Vertex, tuple[Vertex, Optional[int]]] = {}
        stack = [start]
        seen = {start}
        hit: Optional[Vertex] = None
        while stack and hit is None:
            v = stack.pop()
            for w, idx in adj.get(v, []):
                if w in targets:
                    parent[w] = (v, idx)
                    hit = w
                    break
                if w not in seen:
                    seen.add(w)
                    parent[w] = (v, idx)
                    stack.append(w)
        if hit is not None:
            edges: list[int] = []
            node = hit
            while node != start:
                node, idx = parent[node]
                if idx is not None:
                    edges.append(idx)
            return edges
    return None


def find_core(g: ConstraintGraph, protected: set[int]
              ) -> Optional[list[FlowEdge]]:
    """Choose flow edges covering every open vertex without letting any
    constraint observe its own result.  Returns the chosen edges, or None
    when no such choice exists (the bag is ambiguous)."""
    open_vs = _open_vertices(g, protected)
    incident: dict[Vertex, list[int]] = {v: [] for v in open_vs}
    for i, e in enumerate(g.flow_edges):
        for v in (e.src, e.dst):
            if v in incident:
                incident[v].append(i)
    if any(not ids for ids in incident.values()):
        return None

    failed: set[frozenset[int]] = set()

    def search(chosen: frozenset[int]) -> Optional[frozenset[int]]:
        if chosen in failed:
            return None
        if any(not (set(ids) & chosen) for ids in incident.values()):
            failed.add(chosen)
            return None
        bad = _violation_flow_edges(g, chosen)
        if bad is None:
            return chosen
        for i in bad:
            got = search(chosen - {i})
            if got is not None:
                return got
        failed.add(chosen)
        return None

    got = search(frozenset(range(len(g.flow_edges))))
    if got is None:
        return None
    return [g.flow_edges[i] for i in sorted(got)]


def unambiguous(bag: list[Constraint], protected: set[int]) -> bool:
    return find_core(build_graph(bag), protected) is not None


def ambiguity_witness(bag: list[Constraint], protected: set[int]) -> Optional[str]:
    """None when the bag is unambiguous, else the name of an open variable
    that cannot sit on any coherent flow."""
    g = build_graph(bag)
    if find_core(g, protected) is not None:
        return None
    open_vs = _open_vertices(g, protected)
    covered = set()
    for e in g.flow_edges:
        covered.add(e.src)
        covered.add(e.dst)
    for v in open_vs:
        if v not in covered:
            m = g.assign[v]
            assert isinstance(m, MVar)
            return f"v{m.ident}"
    for v in open_vs:
        m = g.assign[v]
        assert isinstance(m, MVar)
        return f"v{m.ident}"
    return "(none)"


@dataclass(frozen=True)
class FlowInterp:
    """How a flow edge composes its two binds.

    position 0 (the produced computation is the consumer's left argument):
        (x, y, z) -> outer(inner(x, y), z)
    position 1 (it is produced inside the consumer's continuation):
        (x, y, z) -> outer(x, lambda a: inner(y(a), z))
    """
    inner_cid: int
    outer_cid: int
    position: int


def flow_interpretation(g: ConstraintGraph, edge: FlowEdge) -> FlowInterp:
    if edge.src.slot != 2 or edge.dst.slot not in (0, 1):
        raise ValueError("not a flow edge")
    return FlowInterp(edge.src.cid, edge.dst.cid, edge.dst.slot)
