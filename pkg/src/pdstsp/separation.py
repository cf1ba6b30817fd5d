"""Separation of subtour elimination and 2-matching inequalities.

All routines work on the support graph of an LP point. The depot (0) and
its copy (n + 1) are the same physical location, so for connectivity they
are treated as one vertex: a component "contains the depot" when it holds
either of them, and the global minimum cut never separates them.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .model import CutCandidate, VarIndex, sec_rows, two_matching_row

SUPPORT_EPS = 1e-7
VIOLATION_TOL = 1e-6


@dataclass(frozen=True)
class SupportGraph:
    """Vertices with positive visit value plus both depot vertices, and the
    edges with positive flow (weights are the x values)."""

    n: int
    vertices: np.ndarray
    ei: np.ndarray
    ej: np.ndarray
    weight: np.ndarray
    y: np.ndarray

    @property
    def n_vertices(self) -> int:
        return self.n + 2

    def in_support(self) -> np.ndarray:
        mask = np.zeros(self.n + 2, dtype=bool)
        mask[self.vertices] = True
        return mask


def build_support(vi: VarIndex, values, eps: float = SUPPORT_EPS) -> SupportGraph:
    values = np.asarray(values, dtype=np.float64)
    n = vi.instance.n
    x = values[: vi.n_edges]
    y = values[vi.y_start: vi.y_start + n + 2].copy()
    keep = x > eps
    vmask = y > eps
    vmask[0] = vmask[n + 1] = True
    return SupportGraph(
        n=n,
        vertices=np.flatnonzero(vmask),
        ei=vi.edge_i[keep],
        ej=vi.edge_j[keep],
        weight=x[keep],
        y=y,
    )


def find_components(g: SupportGraph) -> list[tuple[int, ...]]:
    """Connected components of the support graph, ordered by smallest
    vertex; the depot and its copy always share a component."""
    ei = np.append(g.ei, 0).astype(np.int64)
    ej = np.append(g.ej, g.n + 1).astype(np.int64)
    labels = kernels.bfs_components(g.n + 2, ei, ej, np.ones(len(ei), dtype=bool))
    groups: dict[int, list[int]] = {}
    for v in g.vertices.tolist():
        groups.setdefault(int(labels[v]), []).append(v)
    return [tuple(vs) for _, vs in sorted(groups.items(), key=lambda kv: kv[1][0])]


def subtour_sets(g: SupportGraph) -> list[tuple[int, ...]]:
    """Components away from the depot with at least three customers, when
    the support graph is disconnected."""
    comps = find_components(g)
    if len(comps) < 2:
        return []
    depot = {0, g.n + 1}
    return [c for c in comps if not depot & set(c) and len(c) >= 3]


def min_cut(g: SupportGraph) -> tuple[tuple[int, ...], float]:
    """Global minimum cut of the support graph.

    Returns the shore without the depot (as original vertex ids) and the cut
    weight.
    """
    n = g.n
    # compact ids: depot and its copy collapse onto node 0
    verts = [v for v in g.vertices.tolist() if v not in (0, n + 1)]
    pos = {v: k + 1 for k, v in enumerate(verts)}
    pos[0] = pos[n + 1] = 0
    size = len(verts) + 1
    w = np.zeros((size, size))
    for a, b, x in zip(g.ei.tolist(), g.ej.tolist(), g.weight.tolist()):
        p, q = pos[a], pos[b]
        if p != q:
            w[p, q] += x
            w[q, p] += x
    if size < 2:
        return (), 0.0
    value, side = kernels.stoer_wagner(w)
    if side[0]:
        side = ~side
    S = tuple(sorted(verts[k - 1] for k in np.flatnonzero(side) if k > 0))
    return S, value


def sec_candidates(vi: VarIndex, values, sets, integral: bool) -> list[CutCandidate]:
    """Lighter SEC rows for ``sets`` that ``values`` violates."""
    out = []
    for S in sets:
        if len(S) < 3:
            continue
        family, row = sec_rows(S, vi, values, integral=integral)
        viol = row.violation(values)
        if viol > VIOLATION_TOL:
            out.append(CutCandidate(family, tuple(S), row, viol))
    return out


@dataclass(frozen=True)
class MatchingSupport:
    matching: tuple[tuple[int, int], ...]
    H: tuple[int, ...]
    H_prime: tuple[int, ...]
    E_prime: tuple[tuple[int, int], ...]
    violation: float


def separate_two_matching(g: SupportGraph, tol: float = VIOLATION_TOL) -> list[MatchingSupport]:
    """Greedy 2-matching separation.

    Edges are scanned by decreasing value (ties lexicographic) to build a
    matching; handles are the components of the support graph without the
    matching edges; the teeth are the matching edges leaving each handle.
    Handles touching the depot are skipped.
    """
    nv = g.n + 2
    order = np.lexsort((g.ej, g.ei, -g.weight))
    ei = g.ei[order].astype(np.int64)
    ej = g.ej[order].astype(np.int64)
    w = g.weight[order]
    mate, chosen = kernels.greedy_matching(ei, ej, nv)
    labels = kernels.bfs_components(nv, ei, ej, ~chosen)
    n_labels = int(labels.max()) + 1 if nv else 0

    mate_w = np.zeros(nv)
    mate_w[ei[chosen]] = w[chosen]
    mate_w[ej[chosen]] = w[chosen]

    in_star = g.in_support()
    same = labels[ei] == labels[ej]
    inside = np.bincount(labels[ei[same]], weights=w[same], minlength=n_labels)
    verts = np.flatnonzero(in_star)
    y_sum = np.bincount(labels[verts], weights=g.y[verts], minlength=n_labels)
    has_mate = mate >= 0
    tooth = np.zeros(nv, dtype=bool)
    tooth[has_mate] = labels[mate[has_mate]] != labels[has_mate]
    tooth &= in_star
    tooth_count = np.bincount(labels[tooth], minlength=n_labels)
    tooth_sum = np.bincount(labels[tooth], weights=mate_w[tooth], minlength=n_labels)
    violation = inside + tooth_sum - y_sum - (tooth_count - 1) / 2.0

    ok = (tooth_count >= 3) & (tooth_count % 2 == 1) & (violation > tol)
    ok[labels[0]] = False
    ok[labels[nv - 1]] = False
    found = []
    if not ok.any():
        return found
    matching = tuple(zip(ei[chosen].tolist(), ej[chosen].tolist()))
    for lab in np.flatnonzero(ok).tolist():
        H = tuple(np.flatnonzero((labels == lab) & in_star).tolist())
        Hp = tuple(v for v in H if tooth[v])
        Ep = tuple((min(v, int(mate[v])), max(v, int(mate[v]))) for v in Hp)
        found.append(MatchingSupport(matching, H, Hp, Ep, float(violation[lab])))
    return found


def two_matching_candidates(vi: VarIndex, values, g: SupportGraph | None = None) -> list[CutCandidate]:
    if g is None:
        g = build_support(vi, values)
    out = []
    for sup in separate_two_matching(g):
        row = two_matching_row(sup.H, sup.H_prime, sup.E_prime, vi)
        viol = row.violation(values)
        if viol > VIOLATION_TOL:
            out.append(CutCandidate("2MC", (sup.H, sup.H_prime, sup.E_prime), row, viol))
    return out


def is_integral(vi: VarIndex, values, tol: float = 1e-6) -> bool:
    v = np.asarray(values)[: vi.t_max]
    return bool(np.all(np.abs(v - np.round(v)) <= tol))
