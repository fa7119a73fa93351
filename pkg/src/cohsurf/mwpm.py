"""Minimum-weight perfect matching decoder over Z-plaquette defects.

Defects live on the Z stabilizers; flipping one qubit toggles its (one or
two) adjacent Z faces, so chain lengths are graph distances on the plaquette
adjacency graph.  Qubits with a single Z neighbor sit next to an absorbing
boundary (left/right for this layout): each defect may either pair with
another defect or terminate there.  The matching pairs every defect node
with either another defect or its private boundary copy; boundary copies
pair among themselves for free.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass

import networkx as nx
import numpy as np

from .lattice import CodeLayout, logical_class, syndrome_of
from .metrics import EstimateWithError

__all__ = [
    "MatchingGraph",
    "build_matching_graph",
    "decode",
    "decoded_class",
    "matching_weight",
    "mwpm_error_rate",
    "brute_force_matching_weight",
]


@dataclass(frozen=True)
class _PlaquetteGraph:
    """Distances and BFS trees of the Z-plaquette adjacency graph."""

    dist: np.ndarray  # (n_z, n_z) pairwise chain lengths
    parent: np.ndarray  # (n_z, n_z) parent[src, f]: previous face on the path
    via: np.ndarray  # (n_z, n_z) via[src, f]: qubit stepping parent -> f
    boundary_dist: np.ndarray  # (n_z,) chain length to the nearest boundary
    boundary_parent: np.ndarray  # (n_z,) previous face towards the boundary
    boundary_via: np.ndarray  # (n_z,) qubit for that step
    boundary_qubit: np.ndarray  # (n_z,) absorbing qubit for faces at distance 1


@functools.lru_cache(maxsize=32)
def _plaquette_graph(layout: CodeLayout) -> _PlaquetteGraph:
    n_z = layout.n_z
    face_of_qubit: list[list[int]] = [[] for _ in range(layout.n_qubits)]
    for i, sup in enumerate(layout.z_stabilizers):
        for j in sup:
            face_of_qubit[j].append(i)

    adjacency: list[list[tuple[int, int]]] = [[] for _ in range(n_z)]  # (face, qubit)
    boundary_qubit = np.full(n_z, -1, dtype=int)
    for j, faces in enumerate(face_of_qubit):
        if len(faces) == 2:
            a, b = faces
            adjacency[a].append((b, j))
            adjacency[b].append((a, j))
        elif len(faces) == 1 and boundary_qubit[faces[0]] < 0:
            boundary_qubit[faces[0]] = j

    big = 10**9
    dist = np.full((n_z, n_z), big, dtype=int)
    parent = np.full((n_z, n_z), -1, dtype=int)
    via = np.full((n_z, n_z), -1, dtype=int)
    for src in range(n_z):
        dist[src, src] = 0
        queue = [src]
        while queue:
            nxt = []
            for f in queue:
                for g, j in adjacency[f]:
                    if dist[src, g] > dist[src, f] + 1:
                        dist[src, g] = dist[src, f] + 1
                        parent[src, g] = f
                        via[src, g] = j
                        nxt.append(g)
            queue = nxt

    bdist = np.full(n_z, big, dtype=int)
    bparent = np.full(n_z, -1, dtype=int)
    bvia = np.full(n_z, -1, dtype=int)
    queue = []
    for f in range(n_z):
        if boundary_qubit[f] >= 0:
            bdist[f] = 1
            queue.append(f)
    while queue:
        nxt = []
        for f in queue:
            for g, j in adjacency[f]:
                if bdist[g] > bdist[f] + 1:
                    bdist[g] = bdist[f] + 1
                    bparent[g] = f
                    bvia[g] = j
                    nxt.append(g)
        queue = nxt

    return _PlaquetteGraph(
        dist=dist,
        parent=parent,
        via=via,
        boundary_dist=bdist,
        boundary_parent=bparent,
        boundary_via=bvia,
        boundary_qubit=boundary_qubit,
    )


@dataclass(frozen=True)
class MatchingGraph:
    defects: tuple[int, ...]
    distances: np.ndarray  # pairwise chain lengths between the defects
    boundary: np.ndarray  # chain length from each defect to the nearest boundary


def build_matching_graph(layout: CodeLayout, s: frozenset[int]) -> MatchingGraph:
    g = _plaquette_graph(layout)
    defects = tuple(sorted(s))
    idx = list(defects)
    return MatchingGraph(
        defects=defects,
        distances=g.dist[np.ix_(idx, idx)].copy(),
        boundary=g.boundary_dist[idx].copy(),
    )


def _path_qubits(g: _PlaquetteGraph, src: int, dst: int) -> list[int]:
    qubits = []
    f = dst
    while f != src:
        qubits.append(int(g.via[src, f]))
        f = int(g.parent[src, f])
    return qubits


def _boundary_path_qubits(g: _PlaquetteGraph, src: int) -> list[int]:
    qubits = []
    f = src
    while g.boundary_parent[f] >= 0:
        qubits.append(int(g.boundary_via[f]))
        f = int(g.boundary_parent[f])
    qubits.append(int(g.boundary_qubit[f]))
    return qubits


def _min_weight_pairing(graph: MatchingGraph):
    """Blossom matching over defect nodes plus their boundary copies."""
    n = len(graph.defects)
    nxg = nx.Graph()
    for i in range(n):
        nxg.add_edge(("d", i), ("b", i), weight=int(graph.boundary[i]))
        for k in range(i + 1, n):
            nxg.add_edge(("d", i), ("d", k), weight=int(graph.distances[i, k]))
            nxg.add_edge(("b", i), ("b", k), weight=0)
    matching = nx.min_weight_matching(nxg, weight="weight")
    weight = sum(nxg[a][b]["weight"] for a, b in matching)
    return matching, weight


def decode(layout: CodeLayout, s: frozenset[int]) -> tuple[int, np.ndarray]:
    """Minimum-weight perfect matching correction for syndrome s.

    Returns (q_mwpm, correction) where the correction is a sign string with
    syndrome s realizing the matching as qubit-flip chains and q_mwpm is its
    homology class.
    """
    correction = np.ones(layout.n_qubits, dtype=np.int8)
    if not s:
        return 0, correction
    graph = build_matching_graph(layout, s)
    g = _plaquette_graph(layout)
    defects = graph.defects
    matching, _ = _min_weight_pairing(graph)

    flips = np.zeros(layout.n_qubits, dtype=bool)
    for a, b in matching:
        kinds = {a[0], b[0]}
        if kinds == {"b"}:
            continue
        if kinds == {"d"}:
            qubits = _path_qubits(g, defects[a[1]], defects[b[1]])
        else:
            d_node = a if a[0] == "d" else b
            qubits = _boundary_path_qubits(g, defects[d_node[1]])
        for j in qubits:
            flips[j] ^= True
    correction[flips] = -1
    assert syndrome_of(layout, correction) == s, "matching paths violate the syndrome"
    return logical_class(layout, correction, s), correction


def brute_force_matching_weight(distances: np.ndarray, boundary: np.ndarray) -> int:
    """Exhaustive minimum pairing weight (each defect pairs or terminates).

    Bitmask dynamic program over <= 12 defects; the independent oracle for
    the blossom-based decoder.
    """
    n = len(boundary)
    if n == 0:
        return 0
    memo: dict[int, int] = {0: 0}

    def rec(mask: int) -> int:
        if mask in memo:
            return memo[mask]
        i = (mask & -mask).bit_length() - 1
        rest = mask & ~(1 << i)
        best = boundary[i] + rec(rest)
        m = rest
        while m:
            j = (m & -m).bit_length() - 1
            m &= m - 1
            cand = distances[i, j] + rec(rest & ~(1 << j))
            if cand < best:
                best = cand
        memo[mask] = int(best)
        return memo[mask]

    return rec((1 << n) - 1)


def matching_weight(layout: CodeLayout, s: frozenset[int]) -> int:
    """Total pairing weight of the decoder's matching for syndrome s."""
    if not s:
        return 0
    _, weight = _min_weight_pairing(build_matching_graph(layout, s))
    return int(weight)


def weighted_distances(layout: CodeLayout, qubit_weights) -> MatchingGraph:
    """Optional per-qubit weighting: Dijkstra distances with cost w_j per flip.

    Not used by the default decoder (the standard comparison point is the
    uniform-weight matching); weights like -ln(p_j / (1 - p_j)) go here.
    """
    import heapq

    w = np.asarray(qubit_weights, dtype=float)
    if len(w) != layout.n_qubits:
        raise ValueError("one weight per qubit required")
    n_z = layout.n_z
    adjacency: list[list[tuple[int, float]]] = [[] for _ in range(n_z)]
    boundary_seed = np.full(n_z, np.inf)
    face_of_qubit: list[list[int]] = [[] for _ in range(layout.n_qubits)]
    for i, sup in enumerate(layout.z_stabilizers):
        for j in sup:
            face_of_qubit[j].append(i)
    for j, faces in enumerate(face_of_qubit):
        if len(faces) == 2:
            a, b = faces
            adjacency[a].append((b, w[j]))
            adjacency[b].append((a, w[j]))
        elif len(faces) == 1:
            boundary_seed[faces[0]] = min(boundary_seed[faces[0]], w[j])

    def dijkstra(seed):
        dist = dict(seed)
        heap = [(d, f) for f, d in seed.items()]
        heapq.heapify(heap)
        out = np.full(n_z, np.inf)
        while heap:
            d, f = heapq.heappop(heap)
            if d > dist.get(f, np.inf):
                continue
            out[f] = d
            for g, cost in adjacency[f]:
                nd = d + cost
                if nd < dist.get(g, np.inf):
                    dist[g] = nd
                    heapq.heappush(heap, (nd, g))
        return out

    pair = np.vstack([dijkstra({src: 0.0}) for src in range(n_z)])
    boundary = dijkstra({f: boundary_seed[f] for f in range(n_z) if np.isfinite(boundary_seed[f])})
    faces = tuple(range(n_z))
    return MatchingGraph(defects=faces, distances=pair, boundary=boundary)


@functools.lru_cache(maxsize=100_000)
def decoded_class(layout: CodeLayout, s: frozenset[int]) -> int:
    """The matching decoder's class choice for s (memoized)."""
    q, _ = decode(layout, s)
    return q


def mwpm_error_rate(layout: CodeLayout, records, z_lookup) -> EstimateWithError:
    """Mean failure probability 1 - Z_{q q, s} / P(s) at the decoded class q.

    `z_lookup` maps a syndrome (frozenset) to its ZMatrix.  Sampling draws
    syndromes proportionally to P(s), so the plain mean implements the
    syndrome average.  Flagged contractions are excluded; their count is
    reported on the estimate.
    """
    values = []
    excluded = 0
    for rec in records:
        zm = z_lookup[rec.syndrome]
        if zm.flagged:
            excluded += 1
            continue
        q = decoded_class(layout, rec.syndrome)
        z00, z11 = zm.diagonals()
        zqq = z00 if q == 0 else z11
        values.append(1.0 - zqq / (z00 + z11))
    return EstimateWithError.from_samples(values, excluded=excluded)
