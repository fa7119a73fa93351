"""Rotated surface-code geometry: stabilizers, logicals, syndromes, homology classes.

Conventions
-----------
Data qubits sit on the vertices of an L x M grid, addressed by coordinates
(l, m) with l in 1..L (horizontal) and m in 1..M (vertical).  Flat qubit
indices are column-major, ``j = (l - 1) * M + (m - 1)``, i.e. l is the outer
(slow) index.  This order is also the gate order of the transfer-matrix
circuit, so it is fixed globally.

Stabilizers live on the faces of the grid.  Face (a, b) has its lower-left
corner between qubits, covering the up-to-four qubits in columns {a, a+1} and
rows {b, b+1}.  Faces are checkerboard-colored by the parity of a + b:

* X-type faces have a + b even and exist for 0 <= a <= L, 1 <= b <= M-1.
  Faces with a in {0, L} are weight-2 boundary stabilizers on the left/right
  edges; the rest are weight-4 bulk plaquettes.
* Z-type faces have a + b odd and exist for 1 <= a <= L-1, 0 <= b <= M.
  Faces with b in {0, M} are weight-2 boundary stabilizers on the top/bottom
  edges.

X-error strings therefore terminate without syndrome on the left/right
boundaries, the logical X runs horizontally along the middle row (length L)
and the logical Z vertically along the middle column (length M).

An X-error string is stored as an array of signs eta in {-1, +1}^N, with -1
marking a flipped qubit.  The all-(+1) array is the identity string.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "CodeLayout",
    "build_layout",
    "identity_eta",
    "flip_support",
    "syndrome_of",
    "syndrome_key",
    "reference_string",
    "logical_class",
]


@dataclass(frozen=True)
class CodeLayout:
    """Immutable rotated surface-code layout (safe to share across workers)."""

    L: int
    M: int
    n_qubits: int
    x_stabilizers: tuple[tuple[int, ...], ...]
    z_stabilizers: tuple[tuple[int, ...], ...]
    x_logical: tuple[int, ...]
    z_logical: tuple[int, ...]
    x_faces: tuple[tuple[int, int], ...]  # (a, b) per X stabilizer
    z_faces: tuple[tuple[int, int], ...]  # (a, b) per Z stabilizer
    # parity-check matrix of the Z stabilizers, shape (n_z, N), uint8
    z_matrix: np.ndarray = field(repr=False, compare=False)

    @property
    def n_x(self) -> int:
        return len(self.x_stabilizers)

    @property
    def n_z(self) -> int:
        return len(self.z_stabilizers)

    def qubit_index(self, l: int, m: int) -> int:
        return (l - 1) * self.M + (m - 1)

    def qubit_coords(self, j: int) -> tuple[int, int]:
        return j // self.M + 1, j % self.M + 1

    def to_json(self) -> str:
        """Layout as a JSON document (debugging / plotting aid)."""
        doc = {
            "L": self.L,
            "M": self.M,
            "qubits": [list(self.qubit_coords(j)) for j in range(self.n_qubits)],
            "x_stabilizers": [list(s) for s in self.x_stabilizers],
            "z_stabilizers": [list(s) for s in self.z_stabilizers],
            "x_logical": list(self.x_logical),
            "z_logical": list(self.z_logical),
        }
        return json.dumps(doc, indent=1)


def _face_support(a: int, b: int, L: int, M: int) -> tuple[int, ...]:
    """Qubit indices covered by face (a, b), clipped to the grid."""
    sup = []
    for l in (a, a + 1):
        for m in (b, b + 1):
            if 1 <= l <= L and 1 <= m <= M:
                sup.append((l - 1) * M + (m - 1))
    return tuple(sorted(sup))


def build_layout(L: int, M: int) -> CodeLayout:
    """Construct the rotated surface-code layout with X_L on the middle row.

    Args:
        L: path length of the horizontal logical X (odd, >= 3).
        M: path length of the vertical logical Z (odd, >= 3).
    """
    for name, v in (("L", L), ("M", M)):
        if v < 3 or v % 2 == 0:
            raise ValueError(f"{name} must be an odd integer >= 3, got {v}")

    x_faces = [
        (a, b)
        for a in range(0, L + 1)
        for b in range(1, M)
        if (a + b) % 2 == 0
    ]
    z_faces = [
        (a, b)
        for a in range(1, L)
        for b in range(0, M + 1)
        if (a + b) % 2 == 1
    ]
    x_stabs = tuple(_face_support(a, b, L, M) for a, b in x_faces)
    z_stabs = tuple(_face_support(a, b, L, M) for a, b in z_faces)

    m_mid = (M + 1) // 2
    l_mid = (L + 1) // 2
    x_logical = tuple((l - 1) * M + (m_mid - 1) for l in range(1, L + 1))
    z_logical = tuple((l_mid - 1) * M + (m - 1) for m in range(1, M + 1))

    n = L * M
    hz = np.zeros((len(z_stabs), n), dtype=np.uint8)
    for i, sup in enumerate(z_stabs):
        hz[i, list(sup)] = 1

    return CodeLayout(
        L=L,
        M=M,
        n_qubits=n,
        x_stabilizers=x_stabs,
        z_stabilizers=z_stabs,
        x_logical=x_logical,
        z_logical=z_logical,
        x_faces=tuple(x_faces),
        z_faces=tuple(z_faces),
        z_matrix=hz,
    )


def identity_eta(layout: CodeLayout) -> np.ndarray:
    """The identity error string: all signs +1."""
    return np.ones(layout.n_qubits, dtype=np.int8)


def flip_support(eta: np.ndarray, support) -> np.ndarray:
    """Return a copy of eta with the signs on `support` flipped."""
    out = eta.copy()
    out[list(support)] *= -1
    return out


def syndrome_of(layout: CodeLayout, eta: np.ndarray) -> frozenset[int]:
    """Z-stabilizer indices flipped by the X string eta.

    Stabilizer p is flipped iff its support holds an odd number of -1 signs.
    """
    if len(eta) != layout.n_qubits:
        raise ValueError(f"eta has length {len(eta)}, expected {layout.n_qubits}")
    flips = (np.asarray(eta) < 0).astype(np.uint8)
    bits = layout.z_matrix @ flips & 1
    return frozenset(np.flatnonzero(bits).tolist())


def syndrome_key(s: frozenset[int]) -> int:
    """Canonical integer encoding of a syndrome (bit i = stabilizer i flipped)."""
    k = 0
    for i in s:
        k |= 1 << i
    return k


def reference_string(layout: CodeLayout, s: frozenset[int]) -> np.ndarray:
    """Deterministic X string with syndrome s.

    Each defect (a, b) is routed to the right boundary by the horizontal qubit
    chain in row min(b, M-1) + 1, columns a+1..L; overlapping segments cancel.
    Flipping qubit (c+1, f+1) moves a defect from face (c, f) to (c+1, f+1)
    and from (c, f+1) to (c+1, f), so the chain walks the defect in a zigzag
    between heights f and f+1 until it is absorbed at the right edge.
    """
    flips = np.zeros(layout.n_qubits, dtype=bool)
    for p in sorted(s):
        a, b = layout.z_faces[p]
        row = min(b, layout.M - 1) + 1
        for l in range(a + 1, layout.L + 1):
            j = (l - 1) * layout.M + (row - 1)
            flips[j] ^= True
    eta = np.ones(layout.n_qubits, dtype=np.int8)
    eta[flips] = -1
    return eta


def logical_class(layout: CodeLayout, eta: np.ndarray, s: frozenset[int]) -> int:
    """Homology class q in {0, 1} of eta relative to reference_string(s).

    q is the parity of the number of qubits on the logical-Z path where eta
    disagrees with the reference string.  Requires syndrome_of(eta) == s.
    """
    actual = syndrome_of(layout, eta)
    if actual != s:
        raise ValueError(f"eta has syndrome {sorted(actual)}, expected {sorted(s)}")
    ref = reference_string(layout, s)
    zl = list(layout.z_logical)
    return int(np.sum(np.asarray(eta)[zl] != ref[zl]) % 2)
