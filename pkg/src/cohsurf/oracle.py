"""Ground-truth engine for small codes: dense density-matrix simulation.

Two independent paths compute the coefficient block of every syndrome:

* `exact_z` evolves the full 2^N x 2^N density matrix of the logical-zero
  state through the product channel and sandwiches it between corrected
  basis states;
* `coset_z` sums the channel coefficients over the stabilizer coset of
  X-strings directly (feasible for d = 3).

They cross-check each other before either validates the transfer-matrix
contraction.  Everything here is deliberately simple numpy with no shared
code with the production circuit.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass

import numpy as np

from .channel import ErrorChannelParams
from .lattice import CodeLayout, flip_support, reference_string, syndrome_key

__all__ = [
    "DenseState",
    "logical_zero_vector",
    "logical_zero",
    "apply_channel",
    "exact_z",
    "exact_z_table",
    "coset_z",
    "write_golden_table",
]

_N_CAP = 13  # 2^13 x 2^13 dense matrices: minutes, not hours


def _check_size(layout: CodeLayout):
    if layout.n_qubits > _N_CAP:
        raise ValueError(
            f"dense oracle capped at {_N_CAP} qubits, layout has {layout.n_qubits}"
        )


@dataclass
class DenseState:
    """Full density matrix over the qubit register (qubit j = bit j)."""

    matrix: np.ndarray

    def validate(self, atol: float = 1e-12):
        m = self.matrix
        assert np.allclose(m, m.conj().T, atol=atol), "not Hermitian"
        assert abs(np.trace(m) - 1.0) < 1e-10, "trace != 1"
        eigs = np.linalg.eigvalsh(m)
        assert eigs.min() > -1e-12, "not positive semidefinite"

    def stabilizer_expectation(self, support) -> float:
        n = int(round(math.log2(self.matrix.shape[0])))
        mask = _xor_mask(support)
        ix = np.arange(2**n) ^ mask
        return float(np.real(np.trace(self.matrix[:, ix])))


def _xor_mask(support) -> int:
    mask = 0
    for j in support:
        mask |= 1 << j
    return mask


def logical_zero_vector(layout: CodeLayout) -> np.ndarray:
    """Normalized logical-zero state vector: the uniform stabilizer orbit of |0...0>."""
    _check_size(layout)
    dim = 2**layout.n_qubits
    psi = np.zeros(dim, dtype=complex)
    psi[0] = 1.0
    idx = np.arange(dim)
    for sup in layout.x_stabilizers:
        psi = psi + psi[idx ^ _xor_mask(sup)]
    return psi / 2 ** (layout.n_x / 2)


def logical_zero(layout: CodeLayout) -> DenseState:
    psi = logical_zero_vector(layout)
    return DenseState(matrix=np.outer(psi, psi.conj()))


def apply_channel(state: DenseState, params: ErrorChannelParams) -> DenseState:
    """Apply the product X-error channel qubit by qubit; trace preserved."""
    rho = state.matrix
    n = int(round(math.log2(rho.shape[0])))
    if params.n not in (1, n):
        raise ValueError("parameter table does not match the register")
    p = np.broadcast_to(params.p, (n,))
    g = np.broadcast_to(params.gamma, (n,))
    idx = np.arange(rho.shape[0])
    for j in range(n):
        ix = idx ^ (1 << j)
        x_rho = rho[ix, :]
        rho_x = rho[:, ix]
        c = g[j] * math.sqrt(p[j] * (1 - p[j]))
        rho = (1 - p[j]) * rho + p[j] * x_rho[:, ix] + 1j * c * (x_rho - rho_x)
    return DenseState(matrix=rho)


def _class_masks(layout: CodeLayout, s: frozenset[int]) -> tuple[int, int]:
    """XOR masks of the class-0 and class-1 representative strings of s."""
    eta0 = reference_string(layout, s)
    eta1 = flip_support(eta0, layout.x_logical)
    m0 = _xor_mask(np.flatnonzero(eta0 < 0).tolist())
    m1 = _xor_mask(np.flatnonzero(eta1 < 0).tolist())
    return m0, m1


def exact_z(
    layout: CodeLayout, params: ErrorChannelParams, s: frozenset[int], q: int, qbar: int
) -> complex:
    """<0_L| X_L^q C_s E[rho_0] C_s X_L^qbar |0_L> by dense evolution."""
    _check_size(layout)
    rho = apply_channel(logical_zero(layout), params).matrix
    psi0 = logical_zero_vector(layout)
    masks = _class_masks(layout, s)
    idx = np.arange(len(psi0))
    bra = psi0[idx ^ masks[q]]
    ket = psi0[idx ^ masks[qbar]]
    return complex(np.vdot(bra, rho @ ket))


def exact_z_table(
    layout: CodeLayout, params: ErrorChannelParams
) -> dict[tuple[int, int, int], complex]:
    """Z for every syndrome and (q, qbar) in {(0,0), (1,1), (0,1)}.

    Keys are (syndrome_key, q, qbar); one channel application is shared by
    all sandwiches.
    """
    _check_size(layout)
    rho = apply_channel(logical_zero(layout), params).matrix
    psi0 = logical_zero_vector(layout)
    idx = np.arange(len(psi0))
    table: dict[tuple[int, int, int], complex] = {}
    for bits in itertools.product([0, 1], repeat=layout.n_z):
        s = frozenset(i for i, b in enumerate(bits) if b)
        key = syndrome_key(s)
        m0, m1 = _class_masks(layout, s)
        kets = {0: psi0[idx ^ m0], 1: psi0[idx ^ m1]}
        rho_k = {q: rho @ kets[q] for q in (0, 1)}
        table[(key, 0, 0)] = complex(np.vdot(kets[0], rho_k[0]))
        table[(key, 1, 1)] = complex(np.vdot(kets[1], rho_k[1]))
        table[(key, 0, 1)] = complex(np.vdot(kets[0], rho_k[1]))
    return table


def coset_z(
    layout: CodeLayout, params: ErrorChannelParams, s: frozenset[int], q: int, qbar: int
) -> complex:
    """Independent oracle: explicit sum over both stabilizer cosets.

    Z = sum over stabilizer products for the bra and ket strings of the
    product over qubits of the channel coefficient w(x_j, xbar_j).  Cost
    4^{n_x} N; intended for d = 3.
    """
    n = layout.n_qubits
    p = np.broadcast_to(params.p, (n,)).astype(float)
    g = np.broadcast_to(params.gamma, (n,)).astype(float)
    c = g * np.sqrt(p * (1 - p))
    # coefficient lookup by (x, xbar) sign pair
    w = {
        (1, 1): 1 - p,
        (-1, -1): p,
        (-1, 1): 1j * c,
        (1, -1): -1j * c,
    }

    eta0 = reference_string(layout, s)
    eta = flip_support(eta0, layout.x_logical) if q else eta0
    eta_bar = flip_support(eta0, layout.x_logical) if qbar else eta0

    stab_signs = []
    for sup in layout.x_stabilizers:
        sign = np.ones(n, dtype=np.int8)
        sign[list(sup)] = -1
        stab_signs.append(sign)

    def orbit(base):
        for pattern in itertools.product([False, True], repeat=layout.n_x):
            x = base.copy()
            for chosen, sign in zip(pattern, stab_signs):
                if chosen:
                    x = x * sign
            yield x

    total = 0j
    for x in orbit(eta):
        for xbar in orbit(eta_bar):
            term = 1.0 + 0j
            for j in range(n):
                term *= w[(int(x[j]), int(xbar[j]))][j]
            total += term
    return total


def write_golden_table(path, layout: CodeLayout, params_grid) -> None:
    """Golden Z values as JSON, keyed by (d, p, gamma, syndrome, q, qbar)."""
    rows = []
    for p, gamma in params_grid:
        params = ErrorChannelParams.uniform(p, gamma, layout.n_qubits)
        table = exact_z_table(layout, params)
        for (key, q, qbar), z in sorted(table.items()):
            rows.append(
                {
                    "L": layout.L,
                    "M": layout.M,
                    "p": p,
                    "gamma": gamma,
                    "syndrome": key,
                    "q": q,
                    "qbar": qbar,
                    "re": z.real,
                    "im": z.imag,
                }
            )
    with open(path, "w") as fh:
        json.dump(rows, fh)
