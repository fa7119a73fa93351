"""Transfer-matrix circuit for the two-species random-bond Ising partition sums.

The coefficients Z_{q qbar, s} of the projected-and-corrected channel are
partition functions of two coupled Ising species living on the X-stabilizer
sites of the layout.  Summing the species column by column turns the
partition sum into a (1+1)D circuit on a chain of M-1 sites (local dimension
4, the two species of one site; 2 in the single-species incoherent mode):

* each qubit (l, m) contributes one diagonal gate per column slice: rows
  2..M-1 couple chain sites (m-2, m-1) (0-based), while the top/bottom rows
  m = 1 and m = M touch a single boundary X-site and become single-site
  "field" gates on chain sites 0 and M-2;
* after column l (l < L) the sites whose X-stabilizer column is exhausted
  are summed out and re-initialized by the projector (1+tau^x)(1+taubar^x);
  with the face coloring used by `lattice`, these are the 0-based sites with
  site % 2 == l % 2;
* both boundary vectors are the all-ones product state, i.e. the free sum
  over the first and last X-stabilizer columns.

Gate diagonals are built from the channel weight table w(x, xbar) (the
coefficients of the error channel), which is finite in every limit; the
log-form couplings exponentiate to exactly these weights.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .channel import (
    BondCouplings,
    ErrorChannelParams,
    channel_weights,
    single_species_weights,
)
from .lattice import CodeLayout, flip_support, reference_string
from .logcomplex import LogComplex
from .mps import MpsState, ProductState

__all__ = [
    "GatePlan",
    "GateSpec",
    "ContractionResult",
    "ZMatrix",
    "build_gate_plan",
    "contract",
    "z_matrix",
    "apply_plan_column",
    "dump_slice_truncation",
]

# contraction is flagged when the accumulated relative discarded weight
# exceeds this bound
TRUNCATION_FLAG_BOUND = 1e-6

_DENSE_MAX_STATES = 4**6


@dataclass(frozen=True)
class GateSpec:
    qubit: int
    kind: str  # "field" or "bond"
    position: int  # chain site (field) or left chain site of the pair (bond)
    diag: np.ndarray  # (d,) field diagonal or (d, d) bond diagonal


@dataclass(frozen=True)
class GatePlan:
    layout: CodeLayout
    local_dim: int
    n_sites: int
    gates: tuple[GateSpec, ...]  # N gates in circuit order
    layer_sites: tuple[tuple[int, ...], ...]  # after column l: sites to project

    @property
    def n_columns(self) -> int:
        return self.layout.L


def _weight_table(layout: CodeLayout, couplings) -> tuple[np.ndarray, bool]:
    """Normalize the couplings argument to a per-qubit weight table.

    Returns (weights, single_species): two-species tables have shape (N, 4)
    ordered [(+,+), (+,-), (-,+), (-,-)]; single-species tables (N, 2) are
    [w(+1), w(-1)] = [1-p, p].
    """
    n = layout.n_qubits
    if isinstance(couplings, ErrorChannelParams):
        if couplings.n not in (1, n):
            raise ValueError("channel parameter table does not match the layout")
        p = np.broadcast_to(couplings.p, (n,))
        g = np.broadcast_to(couplings.gamma, (n,))
        if couplings.is_incoherent():
            return np.ascontiguousarray(single_species_weights(p)), True
        return np.ascontiguousarray(channel_weights(p, g)), False
    if isinstance(couplings, BondCouplings):
        w = couplings.weights()
        if w.shape[0] == 1:
            w = np.broadcast_to(w, (n, 4))
        if w.shape[0] != n:
            raise ValueError("coupling table does not match the layout")
        return np.ascontiguousarray(w), False
    w = np.asarray(couplings, dtype=complex)
    if w.ndim == 1:
        w = np.broadcast_to(w, (n, w.shape[0]))
    if w.shape[0] != n or w.shape[1] not in (2, 4):
        raise ValueError("weight table must have shape (N, 4) or (N, 2)")
    return np.ascontiguousarray(w), w.shape[1] == 2


_SPIN = np.array([1, -1])


def _two_species_diag(w4: np.ndarray, eta: int, eta_bar: int, pair: bool) -> np.ndarray:
    """Gate diagonal from the weight row w4 = [w(+,+), w(+,-), w(-,+), w(-,-)].

    Local basis |sigma sigmabar> with sigma the fast index.
    """
    sig = _SPIN[np.arange(4) & 1]
    sigb = _SPIN[np.arange(4) >> 1]
    if pair:
        u = np.multiply.outer(sig, sig) * eta
        ub = np.multiply.outer(sigb, sigb) * eta_bar
    else:
        u = sig * eta
        ub = sigb * eta_bar
    idx = ((1 - u) // 2) * 2 + (1 - ub) // 2
    return w4[idx]


def _single_species_diag(w2: np.ndarray, eta: int, pair: bool) -> np.ndarray:
    if pair:
        u = np.multiply.outer(_SPIN, _SPIN) * eta
    else:
        u = _SPIN * eta
    return w2[(1 - u) // 2]


def build_gate_plan(layout: CodeLayout, couplings, eta, eta_bar=None) -> GatePlan:
    """Assemble the circuit contracting to Z for sign strings (eta, eta_bar).

    `couplings` may be ErrorChannelParams (selects the single-species mode
    when the channel is incoherent), BondCouplings, or a raw weight table.
    eta_bar defaults to eta (diagonal coefficients); it may differ from eta
    only on the support of the logical X.
    """
    eta = np.asarray(eta, dtype=np.int8)
    eta_bar = eta if eta_bar is None else np.asarray(eta_bar, dtype=np.int8)
    if len(eta) != layout.n_qubits or len(eta_bar) != layout.n_qubits:
        raise ValueError("sign string length mismatch")
    diff = np.flatnonzero(eta != eta_bar)
    if not set(diff.tolist()) <= set(layout.x_logical):
        raise ValueError("eta and eta_bar may differ only on the logical-X support")

    weights, single = _weight_table(layout, couplings)
    if single and len(diff):
        raise ValueError("off-diagonal contraction is undefined in the incoherent mode")
    dim = 2 if single else 4
    M = layout.M
    gates = []
    for j in range(layout.n_qubits):
        m = j % M + 1
        e, eb = int(eta[j]), int(eta_bar[j])
        pair = 1 < m < M
        if single:
            diag = _single_species_diag(weights[j], e, pair)
        else:
            diag = _two_species_diag(weights[j], e, eb, pair)
        if pair:
            gates.append(GateSpec(j, "bond", m - 2, diag))
        else:
            gates.append(GateSpec(j, "field", 0 if m == 1 else M - 2, diag))

    layer_sites = tuple(
        tuple(s for s in range(M - 1) if s % 2 == l % 2) for l in range(1, layout.L)
    )
    return GatePlan(
        layout=layout,
        local_dim=dim,
        n_sites=M - 1,
        gates=tuple(gates),
        layer_sites=layer_sites,
    )


@dataclass
class ContractionResult:
    value: LogComplex
    truncation_error: float
    flagged: bool
    slice_truncation: list[float] = field(default_factory=list)
    final_state: MpsState | None = None


def apply_plan_column(state: MpsState, plan: GatePlan, column: int) -> float:
    """Apply one column of gates (and the trailing projector layer) in place.

    Returns the truncation error added by this column.
    """
    before = state.truncation_error
    M = plan.layout.M
    for j in range(column * M, (column + 1) * M):
        g = plan.gates[j]
        if g.kind == "field":
            state.apply_single_site_diag(g.position, g.diag)
        else:
            state.apply_diagonal_two_site_gate(g.position, g.diag)
    if column < plan.layout.L - 1:
        proj = np.ones((plan.local_dim, plan.local_dim), dtype=complex)
        for s in plan.layer_sites[column]:
            state.apply_single_site_projector(s, proj)
    return state.truncation_error - before


def _contract_mps(plan: GatePlan, chi_max: int, svd_cutoff: float, keep_state: bool):
    boundary = ProductState.all_plus(plan.n_sites, local_dim=plan.local_dim)
    state = MpsState.from_product_state(boundary, chi_max=chi_max, svd_cutoff=svd_cutoff)
    per_column = []
    for col in range(plan.n_columns):
        per_column.append(apply_plan_column(state, plan, col))
    value = state.overlap_with_product_state(boundary)
    err = state.truncation_error
    return ContractionResult(
        value=value,
        truncation_error=err,
        flagged=err > TRUNCATION_FLAG_BOUND,
        slice_truncation=per_column,
        final_state=state if keep_state else None,
    )


def _contract_dense(plan: GatePlan) -> ContractionResult:
    """Exact contraction holding the full chain vector (mid-scale oracle)."""
    d, n = plan.local_dim, plan.n_sites
    if d**n > _DENSE_MAX_STATES:
        raise ValueError("dense contraction limited to M <= 7")
    M = plan.layout.M
    psi = np.ones(d**n, dtype=complex)
    log_norm = 0.0
    for col in range(plan.n_columns):
        for j in range(col * M, (col + 1) * M):
            g = plan.gates[j]
            if g.kind == "field":
                shape = (d**g.position, d, d ** (n - g.position - 1))
                psi = (psi.reshape(shape) * g.diag[None, :, None]).reshape(-1)
            else:
                b = g.position
                shape = (d**b, d, d, d ** (n - b - 2))
                psi = (psi.reshape(shape) * g.diag[None, :, :, None]).reshape(-1)
        if col < plan.n_columns - 1:
            for s in plan.layer_sites[col]:
                shape = (d**s, d, d ** (n - s - 1))
                summed = psi.reshape(shape).sum(axis=1, keepdims=True)
                psi = np.broadcast_to(summed, shape).reshape(-1).copy()
        scale = np.max(np.abs(psi))
        if scale == 0.0:
            return ContractionResult(LogComplex.zero(), 0.0, False)
        psi /= scale
        log_norm += math.log(scale)
    total = complex(psi.sum())
    if total == 0:
        return ContractionResult(LogComplex.zero(), 0.0, False)
    return ContractionResult(
        value=LogComplex.from_complex(total, log_norm),
        truncation_error=0.0,
        flagged=False,
    )


def contract(
    plan: GatePlan,
    method: str = "mps",
    chi_max: int = 64,
    svd_cutoff: float = 1e-12,
    keep_state: bool = False,
) -> ContractionResult:
    """Contract the circuit to <phi0| M |phi0> as a LogComplex."""
    if method == "dense":
        return _contract_dense(plan)
    if method == "mps":
        return _contract_mps(plan, chi_max, svd_cutoff, keep_state)
    raise ValueError(f"unknown contraction method {method!r}")


@dataclass
class ZMatrix:
    """The 2x2 coefficient block of one syndrome, in log form.

    z00 and z11 are real nonnegative up to numerical residue; z10 is the
    complex conjugate of z01 and is not stored.  On this layout Re z01 = 0.
    """

    z00: LogComplex
    z11: LogComplex
    z01: LogComplex
    syndrome: frozenset[int]
    truncation_error: float = 0.0
    flagged: bool = False

    @property
    def p_s(self) -> float:
        """Syndrome probability P(s) = Z00 + Z11."""
        return (self.z00.abs() + self.z11.abs()).to_complex().real

    def diagonals(self) -> tuple[float, float]:
        """(Z00, Z11) as nonnegative floats on a common linear scale."""
        return self.z00.abs().to_complex().real, self.z11.abs().to_complex().real


def z_matrix(
    layout: CodeLayout,
    couplings,
    s: frozenset[int],
    method: str = "mps",
    chi_max: int = 64,
    svd_cutoff: float = 1e-12,
) -> ZMatrix:
    """All coefficient-block entries of syndrome s: three contractions.

    The representatives are eta0 = reference string of s (class 0) and
    eta1 = eta0 flipped on the logical X (class 1); (q, qbar) in
    {(0,0), (1,1), (0,1)}.  In the single-species incoherent mode the
    off-diagonal vanishes identically and is not contracted.
    """
    eta0 = reference_string(layout, s)
    eta1 = flip_support(eta0, layout.x_logical)
    single = isinstance(couplings, ErrorChannelParams) and couplings.is_incoherent()

    r00 = contract(build_gate_plan(layout, couplings, eta0), method, chi_max, svd_cutoff)
    r11 = contract(build_gate_plan(layout, couplings, eta1), method, chi_max, svd_cutoff)
    if single:
        r01 = ContractionResult(LogComplex.zero(), 0.0, False)
    else:
        r01 = contract(
            build_gate_plan(layout, couplings, eta0, eta1), method, chi_max, svd_cutoff
        )
    return ZMatrix(
        z00=r00.value,
        z11=r11.value,
        z01=r01.value,
        syndrome=s,
        truncation_error=r00.truncation_error + r11.truncation_error + r01.truncation_error,
        flagged=r00.flagged or r11.flagged or r01.flagged,
    )


def dump_slice_truncation(path, entries):
    """Write per-slice truncation diagnostics as JSON lines."""
    with open(path, "a") as fh:
        for entry in entries:
            fh.write(json.dumps(entry) + "\n")
