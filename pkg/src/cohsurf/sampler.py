"""Sequential sampling of X-error sign strings from the circuit distribution.

A configuration {eta} is drawn sign by sign: the conditional weight of
eta_j = +-1 is the overlap  <omega_{j+1}| T_j^{(eta_j)} |phi_{j-1}>, where
phi is the running MPS evolved by the already-drawn gates and omega is the
analytically known product state that sums the gates not yet drawn.  Summing
one gate over its two signs turns the touched chain sites into locked
("Bell") sites with unit scalar; the projector layers reset their parity
class back to free sites with a scalar 2 per site.  The omega schedule
therefore depends only on the layout and is precomputed once.

Every drawn string has probability Z_{qq,s} / 2^{n_x}: syndromes appear with
probability P(s) and classes with their coset weights.  In the incoherent
mode the conditionals collapse to independent coin flips, and sampling is
routed through `bernoulli_eta` so that it is bit-for-bit the direct
Bernoulli sampler.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .channel import ErrorChannelParams
from .lattice import CodeLayout, logical_class, syndrome_of
from .mps import BELL_BELL, PLUS_PLUS, MpsState, ProductState
from .transfer import _weight_table, _two_species_diag

__all__ = [
    "OmegaSchedule",
    "SampleRecord",
    "SamplingFault",
    "build_omega_schedule",
    "bernoulli_eta",
    "sample_eta",
    "sample_batch",
    "records_to_jsonl",
]

# negative conditional weights within this relative tolerance are clamped to
# zero; anything worse aborts the sample (chi too small)
CLAMP_TOLERANCE = 1e-9


class SamplingFault(RuntimeError):
    """Conditional weights left the valid range beyond clamp tolerance."""


@dataclass(frozen=True)
class OmegaSchedule:
    """states[j] is <omega_{j+1}|, the bra summing all gates after qubit j."""

    layout: CodeLayout
    states: tuple[ProductState, ...]


def build_omega_schedule(layout: CodeLayout) -> OmegaSchedule:
    """Closed-form recursion for the two-species omega product states."""
    M, L = layout.M, layout.L
    n_sites = M - 1
    states: list[ProductState] = [None] * layout.n_qubits
    current = ProductState.all_plus(n_sites, local_dim=4)
    for j in range(layout.n_qubits - 1, -1, -1):
        states[j] = current
        # absorb the summed gate j: its touched sites become Bell-locked
        m = j % M + 1
        if m == 1:
            touched = (0,)
        elif m == M:
            touched = (n_sites - 1,)
        else:
            touched = (m - 2, m - 1)
        labels = list(current.labels)
        for s in touched:
            labels[s] = BELL_BELL
        current = ProductState(tuple(labels), current.log_scale, 4)
        # crossing into the previous column: apply that layer's projectors
        if j % M == 0 and j > 0:
            col = j // M - 1  # 0-based layer index, between columns col, col+1
            labels = list(current.labels)
            scale = current.log_scale
            for s in range(n_sites):
                if s % 2 == (col + 1) % 2:
                    assert labels[s] == BELL_BELL, "schedule invariant violated"
                    labels[s] = PLUS_PLUS
                    scale += math.log(2.0)
            current = ProductState(tuple(labels), scale, 4)
    return OmegaSchedule(layout=layout, states=tuple(states))


@dataclass
class SampleRecord:
    eta: np.ndarray
    syndrome: frozenset[int]
    q: int
    conditionals: np.ndarray  # probability of the drawn sign, per step
    seed: int | tuple
    truncation_error: float = 0.0
    clamp_events: int = 0
    retried: bool = False
    entropies: np.ndarray | None = None  # final-state entropy at every cut

    @property
    def mid_cut_entropy(self) -> float:
        if self.entropies is None or len(self.entropies) == 0:
            return 0.0
        return float(self.entropies[(len(self.entropies) - 1) // 2])


def bernoulli_eta(p: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Independent sign flips: eta_j = -1 with probability p_j.

    The draw convention (one uniform per qubit, flip when u >= 1 - p) is the
    contract shared with the incoherent sampling mode.
    """
    u = rng.random(len(p))
    return np.where(u < 1.0 - p, 1, -1).astype(np.int8)


def _real_parts_common_scale(a_plus, a_minus) -> tuple[float, float, float]:
    """Re a+ and Re a- after rescaling by the larger magnitude; plus |a| sum."""
    if a_plus.is_zero() and a_minus.is_zero():
        return 0.0, 0.0, 0.0
    ref = max(a_plus.log_magnitude, a_minus.log_magnitude)

    def parts(lc):
        if lc.is_zero():
            return 0.0, 0.0
        mag = math.exp(lc.log_magnitude - ref)
        return mag * math.cos(lc.phase), mag

    re_p, mag_p = parts(a_plus)
    re_m, mag_m = parts(a_minus)
    return re_p, re_m, mag_p + mag_m


def _sample_eta_incoherent(layout, params, rng, chi_max, svd_cutoff, collect_entropies):
    p = np.broadcast_to(params.p, (layout.n_qubits,))
    eta = bernoulli_eta(p, rng)
    conditionals = np.where(eta > 0, 1.0 - p, p)
    s = syndrome_of(layout, eta)
    q = logical_class(layout, eta, s)
    record = SampleRecord(
        eta=eta, syndrome=s, q=q, conditionals=conditionals, seed=None
    )
    if collect_entropies:
        from .transfer import apply_plan_column, build_gate_plan

        plan = build_gate_plan(layout, params, eta)
        state = MpsState.from_product_state(
            ProductState.all_plus(plan.n_sites, local_dim=plan.local_dim),
            chi_max=chi_max,
            svd_cutoff=svd_cutoff,
        )
        for col in range(layout.L):
            apply_plan_column(state, plan, col)
        record.entropies = state.entropies_all_cuts()
        record.truncation_error = state.truncation_error
    return record


class _GateTable:
    """Per-qubit gate placement and both sign variants of the diagonal."""

    def __init__(self, layout: CodeLayout, weights: np.ndarray):
        M = layout.M
        n_sites = M - 1
        self.entries = []
        for j in range(layout.n_qubits):
            m = j % M + 1
            pair = 1 < m < M
            kind = "bond" if pair else "site"
            pos = (m - 2) if pair else (0 if m == 1 else n_sites - 1)
            diag_p = _two_species_diag(weights[j], 1, 1, pair)
            diag_m = _two_species_diag(weights[j], -1, -1, pair)
            self.entries.append((kind, pos, diag_p, diag_m))


def _sample_eta_once(layout, gates, schedule, rng, chi_max, svd_cutoff, collect_entropies):
    M, L = layout.M, layout.L
    n_sites = M - 1
    state = MpsState.from_product_state(
        ProductState.all_plus(n_sites, local_dim=4), chi_max=chi_max, svd_cutoff=svd_cutoff
    )
    eta = np.empty(layout.n_qubits, dtype=np.int8)
    conditionals = np.empty(layout.n_qubits, dtype=float)
    clamps = 0
    proj = np.ones((4, 4), dtype=complex)

    for j in range(layout.n_qubits):
        kind, pos, diag_p, diag_m = gates.entries[j]
        omega = schedule.states[j]
        a_plus, a_minus = state.overlap_pair_with_insert(omega, kind, pos, diag_p, diag_m)
        re_p, re_m, mag = _real_parts_common_scale(a_plus, a_minus)
        if mag == 0.0:
            raise SamplingFault(f"vanishing conditional weights at qubit {j}")
        if re_p < 0:
            if re_p < -CLAMP_TOLERANCE * mag:
                raise SamplingFault(f"conditional weight {re_p / mag:.2e} at qubit {j}")
            re_p, clamps = 0.0, clamps + 1
        if re_m < 0:
            if re_m < -CLAMP_TOLERANCE * mag:
                raise SamplingFault(f"conditional weight {re_m / mag:.2e} at qubit {j}")
            re_m, clamps = 0.0, clamps + 1
        total = re_p + re_m
        if total == 0.0:
            raise SamplingFault(f"both conditional weights vanished at qubit {j}")
        p_plus = re_p / total
        sign = 1 if rng.random() < p_plus else -1
        eta[j] = sign
        conditionals[j] = p_plus if sign == 1 else 1.0 - p_plus

        chosen = diag_p if sign == 1 else diag_m
        if kind == "bond":
            state.apply_diagonal_two_site_gate(pos, chosen)
        else:
            state.apply_single_site_diag(pos, chosen)
        if j % M == M - 1 and j // M < L - 1:
            col = j // M
            for s in range(n_sites):
                if s % 2 == (col + 1) % 2:
                    state.apply_single_site_projector(s, proj)

    s = syndrome_of(layout, eta)
    q = logical_class(layout, eta, s)
    record = SampleRecord(
        eta=eta,
        syndrome=s,
        q=q,
        conditionals=conditionals,
        seed=None,
        truncation_error=state.truncation_error,
        clamp_events=clamps,
    )
    if collect_entropies:
        record.entropies = state.entropies_all_cuts()
    return record


def sample_eta(
    layout: CodeLayout,
    couplings,
    seed,
    chi_max: int = 64,
    svd_cutoff: float = 1e-12,
    schedule: OmegaSchedule | None = None,
    gate_table: "_GateTable | None" = None,
    collect_entropies: bool = True,
) -> SampleRecord:
    """Draw one sign configuration; on a numerical fault retry once with 2*chi."""
    if isinstance(couplings, ErrorChannelParams) and couplings.is_incoherent():
        rng = np.random.default_rng(seed)
        record = _sample_eta_incoherent(
            layout, couplings, rng, chi_max, svd_cutoff, collect_entropies
        )
        record.seed = _seed_repr(seed)
        return record

    if gate_table is None:
        weights, single = _weight_table(layout, couplings)
        if single:
            raise ValueError("incoherent sampling requires ErrorChannelParams")
        gate_table = _GateTable(layout, weights)
    if schedule is None:
        schedule = build_omega_schedule(layout)
    try:
        rng = np.random.default_rng(seed)
        record = _sample_eta_once(
            layout, gate_table, schedule, rng, chi_max, svd_cutoff, collect_entropies
        )
    except SamplingFault:
        rng = np.random.default_rng(seed)
        record = _sample_eta_once(
            layout, gate_table, schedule, rng, 2 * chi_max, svd_cutoff, collect_entropies
        )
        record.retried = True
    record.seed = _seed_repr(seed)
    return record


def _seed_repr(seed):
    if isinstance(seed, np.random.SeedSequence):
        return (tuple(np.atleast_1d(seed.entropy).tolist()), seed.spawn_key)
    return seed


def sample_batch(
    layout: CodeLayout,
    couplings,
    n_samples: int,
    master_seed: int,
    chi_max: int = 64,
    svd_cutoff: float = 1e-12,
    collect_entropies: bool = True,
) -> list[SampleRecord]:
    """Deterministic batch: per-sample seeds are SeedSequence(master).spawn(n).

    Identical inputs reproduce identical batches bit for bit; disjoint spawn
    keys guarantee non-overlapping streams.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    schedule = None
    gate_table = None
    if not (isinstance(couplings, ErrorChannelParams) and couplings.is_incoherent()):
        schedule = build_omega_schedule(layout)
        weights, _ = _weight_table(layout, couplings)
        gate_table = _GateTable(layout, weights)
    if isinstance(master_seed, np.random.SeedSequence):
        children = master_seed.spawn(n_samples)
    else:
        children = np.random.SeedSequence(master_seed).spawn(n_samples)
    return [
        sample_eta(
            layout,
            couplings,
            child,
            chi_max=chi_max,
            svd_cutoff=svd_cutoff,
            schedule=schedule,
            gate_table=gate_table,
            collect_entropies=collect_entropies,
        )
        for child in children
    ]


def records_to_jsonl(records, path=None):
    """Sample records as JSON lines (eta as a 0/1 bitstring, 1 = flipped)."""
    lines = []
    for r in records:
        doc = {
            "eta": "".join("1" if e < 0 else "0" for e in r.eta),
            "syndrome": sorted(r.syndrome),
            "q": r.q,
            "seed": list(r.seed) if isinstance(r.seed, tuple) else r.seed,
            "truncation_error": r.truncation_error,
            "clamp_events": r.clamp_events,
            "retried": r.retried,
        }
        if r.entropies is not None:
            doc["entropies"] = [float(x) for x in r.entropies]
        lines.append(json.dumps(doc))
    text = "\n".join(lines) + "\n"
    if path is not None:
        with open(path, "w") as fh:
            fh.write(text)
    return text
