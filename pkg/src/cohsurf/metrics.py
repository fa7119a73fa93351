"""Observables derived from syndrome samples and their coefficient blocks.

All syndrome averages sum P(s) f(s).  The sampler draws syndromes with
probability P(s), so the sampled estimator of any f is the plain mean of
f(s) over the records; the exhaustive path (d = 3) evaluates the weighted
sum exactly.  Both share the same implementation of f via
`syndrome_observables`.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .lattice import CodeLayout
from .transfer import ZMatrix, z_matrix

__all__ = [
    "MetricsFault",
    "EstimateWithError",
    "SyndromeObservables",
    "lambda_eigenvalues",
    "syndrome_observables",
    "logical_error_rate",
    "relative_entropy",
    "relative_entropy_coherent",
    "coherent_information",
    "logical_coherence",
    "entanglement_statistics",
    "exhaustive_observables",
    "exhaustive_means",
    "fit_log_slope",
]

_FLOOR = 1e-300  # eigenvalue floor before logs; 0 * log 0 := 0 throughout

# |Z01|^2 may exceed Z00 Z11 by at most this relative amount before we call
# the block unphysical
PSD_TOLERANCE = 1e-8


class MetricsFault(RuntimeError):
    """A coefficient block violated an invariant needed by an estimator."""


@dataclass(frozen=True)
class EstimateWithError:
    mean: float
    sem: float
    n: int
    excluded: int = 0

    @classmethod
    def from_samples(cls, values, excluded: int = 0) -> "EstimateWithError":
        # records arrive in canonical sample order; numpy's pairwise sums make
        # the reduction deterministic for a fixed order
        v = np.asarray(list(values), dtype=float)
        if len(v) == 0:
            return cls(mean=math.nan, sem=math.nan, n=0, excluded=excluded)
        sem = float(v.std(ddof=1) / math.sqrt(len(v))) if len(v) > 1 else 0.0
        return cls(mean=float(v.mean()), sem=sem, n=len(v), excluded=excluded)


def lambda_eigenvalues(zm: ZMatrix) -> tuple[float, float]:
    """Eigenvalues of the 2x2 coefficient block, lambda_0 <= lambda_1.

    lambda_n = (P(s) -+ sqrt((Z00 - Z11)^2 + 4 |Z01|^2)) / 2; they sum to
    P(s).  Raises MetricsFault on a positivity violation beyond tolerance.
    """
    z00, z11 = zm.diagonals()
    z01 = 0.0 if zm.z01.is_zero() else abs(zm.z01.to_complex())
    if z01**2 > z00 * z11 * (1 + PSD_TOLERANCE) + _FLOOR:
        raise MetricsFault(
            f"block not positive semidefinite: |Z01|^2 = {z01**2:.3e} > {z00 * z11:.3e}"
        )
    disc = math.sqrt((z00 - z11) ** 2 + 4 * z01**2)
    p_s = z00 + z11
    lam0 = max(0.5 * (p_s - disc), 0.0)
    return lam0, 0.5 * (p_s + disc)


@dataclass(frozen=True)
class SyndromeObservables:
    """Everything the estimators need from one syndrome."""

    p_s: float  # syndrome probability
    lam0: float  # normalized block eigenvalues, lam0 + lam1 = 1
    lam1: float
    p_fail: float  # Z11 / P(s): infidelity of the reference-class correction
    min_infidelity: float  # min_q Z_qq / P(s)
    coherence: float  # |Z01| / sqrt(Z00 Z11)
    kappa: float  # real-part admixture; identically 0 on this layout
    mid_cut_entropy: float | None = None

    def relative_entropy_term(self) -> float:
        """(1 - kappa) sum_n lam_n ln(lam_n / lam_{1-n}) for the normalized block.

        This is the symmetrized-KL form fixed by positivity and by the
        incoherent limit, where it must reduce to the Kullback-Leibler
        divergence of the class probabilities.
        """
        lam0 = max(self.lam0, _FLOOR)
        lam1 = max(self.lam1, _FLOOR)
        if self.lam0 <= 0.0:
            raise MetricsFault(
                "rank-deficient block: the relative-entropy estimator needs "
                "gamma < 1 (use relative_entropy_coherent instead)"
            )
        return (1 - self.kappa) * (
            lam0 * math.log(lam0 / lam1) + lam1 * math.log(lam1 / lam0)
        )

    def coherent_information_term(self) -> float:
        """sum_n lam_n ln(2 lam_n) = ln 2 - H(lam_0), in [0, ln 2]."""
        acc = 0.0
        for lam in (self.lam0, self.lam1):
            if lam > 0.0:
                acc += lam * math.log(2 * max(lam, _FLOOR))
        return acc


def syndrome_observables(zm: ZMatrix, mid_cut_entropy: float | None = None) -> SyndromeObservables:
    z00, z11 = zm.diagonals()
    lam0, lam1 = lambda_eigenvalues(zm)
    p_s = z00 + z11
    if p_s <= 0.0:
        raise MetricsFault("vanishing syndrome probability")
    if zm.z01.is_zero():
        z01, re01 = 0.0, 0.0
    else:
        z = zm.z01.to_complex()
        z01, re01 = abs(z), abs(z.real)
    denom = (z00 - z11) ** 2 + 4 * z01**2
    kappa = 4 * re01**2 / denom if denom > 0 else 0.0
    if z00 * z11 > 0:
        coherence = min(z01 / math.sqrt(z00 * z11), 1.0)
    elif z01 == 0.0:
        coherence = 0.0
    else:
        raise MetricsFault("coherence undefined: zero diagonal with nonzero Z01")
    return SyndromeObservables(
        p_s=p_s,
        lam0=lam0 / p_s,
        lam1=lam1 / p_s,
        p_fail=z11 / p_s,
        min_infidelity=min(z00, z11) / p_s,
        coherence=coherence,
        kappa=kappa,
        mid_cut_entropy=mid_cut_entropy,
    )


def _observables_stream(records, z_lookup):
    excluded = 0
    out = []
    for rec in records:
        zm = z_lookup[rec.syndrome]
        if zm.flagged:
            excluded += 1
            continue
        entropy = rec.mid_cut_entropy if rec.entropies is not None else None
        out.append(syndrome_observables(zm, mid_cut_entropy=entropy))
    return out, excluded


def logical_error_rate(records, z_lookup) -> EstimateWithError:
    """Syndrome-averaged minimum infidelity < min_q Z_qq,s / P(s) >_s."""
    obs, excluded = _observables_stream(records, z_lookup)
    return EstimateWithError.from_samples(
        (o.min_infidelity for o in obs), excluded=excluded
    )


def relative_entropy(records, z_lookup) -> EstimateWithError:
    """Distinguishability of the corrupted state from its logical-X image.

    Full-rank estimator; requires gamma < 1 (the coherent limit is handled
    by `relative_entropy_coherent` over the exhaustive syndrome set).
    """
    obs, excluded = _observables_stream(records, z_lookup)
    return EstimateWithError.from_samples(
        (o.relative_entropy_term() for o in obs), excluded=excluded
    )


def relative_entropy_coherent(syndrome_probs) -> float:
    """Coherent-limit value: the Shannon entropy -sum_s P(s) ln P(s)."""
    acc = 0.0
    for p in syndrome_probs:
        if p > 0:
            acc -= p * math.log(p)
    return acc


def coherent_information(records, z_lookup) -> EstimateWithError:
    """< sum_n lam_n ln(2 lam_n / P(s)) >_s, in [0, ln 2]; ln 2 when coherent."""
    obs, excluded = _observables_stream(records, z_lookup)
    return EstimateWithError.from_samples(
        (o.coherent_information_term() for o in obs), excluded=excluded
    )


def logical_coherence(records, z_lookup) -> EstimateWithError:
    """gamma_L = < |Z01| / sqrt(Z00 Z11) >_s."""
    obs, excluded = _observables_stream(records, z_lookup)
    return EstimateWithError.from_samples((o.coherence for o in obs), excluded=excluded)


def entanglement_statistics(records) -> tuple[EstimateWithError, float]:
    """Mean and sample standard deviation of the final-state mid-cut entropy."""
    values = [r.mid_cut_entropy for r in records if r.entropies is not None]
    est = EstimateWithError.from_samples(values)
    sigma = float(np.std(values, ddof=1)) if len(values) > 1 else 0.0
    return est, sigma


def exhaustive_observables(
    layout: CodeLayout,
    couplings,
    method: str = "dense",
    chi_max: int = 64,
    svd_cutoff: float = 1e-12,
    with_entropy: bool = False,
) -> list[SyndromeObservables]:
    """f(s) for every syndrome (exact syndrome sums; d = 3 scale).

    The optional entropy is taken from the class-0 reference-string circuit
    of each syndrome (a deterministic representative).
    """
    from .lattice import reference_string
    from .mps import MpsState, ProductState
    from .transfer import apply_plan_column, build_gate_plan

    out = []
    for bits in itertools.product([0, 1], repeat=layout.n_z):
        s = frozenset(i for i, b in enumerate(bits) if b)
        zm = z_matrix(layout, couplings, s, method=method, chi_max=chi_max, svd_cutoff=svd_cutoff)
        entropy = None
        if with_entropy:
            plan = build_gate_plan(layout, couplings, reference_string(layout, s))
            state = MpsState.from_product_state(
                ProductState.all_plus(plan.n_sites, local_dim=plan.local_dim),
                chi_max=chi_max,
                svd_cutoff=svd_cutoff,
            )
            for col in range(layout.L):
                apply_plan_column(state, plan, col)
            cuts = state.entropies_all_cuts()
            entropy = float(cuts[(len(cuts) - 1) // 2]) if len(cuts) else 0.0
        out.append(syndrome_observables(zm, mid_cut_entropy=entropy))
    return out


def exhaustive_means(observables, coherent: bool = False) -> dict[str, float]:
    """Exact syndrome sums sum_s P(s) f(s) of every estimator."""
    probs = np.array([o.p_s for o in observables])
    total = probs.sum()
    out = {
        "norm": float(total),
        "p_logical": float(sum(o.p_s * o.min_infidelity for o in observables)),
        "coherent_information": float(
            sum(o.p_s * o.coherent_information_term() for o in observables)
        ),
        "logical_coherence": float(sum(o.p_s * o.coherence for o in observables)),
    }
    if coherent:
        out["relative_entropy"] = relative_entropy_coherent(probs)
    else:
        out["relative_entropy"] = float(
            sum(o.p_s * o.relative_entropy_term() for o in observables)
        )
    if all(o.mid_cut_entropy is not None for o in observables):
        s_mean = float(sum(o.p_s * o.mid_cut_entropy for o in observables) / total)
        s_var = (
            float(sum(o.p_s * o.mid_cut_entropy**2 for o in observables) / total)
            - s_mean**2
        )
        out["entropy_mean"] = s_mean
        out["entropy_std"] = math.sqrt(max(s_var, 0.0))
    return out


def fit_log_slope(x, y) -> tuple[float, float]:
    """Least-squares fit of ln y = intercept + slope * x (decay diagnostics)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if np.any(y <= 0):
        raise ValueError("fit_log_slope requires positive y")
    slope, intercept = np.polyfit(x, np.log(y), 1)
    return float(slope), float(intercept)
