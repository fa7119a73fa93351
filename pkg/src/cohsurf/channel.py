"""Physical X-error channel parameters and their statistical-mechanics couplings.

The single-qubit channel acting on qubit j is

    E_j[rho] = (1 - p_j) rho + p_j X rho X + i gamma_j sqrt(p_j (1 - p_j)) [X, rho],

CPTP for gamma_j^2 <= 1.  Expanding each term as a sum over sign pairs
(x, xbar) in {-1, +1}^2 with Boltzmann-like weights

    w(x, xbar) = exp(J0 + J1 x + J2 xbar + J3 x xbar)

identifies the four weights with the channel coefficients:

    w(+1, +1) = 1 - p           (rho)
    w(-1, -1) = p               (X rho X)
    w(-1, +1) = +i gamma sqrt(p (1 - p))   (X rho)
    w(+1, -1) = -i gamma sqrt(p (1 - p))   (rho X)

`bond_couplings` returns the log-form J's (defined for 0 < p < 1 and
gamma != 0); `channel_weights` returns the weights directly and stays finite
in every limit (p -> 0, gamma -> 0, gamma -> 1), which is what the circuit
builder consumes.  At gamma = 0 the cross weights vanish, the two Ising
species lock together, and the problem reduces to a one-species model with
weights (1 - p, p) per bond sign; that limit gets a dedicated path
(`single_species_weights`) instead of the divergent J0/J3.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "GAMMA_INCOHERENT_CUTOFF",
    "ErrorChannelParams",
    "BondCouplings",
    "VectorizedCouplings",
    "bond_couplings",
    "channel_weights",
    "single_species_weights",
    "single_species_coupling",
    "vectorized_couplings",
    "generic_channel_expansion",
    "reconstruct_process_matrix",
    "x_channel_process_matrix",
    "ExpansionError",
]

# below this, exp(-2*J3) < 1e-12 is beyond contraction tolerance: treat as 0
GAMMA_INCOHERENT_CUTOFF = 1e-6


@dataclass(frozen=True)
class ErrorChannelParams:
    """Per-qubit (p, gamma): bit-flip probability and coherence fraction."""

    p: np.ndarray
    gamma: np.ndarray

    def __post_init__(self):
        p = np.atleast_1d(np.asarray(self.p, dtype=float))
        g = np.atleast_1d(np.asarray(self.gamma, dtype=float))
        p, g = np.broadcast_arrays(p, g)
        object.__setattr__(self, "p", p.copy())
        object.__setattr__(self, "gamma", g.copy())
        if np.any((self.p < 0) | (self.p >= 1)):
            raise ValueError("p must lie in [0, 1)")
        if np.any(self.gamma**2 > 1 + 1e-15):
            raise ValueError("gamma^2 <= 1 required for a CPTP channel")

    @classmethod
    def uniform(cls, p: float, gamma: float, n: int) -> "ErrorChannelParams":
        return cls(np.full(n, p), np.full(n, gamma))

    @property
    def n(self) -> int:
        return len(self.p)

    def is_incoherent(self) -> bool:
        return bool(np.all(np.abs(self.gamma) < GAMMA_INCOHERENT_CUTOFF))


@dataclass(frozen=True)
class BondCouplings:
    """Complex log-weights J0..J3 per qubit, valid away from gamma = 0."""

    j0: np.ndarray
    j1: np.ndarray
    j2: np.ndarray
    j3: np.ndarray

    def weights(self) -> np.ndarray:
        """Weights w(x, xbar) = exp(J0 + J1 x + J2 xbar + J3 x xbar).

        Returns shape (n, 4) ordered [(+,+), (+,-), (-,+), (-,-)].
        """
        out = np.empty((len(self.j0), 4), dtype=complex)
        for k, (x, xb) in enumerate(_SIGN_ORDER):
            out[:, k] = np.exp(self.j0 + self.j1 * x + self.j2 * xb + self.j3 * x * xb)
        return out


_SIGN_ORDER = ((1, 1), (1, -1), (-1, 1), (-1, -1))


def bond_couplings(p, gamma) -> BondCouplings:
    """Log-form couplings of the two-species random-bond Ising weights.

        J0 = ln[gamma p (1-p)] / 2        J1 = -ln[p/(1-p)] / 4 - i pi/4
        J3 = -ln(gamma) / 2               J2 = conj(J1)

    Requires 0 < p < 1 and 0 < |gamma| <= 1 (the gamma = 0 limit is handled by
    the single-species path).  Negative gamma is mapped to |gamma| with J1 and
    J2 complex-conjugated (the channel with -gamma is the adjoint rotation).
    """
    p = np.atleast_1d(np.asarray(p, dtype=float))
    gamma = np.atleast_1d(np.asarray(gamma, dtype=float))
    p, gamma = np.broadcast_arrays(p, gamma)
    if np.any((p <= 0) | (p >= 1)):
        raise ValueError("bond_couplings requires 0 < p < 1")
    if np.any(gamma == 0) or np.any(np.abs(gamma) > 1):
        raise ValueError("bond_couplings requires 0 < |gamma| <= 1")
    g = np.abs(gamma)
    j0 = 0.5 * np.log(g * p * (1 - p)) + 0j
    j1 = -0.25 * np.log(p / (1 - p)) - 0.25j * np.pi * np.sign(gamma)
    j2 = np.conj(j1)
    j3 = -0.5 * np.log(g) + 0j
    return BondCouplings(j0=j0, j1=j1, j2=j2, j3=j3)


def channel_weights(p, gamma) -> np.ndarray:
    """Channel coefficients as a weight table, shape (n, 4).

    Order [(+,+), (+,-), (-,+), (-,-)] = [1-p, -ic, +ic, p] with
    c = gamma sqrt(p(1-p)).  Finite for all p in [0, 1), |gamma| <= 1;
    |gamma| below GAMMA_INCOHERENT_CUTOFF is flushed to zero.
    """
    p = np.atleast_1d(np.asarray(p, dtype=float))
    gamma = np.atleast_1d(np.asarray(gamma, dtype=float))
    p, gamma = np.broadcast_arrays(p, gamma)
    gamma = np.where(np.abs(gamma) < GAMMA_INCOHERENT_CUTOFF, 0.0, gamma)
    c = gamma * np.sqrt(p * (1 - p))
    out = np.empty((len(p), 4), dtype=complex)
    out[:, 0] = 1 - p
    out[:, 1] = -1j * c
    out[:, 2] = 1j * c
    out[:, 3] = p
    return out


def single_species_weights(p) -> np.ndarray:
    """Incoherent-limit weights per bond sign, shape (n, 2) = [1-p, p]."""
    p = np.atleast_1d(np.asarray(p, dtype=float))
    out = np.empty((len(p), 2), dtype=complex)
    out[:, 0] = 1 - p
    out[:, 1] = p
    return out


def single_species_coupling(p: float) -> float:
    """Classical RBIM coupling K with exp(-2K) = p / (1-p)."""
    if not 0 < p < 1:
        raise ValueError("requires 0 < p < 1")
    return 0.5 * math.log((1 - p) / p)


@dataclass(frozen=True)
class VectorizedCouplings:
    """Couplings of the vectorized channel exp(k0 + k1 X + k2 Xbar + k3 X Xbar)."""

    k0: complex
    k1: complex
    k2: complex
    k3: complex


def vectorized_couplings(p: float, gamma: float, eta: int = 1, eta_bar: int = 1) -> VectorizedCouplings:
    """Vectorized-channel couplings, including the bond-sign phases.

        k0 = ln[1 - 4 (1-gamma^2) p (1-p)] / 4 + i pi (eta - eta_bar) / 4
        k1 = (i/2) arctan[2 gamma sqrt(p(1-p)) / (1-2p)] + i pi (1 - eta) / 4
        k2 = -(i/2) arctan[...] - i pi (1 - eta_bar) / 4
        k3 = -ln[1 - 4 (1-gamma^2) p (1-p)] / 4

    For eta = eta_bar = 1 this reduces to k0 = -k3 real and k1 = -k2 purely
    imaginary.  Requires 0 <= p < 1/2 (arctan branch) and 0 <= gamma <= 1.
    """
    if not 0 <= p < 0.5:
        raise ValueError("vectorized_couplings requires 0 <= p < 1/2")
    if not 0 <= gamma <= 1:
        raise ValueError("vectorized_couplings requires 0 <= gamma <= 1")
    if eta not in (-1, 1) or eta_bar not in (-1, 1):
        raise ValueError("eta, eta_bar must be +-1")
    log_term = 0.25 * math.log(1 - 4 * (1 - gamma**2) * p * (1 - p))
    atan_term = 0.5 * math.atan(2 * gamma * math.sqrt(p * (1 - p)) / (1 - 2 * p))
    k0 = log_term + 0.25j * math.pi * (eta - eta_bar)
    k1 = 1j * atan_term + 0.25j * math.pi * (1 - eta)
    k2 = -1j * atan_term - 0.25j * math.pi * (1 - eta_bar)
    k3 = -log_term + 0j
    return VectorizedCouplings(k0=k0, k1=k1, k2=k2, k3=k3)


# ---------------------------------------------------------------------------
# Generic 16-parameter channel expansion (documented extension point: the
# expansion is solved and round-trip tested, but no circuit is built from it).
# ---------------------------------------------------------------------------

class ExpansionError(ValueError):
    """The log-linear expansion does not exist (coefficient with exact zero)."""


_PAULI = {
    0: np.eye(2, dtype=complex),
    1: np.array([[0, 1], [1, 0]], dtype=complex),
    2: np.array([[0, -1j], [1j, 0]], dtype=complex),
    3: np.array([[1, 0], [0, -1]], dtype=complex),
}

# Pauli index -> ((x, z) exponent bits of X^ex Z^ez, scalar): Y = i X Z
_LEFT_FACTOR = {0: ((0, 0), 1.0), 1: ((1, 0), 1.0), 2: ((1, 1), 1j), 3: ((0, 1), 1.0)}
# right operators are ordered Z^ez X^ex: Y = -i Z X
_RIGHT_FACTOR = {0: ((0, 0), 1.0), 1: ((1, 0), 1.0), 2: ((1, 1), -1j), 3: ((0, 1), 1.0)}


def _coefficient_tensor(eps: np.ndarray) -> np.ndarray:
    """Map the Pauli process matrix onto coefficients c[ex, ez, exb, ezb]."""
    c = np.zeros((2, 2, 2, 2), dtype=complex)
    for mu in range(4):
        (ex, ez), f = _LEFT_FACTOR[mu]
        for nu in range(4):
            (exb, ezb), g = _RIGHT_FACTOR[nu]
            c[ex, ez, exb, ezb] += f * g * eps[mu, nu]
    return c


def _popcount_dot(t: int, e: int) -> int:
    return bin(t & e).count("1") & 1


@dataclass(frozen=True)
class GenericExpansion:
    """Log-linear expansion of a channel over the (x, z, xbar, zbar) sign group.

    `couplings[t]` multiplies the monomial with exponent bits t (bit order
    x, z, xbar, zbar; bit set = variable present).  `support` lists the sign
    patterns on which the channel coefficient is nonzero; it always forms a
    subgroup of Z_2^4, and reconstructed coefficients are zero off it.
    """

    couplings: np.ndarray  # (16,) complex
    support: frozenset[int]

    def coefficient(self, e: int) -> complex:
        if e not in self.support:
            return 0.0 + 0j
        h = sum(
            self.couplings[t] * (-1) ** _popcount_dot(t, e) for t in range(16)
        )
        return complex(np.exp(h))


def generic_channel_expansion(eps: np.ndarray, zero_tol: float = 1e-14) -> GenericExpansion:
    """Solve the 16-term log-linear expansion of a generic process matrix.

    `eps` is the 4x4 Hermitian, trace-preserving process matrix over the Pauli
    basis (I, X, Y, Z): E[rho] = sum_{mu,nu} eps[mu,nu] O^mu rho O^nu.  The
    channel coefficients c(x, z, xbar, zbar) are written as exp of a
    multilinear form in the four signs and the couplings are recovered by a
    Walsh transform of log c.

    Coefficients that are exactly zero are admissible only when the nonzero
    pattern forms a subgroup of the sign group (true for the I/X sector
    channel, the identity, and Pauli channels); the solve then restricts to
    that subgroup.  Any other zero pattern has no log-linear expansion and
    raises ExpansionError.
    """
    eps = np.asarray(eps, dtype=complex)
    if eps.shape != (4, 4):
        raise ValueError("process matrix must be 4x4")
    if not np.allclose(eps, eps.conj().T, atol=1e-12):
        raise ValueError("process matrix must be Hermitian")
    trace_op = sum(
        eps[mu, nu] * (_PAULI[nu] @ _PAULI[mu]) for mu in range(4) for nu in range(4)
    )
    if not np.allclose(trace_op, np.eye(2), atol=1e-10):
        raise ValueError("process matrix must be trace preserving")

    c4 = _coefficient_tensor(eps)
    c = np.array([c4[(e >> 3) & 1, (e >> 2) & 1, (e >> 1) & 1, e & 1] for e in range(16)])
    # bit layout of e: (x, z, xbar, zbar) from MSB to LSB, bit set <-> sign -1
    scale = np.max(np.abs(c))
    support = frozenset(e for e in range(16) if abs(c[e]) > zero_tol * scale)

    if 0 not in support:
        raise ExpansionError("identity-sign coefficient vanishes")
    for a in support:
        for b in support:
            if a ^ b not in support:
                raise ExpansionError(
                    "zero pattern of the coefficients is not a subgroup; "
                    "no log-linear expansion exists"
                )

    logc = {e: np.log(c[e]) for e in support}
    size = len(support)
    # characters of Z_2^4 restricted to the support subgroup coincide in
    # cosets of its annihilator; keep one representative per coset
    annihilator = [
        t for t in range(16) if all(_popcount_dot(t, e) == 0 for e in support)
    ]
    seen: set[int] = set()
    couplings = np.zeros(16, dtype=complex)
    for t in range(16):
        coset = min(t ^ a for a in annihilator)
        if coset in seen or coset != t:
            continue
        seen.add(coset)
        acc = sum((-1) ** _popcount_dot(t, e) * logc[e] for e in support)
        couplings[t] = acc / size
    return GenericExpansion(couplings=couplings, support=support)


def reconstruct_process_matrix(expansion: GenericExpansion) -> np.ndarray:
    """Invert `generic_channel_expansion`: couplings back to the process matrix."""
    c4 = np.zeros((2, 2, 2, 2), dtype=complex)
    for e in range(16):
        c4[(e >> 3) & 1, (e >> 2) & 1, (e >> 1) & 1, e & 1] = expansion.coefficient(e)
    eps = np.zeros((4, 4), dtype=complex)
    for mu in range(4):
        (ex, ez), f = _LEFT_FACTOR[mu]
        for nu in range(4):
            (exb, ezb), g = _RIGHT_FACTOR[nu]
            # the (I,X,Y,Z) <-> X^a Z^b bases are related one-to-one
            eps[mu, nu] = c4[ex, ez, exb, ezb] / (f * g)
    return eps


def x_channel_process_matrix(p: float, gamma: float) -> np.ndarray:
    """Process matrix of the X-error channel in the Pauli basis."""
    c = gamma * math.sqrt(p * (1 - p))
    eps = np.zeros((4, 4), dtype=complex)
    eps[0, 0] = 1 - p
    eps[1, 1] = p
    eps[1, 0] = 1j * c
    eps[0, 1] = -1j * c
    return eps
