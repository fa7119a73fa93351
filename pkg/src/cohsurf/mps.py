"""Complex matrix-product-state engine for transfer-matrix chains.

States live on short open chains whose local dimension is 4 (two Ising
species per site, basis |sigma sigmabar> with sigma the fast index) or 2
(single-species mode).  The engine supports exactly the gate set of the
transfer circuit: diagonal two-site gates, dense single-site operators
(generally non-unitary projectors), product-state overlaps, and entanglement
entropies.

Every scalar factor is extracted into `log_norm` as soon as it appears
(log-sum-exp discipline): the represented unnormalized state is
exp(log_norm) times the stored canonical core, whose center tensor has unit
Frobenius norm after each operation.  Tensors away from the orthogonality
center are kept isometric in the canonical direction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from ._kernels import build_theta, transfer_step, transfer_step_pair, transfer_step_right
from .logcomplex import LogComplex

__all__ = [
    "PLUS_PLUS",
    "BELL_BELL",
    "site_vector",
    "ProductState",
    "MpsState",
    "AnnihilationError",
]

PLUS_PLUS = 0  # all-ones site vector: the free sum over both species
BELL_BELL = 1  # (1, 0, ..., 0, 1): species locked together (dim-4 chains)


class AnnihilationError(RuntimeError):
    """A projector annihilated the state (probability-zero branch)."""


def site_vector(label: int, local_dim: int = 4) -> np.ndarray:
    if label == PLUS_PLUS:
        return np.ones(local_dim, dtype=complex)
    if label == BELL_BELL:
        v = np.zeros(local_dim, dtype=complex)
        v[0] = 1.0
        v[-1] = 1.0
        return v
    raise ValueError(f"unknown site label {label}")


@lru_cache(maxsize=4096)
def _cached_vectors(labels: tuple[int, ...], local_dim: int) -> tuple[np.ndarray, ...]:
    return tuple(site_vector(l, local_dim) for l in labels)


@dataclass(frozen=True)
class ProductState:
    """Bond-dimension-1 state given by per-site labels and a global log scale."""

    labels: tuple[int, ...]
    log_scale: float = 0.0
    local_dim: int = 4

    @classmethod
    def all_plus(cls, n_sites: int, local_dim: int = 4) -> "ProductState":
        return cls(labels=(PLUS_PLUS,) * n_sites, local_dim=local_dim)

    def vectors(self) -> tuple[np.ndarray, ...]:
        return _cached_vectors(self.labels, self.local_dim)

    def with_label(self, site: int, label: int, extra_log_scale: float = 0.0) -> "ProductState":
        labels = list(self.labels)
        labels[site] = label
        return ProductState(tuple(labels), self.log_scale + extra_log_scale, self.local_dim)


def _svd(mat: np.ndarray):
    try:
        return np.linalg.svd(mat, full_matrices=False)
    except np.linalg.LinAlgError:
        # gesdd occasionally fails to converge; gesvd is slower but robust
        from scipy.linalg import svd as scipy_svd

        return scipy_svd(mat, full_matrices=False, lapack_driver="gesvd")


class MpsState:
    """Open-chain MPS with orthogonality-center and log-norm bookkeeping."""

    def __init__(self, tensors, center: int, log_norm: float, chi_max: int, svd_cutoff: float):
        self.tensors = tensors
        self.center = center
        self.log_norm = log_norm
        self.chi_max = chi_max
        self.svd_cutoff = svd_cutoff
        self.truncation_error = 0.0

    # -- construction -------------------------------------------------------

    @classmethod
    def from_product_state(
        cls, state: ProductState, chi_max: int = 64, svd_cutoff: float = 1e-12
    ) -> "MpsState":
        log_norm = state.log_scale
        tensors = []
        for v in state.vectors():
            nrm = np.linalg.norm(v)
            log_norm += math.log(nrm)
            tensors.append(np.ascontiguousarray((v / nrm).reshape(1, -1, 1)))
        return cls(tensors, center=0, log_norm=log_norm, chi_max=chi_max, svd_cutoff=svd_cutoff)

    @property
    def n_sites(self) -> int:
        return len(self.tensors)

    @property
    def local_dim(self) -> int:
        return self.tensors[0].shape[1]

    def bond_dimensions(self) -> list[int]:
        return [t.shape[2] for t in self.tensors[:-1]]

    def copy(self) -> "MpsState":
        out = MpsState(
            [t.copy() for t in self.tensors],
            self.center,
            self.log_norm,
            self.chi_max,
            self.svd_cutoff,
        )
        out.truncation_error = self.truncation_error
        return out

    # -- canonical form -----------------------------------------------------

    def _normalize_center(self):
        t = self.tensors[self.center]
        nrm = np.linalg.norm(t)
        if nrm == 0.0:
            raise AnnihilationError("state annihilated at site %d" % self.center)
        self.tensors[self.center] = t / nrm
        self.log_norm += math.log(nrm)

    def _move_right(self):
        i = self.center
        t = self.tensors[i]
        chi_l, d, chi_r = t.shape
        q, r = np.linalg.qr(t.reshape(chi_l * d, chi_r))
        self.tensors[i] = np.ascontiguousarray(q.reshape(chi_l, d, -1))
        self.tensors[i + 1] = np.ascontiguousarray(
            np.tensordot(r, self.tensors[i + 1], axes=(1, 0))
        )
        self.center = i + 1

    def _move_left(self):
        i = self.center
        t = self.tensors[i]
        chi_l, d, chi_r = t.shape
        q, r = np.linalg.qr(t.reshape(chi_l, d * chi_r).conj().T)
        self.tensors[i] = np.ascontiguousarray(q.conj().T.reshape(-1, d, chi_r))
        self.tensors[i - 1] = np.ascontiguousarray(
            np.tensordot(self.tensors[i - 1], r.conj().T, axes=(2, 0))
        )
        self.center = i - 1

    def move_center(self, pos: int):
        while self.center < pos:
            self._move_right()
        while self.center > pos:
            self._move_left()

    def canonical_residual(self) -> float:
        """Largest isometry deviation of the tensors away from the center."""
        res = 0.0
        for i, t in enumerate(self.tensors):
            chi_l, d, chi_r = t.shape
            if i < self.center:
                m = t.reshape(chi_l * d, chi_r)
                res = max(res, np.max(np.abs(m.conj().T @ m - np.eye(chi_r))))
            elif i > self.center:
                m = t.reshape(chi_l, d * chi_r)
                res = max(res, np.max(np.abs(m @ m.conj().T - np.eye(chi_l))))
        return float(res)

    # -- gates ---------------------------------------------------------------

    def apply_single_site_diag(self, site: int, diag: np.ndarray):
        """Diagonal single-site gate; scalar weight folded into log_norm."""
        self.move_center(site)
        self.tensors[site] = self.tensors[site] * np.asarray(diag, dtype=complex)[None, :, None]
        self._normalize_center()

    def apply_single_site_projector(self, site: int, op: np.ndarray):
        """Dense (generally non-unitary, rank-deficient) single-site operator."""
        self.move_center(site)
        t = np.tensordot(np.asarray(op, dtype=complex), self.tensors[site], axes=(1, 1))
        self.tensors[site] = np.ascontiguousarray(t.transpose(1, 0, 2))
        self._normalize_center()

    def apply_diagonal_two_site_gate(self, bond: int, gate: np.ndarray) -> float:
        """Apply a diagonal two-site gate across `bond` (sites bond, bond+1).

        `gate` holds the diagonal as a (d, d) array over the two physical
        indices.  Returns the relative truncation error of this application
        (discarded squared Schmidt weight / total); also accumulated on
        `self.truncation_error`.
        """
        if not 0 <= bond < self.n_sites - 1:
            raise ValueError(f"bond {bond} out of range")
        self.move_center(bond)
        a, b = self.tensors[bond], self.tensors[bond + 1]
        chi_l, d = a.shape[0], a.shape[1]
        chi_r = b.shape[2]
        theta = build_theta(a, b, np.asarray(gate, dtype=complex))
        u, s, vh = _svd(theta)
        total = float(s @ s)
        if total == 0.0:
            raise AnnihilationError("two-site gate annihilated the state")
        keep = int(np.sum(s >= self.svd_cutoff * s[0]))
        keep = max(1, min(keep, self.chi_max))
        err = float(1.0 - (s[:keep] @ s[:keep]) / total)
        self.truncation_error += err
        self.tensors[bond] = np.ascontiguousarray(u[:, :keep].reshape(chi_l, d, keep))
        core = s[:keep, None] * vh[:keep, :]
        self.tensors[bond + 1] = np.ascontiguousarray(core.reshape(keep, d, chi_r))
        self.center = bond + 1
        self._normalize_center()
        return err

    def compress(self) -> float:
        """Re-truncate every bond (useful after rank-reducing projectors)."""
        self.move_center(0)
        d = self.local_dim
        identity = np.ones((d, d), dtype=complex)
        err = 0.0
        for bond in range(self.n_sites - 1):
            err += self.apply_diagonal_two_site_gate(bond, identity)
        return err

    # -- observables ---------------------------------------------------------

    def overlap_with_product_state(self, omega: ProductState, insert=None) -> LogComplex:
        """<omega|psi> as a LogComplex, including all log scales.

        `insert` optionally slips a diagonal gate into the overlap without
        modifying the state: ("site", i, diag_d) or ("bond", i, diag_dxd).
        """
        if len(omega.labels) != self.n_sites:
            raise ValueError("product state length mismatch")
        vs = omega.vectors()
        ins_kind, ins_pos = (insert[0], insert[1]) if insert is not None else (None, -1)
        v = np.ones(1, dtype=complex)
        scale = 0.0
        i = 0
        while i < self.n_sites:
            if ins_kind == "bond" and i == ins_pos:
                wmat = np.conj(vs[i])[:, None] * np.conj(vs[i + 1])[None, :] * insert[2]
                v = transfer_step_pair(v, self.tensors[i], self.tensors[i + 1], wmat)
                i += 2
            else:
                w = np.conj(vs[i])
                if ins_kind == "site" and i == ins_pos:
                    w = w * insert[2]
                v = transfer_step(v, self.tensors[i], w)
                i += 1
            m = float(np.max(np.abs(v)))
            if m == 0.0:
                return LogComplex.zero()
            if m > 1e100 or m < 1e-100:
                v = v / m
                scale += math.log(m)
        z = complex(v[0])
        if z == 0:
            return LogComplex.zero()
        return LogComplex.from_complex(z, scale + self.log_norm + omega.log_scale)

    def overlap_pair_with_insert(
        self, omega: ProductState, kind: str, pos: int, diag_a: np.ndarray, diag_b: np.ndarray
    ) -> tuple[LogComplex, LogComplex]:
        """<omega| G |psi> for two alternative diagonal gates G at one place.

        The chain environments around the insertion are computed once and
        shared by both gate variants; `kind` is "site" or "bond" and `pos`
        the (left) site of the insertion.
        """
        vs = omega.vectors()
        span = 2 if kind == "bond" else 1
        scale = 0.0
        v = np.ones(1, dtype=complex)
        for i in range(pos):
            v = transfer_step(v, self.tensors[i], np.conj(vs[i]))
            m = float(np.max(np.abs(v)))
            if m == 0.0:
                return LogComplex.zero(), LogComplex.zero()
            if m > 1e100 or m < 1e-100:
                v /= m
                scale += math.log(m)
        r = np.ones(1, dtype=complex)
        for i in range(self.n_sites - 1, pos + span - 1, -1):
            r = transfer_step_right(r, self.tensors[i], np.conj(vs[i]))
            m = float(np.max(np.abs(r)))
            if m == 0.0:
                return LogComplex.zero(), LogComplex.zero()
            if m > 1e100 or m < 1e-100:
                r /= m
                scale += math.log(m)
        log_factor = scale + self.log_norm + omega.log_scale
        if kind == "site":
            t = np.tensordot(v, self.tensors[pos], axes=(0, 0)) @ r  # (d,)
            base = np.conj(vs[pos]) * t
            za = complex(np.sum(base * diag_a))
            zb = complex(np.sum(base * diag_b))
        else:
            u = np.tensordot(v, self.tensors[pos], axes=(0, 0))  # (d, chi_m)
            w = np.tensordot(self.tensors[pos + 1], r, axes=(2, 0))  # (chi_m, d)
            p = u @ w  # (d, d) inner environments, shared by both gates
            base = (np.conj(vs[pos])[:, None] * np.conj(vs[pos + 1])[None, :]) * p
            za = complex(np.sum(base * diag_a))
            zb = complex(np.sum(base * diag_b))
        return (
            LogComplex.from_complex(za, log_factor),
            LogComplex.from_complex(zb, log_factor),
        )

    def schmidt_values(self, cut: int) -> np.ndarray:
        """Normalized Schmidt values across the bond between sites cut-1 and cut."""
        if not 1 <= cut <= self.n_sites - 1:
            raise ValueError(f"cut {cut} out of range")
        self.move_center(cut - 1)
        t = self.tensors[cut - 1]
        chi_l, d, chi_r = t.shape
        s = np.linalg.svd(t.reshape(chi_l * d, chi_r), compute_uv=False)
        nrm = np.linalg.norm(s)
        return s / nrm

    def entanglement_entropy(self, cut: int) -> float:
        """Von Neumann entropy of the bipartition with `cut` sites on the left."""
        s2 = self.schmidt_values(cut) ** 2
        s2 = s2[s2 > 1e-300]
        return float(-np.sum(s2 * np.log(s2)))

    def entropies_all_cuts(self) -> np.ndarray:
        return np.array([self.entanglement_entropy(c) for c in range(1, self.n_sites)])

    def to_dense(self) -> tuple[np.ndarray, float]:
        """Dense state vector of the canonical core plus the log norm (tests)."""
        if self.local_dim ** self.n_sites > 2**22:
            raise ValueError("chain too large for dense conversion")
        psi = self.tensors[0]
        for t in self.tensors[1:]:
            psi = np.tensordot(psi, t, axes=(psi.ndim - 1, 0))
        return psi.reshape(-1), self.log_norm
