"""Hot contraction kernels: numba lane with a pure-numpy fallback.

The transfer-matrix inner loops spend their time in small dense
contractions (bond dimensions of a few to ~64).  In that regime numba-jitted
loops beat the per-call dispatch overhead of numpy; both lanes implement the
same three primitives and are interchangeable:

* transfer_step:       v_j  <-  sum_k w_k  (v @ A[:, k, :])_j
* transfer_step_right: r_i  <-  sum_k w_k  (A[:, k, :] @ r)_i
* transfer_step_pair:  v_j  <-  sum_k1,k2 W[k1,k2] (v @ A[:,k1,:] @ B[:,k2,:])_j
* build_theta:         theta = (A . B) * gate, reshaped for the bond SVD

Lane selection: environment variable COHSURF_NUMBA; "0"/"false"/"off"
forces the numpy fallback, anything else (or unset) uses numba when it is
importable.  `active_lane()` reports the choice; `benchmarks/bench_kernels.py`
compares the two.
"""

from __future__ import annotations

import os

import numpy as np

__all__ = [
    "transfer_step",
    "transfer_step_right",
    "transfer_step_pair",
    "build_theta",
    "active_lane",
]


# ---------------------------------------------------------------------------
# numpy lane
# ---------------------------------------------------------------------------

def _transfer_step_np(v, a, w):
    tmp = np.tensordot(v, a, axes=(0, 0))  # (d, chi_r)
    return w @ tmp


def _transfer_step_right_np(r, a, w):
    tmp = np.tensordot(a, r, axes=(2, 0))  # (chi_l, d)
    return tmp @ w


def _transfer_step_pair_np(v, a, b, wmat):
    u = np.tensordot(v, a, axes=(0, 0))  # (d1, chi_m)
    z = np.tensordot(u, b, axes=(1, 0))  # (d1, d2, chi_r)
    return np.tensordot(wmat, z, axes=((0, 1), (0, 1)))


def _build_theta_np(a, b, gate):
    th = np.tensordot(a, b, axes=(2, 0))  # (chi_l, d1, d2, chi_r)
    th = th * gate[None, :, :, None]
    chi_l, d1, d2, chi_r = th.shape
    return th.reshape(chi_l * d1, d2 * chi_r)


# ---------------------------------------------------------------------------
# numba lane
# ---------------------------------------------------------------------------

def _make_numba_kernels():
    from numba import njit

    @njit(cache=True)
    def transfer_step_nb(v, a, w):
        chi_l, d, chi_r = a.shape
        out = np.zeros(chi_r, dtype=np.complex128)
        for k in range(d):
            wk = w[k]
            if wk == 0:
                continue
            for i in range(chi_l):
                vi = v[i] * wk
                if vi != 0:
                    for j in range(chi_r):
                        out[j] += vi * a[i, k, j]
        return out

    @njit(cache=True)
    def transfer_step_right_nb(r, a, w):
        chi_l, d, chi_r = a.shape
        out = np.zeros(chi_l, dtype=np.complex128)
        for k in range(d):
            wk = w[k]
            if wk == 0:
                continue
            for i in range(chi_l):
                acc = 0.0 + 0.0j
                for j in range(chi_r):
                    acc += a[i, k, j] * r[j]
                out[i] += wk * acc
        return out

    @njit(cache=True)
    def transfer_step_pair_nb(v, a, b, wmat):
        chi_l, d1, chi_m = a.shape
        _, d2, chi_r = b.shape
        out = np.zeros(chi_r, dtype=np.complex128)
        u = np.zeros(chi_m, dtype=np.complex128)
        for k1 in range(d1):
            for m in range(chi_m):
                acc = 0.0 + 0.0j
                for i in range(chi_l):
                    acc += v[i] * a[i, k1, m]
                u[m] = acc
            for k2 in range(d2):
                wk = wmat[k1, k2]
                if wk == 0:
                    continue
                for m in range(chi_m):
                    um = u[m] * wk
                    if um != 0:
                        for j in range(chi_r):
                            out[j] += um * b[m, k2, j]
        return out

    @njit(cache=True)
    def build_theta_nb(a, b, gate):
        chi_l, d1, chi_m = a.shape
        _, d2, chi_r = b.shape
        # stage the physical slices contiguously so the inner products run as
        # matmuls (BLAS) even from inside the jitted loop
        bc = np.empty((d2, chi_m, chi_r), dtype=np.complex128)
        for k2 in range(d2):
            bc[k2] = b[:, k2, :]
        th = np.empty((chi_l, d1, d2, chi_r), dtype=np.complex128)
        for k1 in range(d1):
            a_k = np.ascontiguousarray(a[:, k1, :])
            for k2 in range(d2):
                g = gate[k1, k2]
                if g == 0:
                    th[:, k1, k2, :] = 0.0
                else:
                    th[:, k1, k2, :] = g * (a_k @ bc[k2])
        return th.reshape(chi_l * d1, d2 * chi_r)

    return transfer_step_nb, transfer_step_right_nb, transfer_step_pair_nb, build_theta_nb


def _want_numba() -> bool:
    flag = os.environ.get("COHSURF_NUMBA", "auto").strip().lower()
    if flag in ("0", "false", "off", "no"):
        return False
    return True


_LANE = "numpy"
transfer_step = _transfer_step_np
transfer_step_right = _transfer_step_right_np
transfer_step_pair = _transfer_step_pair_np
build_theta = _build_theta_np

if _want_numba():
    try:
        transfer_step, transfer_step_right, transfer_step_pair, build_theta = (
            _make_numba_kernels()
        )
        _LANE = "numba"
    except ImportError:
        pass


def active_lane() -> str:
    """Which kernel implementation is in use: 'numba' or 'numpy'."""
    return _LANE


def numpy_kernels():
    """The numpy-lane kernels, regardless of the active lane (benchmarks)."""
    return (
        _transfer_step_np,
        _transfer_step_right_np,
        _transfer_step_pair_np,
        _build_theta_np,
    )
