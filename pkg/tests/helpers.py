"""Shared brute-force reference implementations for the test suite.

Everything here is written for clarity, not speed, and stays independent of
the package's production paths so it can serve as an oracle.
"""

import numpy as np


def dense_from_vectors(vectors):
    psi = np.array([1.0 + 0j])
    for v in vectors:
        psi = np.kron(psi, np.asarray(v, dtype=complex))
    return psi


def dense_apply_two_site_diag(psi, n, d, bond, gate):
    """Diagonal two-site gate on sites (bond, bond+1) of an n-site chain."""
    shape = (d**bond, d, d, d ** (n - bond - 2))
    out = psi.reshape(shape) * np.asarray(gate, dtype=complex)[None, :, :, None]
    return out.reshape(-1)


def dense_apply_single_site(psi, n, d, site, op):
    shape = (d**site, d, d ** (n - site - 1))
    out = np.einsum("kl,alb->akb", np.asarray(op, dtype=complex), psi.reshape(shape))
    return out.reshape(-1)


def dense_schmidt(psi, n, d, cut):
    """Normalized Schmidt values for a cut with `cut` sites on the left."""
    mat = psi.reshape(d**cut, d ** (n - cut))
    s = np.linalg.svd(mat, compute_uv=False)
    return s / np.linalg.norm(s)


def dense_entropy(psi, n, d, cut):
    s2 = dense_schmidt(psi, n, d, cut) ** 2
    s2 = s2[s2 > 1e-30]
    return float(-np.sum(s2 * np.log(s2)))


def random_mps_as_dense(rng, n, d, chi):
    """A random MPS (returned both as tensor list and dense vector)."""
    tensors = []
    chi_l = 1
    for i in range(n):
        chi_r = 1 if i == n - 1 else chi
        t = rng.normal(size=(chi_l, d, chi_r)) + 1j * rng.normal(size=(chi_l, d, chi_r))
        tensors.append(t)
        chi_l = chi_r
    psi = tensors[0]
    for t in tensors[1:]:
        psi = np.tensordot(psi, t, axes=(psi.ndim - 1, 0))
    return tensors, psi.reshape(-1)
