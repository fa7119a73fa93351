"""Matching decoder against brute-force pairing and chain-length oracles."""

import itertools

import numpy as np
import pytest

from cohsurf.channel import ErrorChannelParams
from cohsurf.lattice import build_layout, identity_eta, syndrome_key, syndrome_of
from cohsurf.mwpm import (
    brute_force_matching_weight,
    build_matching_graph,
    decode,
    decoded_class,
    matching_weight,
    mwpm_error_rate,
    weighted_distances,
)
from cohsurf.oracle import exact_z_table
from cohsurf.sampler import sample_batch
from cohsurf.transfer import z_matrix

LAY3 = build_layout(3, 3)
LAY5 = build_layout(5, 5)


def min_chain_weight_brute(layout, s):
    """Smallest number of flips realizing syndrome s (exhaustive, d=3)."""
    best = None
    for bits in itertools.product([1, -1], repeat=layout.n_qubits):
        eta = np.array(bits, dtype=np.int8)
        if syndrome_of(layout, eta) == s:
            w = int(np.sum(eta < 0))
            best = w if best is None else min(best, w)
    return best


class TestMatchingGraph:
    def test_empty_syndrome(self):
        g = build_matching_graph(LAY3, frozenset())
        assert g.defects == ()

    def test_adjacent_bulk_defects_weight_one(self):
        # two plaquettes sharing a qubit are one flip apart
        for i, sup_i in enumerate(LAY3.z_stabilizers):
            for k, sup_k in enumerate(LAY3.z_stabilizers):
                if k <= i or not set(sup_i) & set(sup_k):
                    continue
                g = build_matching_graph(LAY3, frozenset({i, k}))
                assert g.distances[0, 1] == 1

    def test_boundary_weights_match_exhaustive_chains(self):
        for p in range(LAY3.n_z):
            g = build_matching_graph(LAY3, frozenset({p}))
            assert g.boundary[0] == min_chain_weight_brute(LAY3, frozenset({p}))

    def test_triangle_inequality(self):
        lay = build_layout(5, 7)
        s = frozenset(range(lay.n_z))
        g = build_matching_graph(lay, s)
        d = g.distances
        n = len(s)
        for i in range(n):
            assert d[i, i] == 0
            for j in range(n):
                assert d[i, j] == d[j, i]
                for k in range(n):
                    assert d[i, j] <= d[i, k] + d[k, j]


class TestDecode:
    def test_empty_syndrome_identity(self):
        q, corr = decode(LAY3, frozenset())
        assert q == 0
        assert np.array_equal(corr, identity_eta(LAY3))

    def test_single_defect_to_boundary(self):
        for p in range(LAY3.n_z):
            s = frozenset({p})
            q, corr = decode(LAY3, s)
            assert syndrome_of(LAY3, corr) == s
            assert int(np.sum(corr < 0)) == matching_weight(LAY3, s)

    def test_correction_always_has_requested_syndrome(self):
        rng = np.random.default_rng(3)
        for _ in range(100):
            s = frozenset(np.flatnonzero(rng.random(LAY5.n_z) < 0.3).tolist())
            _, corr = decode(LAY5, s)
            assert syndrome_of(LAY5, corr) == s

    def test_determinism(self):
        s = frozenset({0, 2, 5, 9})
        q1, c1 = decode(LAY5, s)
        q2, c2 = decode(LAY5, s)
        assert q1 == q2
        assert np.array_equal(c1, c2)

    @pytest.mark.parametrize("d", [3, 5, 7])
    def test_matching_weight_optimal_vs_brute_force(self, d):
        lay = build_layout(d, d)
        rng = np.random.default_rng(d)
        for _ in range(300):
            k = int(rng.integers(0, min(12, lay.n_z) + 1))
            s = frozenset(rng.choice(lay.n_z, size=k, replace=False).tolist())
            got = matching_weight(lay, s)
            g = build_matching_graph(lay, s)
            want = brute_force_matching_weight(g.distances, g.boundary)
            assert got == want

    def test_weighted_distances_reduce_to_uniform(self):
        g_uniform = weighted_distances(LAY5, np.ones(LAY5.n_qubits))
        for p in range(LAY5.n_z):
            for q in range(LAY5.n_z):
                ref = build_matching_graph(LAY5, frozenset({p, q}) if p != q else frozenset({p}))
                assert g_uniform.distances[p, q] == pytest.approx(
                    ref.distances[0, 1] if p != q else 0, abs=1e-12
                )

    def test_weighted_distances_respond_to_weights(self):
        w = np.ones(LAY5.n_qubits)
        j_cheap = LAY5.z_stabilizers[0][0]
        w[j_cheap] = 0.01
        g = weighted_distances(LAY5, w)
        assert g.boundary.min() <= 0.01 + 1e-12


class TestErrorRate:
    def test_vanishing_p(self):
        params = ErrorChannelParams.uniform(1e-4, 0.0, 9)
        recs = sample_batch(LAY3, params, 200, master_seed=1, collect_entropies=False)
        lookup = {
            s: z_matrix(LAY3, params, s, method="dense")
            for s in {r.syndrome for r in recs}
        }
        est = mwpm_error_rate(LAY3, recs, lookup)
        assert est.mean < 1e-2

    def test_optimal_class_decoder_equals_ml_average(self, monkeypatch):
        import cohsurf.mwpm as mwpm_mod
        from cohsurf.metrics import logical_error_rate

        params = ErrorChannelParams.uniform(0.1, 0.7, 9)
        recs = sample_batch(LAY3, params, 300, master_seed=4, collect_entropies=False)
        lookup = {
            s: z_matrix(LAY3, params, s, method="dense")
            for s in {r.syndrome for r in recs}
        }

        def optimal(layout, s):
            z00, z11 = lookup[s].diagonals()
            return 0 if z00 >= z11 else 1

        monkeypatch.setattr(mwpm_mod, "decoded_class", optimal)
        est = mwpm_error_rate(LAY3, recs, lookup)
        ml = logical_error_rate(recs, lookup)
        assert est.mean == pytest.approx(ml.mean, abs=1e-12)

    def test_incoherent_d3_matches_exhaustive(self):
        p = 0.1
        params = ErrorChannelParams.uniform(p, 0.0, 9)
        table = exact_z_table(LAY3, params)
        exact = 0.0
        for bits in itertools.product([0, 1], repeat=4):
            s = frozenset(i for i, b in enumerate(bits) if b)
            key = syndrome_key(s)
            z00 = table[(key, 0, 0)].real
            z11 = table[(key, 1, 1)].real
            zq = z00 if decoded_class(LAY3, s) == 0 else z11
            exact += (z00 + z11) * (1 - zq / (z00 + z11))
        recs = sample_batch(LAY3, params, 4000, master_seed=8, collect_entropies=False)
        lookup = {
            s: z_matrix(LAY3, params, s, method="dense")
            for s in {r.syndrome for r in recs}
        }
        est = mwpm_error_rate(LAY3, recs, lookup)
        assert abs(est.mean - exact) < 3 * est.sem + 1e-12
