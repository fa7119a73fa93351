"""Channel parameters, RBIM couplings, and the generic-channel expansion."""

import math

import numpy as np
import pytest

from cohsurf.channel import (
    BondCouplings,
    ErrorChannelParams,
    ExpansionError,
    bond_couplings,
    channel_weights,
    generic_channel_expansion,
    reconstruct_process_matrix,
    single_species_coupling,
    single_species_weights,
    vectorized_couplings,
    x_channel_process_matrix,
)


class TestChannelParams:
    def test_uniform(self):
        params = ErrorChannelParams.uniform(0.1, 0.5, 9)
        assert params.n == 9
        assert np.all(params.p == 0.1)

    def test_cptp_bound(self):
        with pytest.raises(ValueError):
            ErrorChannelParams.uniform(0.1, 1.5, 4)

    def test_p_domain(self):
        with pytest.raises(ValueError):
            ErrorChannelParams.uniform(1.0, 0.5, 4)

    def test_incoherent_cutoff(self):
        assert ErrorChannelParams.uniform(0.1, 0.0, 4).is_incoherent()
        assert ErrorChannelParams.uniform(0.1, 1e-9, 4).is_incoherent()
        assert not ErrorChannelParams.uniform(0.1, 1e-3, 4).is_incoherent()


class TestBondCouplings:
    def test_symmetric_point(self):
        # p = 1/2, gamma = 1: J1 = -i pi/4, J3 = 0, J0 = -ln 2
        c = bond_couplings(0.5, 1.0)
        assert c.j1[0] == pytest.approx(-0.25j * np.pi, abs=1e-15)
        assert c.j3[0] == pytest.approx(0.0, abs=1e-15)
        assert c.j0[0] == pytest.approx(-math.log(2), abs=1e-15)
        assert c.j2[0] == pytest.approx(np.conj(c.j1[0]), abs=1e-15)

    def test_j3_value(self):
        c = bond_couplings(0.1, 0.5)
        assert c.j3[0].real == pytest.approx(0.34657359027997265, abs=1e-14)
        assert c.j3[0].imag == 0

    def test_reconstruction_identity_random(self):
        """exp(J0 + J1 x + J2 xb + J3 x xb) reproduces the channel coefficients."""
        rng = np.random.default_rng(2024)
        p = rng.uniform(1e-3, 1 - 1e-3, 10_000)
        g = rng.uniform(1e-3, 1.0, 10_000)
        w_from_j = bond_couplings(p, g).weights()
        w_direct = channel_weights(p, g)
        assert np.max(np.abs(w_from_j - w_direct)) < 1e-12

    def test_negative_gamma_is_adjoint(self):
        c_neg = bond_couplings(0.2, -0.7)
        c_pos = bond_couplings(0.2, 0.7)
        assert c_neg.j1[0] == pytest.approx(np.conj(c_pos.j1[0]), abs=1e-15)
        assert np.max(np.abs(c_neg.weights() - channel_weights(0.2, -0.7))) < 1e-14

    @pytest.mark.parametrize("p,g", [(0.0, 0.5), (1.0, 0.5), (0.1, 0.0), (0.1, 1.5)])
    def test_domain_violations(self, p, g):
        with pytest.raises(ValueError):
            bond_couplings(p, g)

    def test_coherent_limit_decouples(self):
        assert bond_couplings(0.3, 1.0).j3[0] == 0


class TestSingleSpecies:
    def test_coupling_definition(self):
        for p in (0.05, 0.1, 0.3, 0.49):
            k = single_species_coupling(p)
            assert math.exp(-2 * k) == pytest.approx(p / (1 - p), rel=1e-14)

    def test_weights_match_classical_rbim(self):
        p = 0.17
        w = single_species_weights(p)[0]
        k = single_species_coupling(p)
        # up to the qubit-independent scale exp(c), weights are exp(+-K)
        scale = math.sqrt(p * (1 - p))
        assert w[0] == pytest.approx(scale * math.exp(k), rel=1e-14)
        assert w[1] == pytest.approx(scale * math.exp(-k), rel=1e-14)

    def test_channel_weights_flush_tiny_gamma(self):
        w = channel_weights(0.1, 1e-9)[0]
        assert w[1] == 0 and w[2] == 0


class TestVectorizedCouplings:
    def test_coherent_limit(self):
        k = vectorized_couplings(0.2, 1.0)
        assert k.k0 == 0
        assert k.k3 == 0

    def test_identity_channel(self):
        k = vectorized_couplings(0.0, 0.7)
        assert k.k0 == k.k1 == k.k2 == k.k3 == 0

    def test_frozen_value(self):
        k = vectorized_couplings(0.1, 0.5)
        assert k.k0.real == pytest.approx(-0.07867768620992506, abs=1e-14)
        assert k.k1.imag == pytest.approx(0.17938533513528611, abs=1e-14)

    def test_exact_identities(self):
        for p, g in [(0.05, 0.3), (0.2, 0.9), (0.4, 1.0), (0.3, 0.0)]:
            k = vectorized_couplings(p, g)
            assert k.k0 == -k.k3
            assert k.k1 == -k.k2
            assert k.k0.imag == 0
            assert k.k1.real == 0

    def test_bond_sign_phases(self):
        base = vectorized_couplings(0.1, 0.5)
        k = vectorized_couplings(0.1, 0.5, eta=-1, eta_bar=1)
        assert k.k0 == pytest.approx(base.k0 - 0.5j * math.pi, abs=1e-15)
        assert k.k1 == pytest.approx(base.k1 + 0.5j * math.pi, abs=1e-15)
        assert k.k3 == base.k3

    def test_half_p_rejected(self):
        with pytest.raises(ValueError):
            vectorized_couplings(0.5, 0.5)


def random_full_support_process_matrix(rng):
    """Hermitian, trace-preserving eps with generic (nonzero) coefficients."""
    a = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
    eps = 0.05 * (a + a.conj().T)
    eps[0, 0] += 1.0
    # restore trace preservation: sum eps[mu,nu] O^nu O^mu = I
    from cohsurf.channel import _PAULI

    t = sum(eps[m, n] * (_PAULI[n] @ _PAULI[m]) for m in range(4) for n in range(4))
    # the identity component absorbs the correction; off-identity parts of t
    # are removed by adjusting eps[0,:] and eps[:,0]
    for k in range(1, 4):
        coeff = np.trace(_PAULI[k] @ t) / 2
        eps[0, k] -= coeff / 2
        eps[k, 0] -= np.conj(coeff) / 2
    eps[0, 0] -= (np.trace(t).real / 2 - 1)
    return eps


class TestGenericExpansion:
    def test_x_channel_matches_bond_couplings(self):
        p, g = 0.15, 0.6
        ex = generic_channel_expansion(x_channel_process_matrix(p, g))
        c = bond_couplings(p, g)
        # bit layout (x, z, xbar, zbar) MSB->LSB
        assert ex.couplings[0b0000] == pytest.approx(complex(c.j0[0]), abs=1e-13)
        assert ex.couplings[0b1000] == pytest.approx(complex(c.j1[0]), abs=1e-13)
        assert ex.couplings[0b0010] == pytest.approx(complex(c.j2[0]), abs=1e-13)
        assert ex.couplings[0b1010] == pytest.approx(complex(c.j3[0]), abs=1e-13)
        nonzero = {t for t in range(16) if abs(ex.couplings[t]) > 1e-13}
        assert nonzero <= {0b0000, 0b1000, 0b0010, 0b1010}

    def test_identity_channel(self):
        eps = np.zeros((4, 4), dtype=complex)
        eps[0, 0] = 1.0
        ex = generic_channel_expansion(eps)
        assert np.allclose(ex.couplings, 0)
        assert ex.support == frozenset({0})

    def test_depolarizing_roundtrip(self):
        p = 0.1
        eps = np.diag([1 - p, p / 3, p / 3, p / 3]).astype(complex)
        ex = generic_channel_expansion(eps)
        back = reconstruct_process_matrix(ex)
        assert np.max(np.abs(back - eps)) < 1e-10

    def test_full_support_roundtrip(self):
        rng = np.random.default_rng(5)
        for _ in range(20):
            eps = random_full_support_process_matrix(rng)
            ex = generic_channel_expansion(eps)
            back = reconstruct_process_matrix(ex)
            assert np.max(np.abs(back - eps)) < 1e-10

    def test_non_subgroup_zero_pattern_reported(self):
        # E[rho] = rho/2 + X rho X/4 + Y rho Y/4: support not XOR-closed
        eps = np.diag([0.5, 0.25, 0.25, 0.0]).astype(complex)
        with pytest.raises(ExpansionError):
            generic_channel_expansion(eps)

    def test_rejects_non_hermitian(self):
        eps = np.zeros((4, 4), dtype=complex)
        eps[0, 0] = 1.0
        eps[0, 1] = 0.1
        with pytest.raises(ValueError):
            generic_channel_expansion(eps)

    def test_rejects_trace_violation(self):
        eps = np.diag([0.8, 0.1, 0.0, 0.0]).astype(complex)
        with pytest.raises(ValueError):
            generic_channel_expansion(eps)
