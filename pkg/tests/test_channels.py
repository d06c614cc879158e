import math
import warnings

import numpy as np
import pytest

from singlet_distill import channels as ch
from singlet_distill import sector_model as sm
from singlet_distill import spin_algebra as sa
from singlet_distill.errors import NotMixingError, ResonantShakingWarning
from singlet_distill.momentum import DiscreteMomenta, PointMass, TruncatedGaussian
from singlet_distill.scattering import PhysicalParams, scatter_operators

PI = math.pi


def _direct(op, rho, ancilla=None):
    ancilla = np.eye(2) / 2 if ancilla is None else ancilla
    return sa.partial_trace_X(op @ np.kron(ancilla, rho) @ op.conj().T)


def test_vectorization_convention(rng):
    A = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
    B = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
    rho = sa.random_density(rng)
    assert np.allclose(ch.conjugation(A, B).apply(rho), A @ rho @ B.conj().T)


def test_reduced_channel_matches_partial_trace(rng, params):
    T = scatter_operators(params.with_(kappa=1.3)).T
    rho = sa.random_density(rng)
    assert np.allclose(ch.channel_T(params.with_(kappa=1.3)).apply(rho), _direct(T, rho), atol=1e-14)
    x = sa.random_density(rng, dim=2)
    assert np.allclose(ch.reduced_channel(T, x).apply(rho), _direct(T, rho, x), atol=1e-14)


def test_identity_choi_is_maximally_entangled():
    ev = np.linalg.eigvalsh(ch.identity_channel().choi())
    assert np.allclose(sorted(ev), [0] * 15 + [4])


def test_transmission_preserves_singlet_at_resonance(params):
    assert np.linalg.norm(ch.channel_T(params).apply(sa.singlet()) - sa.singlet()) < 1e-12
    assert np.linalg.norm(ch.channel_R(params).apply(sa.singlet())) < 1e-12


def test_transmission_and_reflection_split_the_trace(rng):
    for _ in range(10):
        p = PhysicalParams(kappa=rng.uniform(0.3, 15), G=rng.uniform(0.1, 8))
        rho = sa.random_density(rng)
        t = np.trace(ch.channel_T(p).apply(rho)).real
        r = np.trace(ch.channel_R(p).apply(rho)).real
        assert t + r == pytest.approx(1, abs=1e-12)
        assert -1e-12 <= t <= 1 + 1e-12


def test_branches_are_trace_non_increasing_cp(params):
    for S in (ch.channel_T(params.with_(kappa=1.9)), ch.channel_R(params.with_(kappa=1.9))):
        rep = ch.certify(S)
        assert rep.choi_min_eigenvalue > -1e-10
        # adjoint of the identity is a contraction
        adj = ch.unvec(S.matrix.conj().T @ ch.VEC_IDENTITY)
        assert np.linalg.eigvalsh(adj).max() <= 1 + 1e-12


def test_ideal_map_fixes_singlet(params):
    M = ch.protocol_map(params)
    assert np.linalg.norm(M.apply(sa.singlet()) - sa.singlet()) < 1e-12


def test_no_outflow_from_singlet(rng, params):
    M = ch.protocol_map(params)
    Pm = ch.super_projector("-")
    for _ in range(20):
        rho = sa.random_density(rng)
        assert np.trace(Pm.apply(M.apply(rho))).real >= np.trace(Pm.apply(rho)).real - 1e-14


def test_trace_preservation_random_states(rng, params):
    M = ch.protocol_map(params)
    for _ in range(20):
        rho = sa.random_density(rng)
        assert abs(np.trace(M.apply(rho)) - 1) < 1e-12


def test_warns_on_resonant_shaking(params):
    with pytest.warns(ResonantShakingWarning):
        ch.protocol_map(params.with_(chi=2 * PI))


def test_resonant_shaking_is_not_mixing(params):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ResonantShakingWarning)
        M = ch.protocol_map(params.with_(chi=2 * PI))
    assert not ch.is_mixing(M)
    with pytest.raises(NotMixingError):
        ch.fixed_point(M)


@pytest.mark.parametrize("n", [1, 2, 3])
def test_resonant_projection_identity(n):
    p = PhysicalParams.resonant(n, G=1.7)
    Pm = ch.super_projector("-")
    lhs = (Pm @ ch.channel_T(p)).matrix
    assert np.linalg.norm(lhs - Pm.matrix) < 1e-12


def test_shaking_couples_every_triplet_to_singlet(params):
    Pm = ch.super_projector("-")
    S_q = ch.channel_S(params, kappa=params.chi)
    R = ch.channel_R(params)
    chain = Pm @ S_q @ R
    assert np.linalg.norm(chain.apply(sa.singlet())) < 1e-12
    triplets = [sa.product_state(0, 0), sa.product_state(1, 1),
                np.outer([0, 1, 1, 0], [0, 1, 1, 0]) / 2]
    for t in triplets:
        assert np.trace(chain.apply(t)).real > 1e-3


def test_sector_closure_with_coherences(rng):
    Pm, Pp = sa.singlet(), np.eye(4) - sa.singlet()
    for _ in range(20):
        p = PhysicalParams(kappa=rng.uniform(0.5, 12), chi=rng.uniform(0.5, 12), G=rng.uniform(0.2, 6))
        rho = sa.random_density(rng)
        assert np.linalg.norm(Pm @ rho @ Pp) > 1e-3  # carries singlet-triplet coherence
        pops = np.array([np.trace(Pm @ rho).real, np.trace(Pp @ rho).real])
        out = ch.protocol_map(p).apply(rho)
        got = [np.trace(Pm @ out).real, np.trace(Pp @ out).real]
        want = sm.sector_protocol(p.kappa, p.chi, p.G).apply(pops)
        assert np.max(np.abs(np.array(got) - want)) < 1e-12


# --- detector variants -------------------------------------------------------

@pytest.mark.parametrize("variant", ["I", "II"])
def test_detector_map_unit_efficiency_is_protocol(params, variant):
    d = ch.detector_map(params, variant, eta=1.0)
    assert np.max(np.abs(d.matrix - ch.protocol_map(params).matrix)) < 1e-14


@pytest.mark.parametrize("eta", [0.1, 0.5, 0.9, 1.0])
def test_detector_case_I_keeps_singlet_fixed_point(params, eta):
    rho = ch.fixed_point(ch.detector_map(params, "I", eta=eta))
    assert sa.singlet_fidelity(rho) == pytest.approx(1, abs=1e-8)


def test_detector_case_II_zero_efficiency(params):
    rho = ch.fixed_point(ch.detector_map(params, "II", eta=0.0))
    assert sa.singlet_fidelity(rho) == pytest.approx(0.25, abs=1e-8)


def test_detector_rejects_bad_variant(params):
    with pytest.raises(ValueError):
        ch.detector_map(params, "III")
    with pytest.raises(ValueError):
        ch.detector_map(params, "I", eta=1.5)


# --- averaging -----------------------------------------------------------------

def test_point_distribution_reduces_to_protocol(params):
    A = ch.averaged_map(PointMass(PI), params)
    assert np.max(np.abs(A.matrix - ch.protocol_map(params).matrix)) < 1e-12


def test_gaussian_average_is_cpt(params):
    A = ch.averaged_map(TruncatedGaussian(PI, 0.05 * PI), params)
    rep = ch.certify(A)
    assert rep.trace_defect < 1e-10 and rep.hermiticity_defect < 1e-10
    assert rep.choi_min_eigenvalue > -1e-10


def test_gaussian_average_matches_sector_route(params):
    dist = TruncatedGaussian(PI, 0.05 * PI)
    full = sa.singlet_fidelity(ch.fixed_point(ch.averaged_map(dist, params)))
    _, sector = sm.averaged_sector(1, 0.05 * PI, params.chi, params.G)
    assert full == pytest.approx(sector, abs=1e-10)


def test_small_resonant_mass_still_mixing(params):
    # 1% of the ancillas on resonance, the rest on a far-off momentum
    dist = DiscreteMomenta([PI, 1.5 * PI], [0.01, 0.99])
    A = ch.averaged_map(dist, params)
    assert ch.spectral_moduli(A)[1] < 1 - 1e-9
    sa.check_density(ch.fixed_point(A), tol=1e-10)


def test_joint_q_fluctuation_is_bilinear_average(params):
    kd = DiscreteMomenta([PI, 1.02 * PI], [0.7, 0.3])
    qd = DiscreteMomenta([2.3 * PI, 2.6 * PI], [0.4, 0.6])
    got = ch.averaged_map(kd, params, q_distribution=qd).matrix
    want = sum(wk * wq * ch.protocol_map(params.with_(kappa=k, chi=q)).matrix
               for k, wk in zip(*kd.nodes()) for q, wq in zip(*qd.nodes()))
    assert np.max(np.abs(got - want)) < 1e-12


# --- spectrum and fixed points ---------------------------------------------------

def test_identity_spectrum():
    assert np.allclose(ch.superop_spectrum(ch.identity_channel()), 1)


def test_ideal_spectrum_gap(params):
    ev = ch.superop_spectrum(ch.protocol_map(params))
    assert abs(ev[0] - 1) < 1e-10
    assert np.sum(np.abs(ev - 1) < 1e-9) == 1
    assert abs(ev[1]) < 1
    assert np.all(np.diff(np.abs(ev)) <= 1e-15)


def test_gap_persists_off_resonance(params):
    l0, l1 = ch.spectral_moduli(ch.protocol_map(params.with_(kappa=0.97 * PI)))
    assert abs(l0 - 1) < 1e-10 and l1 < 1


@pytest.mark.parametrize("kappa", [0.97, 1.0, 1.4, 2.3])
def test_power_iteration_oracle(params, kappa):
    M = ch.protocol_map(params.with_(kappa=kappa * PI))
    rho = ch.fixed_point(M)
    l0, l1 = ch.power_moduli(M, rho, steps=600)
    e0, e1 = ch.spectral_moduli(M)
    assert l0 == pytest.approx(e0, abs=1e-10)
    assert l1 == pytest.approx(e1, rel=2e-3)


def test_fixed_point_ideal_is_singlet(params):
    M = ch.protocol_map(params)
    rho = ch.fixed_point(M)
    assert np.linalg.norm(rho - sa.singlet()) < 1e-10
    assert np.linalg.norm(M.apply(rho) - rho) < 1e-10


@pytest.mark.parametrize("kappa", [0.9, 0.99, 1.05, 1.7])
def test_fixed_point_off_resonance_matches_formula(params, kappa):
    p = params.with_(kappa=kappa * PI)
    rho = ch.fixed_point(ch.protocol_map(p))
    sa.check_density(rho, tol=1e-10)
    want = sm.fixed_fidelity(sm.sector_protocol(p.kappa, p.chi, p.G))
    assert sa.singlet_fidelity(rho) == pytest.approx(want, abs=1e-8)


def test_iterate_zero_steps(params):
    rho0 = sa.product_state(0, 0)
    out = ch.iterate(ch.protocol_map(params), rho0, 0)
    assert len(out) == 1 and np.allclose(out[0], rho0)


def test_iterate_states_stay_valid(params):
    for rho in ch.iterate(ch.protocol_map(params.with_(kappa=1.03 * PI)), sa.product_state(0, 1), 40):
        sa.check_density(rho, tol=1e-10)


def test_iterate_matches_closed_form(params):
    curve = ch.fidelity_curve(ch.protocol_map(params), 50)
    for N in range(51):
        assert curve[N] == pytest.approx(sm.closed_form_curve(1, params.chi, params.G, 0.25, N), abs=1e-10)


def test_fidelity_non_decreasing_from_product_state(params):
    curve = ch.fidelity_curve(ch.protocol_map(params), 60, rho0=sa.product_state(0, 0))
    assert np.all(np.diff(curve) >= -1e-14)
    assert curve[-1] > 0.99


def test_average_fidelity(params):
    M = ch.protocol_map(params)
    assert ch.average_fidelity(M, 0) == pytest.approx(0.25)
    assert ch.average_fidelity(M, 25) >= 0.99


def test_average_fidelity_ordered_in_n():
    f = [ch.average_fidelity(ch.protocol_map(PhysicalParams.resonant(n)), 20) for n in range(1, 6)]
    assert all(a > b for a, b in zip(f, f[1:]))


def test_fully_polarized_ancillas_conserve_spin():
    # |up up up> is the top of the spin-3/2 multiplet, so nothing reaches the singlet
    p = PhysicalParams()
    up = np.diag([1.0, 0.0]).astype(complex)
    M = ch.channel_T(p, ancilla=up) + ch.channel_S(p, kappa=p.chi, ancilla=up) @ ch.channel_R(p, ancilla=up)
    curve = ch.fidelity_curve(M, 100, rho0=sa.product_state(0, 0))
    assert np.max(curve) < 1e-12
    assert ch.fidelity_curve(ch.protocol_map(p), 100, rho0=sa.product_state(0, 0))[-1] > 0.99


def test_polarized_shaking_ancilla_is_supported(params):
    up = np.diag([1.0, 0.0]).astype(complex)
    M = ch.protocol_map(params, shaking_ancilla=up)
    assert ch.certify(M).passed()
    assert ch.fidelity_curve(M, 200)[-1] > 0.99


def test_superoperator_is_immutable(params):
    M = ch.protocol_map(params)
    with pytest.raises(ValueError):
        M.matrix[0, 0] = 2
