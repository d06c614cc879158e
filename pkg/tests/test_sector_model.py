import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from singlet_distill import channels as ch
from singlet_distill import sector_model as sm
from singlet_distill import spin_algebra as sa
from singlet_distill.errors import FidelityFormulaError
from singlet_distill.momentum import DiscreteMomenta
from singlet_distill.scattering import PhysicalParams

PI = math.pi
SINGLET = sa.singlet()
TRIPLET = (np.eye(4) - SINGLET) / 3


def extract(superop):
    """2x2 population matrix of a channel, read off from its action on the
    normalized singlet and triplet-sector states."""
    cols = []
    for rho in (SINGLET, TRIPLET):
        out = superop.apply(rho)
        cols.append([np.trace(SINGLET @ out).real, np.trace((np.eye(4) - SINGLET) @ out).real])
    return np.array(cols).T


momenta = st.floats(0.2, 15)
couplings = st.floats(0.05, 8)


@settings(max_examples=40, deadline=None)
@given(momenta, couplings)
def test_T_R_entries_match_full_channel(kappa, G):
    p = PhysicalParams(kappa=kappa, G=G)
    assert np.max(np.abs(sm.sector_T(kappa, G).entries - extract(ch.channel_T(p)))) < 1e-12
    assert np.max(np.abs(sm.sector_R(kappa, G).entries - extract(ch.channel_R(p)))) < 1e-12


@settings(max_examples=40, deadline=None)
@given(momenta, momenta, couplings)
def test_protocol_entries_match_full_channel(kappa, chi, G):
    p = PhysicalParams(kappa=kappa, chi=chi, G=G)
    m = sm.sector_protocol(kappa, chi, G)
    assert np.max(np.abs(m.entries - extract(ch.protocol_map(p)))) < 1e-12
    assert np.allclose(m.column_sums(), 1, atol=1e-12)


@settings(max_examples=40, deadline=None)
@given(momenta, couplings)
def test_column_sums(kappa, G):
    s = sm.sector_T(kappa, G).entries + sm.sector_R(kappa, G).entries
    assert np.allclose(s.sum(axis=0), 1, atol=1e-12)
    assert np.allclose(sm.sector_S(kappa, G).column_sums(), 1, atol=1e-12)


@pytest.mark.parametrize("n", [1, 2, 3, 4])
def test_w_vanishes_at_resonance(n):
    assert sm.w_coefficient(n * PI, 1.3) < 1e-28


def test_w_reference_value():
    w = sm.w_coefficient(2.5 * PI, PI)
    assert w == pytest.approx(0.1999, abs=1e-3)
    p = PhysicalParams(kappa=2.5 * PI, G=PI)
    # W is the triplet-to-singlet transfer of a full, unmonitored scattering
    assert w == pytest.approx(extract(ch.channel_S(p))[0, 1], abs=1e-13)
    assert w == pytest.approx(sm.sector_T(2.5 * PI, PI)[0, 1] + sm.sector_R(2.5 * PI, PI)[0, 1], abs=1e-13)


def test_v_exact_value_for_unit_ratio():
    o2 = Fraction(1)
    exact = 8 * o2 * (1 + 8 * o2) / ((1 + 16 * o2) * (1 + 4 * o2))
    assert exact == Fraction(72, 85)
    assert sm.v_coefficient(1, PI) == pytest.approx(float(exact), abs=1e-15)


def test_v_limits():
    assert sm.v_coefficient(1, 1e-6) < 1e-10
    assert sm.v_coefficient(1, 1e4) == pytest.approx(1, abs=1e-6)
    assert all(sm.v_coefficient(n, PI) > sm.v_coefficient(n + 1, PI) for n in range(1, 8))
    with pytest.raises(ValueError):
        sm.v_coefficient(0, 1.0)


@pytest.mark.parametrize("n", [1, 2, 3])
@pytest.mark.parametrize("G", [0.3, PI, 5.0])
def test_v_is_resonant_triplet_reflection(n, G):
    r = sm.sector_R(n * PI, G)
    assert r[0, 0] == pytest.approx(0, abs=1e-14)
    assert r[0, 1] == pytest.approx(0, abs=1e-14)
    assert r[1, 1] == pytest.approx(sm.v_coefficient(n, G), abs=1e-12)
    t = sm.sector_T(n * PI, G)
    assert t[0, 0] == pytest.approx(1, abs=1e-14)
    assert t[1, 1] == pytest.approx(1 - sm.v_coefficient(n, G), abs=1e-12)


@pytest.mark.parametrize("n", [1, 2, 3])
def test_ideal_matrix_equals_resonant_protocol(n):
    got = sm.sector_protocol(n * PI, 2.5 * PI, 1.7).entries
    assert np.max(np.abs(got - sm.sector_ideal(n, 2.5 * PI, 1.7).entries)) < 1e-12


def test_ideal_matrix_reference_values():
    m = sm.sector_ideal(1, 2.5 * PI, PI)
    assert np.allclose(m.entries, [[1, 0.16934], [0, 0.83066]], atol=2e-3)


@pytest.mark.parametrize("kappa", [0.8, 0.97, 1.1, 2.2])
def test_fixed_fidelity_is_stationary(kappa):
    m = sm.sector_protocol(kappa * PI, 2.5 * PI, PI)
    f = sm.fixed_fidelity(m)
    pop = np.array([f, 1 - f])
    assert np.allclose(m.apply(pop), pop, atol=1e-13)
    assert sm.fixed_fidelity(m @ m) == pytest.approx(f, abs=1e-12)


def test_fixed_fidelity_rejects_identity():
    with pytest.raises(FidelityFormulaError):
        sm.fixed_fidelity(sm.SectorMatrix(np.eye(2)))


@pytest.mark.parametrize("eta", [0.2, 0.5, 1.0])
def test_detector_I_reaches_singlet(eta):
    m = sm.detector_sector(1, 2.5 * PI, PI, eta, "I")
    assert sm.fixed_fidelity(m) == pytest.approx(1)


def test_detector_II_reference_value():
    f = sm.detector_fidelity_II(1, PI, 0.5)
    assert f == pytest.approx(0.3811, abs=1e-4)
    assert f == pytest.approx(sm.fixed_fidelity(sm.detector_sector(1, 2.5 * PI, PI, 0.5, "II")), abs=1e-12)


@pytest.mark.parametrize("variant", ["I", "II"])
@pytest.mark.parametrize("eta", [0.0, 0.3, 0.8])
def test_detector_sector_matches_full_channel(variant, eta):
    p = PhysicalParams(G=PI)
    full = extract(ch.detector_map(p, variant, eta=eta))
    assert np.max(np.abs(full - sm.detector_sector(1, p.chi, p.G, eta, variant).entries)) < 1e-12


def test_detector_fidelity_II_monotone_in_eta():
    f = [sm.detector_fidelity_II(1, PI, e) for e in np.linspace(0, 1, 21)]
    assert f[0] == pytest.approx(0.25) and f[-1] == pytest.approx(1)
    assert np.all(np.diff(f) > 0)


def test_detector_rejects_bad_input():
    with pytest.raises(ValueError):
        sm.detector_sector(1, 2.5 * PI, PI, 1.2, "I")
    with pytest.raises(ValueError):
        sm.detector_sector(1, 2.5 * PI, PI, 0.5, "X")


def test_averaged_sector_zero_width_is_ideal():
    _, f = sm.averaged_sector(1, 0.0, 2.5 * PI, PI)
    assert f == pytest.approx(1)


def test_averaged_sector_decreases_with_width():
    f = [sm.averaged_sector(1, d * PI, 2.5 * PI, PI)[1] for d in (0.01, 0.03, 0.05, 0.1, 0.2)]
    assert np.all(np.diff(f) < 0)


def test_averaged_sector_larger_n_better_at_equal_absolute_width():
    f = [sm.averaged_sector(n, 0.05 * PI, 2.5 * PI, PI)[1] for n in (1, 2, 3)]
    assert f[0] < f[1] < f[2]


def test_averaged_protocol_discrete_is_weighted_sum():
    dist = DiscreteMomenta([0.95 * PI, 1.05 * PI], [0.25, 0.75])
    got = sm.averaged_protocol(dist, 2.5 * PI, PI).entries
    want = 0.25 * sm.sector_protocol(0.95 * PI, 2.5 * PI, PI).entries \
        + 0.75 * sm.sector_protocol(1.05 * PI, 2.5 * PI, PI).entries
    assert np.allclose(got, want, atol=1e-14)


def test_closed_form_reference_value():
    assert sm.closed_form_curve(1, 2.5 * PI, PI, 0.25, 10) == pytest.approx(0.8828, abs=5e-3)


def test_closed_form_matches_iteration():
    M = ch.protocol_map(PhysicalParams(G=PI))
    curve = ch.fidelity_curve(M, 50)
    for N in range(1, 51):
        assert curve[N] == pytest.approx(sm.closed_form_curve(1, 2.5 * PI, PI, 0.25, N), abs=1e-10)


def test_closed_form_rejects_bad_input():
    with pytest.raises(ValueError):
        sm.closed_form_curve(1, 2.5 * PI, PI, 1.5, 3)
    with pytest.raises(ValueError):
        sm.closed_form_curve(1, 2.5 * PI, PI, 0.25, -1)


def test_sector_matrix_algebra():
    a = sm.sector_T(1.2, 0.7)
    b = sm.sector_R(1.2, 0.7)
    assert np.allclose((a + b).entries, a.entries + b.entries)
    assert np.allclose((a @ b).entries, a.entries @ b.entries)
    assert np.allclose((2 * a).entries, 2 * a.entries)
    assert a.gain == a[0, 1]
    with pytest.raises(ValueError):
        sm.SectorMatrix(np.eye(3))
