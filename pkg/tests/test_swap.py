import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qspacetime.hilbert import BELL_ORDER, Bell, Direction, X_AXIS, Z_AXIS, basis_ket, bell_state, tensor
from qspacetime.spacetime import SpacetimeLabel
from qspacetime.swap import (
    SWAP_SIGN_TABLE,
    BellMeasure,
    EmptyPostselectionError,
    LocalMeasure,
    Postselect,
    PreparePair,
    Timeline,
    TimelineError,
    TimelineEvent,
    bell_measure_and_postselect,
    expand_in_pair_bases,
    run_timeline,
    swapping_timeline,
    verify_swap_identities,
)

SINGLETS = tensor(bell_state("PsiMinus"), bell_state("PsiMinus"))

# Diagonal (Psi+Psi+, Psi-Psi-, Phi+Phi+, Phi-Phi-) coefficients of |B_01 B_23>
# in the magic convention, frozen from an independent expansion (see test below).
MAGIC_TABLE = {
    "PsiMinus": (-0.5, -0.5, -0.5, -0.5),
    "PsiPlus": (0.5, 0.5, -0.5, -0.5),
    "PhiMinus": (-0.5, 0.5, -0.5, 0.5),
    "PhiPlus": (-0.5, 0.5, 0.5, -0.5),
}


def brute_force_coefficients(label, convention):
    """Independent oracle: explicit 16-term inner products over basis kets."""
    pair = bell_state(label, convention).amplitudes
    psi = np.kron(pair, pair)
    out = np.zeros((4, 4), dtype=complex)
    for r, lo in enumerate(BELL_ORDER):
        o = bell_state(lo, convention).amplitudes
        for c, li in enumerate(BELL_ORDER):
            i = bell_state(li, convention).amplitudes
            total = 0j
            for bits in range(16):
                q = [(bits >> (3 - k)) & 1 for k in range(4)]
                total += np.conj(o[2 * q[0] + q[3]] * i[2 * q[1] + q[2]]) * psi[bits]
            out[r, c] = total
    return out


class TestExpansion:
    def test_singlet_pair_identity(self):
        e = expand_in_pair_bases(SINGLETS, (0, 3), (1, 2))
        assert np.allclose(np.diag(e.coefficients), [0.5, -0.5, -0.5, 0.5], atol=1e-15)
        off = e.coefficients - np.diag(np.diag(e.coefficients))
        assert np.max(np.abs(off)) < 1e-15

    def test_phi_plus_identity(self):
        phi = tensor(bell_state("PhiPlus"), bell_state("PhiPlus"))
        e = expand_in_pair_bases(phi, (0, 3), (1, 2))
        assert np.allclose(np.diag(e.coefficients), [0.5] * 4, atol=1e-15)

    def test_own_basis(self):
        e = expand_in_pair_bases(SINGLETS, (0, 1), (2, 3))
        nz = e.nonzero()
        assert list(nz) == [(Bell.PSI_MINUS, Bell.PSI_MINUS)]
        assert abs(nz[(Bell.PSI_MINUS, Bell.PSI_MINUS)] - 1) < 1e-15

    @pytest.mark.parametrize("convention", ["standard", "magic"])
    @pytest.mark.parametrize("label", BELL_ORDER)
    def test_matches_brute_force(self, label, convention):
        state = tensor(bell_state(label, convention), bell_state(label, convention))
        e = expand_in_pair_bases(state, (0, 3), (1, 2), convention)
        assert np.allclose(e.coefficients, brute_force_coefficients(label, convention), atol=1e-14)
        assert abs(e.total_weight() - 1) < 1e-12


class TestIdentityTable:
    def test_standard_residuals(self):
        rep = verify_swap_identities("standard")
        assert set(rep.residuals) == {b.value for b in BELL_ORDER}
        assert rep.max_residual < 1e-12
        assert rep.offdiagonal_max < 1e-12
        for label, signs in SWAP_SIGN_TABLE.items():
            assert np.allclose(rep.phase_table[label.value], np.array(signs) / 2, atol=1e-12)

    def test_magic_table(self):
        rep = verify_swap_identities("magic")
        assert rep.max_residual < 1e-12
        for label, coeffs in MAGIC_TABLE.items():
            assert np.allclose(rep.phase_table[label], coeffs, atol=1e-12)
            assert np.allclose(np.diag(brute_force_coefficients(label, "magic")), coeffs, atol=1e-12)
        # the standard sign pattern does not carry over to magic phases
        assert max(rep.tabulated_sign_residuals.values()) > 0.1

    def test_report_serializable(self):
        d = verify_swap_identities().to_dict()
        assert d["phase_table"]["PsiMinus"][0] == [pytest.approx(0.5), 0.0]


class TestPostselection:
    @pytest.mark.parametrize("label", BELL_ORDER)
    def test_swapped_outer_state(self, label):
        r = bell_measure_and_postselect(SINGLETS, (1, 2), label)
        assert r.outer == (0, 3)
        assert abs(r.fidelity - 1) < 1e-12
        assert all(abs(p - 0.25) < 1e-12 for p in r.probabilities.values())

    def test_counts(self):
        r = bell_measure_and_postselect(SINGLETS, (1, 2), "PsiMinus", rng=4, shots=4000)
        assert sum(r.counts.values()) == 4000
        assert all(abs(c / 4000 - 0.25) < 0.04 for c in r.counts.values())

    def test_product_state(self):
        ket = basis_ket([0, 1, 0, 1])
        # inner qubits carry |10>, orthogonal to Phi+
        with pytest.raises(EmptyPostselectionError):
            bell_measure_and_postselect(ket, (1, 2), "PhiPlus")
        r = bell_measure_and_postselect(ket, (1, 2), "PsiPlus")
        assert r.probabilities[Bell.PSI_PLUS] == pytest.approx(0.5)
        # outer qubits carry |01>: overlap 1/2 with Psi+
        assert r.fidelity == pytest.approx(0.5, abs=1e-12)
        assert np.allclose(r.outer_state.amplitudes, basis_ket([0, 1]).amplitudes, atol=1e-15)

    def test_bad_pair(self):
        with pytest.raises(ValueError):
            bell_measure_and_postselect(SINGLETS, (1, 1), "PsiMinus")


class TestTimeline:
    def test_record_roundtrip(self):
        t = swapping_timeline(Z_AXIS, X_AXIS, "PhiPlus", delayed=True)
        assert Timeline.from_records(t.to_records()) == t

    def test_rejects_time_reversal(self):
        events = (
            TimelineEvent(SpacetimeLabel(0, 0, 0, 2), PreparePair(0, 1)),
            TimelineEvent(SpacetimeLabel(0, 0, 0, 1), LocalMeasure(0, Z_AXIS)),
        )
        with pytest.raises(TimelineError):
            Timeline(events)

    def test_measure_before_prepare(self):
        t = Timeline(
            (
                TimelineEvent(SpacetimeLabel(0, 0, 0, 0), LocalMeasure(0, Z_AXIS)),
                TimelineEvent(SpacetimeLabel(0, 0, 0, 1), PreparePair(0, 1)),
            )
        )
        with pytest.raises(TimelineError):
            run_timeline(t, 10, rng=0)

    def test_unknown_action(self):
        with pytest.raises(TimelineError):
            Timeline.from_records([{"action": "teleport"}])

    def test_conditional_singlet_statistics(self):
        b = Direction.from_angles(math.pi / 3)
        res = run_timeline(swapping_timeline(Z_AXIS, b), 20_000, rng=2)
        st_ = res.statistic(0, 3)
        assert st_.conditional_exact == pytest.approx(-0.5, abs=1e-12)
        assert abs(st_.conditional - st_.conditional_exact) < 4 * st_.conditional_se
        assert abs(st_.unconditional) < 4 * st_.unconditional_se
        assert abs(res.keep_probability - 0.25) < 1e-12

    def test_reproducible(self):
        t = swapping_timeline(Z_AXIS, X_AXIS)
        a, b = run_timeline(t, 500, rng=9), run_timeline(t, 500, rng=9)
        assert np.array_equal(a.outcomes, b.outcomes)

    def test_never_kept(self):
        t = Timeline(
            (
                TimelineEvent(SpacetimeLabel(0, 0, 0, 0), PreparePair(0, 1, Bell.PHI_PLUS)),
                TimelineEvent(SpacetimeLabel(0, 0, 0, 1), BellMeasure(0, 1)),
                TimelineEvent(SpacetimeLabel(0, 0, 0, 2), Postselect(Bell.PSI_MINUS)),
            )
        )
        with pytest.raises(EmptyPostselectionError):
            run_timeline(t, 100, rng=0)

    def test_csv(self, tmp_path):
        res = run_timeline(swapping_timeline(Z_AXIS, X_AXIS), 40, rng=1)
        p = tmp_path / "log.csv"
        res.write_csv(p)
        lines = p.read_text().splitlines()
        assert lines[0] == "run_id,event_index,x1,x2,x3,x4,action,outcome"
        assert len(lines) == 1 + 40 * 6

    @settings(max_examples=10, deadline=None)
    @given(st.floats(0, math.pi), st.sampled_from(BELL_ORDER))
    def test_exact_conditional_matches_post_state(self, theta, keep):
        # exact conditional value equals the outer Bell state's spin correlation
        from qspacetime.hilbert import spin_correlation

        b = Direction.from_angles(theta)
        res = run_timeline(swapping_timeline(Z_AXIS, b, keep), 10, rng=0)
        expected = spin_correlation(bell_state(keep), Z_AXIS, b)
        assert abs(res.statistic(0, 3).conditional_exact - expected) < 1e-12
