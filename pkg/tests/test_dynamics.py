import math

import numpy as np
import pytest
import scipy.sparse as sp

from lambdajc.dynamics import (
    HamiltonianSpec,
    TruncationError,
    Variant,
    assemble_terms,
    build_space,
    coherent_state,
    evolve,
    loschmidt_echo,
    sector_states,
)
from lambdajc.params import DriveParams, SystemParams
from lambdajc.spectrum import block_ground_energy, block_matrix

from oracles import expm_propagate

RESONANT = SystemParams()
DRIVE = DriveParams(amplitude=0.036, frequency=0.18)  # theta = 0.2


def random_params(rng):
    return SystemParams(
        omega1=float(rng.uniform(-1.0, 1.5)),
        omega2=float(rng.uniform(-1.0, 1.5)),
        Omega1=float(rng.uniform(0.2, 2.5)),
        Omega2=float(rng.uniform(0.2, 2.5)),
        g1=float(rng.uniform(0.0, 0.6)),
        g2=float(rng.uniform(0.0, 0.6)),
    )


class TestHilbertSpace:
    def test_dimension(self):
        assert build_space(2, 2).dim == 27

    def test_index_round_trip(self):
        space = build_space(2, 2)
        seen = set()
        for atom in (1, 2, 3):
            for n1 in range(3):
                for n2 in range(3):
                    i = space.index(atom, n1, n2)
                    assert space.unindex(i) == (atom, n1, n2)
                    seen.add(i)
        assert seen == set(range(27))

    def test_lowering_matrix_element(self):
        space = build_space(2, 2)
        a1 = space.lower1()
        src = space.index(1, 1, 0)
        dst = space.index(1, 0, 0)
        assert a1[dst, src] == pytest.approx(1.0)
        src2 = space.index(1, 2, 0)
        assert a1[space.index(1, 1, 0), src2] == pytest.approx(math.sqrt(2.0))

    def test_rejects_bad_cutoffs(self):
        with pytest.raises(ValueError):
            build_space(0, 2)
        with pytest.raises(ValueError):
            build_space(2, -1)


class TestCoherentState:
    def test_zero_amplitude_is_vacuum(self):
        space = build_space(3, 3)
        psi = coherent_state(space, 0.0, 0.0, "2")
        expected = np.zeros(space.dim, complex)
        expected[space.index(2, 0, 0)] = 1.0
        assert np.allclose(psi.amplitudes, expected, atol=1e-15)

    def test_mean_occupation(self):
        space = build_space(6, 6)
        psi = coherent_state(space, 0.01, 0.01, "2")
        n1 = space.number1()
        occ = np.vdot(psi.amplitudes, n1 @ psi.amplitudes).real
        assert occ == pytest.approx(1e-4, abs=1e-12)

    def test_superposition_populations(self):
        space = build_space(4, 4)
        psi = coherent_state(space, 0.01, 0.01, "1-2")
        pop = np.abs(psi.amplitudes) ** 2
        atom_pop = [pop[space._atom == k].sum() for k in (1, 2, 3)]
        assert atom_pop[0] == pytest.approx(0.5, abs=1e-12)
        assert atom_pop[1] == pytest.approx(0.5, abs=1e-12)
        assert atom_pop[2] == pytest.approx(0.0, abs=1e-15)

    def test_truncation_error_names_required_cutoff(self):
        space = build_space(1, 1)
        with pytest.raises(TruncationError, match="cutoff"):
            coherent_state(space, 2.0, 0.0, "2")

    def test_unknown_preset(self):
        space = build_space(1, 1)
        with pytest.raises(ValueError, match="preset"):
            coherent_state(space, 0.0, 0.0, "nope")

    def test_explicit_atomic_vector(self):
        space = build_space(2, 2)
        psi = coherent_state(space, 0.0, 0.0, np.array([1.0, 0.0, 1.0]))
        pop = np.abs(psi.amplitudes) ** 2
        assert pop[space.index(1, 0, 0)] == pytest.approx(0.5)
        assert pop[space.index(3, 0, 0)] == pytest.approx(0.5)


def _spec(variant, sys=RESONANT, drive=DRIVE):
    needs_drive = variant is not Variant.JC_STATIC
    return HamiltonianSpec(variant=variant, sys=sys,
                           drive=drive if needs_drive else None)


class TestAssembly:
    def test_term_counts(self):
        space = build_space(2, 2)
        assert len(assemble_terms(_spec(Variant.JC_STATIC), space).terms) == 8
        assert len(assemble_terms(_spec(Variant.DOMINANT_SIDEBAND), space).terms) == 8
        assert len(assemble_terms(_spec(Variant.EFFECTIVE_FULL), space).terms) == 12
        assert len(assemble_terms(_spec(Variant.EFFECTIVE_JC), space).terms) == 8

    def test_rotated_collapses_at_zero_amplitude(self):
        space = build_space(2, 2)
        spec = _spec(Variant.DRIVE_ROTATED,
                     drive=DriveParams(amplitude=0.0, frequency=0.18))
        terms = assemble_terms(spec, space)
        assert len(terms.terms) == 8

    def test_effective_jc_decoupled_is_diagonal(self):
        space = build_space(2, 2)
        spec = _spec(Variant.EFFECTIVE_JC, sys=RESONANT.replace(g1=0.0, g2=0.0))
        H = assemble_terms(spec, space).matrix_at(0.3).toarray()
        assert np.allclose(H, np.diag(np.diag(H)), atol=1e-15)

    def test_conjugate_partner_present(self):
        def is_adjoint(a, b):
            return (abs(a - b.conj().T)).max() < 1e-15

        space = build_space(2, 2)
        for variant in Variant:
            terms = assemble_terms(_spec(variant), space).terms
            pending = dict(enumerate(terms))
            while pending:
                k, term = pending.popitem()
                if term.phase == 0.0 and is_adjoint(term.op, term.op):
                    assert abs(term.amplitude.imag) < 1e-15
                    continue
                partner_key = None
                for other_k, other in pending.items():
                    if (other.phase == -term.phase
                            and abs(other.amplitude - np.conj(term.amplitude)) < 1e-15
                            and is_adjoint(other.op, term.op)):
                        partner_key = other_k
                        break
                assert partner_key is not None, f"{variant}: unpaired term"
                del pending[partner_key]

    def test_instantaneous_hermiticity(self):
        space = build_space(2, 2)
        rng = np.random.default_rng(12)
        for variant in Variant:
            terms = assemble_terms(_spec(variant), space)
            for t in rng.uniform(0.0, 300.0, 100):
                H = terms.matrix_at(float(t)).toarray()
                assert np.abs(H - H.conj().T).max() < 1e-12

    def test_effective_variants_are_time_independent(self):
        space = build_space(2, 2)
        assert assemble_terms(_spec(Variant.EFFECTIVE_FULL), space).phi_max == 0.0
        assert assemble_terms(_spec(Variant.EFFECTIVE_JC), space).phi_max == 0.0

    def test_variant_requires_drive(self):
        with pytest.raises(ValueError):
            HamiltonianSpec(variant=Variant.DRIVE_ROTATED, sys=RESONANT)

    def test_excitation_conservation_jc_forms(self):
        space = build_space(3, 3)
        n_ops = (
            space.number1() - space.sigma(1, 1),
            space.number2() - space.sigma(2, 2),
        )
        rng = np.random.default_rng(13)
        for variant in (Variant.JC_STATIC, Variant.EFFECTIVE_JC):
            for _ in range(5):
                spec = _spec(variant, sys=random_params(rng))
                H = assemble_terms(spec, space).matrix_at(0.0)
                for N in n_ops:
                    comm = (H @ N - N @ H).toarray()
                    assert np.abs(comm).max() < 1e-12

    def test_counter_terms_break_conservation(self):
        space = build_space(3, 3)
        N1 = space.number1() - space.sigma(1, 1)
        spec = _spec(Variant.EFFECTIVE_FULL,
                     drive=DriveParams.from_theta(1.2, 0.49))
        H = assemble_terms(spec, space).matrix_at(0.0)
        comm = (H @ N1 - N1 @ H).toarray()
        assert np.abs(comm).max() > 1e-8


class TestSectorEquivalence:
    def test_block_spectrum_matches_full_model(self):
        space = build_space(6, 6)
        rng = np.random.default_rng(14)
        for _ in range(8):
            sys = random_params(rng)
            H = assemble_terms(_spec(Variant.JC_STATIC, sys=sys), space)
            dense = H.matrix_at(0.0).toarray().real
            for n in range(0, 6):
                for m in range(1, 7):
                    idx = sector_states(space, n, m)
                    sub = dense[np.ix_(idx, idx)]
                    block = block_matrix(sys, n, m).matrix
                    assert np.allclose(sub, block, atol=1e-14)
                    ours = float(np.linalg.eigvalsh(sub)[0])
                    assert ours == pytest.approx(
                        block_ground_energy(block_matrix(sys, n, m)), abs=1e-10)


class TestEvolve:
    def test_zero_hamiltonian_freezes_state(self):
        space = build_space(2, 2)
        sys = SystemParams(omega1=0.0, omega2=0.0, Omega1=1.0, Omega2=1.0,
                           g1=0.0, g2=0.0)
        # vacuum annihilates every surviving term, so H|psi0> = 0 exactly
        psi0 = coherent_state(space, 0.0, 0.0, "2")
        res = evolve(_spec(Variant.JC_STATIC, sys=sys), space, psi0,
                     t_max=7.0, samples=8)
        assert np.max(np.abs(res.states - psi0.amplitudes)) < 1e-12

    def test_eigenvector_acquires_phase_only(self):
        space = build_space(2, 2)
        spec = _spec(Variant.JC_STATIC)
        H = assemble_terms(spec, space).matrix_at(0.0).toarray()
        evals, vecs = np.linalg.eigh(H)
        from lambdajc.dynamics import StateVector
        psi0 = StateVector(amplitudes=vecs[:, 3].astype(complex), space=space)
        res = evolve(spec, space, psi0, t_max=11.0, samples=23)
        overlap = np.abs(res.states @ psi0.amplitudes.conj())
        assert np.max(np.abs(overlap - 1.0)) < 1e-12

    def test_matches_dense_expm_oracle_time_independent(self):
        space = build_space(2, 2)
        spec = _spec(Variant.EFFECTIVE_JC)
        psi0 = coherent_state(space, 0.01, 0.01, "2")
        res = evolve(spec, space, psi0, t_max=50.0, samples=26)
        H = assemble_terms(spec, space).matrix_at(0.0).toarray()
        ref = expm_propagate(H, psi0.amplitudes, res.times)
        assert np.max(np.abs(res.states - ref)) < 1e-8

    def test_matches_reference_integrator_time_dependent(self):
        from scipy.integrate import solve_ivp
        space = build_space(1, 1)
        spec = _spec(Variant.DRIVE_ROTATED,
                     drive=DriveParams.from_theta(0.8, 0.33))
        terms = assemble_terms(spec, space)
        psi0 = coherent_state(space, 0.0, 0.0, "2+3")
        res = evolve(spec, space, psi0, t_max=20.0, samples=5)

        mats = [(t.op.toarray(), t.amplitude, t.phase) for t in terms.terms]

        def rhs(t, y):
            H = sum(m * (a * np.exp(1j * p * t)) for m, a, p in mats)
            return -1j * (H @ y)

        ref = solve_ivp(rhs, (0.0, 20.0), psi0.amplitudes, method="DOP853",
                        rtol=1e-12, atol=1e-14, t_eval=res.times)
        assert np.max(np.abs(res.states.T - ref.y)) < 1e-8

    def test_norm_preservation(self):
        space = build_space(3, 3)
        spec = _spec(Variant.DRIVE_ROTATED)
        psi0 = coherent_state(space, 0.01, 0.01, "2")
        res = evolve(spec, space, psi0, t_max=60.0, samples=40)
        assert res.norm_drift < 1e-10

    def test_step_bound_enforced(self):
        space = build_space(2, 2)
        spec = _spec(Variant.DOMINANT_SIDEBAND,
                     drive=DriveParams.from_theta(0.2, 0.49))
        psi0 = coherent_state(space, 0.0, 0.0, "2")
        terms = assemble_terms(spec, space)
        bound = 2.0 * math.pi / (20.0 * terms.phi_max)
        with pytest.raises(ValueError, match="dt_max"):
            evolve(spec, space, psi0, t_max=10.0, samples=5, dt_max=2.0 * bound)

    def test_dt_halving_converges(self):
        space = build_space(3, 3)
        spec = _spec(Variant.DRIVE_ROTATED)
        psi0 = coherent_state(space, 0.01, 0.01, "2")
        terms = assemble_terms(spec, space)
        bound = 2.0 * math.pi / (20.0 * terms.phi_max)
        r1 = evolve(spec, space, psi0, t_max=40.0, samples=11, dt_max=bound / 4)
        r2 = evolve(spec, space, psi0, t_max=40.0, samples=11, dt_max=bound / 8)
        assert np.max(np.abs(r1.states - r2.states)) < 1e-6

    def test_leakage_warning_on_tight_cutoff(self):
        space = build_space(1, 1)
        sys = RESONANT.replace(g1=0.5, g2=0.5)
        psi0 = coherent_state(space, 0.0, 0.0, "2+3")
        res = evolve(_spec(Variant.JC_STATIC, sys=sys), space, psi0,
                     t_max=40.0, samples=60)
        assert res.leakage > 1e-6
        assert any("truncation" in w for w in res.warnings)

    def test_mismatched_space_rejected(self):
        space = build_space(2, 2)
        other = build_space(3, 3)
        psi0 = coherent_state(other, 0.0, 0.0, "2")
        with pytest.raises(ValueError, match="space"):
            evolve(_spec(Variant.JC_STATIC), space, psi0, t_max=1.0, samples=3)


class TestEcho:
    def test_identical_specs_give_unit_fidelity(self):
        space = build_space(2, 2)
        spec = _spec(Variant.DOMINANT_SIDEBAND)
        psi0 = coherent_state(space, 0.01, 0.01, "2")
        echo = loschmidt_echo(spec, spec, space, psi0, t_max=30.0, samples=31)
        assert np.max(np.abs(echo.fidelity - 1.0)) < 1e-10

    def test_initial_sample_and_range(self):
        space = build_space(2, 2)
        echo = loschmidt_echo(_spec(Variant.DRIVE_ROTATED),
                              _spec(Variant.DOMINANT_SIDEBAND),
                              space, coherent_state(space, 0.01, 0.01, "2"),
                              t_max=30.0, samples=31)
        assert abs(echo.fidelity[0] - 1.0) < 1e-12
        assert np.all(echo.fidelity >= 0.0)
        assert np.all(echo.fidelity <= 1.0 + 1e-12)

    def test_symmetry_in_branch_order(self):
        space = build_space(2, 2)
        a = _spec(Variant.DRIVE_ROTATED)
        b = _spec(Variant.DOMINANT_SIDEBAND)
        psi0 = coherent_state(space, 0.01, 0.01, "1-2")
        e_ab = loschmidt_echo(a, b, space, psi0, t_max=25.0, samples=26)
        e_ba = loschmidt_echo(b, a, space, psi0, t_max=25.0, samples=26)
        assert np.max(np.abs(e_ab.fidelity - e_ba.fidelity)) < 1e-12

    def test_cross_frame_comparison_rejected(self):
        space = build_space(2, 2)
        psi0 = coherent_state(space, 0.01, 0.01, "2")
        with pytest.raises(ValueError, match="frame"):
            loschmidt_echo(_spec(Variant.DRIVE_ROTATED),
                           _spec(Variant.EFFECTIVE_JC),
                           space, psi0, t_max=10.0, samples=5)
