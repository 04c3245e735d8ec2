import cmath
import math
import warnings

import numpy as np
import pytest
from conftest import expm_displacement, random_density
from hypothesis import given, settings
from hypothesis import strategies as st

from penningtomo.compare import compare, target_blocks
from penningtomo.config import asymmetric_config, symmetric_config
from penningtomo.experiment import simulate
from penningtomo.fock import FockVector, coherent_amplitudes
from penningtomo.measurement import analytic_record, cutoff_margin, displaced_distribution, efficiency_convolve
from penningtomo.states import EntangledState, build_entangled_state, overlap
from penningtomo.tomography import (
    ReconstructionError,
    build_kernel,
    extract_amplitudes,
    fourier_coefficients,
    phase_grid,
    pseudo_invert,
    purity_eigenvalue,
    reconstruct,
    reconstruct_block,
    reconstruct_offdiagonal,
    recover_spin_parameters,
    wrap_angle,
)

ASYM_STATE = build_entangled_state(0.5, math.sqrt(3) / 2, math.pi, 1.0, math.pi, 12)
SYM_STATE = build_entangled_state(math.sqrt(0.5), math.sqrt(0.5), 0.0, 1.5, math.pi, 20)


def exact_records(state, cfg):
    kmax = max(cfg.n, state.cutoff + cutoff_margin(state.cutoff, cfg.alpha_mod))
    return [analytic_record(state, cfg.alpha_mod * cmath.exp(1j * phi), cfg.eta, kmax, j, float(phi))
            for j, phi in enumerate(phase_grid(cfg.phases))]


def operator_distribution(X, alpha, eta, rows):
    """<n|D^dag X D|n> via the matrix exponential, thinned by explicit binomial sums."""
    D = expm_displacement(alpha)
    dim = X.shape[0]
    P = np.einsum("kn,km,mn->n", D[:dim].conj(), X, D[:dim])
    out = np.zeros(rows, dtype=complex)
    for k in range(rows):
        out[k] = sum(math.comb(n, k) * eta**k * (1 - eta) ** (n - k) * P[n] for n in range(k, 100))
    return out


class TestFourier:
    def test_constant_signal(self):
        probs = np.tile([0.2, 0.5, 0.3], (9, 1))
        assert np.allclose(fourier_coefficients(probs, 1), 0, atol=1e-16)
        assert np.allclose(fourier_coefficients(probs, 0), [0.2, 0.5, 0.3], atol=1e-16)

    def test_dense_quadrature_oracle(self):
        # (|0> + |1>)/sqrt(2) carries a single first harmonic
        psi = np.array([1, 1]) / math.sqrt(2)
        rho = np.outer(psi, psi)
        dense = np.linspace(0, 2 * np.pi, 10_000, endpoint=False)
        ref = np.mean([abs(expm_displacement(0.7 * cmath.exp(1j * p), 30)[:2, 0].conj() @ psi) ** 2
                       * cmath.exp(1j * p) for p in dense])
        K = 6
        probs = np.array([displaced_distribution(rho, 0.7 * cmath.exp(1j * p), 5) for p in phase_grid(K)])
        assert abs(fourier_coefficients(probs, 1)[0] - ref) < 1e-10
        # closed form: rho_10 d_00 d_10 = 0.5 * e^-0.49 * 0.7
        assert ref.real == pytest.approx(0.5 * 0.7 * math.exp(-0.49), abs=1e-10)

    def test_too_few_phases(self):
        with pytest.raises(ValueError):
            fourier_coefficients(np.ones((10, 4)), 1, nc=5)


class TestKernel:
    def test_identity_at_zero_drive(self):
        G = build_kernel(0, 0.0, 1.0, 12, 8).G
        assert np.allclose(G[:9], np.eye(9), atol=1e-15)
        assert np.allclose(G[9:], 0, atol=1e-15)

    def test_vacuum_entry(self):
        G = build_kernel(0, 0.7, 1.0, 12, 8).G
        assert G[0, 0] == pytest.approx(math.exp(-0.49), abs=1e-14)

    @pytest.mark.parametrize("s", [0, 1, 3])
    def test_column_probe(self, s):
        alpha_mod, eta, N, nc = 0.7, 0.9, 12, 8
        G = build_kernel(s, alpha_mod, eta, N, nc).G
        dense = phase_grid(64)
        for m in range(nc + 1 - s):
            X = np.zeros((nc + 1, nc + 1))
            X[m + s, m] = 1
            rows = np.array([operator_distribution(X, alpha_mod * cmath.exp(1j * p), eta, N + 1) for p in dense])
            col = (np.exp(1j * s * dense) @ rows) / dense.size
            assert np.max(np.abs(col - G[:, m])) < 1e-12

    def test_efficiency_matches_convolution(self):
        G1 = build_kernel(2, 1.2, 1.0, 120, 9).G
        G = build_kernel(2, 1.2, 0.6, 14, 9).G
        for m in range(G.shape[1]):
            assert np.allclose(efficiency_convolve(G1[:, m], 0.6)[:15], G[:, m], atol=1e-13)

    def test_rejects_bad_arguments(self):
        with pytest.raises(ValueError):
            build_kernel(9, 0.7, 0.9, 12, 8)
        with pytest.raises(ValueError):
            build_kernel(0, 0.7, 0.0, 12, 8)
        with pytest.raises(ValueError):
            build_kernel(0, 0.7, 0.9, 5, 8)


class TestPseudoInverse:
    @pytest.mark.parametrize("alpha_mod", [0.3, 0.7, 1.2, 1.5])
    @pytest.mark.parametrize("eta", [0.5, 0.9, 1.0])
    def test_left_inverse(self, alpha_mod, eta):
        for s in range(7):
            k = build_kernel(s, alpha_mod, eta, 16, 6)
            M = pseudo_invert(k, cond_max=math.inf)
            assert np.max(np.abs(M @ k.G - np.eye(k.G.shape[1]))) < 1e-10

    def test_normal_equations(self):
        G = build_kernel(1, 0.7, 0.9, 12, 6).G
        assert np.allclose(pseudo_invert(G), np.linalg.solve(G.T @ G, G.T), atol=1e-10)

    def test_duplicated_rows(self):
        G = np.tile([[0.3, 0.2, 0.1]], (5, 1))
        with pytest.raises(ReconstructionError):
            pseudo_invert(G)

    def test_condition_bound(self):
        k = build_kernel(0, 0.3, 0.9, 16, 9)
        with pytest.raises(ReconstructionError) as err:
            pseudo_invert(k, cond_max=10.0)
        assert err.value.band == 0


class TestBlock:
    def test_exact_asym(self):
        cfg = asymmetric_config(nc=10, state_cutoff=10, exact_mode=True)
        records = simulate(cfg)
        targets = target_blocks(cfg.true_state(), cfg.nc)
        for spin, key in (("up", "rho11"), ("down", "rho22")):
            rho = reconstruct_block(records, spin, cfg)
            assert np.max(np.abs(rho - targets[key])) < 1e-8
            assert np.allclose(rho, rho.conj().T, atol=0)

    def test_vacuum(self):
        cfg = asymmetric_config(nc=4, n=8)
        state = build_entangled_state(1, 0, 0, 0, 0, 4)
        rho = reconstruct_block(exact_records(state, cfg), "up", cfg)
        ref = np.zeros((5, 5))
        ref[0, 0] = 1
        assert np.max(np.abs(rho - ref)) < 1e-10

    def test_monte_carlo_asym(self):
        cfg = asymmetric_config(events=100_000)
        records = simulate(cfg)
        targets = target_blocks(cfg.true_state(), cfg.nc)
        assert np.max(np.abs(reconstruct_block(records, "up", cfg) - targets["rho11"])) < 0.05
        assert np.max(np.abs(reconstruct_block(records, "down", cfg) - targets["rho22"])) < 0.05

    def test_insufficient_phases(self):
        cfg = asymmetric_config()
        records = simulate(asymmetric_config(exact_mode=True))[: 2 * cfg.nc]
        with pytest.raises(ReconstructionError):
            reconstruct_block(records, "up", cfg)

    def test_empty_branch(self):
        cfg = asymmetric_config(nc=4, n=8)
        state = build_entangled_state(1, 0, 0, 0.5, 0, 4)
        with pytest.raises(ReconstructionError):
            reconstruct_block(exact_records(state, cfg), "down", cfg)

    def test_diagnostics(self):
        cfg = asymmetric_config(state_cutoff=6, exact_mode=True)
        diag = {}
        reconstruct_block(simulate(cfg), "up", cfg, diag)
        assert len(diag["condition_numbers"]) == cfg.nc + 1
        assert max(diag["residual_norms"]) < 1e-8

    def test_psd_projection(self):
        cfg = asymmetric_config(events=10_000, psd_projection=True)
        rho = reconstruct_block(simulate(cfg), "up", cfg)
        assert np.linalg.eigvalsh(rho).min() > -1e-12


class TestAmplitudes:
    def test_coherent(self):
        a = coherent_amplitudes(1, 10).amplitudes
        assert np.allclose(extract_amplitudes(np.outer(a, a.conj())).amplitudes, a, atol=1e-15)

    def test_number_state(self):
        rho = np.zeros((6, 6))
        rho[3, 3] = 1
        assert np.allclose(extract_amplitudes(rho).amplitudes, np.eye(6)[3])

    def test_alternating_signs(self):
        b = coherent_amplitudes(-1.5, 16).amplitudes
        got = extract_amplitudes(np.outer(b, b.conj())).amplitudes
        # anchor at n = 2 (largest weight) is positive; phases relative to it
        assert np.allclose(got, b * np.sign(b[2]), atol=1e-14)

    def test_threshold(self):
        with pytest.raises(ReconstructionError):
            extract_amplitudes(np.eye(3) * 1e-8)

    @pytest.mark.parametrize("method", ["anchor", "eigen"])
    def test_rank_one_recovery(self, method, rng):
        v = rng.normal(size=7) + 1j * rng.normal(size=7)
        v /= np.linalg.norm(v)
        rho = np.outer(v, v.conj())
        got = extract_amplitudes(rho, method).amplitudes
        assert np.allclose(np.outer(got, got.conj()), rho, atol=1e-12)

    def test_unknown_method(self):
        with pytest.raises(ValueError):
            extract_amplitudes(np.eye(2), "svd")


class TestOffDiagonal:
    def test_equal_branches(self):
        a = coherent_amplitudes(0.8j, 8).amplitudes
        rho = np.outer(a, a.conj())
        rho12, _, _ = reconstruct_offdiagonal(rho, rho)
        assert np.allclose(rho12, rho, atol=1e-14)

    def test_asym_corner(self):
        t = target_blocks(ASYM_STATE, 12)
        rho12, _, _ = reconstruct_offdiagonal(t["rho11"], t["rho22"])
        assert rho12[0, 0].real == pytest.approx(math.exp(-1), abs=1e-12)
        assert np.max(np.abs(rho12 - t["rho12"])) < 1e-12

    def test_quotient_identity(self):
        t = target_blocks(SYM_STATE, 9)
        rho12, psi1, psi2 = reconstruct_offdiagonal(t["rho11"], t["rho22"])
        quotient = t["rho11"] @ t["rho22"] / overlap(psi1, psi2)
        assert np.max(np.abs(rho12 - quotient)) < 1e-8

    def test_sym_real(self):
        t = target_blocks(SYM_STATE, 9)
        rho12, _, _ = reconstruct_offdiagonal(t["rho11"], t["rho22"])
        assert np.max(np.abs(rho12.imag)) < 1e-15

    def test_orthogonal_branches_warn(self):
        a, b = np.eye(4)[0], np.eye(4)[2]
        diag = {}
        with pytest.warns(RuntimeWarning):
            reconstruct_offdiagonal(np.outer(a, a), np.outer(b, b), diag)
        assert diag["overlap_ill_posed"]


class TestSpinRecovery:
    @staticmethod
    def pulses(state, chis=((math.pi / 2, 0.0), (math.pi / 2, math.pi / 2))):
        from penningtomo.states import SpinRotation, apply_spin_rotation
        return [(c, p, apply_spin_rotation(state, SpinRotation(c, p)).spin_probabilities()[0]) for c, p in chis]

    @pytest.mark.parametrize("state, theta", [(ASYM_STATE, math.pi), (SYM_STATE, 0.0)])
    def test_reference_states(self, state, theta):
        ov = overlap(state.psi1, state.psi2)
        w = state.c1**2 / (state.c1**2 + state.c2_mod**2)
        c1, c2, th = recover_spin_parameters(w, self.pulses(state), abs(ov), cmath.phase(ov))
        assert c1 == pytest.approx(state.c1, abs=1e-9)
        assert c2 == pytest.approx(state.c2_mod, abs=1e-9)
        assert abs(wrap_angle(th - theta)) < 1e-9

    def test_extremal_signal(self):
        # theta + beta = pi/2 puts the quarter-pulse signal at its maximum
        s = build_entangled_state(math.sqrt(0.5), math.sqrt(0.5), math.pi / 2, 0.5, 0.0, 12)
        c1, c2, th = recover_spin_parameters(0.5, self.pulses(s), 1.0, 0.0)
        assert th == pytest.approx(math.pi / 2, abs=1e-7)

    @settings(max_examples=40, deadline=None)
    @given(theta=st.floats(-3.1, 3.1), c1=st.floats(0.2, 0.95), chi=st.floats(0.3, 2.8))
    def test_any_theta(self, theta, c1, chi):
        c2 = math.sqrt(1 - c1**2)
        s = build_entangled_state(c1, c2, theta, 0.6, 2.0, 16)
        ov = overlap(s.psi1, s.psi2)
        w = c1**2 / (c1**2 + c2**2)
        pulses = self.pulses(s, ((chi, 0.0), (chi, math.pi / 2), (chi, 1.0)))
        _, _, th = recover_spin_parameters(w, pulses, abs(ov), cmath.phase(ov))
        assert abs(wrap_angle(th - theta)) < 1e-6

    def test_errors(self):
        good = [(math.pi / 2, 0.0, 0.5), (math.pi / 2, math.pi / 2, 0.5)]
        with pytest.raises(ValueError):
            recover_spin_parameters(1.0, good, 0.5, 0.0)
        with pytest.raises(ValueError):
            recover_spin_parameters(0.5, good, 0.0, 0.0)
        with pytest.raises(ValueError):
            recover_spin_parameters(0.5, good[:1], 0.5, 0.0)
        with pytest.raises(ValueError):
            recover_spin_parameters(0.5, [(math.pi / 2, 0.0, 1.0), good[1]], 0.1, 0.0)


class TestPipeline:
    def test_random_pure_round_trip(self):
        rng = np.random.default_rng(77)
        cfg = asymmetric_config(nc=6, n=12, alpha_mod=0.9, eta=0.85)
        worst = 0.0
        for _ in range(50):
            vecs = []
            for _ in range(2):
                v = rng.normal(size=7) + 1j * rng.normal(size=7)
                vecs.append(FockVector(v / np.linalg.norm(v), strict=False))
            c1 = rng.uniform(0.2, 0.95)
            state = EntangledState(c1, math.sqrt(1 - c1**2), rng.uniform(-3, 3), *vecs)
            records = exact_records(state, cfg)
            t = target_blocks(state, 6)
            for spin, key in (("up", "rho11"), ("down", "rho22")):
                worst = max(worst, np.max(np.abs(reconstruct_block(records, spin, cfg) - t[key])))
        assert worst < 1e-7

    def test_asym_monte_carlo_purity(self):
        cfg = asymmetric_config(events=100_000)
        rep = reconstruct(simulate(cfg), cfg)
        assert rep.diagnostics["purity_eigenvalues"][0] < 0.05
        assert rep.diagnostics["purity_eigenvalues"][1] < 0.05
        assert np.allclose(rep.rho11, rep.rho11.conj().T, atol=0)

    def test_exact_pipeline_sym(self):
        cfg = symmetric_config(state_cutoff=9, exact_mode=True)
        result = compare(reconstruct(simulate(cfg), cfg), cfg)
        # simulated branches are renormalized, targets are not
        tail = cfg.true_state().psi1.truncation_mass
        assert result.block_max_error["rho12"] < 2 * tail + 1e-9
        assert result.c1_rel_error < 1e-9 and result.theta_rel_error < 1e-6

    def test_purity_eigenvalue(self, rng):
        assert purity_eigenvalue(random_density(rng, 4, rank=1)) < 1e-12
        assert purity_eigenvalue(np.eye(3) / 3) == pytest.approx(1 / 3)

    def test_no_pulses(self):
        cfg = asymmetric_config(exact_mode=True, spin_pulses=[])
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            rep = reconstruct(simulate(cfg), cfg)
        assert math.isnan(rep.theta_est)
