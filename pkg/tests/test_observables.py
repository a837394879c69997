"""Entanglement measures, projector algebra, and peak classification."""

from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from jchsim.errors import ConfigError, SizeError
from jchsim.linalg import TensorDims, partial_transpose
from jchsim.model import (ModelParams, build_reduced_model, excitation_basis,
                          prepare_product_polariton_state)
from jchsim.observables import (DEFAULT_BURN_IN, PROJECTOR_PRESETS,
                                ProjectorSpec, blockade_beat_period,
                                classify_series, find_peaks, negativity,
                                negativity_series, population,
                                pure_negativity, recommended_spacing,
                                reduced_bipartition)

from conftest import oracle_negativity, random_density_matrix, random_unitary, two_site_model


def bell_pair() -> np.ndarray:
    psi = np.zeros(4, dtype=np.complex128)
    psi[0] = psi[3] = 1.0 / math.sqrt(2.0)
    return np.outer(psi, psi.conj())


class TestNegativity:
    def test_bell_pair_is_half(self):
        assert negativity(bell_pair(), (2, 2)) == pytest.approx(0.5, abs=1e-12)

    def test_product_state_is_exactly_zero(self):
        rho = np.zeros((4, 4), dtype=np.complex128)
        rho[0, 0] = 1.0
        value = negativity(rho, (2, 2))
        assert value == 0.0
        assert math.copysign(1.0, value) == 1.0   # not -0.0

    def test_maximally_entangled_qutrits(self):
        psi = np.zeros(9, dtype=np.complex128)
        for k in range(3):
            psi[4 * k] = 1.0 / math.sqrt(3.0)
        assert negativity(np.outer(psi, psi.conj()), (3, 3)) == \
            pytest.approx(1.0, abs=1e-12)

    def test_matches_trace_norm_identity(self, rng):
        for _ in range(20):
            rho = random_density_matrix(rng, 6)
            eigs = np.linalg.eigvalsh(partial_transpose(rho, TensorDims((2, 3)), which=1))
            from_trace_norm = 0.5 * (np.abs(eigs).sum() - 1.0)
            assert negativity(rho, (2, 3)) == pytest.approx(
                max(from_trace_norm, 0.0), abs=1e-9)

    def test_local_unitary_invariance(self, rng):
        for _ in range(10):
            rho = random_density_matrix(rng, 6)
            u = np.kron(random_unitary(rng, 2), random_unitary(rng, 3))
            rotated = u @ rho @ u.conj().T
            assert negativity(rotated, (2, 3)) == pytest.approx(
                negativity(rho, (2, 3)), abs=1e-9)

    def test_symmetric_under_factor_swap(self, rng):
        for _ in range(10):
            rho = random_density_matrix(rng, 6)
            perm = np.arange(6).reshape(2, 3).T.reshape(-1)
            swapped = rho[np.ix_(perm, perm)]
            assert negativity(swapped, (3, 2)) == pytest.approx(
                negativity(rho, (2, 3)), abs=1e-9)

    def test_separable_mixture_stays_ppt(self, rng):
        # convex mixtures of product states never show negativity
        rho = np.zeros((6, 6), dtype=np.complex128)
        for _ in range(5):
            a = random_unitary(rng, 2)[:, 0]
            b = random_unitary(rng, 3)[:, 0]
            vec = np.kron(a, b)
            rho += rng.uniform(0.1, 1.0) * np.outer(vec, vec.conj())
        rho /= np.trace(rho).real
        assert negativity(rho, (2, 3)) == pytest.approx(0.0, abs=1e-12)

    @given(theta=st.floats(0.0, math.pi / 2))
    @settings(max_examples=30)
    def test_pure_two_level_closed_form(self, theta):
        # cos·|00> + sin·|11>  ->  N = |cos·sin|
        psi = np.zeros(4, dtype=np.complex128)
        psi[0], psi[3] = math.cos(theta), math.sin(theta)
        expected = abs(math.cos(theta) * math.sin(theta))
        assert negativity(np.outer(psi, psi.conj()), (2, 2)) == \
            pytest.approx(expected, abs=1e-12)
        assert pure_negativity(psi, (2, 2)) == pytest.approx(expected, abs=1e-12)

    def test_pure_negativity_batches_match_density_version(self, rng):
        states = []
        for _ in range(4):
            v = rng.normal(size=6) + 1j * rng.normal(size=6)
            states.append(v / np.linalg.norm(v))
        stack = np.array(states)
        batched = pure_negativity(stack, (2, 3))
        singles = [negativity(np.outer(s, s.conj()), (2, 3)) for s in states]
        assert batched == pytest.approx(singles, abs=1e-9)

    def test_negativity_series_maps_over_stack(self, rng):
        stack = np.array([random_density_matrix(rng, 4) for _ in range(3)])
        series = negativity_series(stack, (2, 2))
        assert series == pytest.approx([negativity(r, (2, 2)) for r in stack])

    def test_dimension_validation(self):
        with pytest.raises(SizeError):
            negativity(bell_pair(), (2, 3))
        with pytest.raises(SizeError):
            negativity(bell_pair(), (2, 2, 1))
        with pytest.raises(SizeError):
            pure_negativity(np.zeros(4, dtype=np.complex128), (4,))


@pytest.fixture(scope="module")
def two_site():
    params = ModelParams(n_sites=2, hop=0.03, n_max=2)
    space = excitation_basis(params, max_exc=2)
    return params, space


class TestProjectors:

    def test_presets_are_projectors(self, two_site):
        params, space = two_site
        for preset in ("P20", "P02", "P11"):
            p = ProjectorSpec(preset=preset).operator(params, space)
            assert np.abs(p - p.conj().T).max() < 1e-12
            assert np.abs(p @ p - p).max() < 1e-12
            assert np.trace(p).real == pytest.approx(1.0)

    def test_presets_mutually_orthogonal(self, two_site):
        params, space = two_site
        ops = [ProjectorSpec(preset=n).operator(params, space)
               for n in ("P20", "P02", "P11")]
        for i in range(3):
            for j in range(i + 1, 3):
                assert np.abs(ops[i] @ ops[j]).max() < 1e-12

    def test_symmetrize_sums_permutations(self, two_site):
        params, space = two_site
        sym = ProjectorSpec(labels=("2-", "G"), symmetrize=True).operator(params, space)
        p20 = ProjectorSpec(preset="P20").operator(params, space)
        p02 = ProjectorSpec(preset="P02").operator(params, space)
        assert np.abs(sym - (p20 + p02)).max() < 1e-12

    def test_population_of_prepared_state(self, two_site):
        params, space = two_site
        psi = space.reduce_vector(
            prepare_product_polariton_state(("2-", "G"), params))
        assert population(psi, ProjectorSpec(preset="P20"), params, space) == \
            pytest.approx(1.0, abs=1e-12)
        assert population(psi, ProjectorSpec(preset="P11"), params, space) == \
            pytest.approx(0.0, abs=1e-12)
        rho = np.outer(psi, psi.conj())
        assert population(rho, ProjectorSpec(preset="P02"), params, space) == \
            pytest.approx(0.0, abs=1e-12)

    def test_population_clamps_roundoff(self):
        op = np.array([[1.0 + 5e-14]], dtype=np.complex128)
        assert population(np.array([1.0 + 0j]), op) == 1.0

    def test_spec_validation(self):
        with pytest.raises(ConfigError):
            ProjectorSpec()                                   # neither
        with pytest.raises(ConfigError):
            ProjectorSpec(labels=("G",), preset="P11")        # both
        with pytest.raises(ConfigError):
            ProjectorSpec(preset="P99")
        with pytest.raises(ConfigError):
            ProjectorSpec(labels=("2?",))
        with pytest.raises(SizeError):
            ProjectorSpec(preset="P111").operator(ModelParams(n_sites=2, n_max=2))

    def test_names(self):
        assert ProjectorSpec(preset="P11").name == "P11"
        assert ProjectorSpec(labels=("2-", "G")).name == "P(2-,G)"
        assert ProjectorSpec(labels=("2-", "G"), symmetrize=True).name == "P(2-,G)+perm"
        for preset, labels in PROJECTOR_PRESETS.items():
            assert ProjectorSpec(preset=preset).resolved_labels == labels


class TestBipartition:
    def test_two_sites_passthrough(self, rng):
        rho = random_density_matrix(rng, 9)
        out, dims = reduced_bipartition(rho, (3, 3), cut=1)
        assert out is rho or np.array_equal(out, rho)
        assert dims.factors == (3, 3)

    def test_three_sites_regroups(self, rng):
        rho = random_density_matrix(rng, 8)
        _, left_cut = reduced_bipartition(rho, (2, 2, 2), cut=1)
        _, right_cut = reduced_bipartition(rho, (2, 2, 2), cut=2)
        assert left_cut.factors == (2, 4)
        assert right_cut.factors == (4, 2)

    def test_cut_position_consistent_for_symmetric_state(self):
        # W state is permutation-symmetric: both cuts give equal negativity
        psi = np.zeros(8, dtype=np.complex128)
        for idx in (1, 2, 4):
            psi[idx] = 1.0 / math.sqrt(3.0)
        rho = np.outer(psi, psi.conj())
        values = []
        for cut in (1, 2):
            mat, dims = reduced_bipartition(rho, (2, 2, 2), cut)
            values.append(negativity(mat, dims))
        assert values[0] == pytest.approx(values[1], abs=1e-12)
        assert values[0] > 0.4

    def test_validation(self, rng):
        rho = random_density_matrix(rng, 8)
        with pytest.raises(SizeError):
            reduced_bipartition(rho, (2, 2, 2), cut=0)
        with pytest.raises(SizeError):
            reduced_bipartition(rho, (2, 2, 2), cut=3)
        with pytest.raises(SizeError):
            reduced_bipartition(rho, (2, 2), cut=1)


class TestBeatPeriod:
    def test_resonant_value(self):
        params = ModelParams(n_sites=2, n_max=2)
        expected = 2.0 * math.pi / (2.0 - math.sqrt(2.0))
        assert blockade_beat_period(params) == pytest.approx(expected)

    def test_period_grows_with_detuning(self):
        periods = [blockade_beat_period(ModelParams(n_sites=2, omega_a=d, n_max=2))
                   for d in (0.0, 0.5, 0.9)]
        assert periods[0] < periods[1] < periods[2]

    def test_single_photon_cutoff_has_no_beat(self):
        assert blockade_beat_period(ModelParams(n_sites=2, n_max=1)) is None

    def test_recommended_spacing_on_step_lattice(self):
        for delta in (0.0, 0.5, 0.9):
            params = ModelParams(n_sites=2, omega_a=delta, n_max=2)
            spacing = recommended_spacing(params)
            assert spacing / 0.005 == pytest.approx(round(spacing / 0.005))
            assert spacing == pytest.approx(blockade_beat_period(params) / 4.0,
                                            rel=0.01)

    def test_recommended_spacing_fallback(self):
        assert recommended_spacing(ModelParams(n_sites=2, n_max=1)) == \
            pytest.approx(2.5)


def gaussian(t, center, width, height=1.0):
    return height * np.exp(-0.5 * ((t - center) / width) ** 2)


class TestPeakFinding:
    def test_single_gaussian(self):
        t = np.linspace(0.0, 100.0, 401)
        report = find_peaks(gaussian(t, 40.0, 8.0), t)
        assert report.classification.kind == "SinglePeak"
        assert report.peak_times[0] == pytest.approx(40.0, abs=0.5)
        assert report.global_max == pytest.approx(1.0, abs=1e-6)

    def test_two_gaussians(self):
        t = np.linspace(0.0, 100.0, 401)
        y = gaussian(t, 30.0, 5.0) + gaussian(t, 70.0, 5.0, height=0.8)
        report = find_peaks(y, t)
        assert report.classification.kind == "MultiPeak"
        assert report.classification.count == 2
        assert report.classification.is_multi

    def test_small_ripples_below_prominence_ignored(self):
        t = np.linspace(0.0, 100.0, 2001)
        y = gaussian(t, 50.0, 15.0) + 0.005 * (1.0 + np.sin(2.0 * np.pi * t / 3.0))
        report = find_peaks(y, t)
        assert report.classification.is_single

    def test_zero_series_is_no_peak(self):
        t = np.linspace(0.0, 10.0, 50)
        report = find_peaks(np.zeros_like(t), t)
        assert report.classification.kind == "NoPeak"
        assert report.classification.count == 0
        assert str(report.classification) == "NoPeak"

    def test_negative_series_rejected(self):
        t = np.linspace(0.0, 10.0, 50)
        with pytest.raises(ConfigError):
            find_peaks(np.sin(t), t)

    def test_shape_mismatch_rejected(self):
        with pytest.raises(SizeError):
            find_peaks(np.zeros(5), np.zeros(6))


class TestClassifySeries:
    def test_burn_in_hides_early_transient(self):
        t = np.linspace(0.0, 100.0, 401)
        y = gaussian(t, 0.3, 0.1, height=0.5) + gaussian(t, 50.0, 10.0)
        report = classify_series(y, t, t_min=2.0)
        assert report.classification.is_single
        assert report.t_min == 2.0

    def test_overdamped_monotone_decay_counts_as_boundary_single(self):
        t = np.linspace(0.0, 100.0, 401)
        y = np.exp(-t / 10.0)
        report = classify_series(y, t, t_min=DEFAULT_BURN_IN)
        assert report.classification.is_single
        assert report.boundary_peak
        assert report.peak_times[0] == pytest.approx(1.0, abs=0.3)

    def test_beat_notch_removes_known_fast_line(self):
        beat = 2.0 * math.pi / (2.0 - math.sqrt(2.0))
        t = np.arange(0.0, 150.0, beat / 4.0)
        envelope = gaussian(t, 60.0, 18.0)
        wiggly = envelope * (0.6 + 0.4 * np.cos(2.0 * np.pi * t / beat))
        raw = classify_series(wiggly, t)
        notched = classify_series(wiggly, t, beat_period=beat)
        assert raw.classification.is_multi
        assert notched.classification.is_single
        assert notched.beat_filtered

    def test_notch_skipped_when_period_off_grid(self):
        t = np.linspace(0.0, 150.0, 301)
        y = gaussian(t, 60.0, 18.0)
        report = classify_series(y, t, beat_period=0.31)
        assert not report.beat_filtered
        assert report.classification.is_single

    def test_slow_double_revival_survives_notch(self):
        beat = 2.0 * math.pi / (2.0 - math.sqrt(2.0))
        t = np.arange(0.0, 150.0, beat / 4.0)
        y = gaussian(t, 35.0, 9.0) + gaussian(t, 100.0, 9.0, height=0.9)
        report = classify_series(y, t, beat_period=beat)
        assert report.classification.is_multi


class TestClassifierOnModelDynamics:
    """End-to-end: exact density-matrix evolution feeding the classifier."""

    @pytest.mark.parametrize("gamma,expected_multi", [(0.02, True), (0.06, False)])
    def test_damping_splits_revival_regimes(self, gamma, expected_multi):
        params, model, psi0 = two_site_model(hop=0.06, gamma=gamma)
        grid, series = oracle_negativity(params, model, psi0, t_end=150.0)
        report = classify_series(series, grid.times,
                                 beat_period=blockade_beat_period(params))
        assert report.classification.is_multi == expected_multi
        if expected_multi:
            assert report.classification.count >= 2
        else:
            assert report.classification.is_single
