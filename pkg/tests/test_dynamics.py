"""Integrators and trajectory machinery against closed forms and invariants."""

from __future__ import annotations

import os
import subprocess
import sys

import numpy as np
import pytest
from scipy import stats

from jchsim.dynamics import (TimeGrid, evolve_unitary, lindblad_evolve,
                             mcwf_ensemble, mcwf_trajectory, no_jump_branch,
                             superoperator)
from jchsim.errors import ConfigError, NotHermitianError, SizeError
from jchsim.model import (ModelParams, build_full_hamiltonian,
                          build_reduced_model, prepare_product_polariton_state,
                          site_operators, total_excitation_operator)

from conftest import two_site_model


def damped_mode(dim=4, gamma=0.25):
    a = np.diag(np.sqrt(np.arange(1, dim)), k=1).astype(np.complex128)
    h = np.zeros((dim, dim), dtype=np.complex128)
    return h, [np.sqrt(gamma) * a], a


class TestTimeGrid:
    def test_basic_properties(self):
        grid = TimeGrid(t_end=10.0, n_samples=101, dt=0.005)
        assert grid.span == pytest.approx(10.0)
        assert grid.spacing == pytest.approx(0.1)
        assert grid.n_fine == 20
        assert len(grid.times) == 101
        assert grid.times[0] == 0.0
        assert grid.times[-1] == pytest.approx(10.0)

    def test_with_spacing_snaps_to_step_lattice(self):
        grid = TimeGrid.with_spacing(150.0, 2.6801)
        assert grid.spacing == pytest.approx(2.68)
        assert grid.spacing / grid.dt == pytest.approx(round(grid.spacing / grid.dt))

    @pytest.mark.parametrize("kwargs", [
        dict(t_end=0.0, n_samples=10),
        dict(t_end=1.0, n_samples=1),
        dict(t_end=1.0, n_samples=11, dt=0.5),      # dt above max_dt
        dict(t_end=1.0, n_samples=4, dt=0.005),     # spacing off the dt lattice
    ])
    def test_invalid_grids_rejected(self, kwargs):
        with pytest.raises(ConfigError):
            TimeGrid(**kwargs)


class TestUnitary:
    def test_vacuum_rabi_cosine_squared(self):
        params = ModelParams(n_sites=1, n_max=1)
        h = build_full_hamiltonian(params)
        psi0 = np.zeros(params.dim, dtype=np.complex128)
        psi0[params.n_max + 1] = 1.0
        grid = TimeGrid(t_end=25.0, n_samples=251, dt=0.005)
        res = evolve_unitary(h, psi0, grid)
        excited = site_operators(params.n_max).excited
        pop = np.einsum("ni,ij,nj->n", res.states.conj(), excited,
                        res.states).real
        assert np.abs(pop - np.cos(grid.times) ** 2).max() < 1e-8

    def test_norm_and_energy_conserved(self):
        params, model, psi0 = two_site_model(hop=0.03, gamma=0.0)
        grid = TimeGrid(t_end=200.0, n_samples=101, dt=0.005)
        res = evolve_unitary(model.h, psi0, grid)
        norms = np.linalg.norm(res.states, axis=1)
        assert np.abs(norms - 1.0).max() < 1e-10
        energy = np.einsum("ni,ij,nj->n", res.states.conj(), model.h,
                           res.states).real
        assert np.abs(energy - energy[0]).max() < 1e-10

    def test_halved_step_agrees(self):
        params, model, psi0 = two_site_model(hop=0.03, gamma=0.0)
        grid = TimeGrid(t_end=100.0, n_samples=51, dt=0.005)
        fine = TimeGrid(t_end=100.0, n_samples=51, dt=0.0025)
        a = evolve_unitary(model.h, psi0, grid).states
        b = evolve_unitary(model.h, psi0, fine).states
        assert np.abs(a - b).max() < 1e-6

    def test_non_hermitian_rejected(self):
        with pytest.raises(NotHermitianError):
            evolve_unitary(np.array([[0.0, 1.0], [0.0, 0.0]]),
                           np.array([1.0, 0.0], dtype=np.complex128),
                           TimeGrid(t_end=1.0, n_samples=3, dt=0.005))


class TestLindblad:
    def test_damped_mode_decay_matches_exponential(self):
        h, collapse, a = damped_mode()
        number = a.conj().T @ a
        rho0 = np.zeros((4, 4), dtype=np.complex128)
        rho0[2, 2] = 1.0
        grid = TimeGrid(t_end=20.0, n_samples=101, dt=0.005)
        rhos = lindblad_evolve(h, collapse, rho0, grid)
        mean_n = np.einsum("kij,ji->k", rhos, number).real
        assert np.abs(mean_n - 2.0 * np.exp(-0.25 * grid.times)).max() < 1e-6

    def test_trace_and_hermiticity_preserved(self):
        params, model, psi0 = two_site_model(hop=0.03, gamma=0.05)
        rho0 = np.outer(psi0, psi0.conj())
        grid = TimeGrid(t_end=100.0, n_samples=41, dt=0.005)
        rhos = lindblad_evolve(model.h, model.collapse, rho0, grid)
        traces = np.einsum("kii->k", rhos).real
        assert np.abs(traces - 1.0).max() < 1e-12
        assert np.abs(rhos - rhos.conj().transpose(0, 2, 1)).max() < 1e-10

    def test_generator_is_trace_free(self):
        h, collapse, _ = damped_mode()
        sup = superoperator(h, collapse)
        rng = np.random.default_rng(0)
        m = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
        rho = m @ m.conj().T
        deriv = (sup @ rho.reshape(-1)).reshape(4, 4)
        assert abs(np.trace(deriv)) < 1e-12

    def test_dimension_cap(self):
        dim = 80
        h = np.zeros((dim, dim), dtype=np.complex128)
        rho0 = np.zeros((dim, dim), dtype=np.complex128)
        rho0[0, 0] = 1.0
        with pytest.raises(SizeError):
            lindblad_evolve(h, [], rho0, TimeGrid(t_end=1.0, n_samples=3, dt=0.005))

    def test_bad_initial_state_rejected(self):
        h, collapse, _ = damped_mode()
        grid = TimeGrid(t_end=1.0, n_samples=3, dt=0.005)
        unnormalized = np.eye(4, dtype=np.complex128)
        with pytest.raises(ConfigError):
            lindblad_evolve(h, collapse, unnormalized, grid)


class TestTrajectories:
    def test_zero_damping_equals_unitary_exactly(self):
        params, model, psi0 = two_site_model(hop=0.03, gamma=0.0)
        grid = TimeGrid(t_end=50.0, n_samples=26, dt=0.005)
        uni = evolve_unitary(model.h, psi0, grid)
        traj = mcwf_trajectory(model.h, model.collapse, psi0, grid, seed=4)
        # collapse list is empty at zero damping -> identical propagation
        assert np.array_equal(uni.states, traj.states)
        assert traj.jumps == ()

    def test_single_trajectory_step_function(self):
        # one damped mode from the one-photon state: the trajectory is |1>
        # until its single jump, |0> afterwards
        h, collapse, a = damped_mode(dim=2, gamma=0.5)
        psi0 = np.array([0.0, 1.0], dtype=np.complex128)
        grid = TimeGrid(t_end=20.0, n_samples=201, dt=0.005)
        traj = mcwf_trajectory(h, collapse, psi0, grid, seed=12)
        assert len(traj.jumps) == 1
        t_jump = traj.jumps[0][0]
        pop1 = np.abs(traj.states[:, 1]) ** 2
        assert np.all(pop1[grid.times < t_jump] == pytest.approx(1.0))
        assert np.all(pop1[grid.times > t_jump] == pytest.approx(0.0))

    def test_first_jump_times_exponential(self):
        # waiting times from the one-photon state follow Exp(gamma)
        gamma = 0.5
        h, collapse, _ = damped_mode(dim=2, gamma=gamma)
        psi0 = np.array([0.0, 1.0], dtype=np.complex128)
        grid = TimeGrid(t_end=40.0, n_samples=11, dt=0.005)
        times = []
        for seed in range(2500):
            traj = mcwf_trajectory(h, collapse, psi0, grid, seed=seed)
            if traj.jumps:
                times.append(traj.jumps[0][0])
        assert len(times) > 2400          # P(no jump by t=40) ~ 2e-9
        result = stats.kstest(times, "expon", args=(0.0, 1.0 / gamma))
        assert result.pvalue > 0.001

    def test_excitation_never_increases_along_trajectory(self):
        params, model, psi0 = two_site_model(hop=0.03, gamma=0.05)
        n_tot = model.space.reduce_operator(total_excitation_operator(params))
        grid = TimeGrid(t_end=300.0, n_samples=301, dt=0.005)
        found_jumps = 0
        for seed in range(6):
            traj = mcwf_trajectory(model.h, model.collapse, psi0, grid, seed=seed)
            found_jumps += len(traj.jumps)
            exc = np.einsum("ni,ij,nj->n", traj.states.conj(), n_tot,
                            traj.states).real
            assert np.all(np.diff(exc) < 1e-9)
        assert found_jumps > 0

    def test_ensemble_decay_within_errorbars(self):
        h, collapse, a = damped_mode()
        number = a.conj().T @ a
        psi0 = np.zeros(4, dtype=np.complex128)
        psi0[2] = 1.0
        grid = TimeGrid(t_end=15.0, n_samples=31, dt=0.005)
        ens = mcwf_ensemble(h, collapse, psi0, grid, n_traj=800, master_seed=1,
                            observables={"n": number})
        target = 2.0 * np.exp(-0.25 * grid.times)
        dev = np.abs(ens.mean_observables["n"] - target)
        allowed = np.maximum(3.0 * ens.stderr["n"], 0.02)
        assert np.all(dev <= allowed)

    def test_conditional_branch_survival_and_population(self):
        # no-jump branch of the damped mode from |2>: survival e^(-2 gamma t),
        # conditional photon number pinned at 2
        gamma = 0.25
        h, collapse, a = damped_mode(gamma=gamma)
        number = a.conj().T @ a
        psi0 = np.zeros(4, dtype=np.complex128)
        psi0[2] = 1.0
        grid = TimeGrid(t_end=10.0, n_samples=21, dt=0.005)
        branch = no_jump_branch(h, collapse, psi0, grid,
                                observables={"n": number})
        assert np.abs(branch.survival
                      - np.exp(-2.0 * gamma * grid.times)).max() < 1e-8
        assert np.abs(branch.observables["n"] - 2.0).max() < 1e-10


class TestDeterminism:
    def test_ensemble_reruns_byte_identical(self):
        params, model, psi0 = two_site_model(hop=0.03, gamma=0.05)
        grid = TimeGrid(t_end=50.0, n_samples=26, dt=0.005)
        op = np.diag(np.arange(model.dim, dtype=np.float64))
        runs = [mcwf_ensemble(model.h, model.collapse, psi0, grid, n_traj=60,
                              master_seed=42, observables={"x": op})
                for _ in range(2)]
        assert runs[0].mean_observables["x"].tobytes() == \
            runs[1].mean_observables["x"].tobytes()

    def test_thread_count_does_not_change_results(self):
        params, model, psi0 = two_site_model(hop=0.03, gamma=0.05)
        grid = TimeGrid(t_end=50.0, n_samples=26, dt=0.005)
        op = np.diag(np.arange(model.dim, dtype=np.float64))
        serial = mcwf_ensemble(model.h, model.collapse, psi0, grid, n_traj=40,
                               master_seed=9, observables={"x": op}, n_threads=1)
        threaded = mcwf_ensemble(model.h, model.collapse, psi0, grid, n_traj=40,
                                 master_seed=9, observables={"x": op}, n_threads=3)
        assert serial.mean_observables["x"].tobytes() == \
            threaded.mean_observables["x"].tobytes()

    def test_chunk_size_does_not_change_results(self):
        params, model, psi0 = two_site_model(hop=0.03, gamma=0.05)
        grid = TimeGrid(t_end=50.0, n_samples=26, dt=0.005)
        op = np.diag(np.arange(model.dim, dtype=np.float64))
        results = [mcwf_ensemble(model.h, model.collapse, psi0, grid, n_traj=30,
                                 master_seed=5, observables={"x": op},
                                 chunk_size=cs).mean_observables["x"].tobytes()
                   for cs in (1, 7, 30)]
        assert results[0] == results[1] == results[2]

    def test_trajectory_seed_stream_is_stable(self):
        # the same (master seed, index) pair always reproduces a trajectory,
        # independently of which other trajectories run around it
        params, model, psi0 = two_site_model(hop=0.03, gamma=0.05)
        grid = TimeGrid(t_end=50.0, n_samples=26, dt=0.005)
        alone = mcwf_trajectory(model.h, model.collapse, psi0, grid, seed=(8, 3))
        again = mcwf_trajectory(model.h, model.collapse, psi0, grid, seed=(8, 3))
        assert np.array_equal(alone.states, again.states)
        assert alone.jumps == again.jumps

    @pytest.mark.slow
    def test_backends_agree_bitwise(self):
        script = (
            "import numpy as np\n"
            "from jchsim.dynamics import TimeGrid, mcwf_ensemble, BACKEND\n"
            "from jchsim.model import ModelParams, build_reduced_model, "
            "prepare_product_polariton_state\n"
            "p = ModelParams(n_sites=2, hop=0.03, gamma=0.05, n_max=2)\n"
            "m = build_reduced_model(p, max_exc=2)\n"
            "psi = m.space.reduce_vector(prepare_product_polariton_state(('2-', 'G'), p))\n"
            "g = TimeGrid(t_end=30.0, n_samples=16, dt=0.005)\n"
            "op = np.diag(np.arange(m.dim, dtype=np.float64))\n"
            "e = mcwf_ensemble(m.h, m.collapse, psi, g, n_traj=25, master_seed=3,"
            " observables={'x': op})\n"
            "print(BACKEND, e.mean_observables['x'].tobytes().hex())\n"
        )
        outputs = {}
        for backend in ("numba", "numpy"):
            env = dict(os.environ, JCHSIM_BACKEND=backend)
            proc = subprocess.run([sys.executable, "-c", script], env=env,
                                  capture_output=True, text=True, check=True)
            name, payload = proc.stdout.split()
            outputs[name] = payload
        assert outputs["numba"] == outputs["numpy"]


class TestMemoryGuards:
    def test_keep_rho_over_budget_raises_before_allocating(self):
        params = ModelParams(n_sites=4, hop=0.03, gamma=0.05, n_max=4)
        model = build_reduced_model(params, max_exc=4)
        psi0 = model.space.reduce_vector(
            prepare_product_polariton_state(("4-", "G", "G", "G"), params))
        grid = TimeGrid(t_end=1500.0, n_samples=601, dt=0.005)
        with pytest.raises(SizeError):
            mcwf_ensemble(model.h, model.collapse, psi0, grid, n_traj=2,
                          master_seed=0, keep_rho=True)
