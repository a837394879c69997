"""Time evolution: unitary runs, quantum trajectories, and a density-matrix oracle.

All integrators share one numerical scheme: the classical fixed-step
4th-order Runge-Kutta update, which for these linear time-invariant
generators is exactly multiplication by the degree-4 Taylor polynomial
R(dt·A) = Σ_{k≤4} (dt·A)^k / k!.  R is computed once per run and applied
per step; whole sample intervals use matrix powers of R, so the scheme,
its order, and its roundoff behaviour are identical everywhere.

Propagators are built from H − c·I with c = tr(H)/dim.  The shift is a
global phase on pure states (populations, norms, jump statistics and
entanglement are unchanged; returned state phases differ by e^{−ict})
and cancels identically in the density-matrix commutator; it halves the
spectral radius seen by the fixed-step scheme.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Mapping, Optional, Sequence

import numpy as np

from ._stepper import (BACKEND, STATUS_BUFFER_EXHAUSTED, STATUS_NORM_UNDERFLOW,
                       STATUS_OK, trajectory_kernel)
from .errors import ConfigError, IntegratorError, SizeError
from .linalg import as_complex_matrix, require_hermitian

__all__ = [
    "DEFAULT_DT", "DEFAULT_MAX_DT", "LINDBLAD_DIM_CAP", "RHO_MEMORY_CAP",
    "TimeGrid", "TrajectoryResult", "EnsembleResult", "ConditionalBranch",
    "evolve_unitary", "mcwf_trajectory", "mcwf_ensemble", "no_jump_branch",
    "lindblad_evolve", "superoperator",
]

DEFAULT_DT = 0.005
DEFAULT_MAX_DT = 0.01
LINDBLAD_DIM_CAP = 64          # dense superoperator: (d^2)^2 entries
RHO_MEMORY_CAP = 256 * 2**20   # bytes allowed for an averaged-density stack
_BISECT_TOL = 1e-10
_UNIT_NORM_ATOL = 1e-8
_INITIAL_UNIFORMS = 256
_INITIAL_JUMP_SLOTS = 64
_MAX_BUFFER_RETRIES = 6


# ---------------------------------------------------------------------------
# time grid
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TimeGrid:
    """Uniform output grid with an integrator substep.

    ``n_samples`` points span [t_start, t_end] inclusive; the sample
    spacing must be an integer multiple of the integrator step ``dt``.
    """

    t_end: float
    n_samples: int
    dt: float = DEFAULT_DT
    t_start: float = 0.0
    max_dt: float = DEFAULT_MAX_DT

    def __post_init__(self):
        problems = []
        if not self.t_end > self.t_start:
            problems.append(f"t_end: must exceed t_start, got {self.t_end} <= {self.t_start}")
        if int(self.n_samples) != self.n_samples or self.n_samples < 2:
            problems.append(f"n_samples: need an integer >= 2, got {self.n_samples}")
        if not self.dt > 0:
            problems.append(f"dt: must be positive, got {self.dt}")
        else:
            if self.dt > self.max_dt:
                problems.append(f"dt: {self.dt} exceeds the stability cap {self.max_dt}")
            span = self.t_end - self.t_start
            if span > 0 and self.n_samples >= 2:
                if self.dt * self.n_samples > span * (1 + 1e-12):
                    problems.append(
                        f"dt: {self.dt} too coarse for {self.n_samples} samples over span {span}")
                ratio = span / (self.n_samples - 1) / self.dt
                if abs(ratio - round(ratio)) > 1e-6 * max(1.0, ratio):
                    problems.append(
                        "spacing: sample spacing must be an integer multiple of dt "
                        f"(spacing/dt = {ratio!r})")
        if problems:
            raise ConfigError(problems)

    @classmethod
    def with_spacing(cls, t_end: float, spacing: float, dt: float = DEFAULT_DT,
                     t_start: float = 0.0, **kw) -> "TimeGrid":
        """Grid with the requested sample spacing snapped to the dt lattice.

        ``t_end`` is trimmed down to the last full sample interval.
        """
        n_fine = max(1, round(spacing / dt))
        snapped = n_fine * dt
        n_samples = int(math.floor((t_end - t_start) / snapped + 1e-9)) + 1
        if n_samples < 2:
            raise ConfigError([f"spacing: {spacing} does not fit inside ({t_start}, {t_end})"])
        return cls(t_end=t_start + (n_samples - 1) * snapped, n_samples=n_samples,
                   dt=dt, t_start=t_start, **kw)

    @property
    def span(self) -> float:
        return self.t_end - self.t_start

    @property
    def spacing(self) -> float:
        return self.span / (self.n_samples - 1)

    @property
    def n_fine(self) -> int:
        """Integrator steps per sample interval."""
        return round(self.spacing / self.dt)

    @property
    def times(self) -> np.ndarray:
        return self.t_start + self.spacing * np.arange(self.n_samples)


# ---------------------------------------------------------------------------
# results
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TrajectoryResult:
    """One realization: sampled (normalized) states plus the jump record."""

    times: np.ndarray
    states: np.ndarray                    # (n_samples, dim), unit norm rows
    jumps: tuple                          # ((time, channel), ...) strictly increasing
    seed: object                          # int or tuple fed to the RNG stream


@dataclass(frozen=True)
class EnsembleResult:
    """Trajectory-averaged observables with standard errors."""

    times: np.ndarray
    mean_observables: dict                # name -> (n_samples,) float array
    stderr: dict                          # same keys/shapes, >= 0
    n_traj: int
    rho_avg: Optional[np.ndarray]         # (n_samples, dim, dim) or None
    master_seed: int
    backend: str = BACKEND


@dataclass(frozen=True)
class ConditionalBranch:
    """The deterministic jump-free branch of the unraveling.

    ``survival`` is the no-jump probability ‖ψ̃(t)‖²; ``states`` are the
    renormalized conditional states.  For an initial state in the top
    excitation sector (which decay never feeds), the conditional
    populations equal tr(Pρ)/tr(Π_sector ρ) of the full master equation.
    """

    times: np.ndarray
    states: np.ndarray
    survival: np.ndarray
    observables: dict


# ---------------------------------------------------------------------------
# propagator machinery
# ---------------------------------------------------------------------------

def _taylor4(m: np.ndarray) -> np.ndarray:
    eye = np.eye(m.shape[0], dtype=np.complex128)
    return eye + m @ (eye + (m / 2.0) @ (eye + (m / 3.0) @ (eye + m / 4.0)))


@dataclass(frozen=True)
class _Machinery:
    gen: np.ndarray          # no-jump generator -i(H - cI) - (1/2) Σ L†L
    r_stride: np.ndarray     # propagator over one sample interval
    r_pows: np.ndarray       # (p_max, d, d): dt-step propagator to powers 2^p
    collapse: np.ndarray     # (n_chan, d, d)
    center: float
    dim: int


def _build_machinery(h: np.ndarray, collapse: Sequence[np.ndarray],
                     grid: TimeGrid) -> _Machinery:
    h = require_hermitian(as_complex_matrix(h))
    d = h.shape[0]
    ops = [as_complex_matrix(op) for op in collapse]
    for op in ops:
        if op.shape != (d, d):
            raise SizeError(f"collapse operator shape {op.shape} does not match dim {d}")
    center = float(np.trace(h).real) / d
    gen = -1j * (h - center * np.eye(d))
    for op in ops:
        gen = gen - 0.5 * (op.conj().T @ op)
    gen = np.ascontiguousarray(gen, dtype=np.complex128)
    r_dt = _taylor4(grid.dt * gen)
    n_fine = grid.n_fine
    n_pow = max(1, int(math.floor(math.log2(n_fine))) + 1) if n_fine > 1 else 1
    r_pows = np.empty((n_pow, d, d), dtype=np.complex128)
    r_pows[0] = r_dt
    for p in range(1, n_pow):
        r_pows[p] = r_pows[p - 1] @ r_pows[p - 1]
    r_stride = np.linalg.matrix_power(r_dt, n_fine)
    stacked = (np.stack(ops) if ops
               else np.zeros((0, d, d), dtype=np.complex128))
    return _Machinery(gen=gen, r_stride=np.ascontiguousarray(r_stride),
                      r_pows=np.ascontiguousarray(r_pows),
                      collapse=np.ascontiguousarray(stacked),
                      center=center, dim=d)


def _check_state(psi0: np.ndarray, d: int) -> np.ndarray:
    psi0 = np.ascontiguousarray(np.asarray(psi0, dtype=np.complex128))
    if psi0.shape != (d,):
        raise SizeError(f"state shape {psi0.shape} does not match dim {d}")
    if abs(np.vdot(psi0, psi0).real - 1.0) > _UNIT_NORM_ATOL:
        raise ConfigError([f"psi0: must have unit norm, got ||psi0||^2 = "
                           f"{np.vdot(psi0, psi0).real!r}"])
    return psi0


# ---------------------------------------------------------------------------
# deterministic evolutions
# ---------------------------------------------------------------------------

def evolve_unitary(h: np.ndarray, psi0: np.ndarray, grid: TimeGrid) -> TrajectoryResult:
    """Closed-system evolution on the sample grid (no damping, no jumps)."""
    mach = _build_machinery(h, (), grid)
    psi = _check_state(psi0, mach.dim)
    states = np.empty((grid.n_samples, mach.dim), dtype=np.complex128)
    states[0] = psi
    for s in range(1, grid.n_samples):
        psi = mach.r_stride @ psi
        states[s] = psi
    return TrajectoryResult(times=grid.times, states=states, jumps=(), seed=0)


def no_jump_branch(h: np.ndarray, collapse: Sequence[np.ndarray], psi0: np.ndarray,
                   grid: TimeGrid,
                   observables: Optional[Mapping[str, np.ndarray]] = None,
                   ) -> ConditionalBranch:
    """Evolve the jump-free branch: decaying norm plus renormalized states."""
    mach = _build_machinery(h, collapse, grid)
    psi = _check_state(psi0, mach.dim)
    n = grid.n_samples
    states = np.empty((n, mach.dim), dtype=np.complex128)
    survival = np.empty(n, dtype=np.float64)
    work = psi.copy()
    for s in range(n):
        if s:
            work = mach.r_stride @ work
        norm2 = np.vdot(work, work).real
        survival[s] = norm2
        states[s] = work / math.sqrt(norm2)
    obs = {name: _batched_expectation(states, as_complex_matrix(op))
           for name, op in dict(observables or {}).items()}
    return ConditionalBranch(times=grid.times, states=states, survival=survival,
                             observables=obs)


# ---------------------------------------------------------------------------
# quantum trajectories
# ---------------------------------------------------------------------------

def _run_kernel_with_retry(mach: _Machinery, psi0: np.ndarray, grid: TimeGrid,
                           seed) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Run one trajectory, growing RNG/jump buffers deterministically on demand.

    Uniform draws from a fresh generator are prefix-stable, so enlarging
    the buffer and re-running reproduces the identical trajectory.
    """
    n_uniform = _INITIAL_UNIFORMS
    n_slots = _INITIAL_JUMP_SLOTS
    states = np.empty((grid.n_samples, mach.dim), dtype=np.complex128)
    for _ in range(_MAX_BUFFER_RETRIES):
        uniforms = np.random.default_rng(np.random.SeedSequence(seed)).random(n_uniform)
        jump_times = np.empty(n_slots, dtype=np.float64)
        jump_channels = np.empty(n_slots, dtype=np.int64)
        n_jumps, _, status = trajectory_kernel(
            mach.r_stride, mach.r_pows, mach.gen, mach.collapse, psi0,
            grid.n_fine, grid.dt, grid.spacing, uniforms, states,
            jump_times, jump_channels, _BISECT_TOL)
        if status == STATUS_OK:
            return states, jump_times[:n_jumps].copy(), jump_channels[:n_jumps].copy()
        if status == STATUS_NORM_UNDERFLOW:
            raise IntegratorError(
                "state norm fell below 1e-14 before the jump threshold was reached")
        n_uniform *= 4
        n_slots *= 4
    raise IntegratorError(
        f"trajectory did not terminate within {n_uniform} random draws")


def mcwf_trajectory(h: np.ndarray, collapse: Sequence[np.ndarray],
                    psi0: np.ndarray, grid: TimeGrid, seed) -> TrajectoryResult:
    """One Monte-Carlo wave-function trajectory (waiting-time unraveling).

    Between jumps the state evolves under H − (i/2)ΣL†L with decaying
    norm; when the squared norm crosses a pre-drawn uniform threshold the
    jump time is bisected to 1e-10, a channel j is selected with
    probability ‖L_jψ‖²/Σ_k‖L_kψ‖², and the state is projected and
    renormalized.  Deterministic given (seed, grid, inputs).
    """
    if len(collapse) == 0:
        return replace(evolve_unitary(h, psi0, grid), seed=seed)
    mach = _build_machinery(h, collapse, grid)
    psi = _check_state(psi0, mach.dim)
    states, jt, jc = _run_kernel_with_retry(mach, psi, grid, seed)
    jumps = tuple((float(t), int(c)) for t, c in zip(jt, jc))
    return TrajectoryResult(times=grid.times, states=states, jumps=jumps, seed=seed)


def _batched_expectation(states: np.ndarray, op: np.ndarray) -> np.ndarray:
    """<psi|P|psi> for each row of ``states``."""
    return np.einsum("ni,ni->n", states.conj(), states @ op.T).real


def _coerce_observables(observables) -> dict:
    if observables is None:
        return {}
    items = observables.items() if isinstance(observables, Mapping) else observables
    out = {}
    for name, op in items:
        out[str(name)] = as_complex_matrix(op)
    return out


def mcwf_ensemble(h: np.ndarray, collapse: Sequence[np.ndarray], psi0: np.ndarray,
                  grid: TimeGrid, n_traj: int, master_seed: int,
                  observables=None, keep_rho: bool = False,
                  n_threads: int = 1, chunk_size: Optional[int] = None,
                  ) -> EnsembleResult:
    """Average ``n_traj`` trajectories with per-index RNG streams.

    Trajectory j draws from SeedSequence((master_seed, j)); reduction runs
    in trajectory-index order inside fixed chunks, so the result does not
    depend on worker scheduling and repeated runs are byte-identical for
    a given backend.
    """
    if n_traj < 1:
        raise ConfigError([f"n_traj: must be >= 1, got {n_traj}"])
    obs = _coerce_observables(observables)
    n = grid.n_samples
    d = np.asarray(h).shape[0]
    if keep_rho and n * d * d * 16 > RHO_MEMORY_CAP:
        raise SizeError(
            f"averaged density stack needs {n * d * d * 16} bytes "
            f"(> cap {RHO_MEMORY_CAP}); reduce n_samples or the model dimension")

    for name, op in obs.items():
        if op.shape != (d, d):
            raise SizeError(f"observable {name!r} shape {op.shape} does not match dim {d}")

    if len(collapse) == 0:
        # degenerate: every trajectory is the same deterministic unitary run
        base = evolve_unitary(h, psi0, grid)
        means = {name: _batched_expectation(base.states, op) for name, op in obs.items()}
        stderr = {name: np.zeros(n) for name in obs}
        rho_avg = None
        if keep_rho:
            rho_avg = np.einsum("ni,nj->nij", base.states, base.states.conj())
        return EnsembleResult(times=grid.times, mean_observables=means, stderr=stderr,
                              n_traj=n_traj, rho_avg=rho_avg, master_seed=master_seed)

    mach = _build_machinery(h, collapse, grid)
    psi = _check_state(psi0, mach.dim)
    obs_t = {name: np.ascontiguousarray(op.T) for name, op in obs.items()}
    rows = np.empty((n_traj, len(obs), n), dtype=np.float64)
    rho_sum = np.zeros((n, d, d), dtype=np.complex128) if keep_rho else None

    if chunk_size is None:
        chunk_size = max(1, min(64, RHO_MEMORY_CAP // max(1, n * d * 16)))

    def _one(idx: int) -> tuple[int, np.ndarray]:
        states, _, _ = _run_kernel_with_retry(mach, psi, grid, (master_seed, idx))
        return idx, states

    for start in range(0, n_traj, chunk_size):
        indices = range(start, min(start + chunk_size, n_traj))
        if n_threads > 1:
            with ThreadPoolExecutor(max_workers=n_threads) as pool:
                produced = dict(pool.map(_one, indices))
            chunk = [(i, produced[i]) for i in indices]   # index order
        else:
            chunk = [_one(i) for i in indices]
        for idx, states in chunk:
            for o, (name, op_t) in enumerate(obs_t.items()):
                rows[idx, o] = np.einsum("ni,ni->n", states.conj(), states @ op_t).real
            if keep_rho:
                rho_sum += np.einsum("ni,nj->nij", states, states.conj())

    means = {}
    stderr = {}
    for o, name in enumerate(obs):
        sample = rows[:, o, :]
        means[name] = sample.mean(axis=0)
        if n_traj > 1:
            stderr[name] = sample.std(axis=0, ddof=1) / math.sqrt(n_traj)
        else:
            stderr[name] = np.zeros(n)
    rho_avg = rho_sum / n_traj if keep_rho else None
    return EnsembleResult(times=grid.times, mean_observables=means, stderr=stderr,
                          n_traj=n_traj, rho_avg=rho_avg, master_seed=master_seed)


# ---------------------------------------------------------------------------
# density-matrix oracle
# ---------------------------------------------------------------------------

def superoperator(h: np.ndarray, collapse: Sequence[np.ndarray]) -> np.ndarray:
    """Dense generator of the damped evolution acting on row-major vec(ρ)."""
    h = require_hermitian(as_complex_matrix(h))
    d = h.shape[0]
    eye = np.eye(d)
    sup = -1j * (np.kron(h, eye) - np.kron(eye, h.T))
    for op in collapse:
        op = as_complex_matrix(op)
        if op.shape != (d, d):
            raise SizeError(f"collapse operator shape {op.shape} does not match dim {d}")
        ldl = op.conj().T @ op
        sup += (np.kron(op, op.conj())
                - 0.5 * (np.kron(ldl, eye) + np.kron(eye, ldl.T)))
    return sup


def lindblad_evolve(h: np.ndarray, collapse: Sequence[np.ndarray],
                    rho0: np.ndarray, grid: TimeGrid) -> np.ndarray:
    """Propagate the full density matrix; returns (n_samples, d, d).

    Dense-superoperator integrator used as the validation oracle; the
    same fixed-step degree-4 scheme as the trajectory integrator.
    """
    rho0 = as_complex_matrix(rho0)
    d = rho0.shape[0]
    if d > LINDBLAD_DIM_CAP:
        raise SizeError(f"dense superoperator needs dim <= {LINDBLAD_DIM_CAP}, got {d}")
    require_hermitian(rho0, atol=1e-8)
    if abs(np.trace(rho0).real - 1.0) > 1e-8:
        raise ConfigError([f"rho0: trace must be 1, got {np.trace(rho0)!r}"])
    if np.linalg.eigvalsh(rho0).min() < -1e-8:
        raise ConfigError(["rho0: must be positive semidefinite"])

    sup = superoperator(h, collapse)
    r_dt = _taylor4(grid.dt * sup)
    r_stride = np.linalg.matrix_power(r_dt, grid.n_fine)
    out = np.empty((grid.n_samples, d, d), dtype=np.complex128)
    vec = rho0.reshape(-1).astype(np.complex128)
    out[0] = rho0
    for s in range(1, grid.n_samples):
        vec = r_stride @ vec
        out[s] = vec.reshape(d, d)
    return out
