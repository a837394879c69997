"""Populations, inter-site entanglement negativity, and the peak classifier.

The classifier operationalizes "how many peaks does the negativity trace
have": the two-excitation blockade superimposes a fast coherent beat
(period 2π over the anharmonic mismatch) on every trace, so the series
is first averaged with a two-tap filter whose taps sit half a beat
apart — an exact zero of the beat frequency — then an initial burn-in
window is discarded and strict local maxima are kept if their
topographic prominence exceeds a fraction of the global maximum.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np
from scipy import signal

from .dynamics import EnsembleResult
from .errors import ConfigError, SizeError
from .linalg import TensorDims, as_complex_matrix, partial_transpose
from .model import (ModelParams, PolaritonLabel, ReducedSpace, polariton_energy,
                    prepare_product_polariton_state)

__all__ = [
    "DEFAULT_PROMINENCE_THRESHOLD", "DEFAULT_BURN_IN", "PROJECTOR_PRESETS",
    "ProjectorSpec", "PeakClassification", "PeakReport",
    "population", "negativity", "pure_negativity", "negativity_series",
    "reduced_bipartition", "blockade_beat_period", "recommended_spacing",
    "find_peaks", "classify_series", "classify_peak_structure",
]

DEFAULT_PROMINENCE_THRESHOLD = 0.05
DEFAULT_BURN_IN = 1.0
_BEAT_TAP_TOLERANCE = 0.15     # relative mistuning allowed for the filter taps

PROJECTOR_PRESETS = {
    "P20": ("2-", "G"),
    "P02": ("G", "2-"),
    "P11": ("1-", "1-"),
    "P300": ("3-", "G", "G"),
    "P111": ("1-", "1-", "1-"),
    "P4000": ("4-", "G", "G", "G"),
    "P1111": ("1-", "1-", "1-", "1-"),
}


# ---------------------------------------------------------------------------
# projectors and populations
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ProjectorSpec:
    """Projector onto a product of single-site dressed states.

    Specify either ``labels`` (one per site, e.g. ("2-", "G")) or a named
    ``preset``.  With ``symmetrize`` the projector sums over all distinct
    site permutations of the labels (e.g. P20 + P02).
    """

    labels: Optional[tuple] = None
    preset: Optional[str] = None
    symmetrize: bool = False

    def __post_init__(self):
        problems = []
        if (self.labels is None) == (self.preset is None):
            problems.append("projector: give exactly one of labels/preset")
        if self.preset is not None and self.preset not in PROJECTOR_PRESETS:
            problems.append(f"projector: unknown preset {self.preset!r}; "
                            f"known: {sorted(PROJECTOR_PRESETS)}")
        if self.labels is not None:
            try:
                parsed = tuple(str(PolaritonLabel.parse(str(l))) for l in self.labels)
                object.__setattr__(self, "labels", parsed)
            except Exception as exc:  # noqa: BLE001 - collect as config problem
                problems.append(f"projector: bad label list {self.labels!r} ({exc})")
        if problems:
            raise ConfigError(problems)

    @property
    def resolved_labels(self) -> tuple:
        return self.labels if self.labels is not None else PROJECTOR_PRESETS[self.preset]

    @property
    def name(self) -> str:
        if self.preset is not None:
            base = self.preset
        else:
            base = "P(" + ",".join(self.resolved_labels) + ")"
        return base + ("+perm" if self.symmetrize else "")

    def operator(self, params: ModelParams,
                 space: Optional[ReducedSpace] = None) -> np.ndarray:
        """Build the projector matrix on the full or reduced space."""
        labels = self.resolved_labels
        if len(labels) != params.n_sites:
            raise SizeError(f"projector {self.name}: {len(labels)} labels "
                            f"for {params.n_sites} sites")
        orderings = (sorted(set(itertools.permutations(labels)))
                     if self.symmetrize else [tuple(labels)])
        dim = space.dim if space is not None else params.dim
        proj = np.zeros((dim, dim), dtype=np.complex128)
        for ordering in orderings:
            vec = prepare_product_polariton_state(ordering, params)
            if space is not None:
                vec = space.reduce_vector(vec)
            proj += np.outer(vec, vec.conj())
        return proj


def population(state_or_rho, projector, params: Optional[ModelParams] = None,
               space: Optional[ReducedSpace] = None) -> float:
    """⟨ψ|P|ψ⟩ or tr(Pρ), clamped to [0, 1]."""
    if isinstance(projector, ProjectorSpec):
        if params is None:
            raise ConfigError(["population: params required to build a ProjectorSpec"])
        op = projector.operator(params, space)
    else:
        op = as_complex_matrix(projector)
    x = np.asarray(state_or_rho, dtype=np.complex128)
    if x.ndim == 1:
        if op.shape != (x.size, x.size):
            raise SizeError(f"projector shape {op.shape} does not match state size {x.size}")
        value = np.vdot(x, op @ x).real
    elif x.ndim == 2:
        if op.shape != x.shape:
            raise SizeError(f"projector shape {op.shape} does not match rho shape {x.shape}")
        value = np.trace(op @ x).real
    else:
        raise SizeError(f"expected a vector or matrix, got ndim={x.ndim}")
    return float(min(1.0, max(0.0, value)))


# ---------------------------------------------------------------------------
# negativity
# ---------------------------------------------------------------------------

def negativity(rho, dims) -> float:
    """Sum of |negative eigenvalues| of the partial transpose (Bell pair: 0.5)."""
    rho = as_complex_matrix(rho)
    td = TensorDims.coerce(dims)
    if len(td) != 2:
        raise SizeError(f"negativity needs exactly 2 tensor factors, got {len(td)}")
    if td.total != rho.shape[0]:
        raise SizeError(f"dims {td} do not match rho dimension {rho.shape[0]}")
    eigs = np.linalg.eigvalsh(partial_transpose(rho, td, which=1))
    return float(-eigs[eigs < 0.0].sum()) + 0.0   # +0.0 normalizes -0.0


def pure_negativity(states: np.ndarray, dims) -> np.ndarray:
    """Negativity of pure states, batched over leading axes.

    For |ψ⟩ with Schmidt values σ across the cut, N = ((Σσ)² − 1)/2;
    evaluated via the singular values of the coefficient matrix.
    """
    td = TensorDims.coerce(dims)
    if len(td) != 2:
        raise SizeError(f"negativity needs exactly 2 tensor factors, got {len(td)}")
    arr = np.asarray(states, dtype=np.complex128)
    if arr.shape[-1] != td.total:
        raise SizeError(f"dims {td} do not match state size {arr.shape[-1]}")
    coeff = arr.reshape(arr.shape[:-1] + (td.factors[0], td.factors[1]))
    sv = np.linalg.svd(coeff, compute_uv=False)
    vals = 0.5 * (sv.sum(axis=-1) ** 2 - 1.0)
    return np.maximum(vals, 0.0)


def negativity_series(rho_stack: np.ndarray, dims) -> np.ndarray:
    """negativity() applied along the first axis of a density-matrix stack."""
    return np.array([negativity(r, dims) for r in np.asarray(rho_stack)])


def reduced_bipartition(rho, site_dims: Sequence[int], cut: int):
    """Regroup an N-site state into a left|right bipartition at ``cut``.

    Pure index bookkeeping — the matrix is unchanged; only the factor
    dimensions are regrouped to (prod(dims[:cut]), prod(dims[cut:])).
    """
    site_dims = [int(d) for d in site_dims]
    if not 1 <= cut < len(site_dims):
        raise SizeError(f"cut must satisfy 1 <= cut < {len(site_dims)}, got {cut}")
    rho = as_complex_matrix(rho)
    left = math.prod(site_dims[:cut])
    right = math.prod(site_dims[cut:])
    if left * right != rho.shape[0]:
        raise SizeError(f"site dims {site_dims} do not match rho dimension {rho.shape[0]}")
    return rho, TensorDims((left, right))


# ---------------------------------------------------------------------------
# beat period helpers
# ---------------------------------------------------------------------------

def blockade_beat_period(params: ModelParams) -> Optional[float]:
    """Period of the two-excitation anharmonic beat, from the dressed energies.

    Returns None when the model cannot host two excitations on a site or
    the mismatch vanishes.
    """
    if params.n_max < 2:
        return None
    e2 = polariton_energy(PolaritonLabel.minus(2), params)
    e1 = polariton_energy(PolaritonLabel.minus(1), params)
    e0 = polariton_energy(PolaritonLabel.ground(), params)
    mismatch = abs(e2 + e0 - 2.0 * e1)
    if mismatch < 1e-12:
        return None
    return 2.0 * math.pi / mismatch


def recommended_spacing(params: ModelParams, dt: float = 0.005) -> float:
    """Sample spacing for classification runs: quarter beat, on the dt lattice."""
    period = blockade_beat_period(params)
    if period is None:
        return 500 * dt
    return max(1, round(period / 4.0 / dt)) * dt


# ---------------------------------------------------------------------------
# peak detection and classification
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PeakClassification:
    kind: str      # "NoPeak" | "SinglePeak" | "MultiPeak"
    count: int

    def __str__(self) -> str:
        return f"MultiPeak({self.count})" if self.kind == "MultiPeak" else self.kind

    @property
    def is_single(self) -> bool:
        return self.kind == "SinglePeak"

    @property
    def is_multi(self) -> bool:
        return self.kind == "MultiPeak"


def _classify_count(count: int) -> PeakClassification:
    if count == 0:
        return PeakClassification("NoPeak", 0)
    if count == 1:
        return PeakClassification("SinglePeak", 1)
    return PeakClassification("MultiPeak", count)


@dataclass(frozen=True)
class PeakReport:
    """Qualifying peaks of a series and the classification they imply."""

    peak_times: np.ndarray
    peak_heights: np.ndarray
    classification: PeakClassification
    global_max: float
    prominence_threshold: float
    prominences: np.ndarray = None
    boundary_peak: bool = False     # single peak sat at the first retained sample
    beat_filtered: bool = False
    t_min: float = 0.0


def find_peaks(series, times,
               prominence_threshold: float = DEFAULT_PROMINENCE_THRESHOLD) -> PeakReport:
    """Strict local maxima whose prominence exceeds threshold · global max.

    Prominence is the topographic definition (height above the higher of
    the two flanking minima); endpoints are never peaks.  An all-zero
    series classifies as NoPeak.
    """
    y = np.asarray(series, dtype=float)
    t = np.asarray(times, dtype=float)
    if y.ndim != 1 or y.shape != t.shape:
        raise SizeError(f"series/time shapes differ: {y.shape} vs {t.shape}")
    if y.size and y.min() < -1e-12:
        raise ConfigError([f"series: must be non-negative, min = {y.min()!r}"])
    global_max = float(y.max()) if y.size else 0.0
    if global_max <= 0.0:
        return PeakReport(peak_times=np.empty(0), peak_heights=np.empty(0),
                          classification=_classify_count(0), global_max=global_max,
                          prominence_threshold=prominence_threshold,
                          prominences=np.empty(0))
    idx, props = signal.find_peaks(y, prominence=prominence_threshold * global_max)
    return PeakReport(peak_times=t[idx], peak_heights=y[idx],
                      classification=_classify_count(len(idx)), global_max=global_max,
                      prominence_threshold=prominence_threshold,
                      prominences=props["prominences"])


def _beat_notch(y: np.ndarray, t: np.ndarray, beat_period: float):
    """Two-tap average with taps half a beat apart (exact beat cancellation)."""
    if y.size < 3:
        return y, t, False
    spacing = float(np.median(np.diff(t)))
    if spacing <= 0:
        return y, t, False
    half = beat_period / 2.0
    k = max(1, round(half / spacing))
    if k >= y.size or abs(k * spacing - half) > _BEAT_TAP_TOLERANCE * half:
        return y, t, False
    return 0.5 * (y[:-k] + y[k:]), t[:-k] + 0.5 * k * spacing, True


def classify_series(series, times, *,
                    prominence_threshold: float = DEFAULT_PROMINENCE_THRESHOLD,
                    t_min: float = DEFAULT_BURN_IN,
                    beat_period: Optional[float] = None) -> PeakReport:
    """Burn-in + beat filter + find_peaks, with an overdamped-peak fallback.

    When damping is strong enough that the single maximum sits inside the
    burn-in window, the retained series decreases monotonically from its
    first sample; that case is reported as SinglePeak with
    ``boundary_peak=True`` rather than NoPeak.
    """
    y = np.asarray(series, dtype=float)
    t = np.asarray(times, dtype=float)
    filtered = False
    if beat_period is not None and beat_period > 0:
        y, t, filtered = _beat_notch(y, t, beat_period)
    keep = t >= t_min - 1e-12
    y, t = y[keep], t[keep]
    report = find_peaks(y, t, prominence_threshold)
    if (report.classification.kind == "NoPeak" and y.size
            and report.global_max > 0 and int(np.argmax(y)) == 0):
        report = replace(report,
                         peak_times=t[:1].copy(), peak_heights=y[:1].copy(),
                         classification=_classify_count(1),
                         prominences=np.array([report.global_max]),
                         boundary_peak=True)
    return replace(report, beat_filtered=filtered, t_min=t_min)


def classify_peak_structure(ensemble: EnsembleResult, observable: str = "negativity",
                            *, dims=None,
                            prominence_threshold: float = DEFAULT_PROMINENCE_THRESHOLD,
                            t_min: float = DEFAULT_BURN_IN,
                            beat_period: Optional[float] = None) -> PeakReport:
    """Classify the peak structure of an ensemble observable.

    Uses the precomputed series when the ensemble carries one; otherwise
    (for ``negativity``) computes it from the averaged density matrix,
    which requires ``dims``.
    """
    if observable in ensemble.mean_observables:
        series = np.asarray(ensemble.mean_observables[observable], dtype=float)
    elif observable == "negativity" and ensemble.rho_avg is not None:
        if dims is None:
            raise ConfigError(["classify: dims required to compute negativity from rho_avg"])
        series = negativity_series(ensemble.rho_avg, dims)
    else:
        raise ConfigError([f"classify: ensemble carries no {observable!r} series"
                           " and no averaged density matrix"])
    return classify_series(series, ensemble.times,
                           prominence_threshold=prominence_threshold,
                           t_min=t_min, beat_period=beat_period)
