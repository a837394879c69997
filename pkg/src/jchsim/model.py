"""Jaynes-Cummings-Hubbard cavity arrays in the bare and polariton bases.

Each site holds one two-level atom (levels ``g``, ``e``) coupled to a single
cavity mode truncated at ``n_max`` photons.  Site Hilbert space ordering:
atom index slowest, photon index fastest, i.e. ``|atom, photon>`` maps to
``atom * (n_max + 1) + photon``.  Composite ordering is site-major with
site 0 leftmost.

Polariton (dressed) states per site::

    |n-> = cos(theta_n)|n, g> - sin(theta_n)|n-1, e>
    |n+> = sin(theta_n)|n, g> + cos(theta_n)|n-1, e>

with ``theta_n = 0.5 * arctan(g sqrt(n) / (delta / 2))`` and
``delta = omega_a - omega_c``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import ConfigError, SizeError, TruncationError
from .linalg import DEFAULT_DIM_CAP, kron

#: default cap for *dense operator* builds (vectors may go up to DEFAULT_DIM_CAP)
OPERATOR_DIM_CAP = 4096

GROUND = "ground"
MINUS = "minus"
PLUS = "plus"
_BRANCHES = (GROUND, MINUS, PLUS)


def _as_tuple(value, n: int, name: str, problems: list) -> tuple:
    """Broadcast a scalar or coerce a length-``n`` sequence to a float tuple."""
    if np.isscalar(value):
        out = (float(value),) * n
    else:
        out = tuple(float(v) for v in value)
        if len(out) != n:
            problems.append(f"{name}: expected {n} entries, got {len(out)}")
            return out
    if not all(math.isfinite(v) for v in out):
        problems.append(f"{name}: non-finite entry")
    return out


@dataclass(frozen=True)
class ModelParams:
    """Physical parameters of a cavity array.  Rates are in units of ``g``."""

    n_sites: int
    omega_a: float = 0.0
    omega_c: float = 0.0
    g: float | Sequence[float] = 1.0
    hop: float | Sequence[float] = 0.0
    gamma: float | Sequence[float] = 0.0
    n_max: int = 1

    def __post_init__(self):
        problems = []
        if not isinstance(self.n_sites, (int, np.integer)) or self.n_sites < 1:
            problems.append(f"n_sites: must be a positive integer, got {self.n_sites!r}")
            raise ConfigError(problems)
        if not isinstance(self.n_max, (int, np.integer)) or self.n_max < 1:
            problems.append(f"n_max: must be a positive integer, got {self.n_max!r}")
        n = int(self.n_sites)
        g = _as_tuple(self.g, n, "g", problems)
        hop = _as_tuple(self.hop, max(n - 1, 0), "hop", problems)
        gamma = _as_tuple(self.gamma, n, "gamma", problems)
        for name, val in (("omega_a", self.omega_a), ("omega_c", self.omega_c)):
            if not math.isfinite(float(val)):
                problems.append(f"{name}: non-finite")
        if not problems:
            if any(v <= 0 for v in g):
                problems.append("g: couplings must be positive")
            if any(v < 0 for v in gamma):
                problems.append("gamma: decay rates must be non-negative")
        if problems:
            raise ConfigError(problems)
        object.__setattr__(self, "n_sites", n)
        object.__setattr__(self, "n_max", int(self.n_max))
        object.__setattr__(self, "omega_a", float(self.omega_a))
        object.__setattr__(self, "omega_c", float(self.omega_c))
        object.__setattr__(self, "g", g)
        object.__setattr__(self, "hop", hop)
        object.__setattr__(self, "gamma", gamma)

    @property
    def detuning(self) -> float:
        return self.omega_a - self.omega_c

    @property
    def site_dim(self) -> int:
        return 2 * (self.n_max + 1)

    @property
    def dim(self) -> int:
        return self.site_dim ** self.n_sites


@dataclass(frozen=True)
class PolaritonLabel:
    """One dressed state of a single site: ground, ``|n->`` or ``|n+>``."""

    n: int
    branch: str

    def __post_init__(self):
        if self.branch not in _BRANCHES:
            raise ConfigError([f"branch: must be one of {_BRANCHES}, got {self.branch!r}"])
        if (self.branch == GROUND) != (self.n == 0):
            raise ConfigError([f"label ({self.n}, {self.branch}): n = 0 iff branch is ground"])
        if self.n < 0:
            raise ConfigError([f"label n must be >= 0, got {self.n}"])

    @classmethod
    def ground(cls) -> "PolaritonLabel":
        return cls(0, GROUND)

    @classmethod
    def minus(cls, n: int) -> "PolaritonLabel":
        return cls(n, MINUS)

    @classmethod
    def plus(cls, n: int) -> "PolaritonLabel":
        return cls(n, PLUS)

    @classmethod
    def parse(cls, text: str) -> "PolaritonLabel":
        """Parse ``"G"``, ``"0"``, ``"2-"`` or ``"1+"`` style labels."""
        s = str(text).strip()
        if s.upper() in ("G", "0"):
            return cls.ground()
        if s and s[-1] in "+-":
            try:
                n = int(s[:-1])
            except ValueError:
                raise ConfigError([f"cannot parse polariton label {text!r}"]) from None
            return cls(n, MINUS if s[-1] == "-" else PLUS)
        raise ConfigError([f"cannot parse polariton label {text!r}"])

    @property
    def excitation(self) -> int:
        return self.n

    def __str__(self) -> str:
        if self.branch == GROUND:
            return "G"
        return f"{self.n}{'-' if self.branch == MINUS else '+'}"


def mixing_angle(n: int, delta: float, g: float = 1.0) -> float:
    """Dressed-basis rotation angle for the ``n``-excitation doublet.

    ``atan2`` keeps the angle in (0, pi/2) for every detuning sign and
    returns exactly ``pi/4`` on resonance.
    """
    if n < 1:
        raise ValueError(f"mixing angle defined for n >= 1, got n = {n}")
    if g <= 0:
        raise ValueError(f"coupling must be positive, got g = {g}")
    return 0.5 * math.atan2(g * math.sqrt(n), delta / 2.0)


def polariton_energy(label: PolaritonLabel, params: ModelParams, site: int = 0) -> float:
    """Energy of a single-site dressed state (vacuum energy is zero)."""
    if label.branch == GROUND:
        return 0.0
    n = label.n
    if n > params.n_max:
        raise TruncationError(f"|{label}> needs {n} photons, cutoff is {params.n_max}")
    delta = params.detuning
    g = params.g[site]
    rabi = math.sqrt(delta * delta + 4.0 * g * g * n)
    sign = 1.0 if label.branch == PLUS else -1.0
    return params.omega_c * n + 0.5 * delta + 0.5 * sign * rabi


def dressed_state(label: PolaritonLabel, params: ModelParams, site: int = 0) -> np.ndarray:
    """Single-site dressed state as a vector in the bare (atom, photon) basis."""
    dim = params.site_dim
    vec = np.zeros(dim, dtype=np.complex128)
    if label.branch == GROUND:
        vec[0] = 1.0
        return vec
    n = label.n
    if n > params.n_max:
        raise TruncationError(f"|{label}> needs {n} photons, cutoff is {params.n_max}")
    th = mixing_angle(n, params.detuning, params.g[site])
    g_comp, e_comp = math.cos(th), -math.sin(th)
    if label.branch == PLUS:
        g_comp, e_comp = math.sin(th), math.cos(th)
    vec[n] = g_comp                            # |g, n>
    vec[(params.n_max + 1) + (n - 1)] = e_comp  # |e, n-1>
    return vec


@dataclass(frozen=True)
class HoppingCoefficients:
    """Photon matrix elements between neighbouring dressed doublets.

    ``c_minus``/``c_plus`` multiply the branch-preserving ladder operators
    ``|n->(n-1)-|`` resp. ``|n+><(n-1)+|`` inside the creation operator;
    ``k_plus`` couples ``|(n-1)-> -> |n+>`` and ``k_minus`` couples
    ``|(n-1)+> -> |n->`` (both vanish for n = 1 where the branches share
    the vacuum).
    """

    n: int
    c_plus: float
    c_minus: float
    k_plus: float
    k_minus: float


def hopping_coefficients(n: int, delta: float, g: float = 1.0) -> HoppingCoefficients:
    """Creation-operator coefficients between the ``n-1`` and ``n`` doublets."""
    if n < 1:
        raise ValueError(f"coefficients defined for n >= 1, got n = {n}")
    th_n = mixing_angle(n, delta, g)
    if n == 1:
        return HoppingCoefficients(1, math.sin(th_n), math.cos(th_n), 0.0, 0.0)
    th_m = mixing_angle(n - 1, delta, g)
    rn, rm = math.sqrt(n), math.sqrt(n - 1)
    sn, cn = math.sin(th_n), math.cos(th_n)
    sm, cm = math.sin(th_m), math.cos(th_m)
    return HoppingCoefficients(
        n,
        c_plus=rn * sn * sm + rm * cn * cm,
        c_minus=rn * cn * cm + rm * sn * sm,
        k_plus=rn * sn * cm - rm * cn * sm,
        k_minus=rn * cn * sm - rm * sn * cm,
    )


@dataclass(frozen=True)
class SiteOperatorSet:
    """Dense single-site operators in the bare basis (atom slowest)."""

    n_max: int
    identity: np.ndarray
    a: np.ndarray
    a_dag: np.ndarray
    sigma_minus: np.ndarray
    sigma_plus: np.ndarray
    number: np.ndarray
    excited: np.ndarray
    total_excitation: np.ndarray


def site_operators(n_max: int) -> SiteOperatorSet:
    """Build the standard single-site operator set for photon cutoff ``n_max``."""
    if n_max < 1:
        raise ConfigError([f"n_max: must be >= 1, got {n_max}"])
    pd = n_max + 1
    a_ph = np.diag(np.sqrt(np.arange(1, pd)), k=1).astype(np.complex128)
    i_ph = np.eye(pd, dtype=np.complex128)
    i_at = np.eye(2, dtype=np.complex128)
    sm_at = np.zeros((2, 2), dtype=np.complex128)
    sm_at[0, 1] = 1.0  # |g><e|
    pe_at = np.zeros((2, 2), dtype=np.complex128)
    pe_at[1, 1] = 1.0
    a = np.kron(i_at, a_ph)
    sm = np.kron(sm_at, i_ph)
    num = a.conj().T @ a
    exc = np.kron(pe_at, i_ph)
    return SiteOperatorSet(
        n_max=int(n_max),
        identity=np.kron(i_at, i_ph),
        a=a,
        a_dag=a.conj().T,
        sigma_minus=sm,
        sigma_plus=sm.conj().T,
        number=num,
        excited=exc,
        total_excitation=num + exc,
    )


def embed_site_operator(op: np.ndarray, site: int, params: ModelParams,
                        dim_cap: int = OPERATOR_DIM_CAP) -> np.ndarray:
    """Embed a single-site operator into the full array Hilbert space."""
    if not 0 <= site < params.n_sites:
        raise SizeError(f"site index {site} out of range for {params.n_sites} sites")
    sd = params.site_dim
    if op.shape != (sd, sd):
        raise SizeError(f"site operator shape {op.shape} does not match site dim {sd}")
    eye = np.eye(sd, dtype=np.complex128)
    factors = [eye] * params.n_sites
    factors[site] = op
    return kron(*factors, dim_cap=dim_cap)


def build_full_hamiltonian(params: ModelParams, dim_cap: int = OPERATOR_DIM_CAP) -> np.ndarray:
    """Dense array Hamiltonian in the bare product basis.

    Local terms ``omega_a |e><e| + omega_c n + g_j (a^dag sigma^- + a sigma^+)``
    plus nearest-neighbour photon hopping ``J_j (a_j^dag a_{j+1} + h.c.)``.
    """
    if params.dim > dim_cap:
        raise SizeError(f"full Hamiltonian dimension {params.dim} exceeds cap {dim_cap}")
    ops = site_operators(params.n_max)
    h = np.zeros((params.dim, params.dim), dtype=np.complex128)
    for j in range(params.n_sites):
        jc = ops.a_dag @ ops.sigma_minus
        local = (params.omega_a * ops.excited
                 + params.omega_c * ops.number
                 + params.g[j] * (jc + jc.conj().T))
        h += embed_site_operator(local, j, params, dim_cap=dim_cap)
    for j in range(params.n_sites - 1):
        left = embed_site_operator(ops.a_dag, j, params, dim_cap=dim_cap)
        right = embed_site_operator(ops.a, j + 1, params, dim_cap=dim_cap)
        term = left @ right
        h += params.hop[j] * (term + term.conj().T)
    return h


def total_excitation_operator(params: ModelParams, dim_cap: int = OPERATOR_DIM_CAP) -> np.ndarray:
    """Sum over sites of photon number plus atomic excitation."""
    ops = site_operators(params.n_max)
    out = np.zeros((params.dim, params.dim), dtype=np.complex128)
    for j in range(params.n_sites):
        out += embed_site_operator(ops.total_excitation, j, params, dim_cap=dim_cap)
    return out


def damped_sites(params: ModelParams) -> tuple[int, ...]:
    """Site indices with a nonzero photon decay rate, ascending."""
    return tuple(j for j in range(params.n_sites) if params.gamma[j] > 0)


def collapse_operators(params: ModelParams, dim_cap: int = OPERATOR_DIM_CAP) -> list[np.ndarray]:
    """Photon leakage jump operators ``sqrt(gamma_j) a_j`` (zero rates skipped)."""
    ops = site_operators(params.n_max)
    out = []
    for j in damped_sites(params):
        out.append(math.sqrt(params.gamma[j]) * embed_site_operator(ops.a, j, params, dim_cap=dim_cap))
    return out


def prepare_product_polariton_state(labels: Sequence[PolaritonLabel | str],
                                    params: ModelParams) -> np.ndarray:
    """Product of single-site dressed states as a full-space vector."""
    if len(labels) != params.n_sites:
        raise SizeError(f"need {params.n_sites} labels, got {len(labels)}")
    parsed = [lab if isinstance(lab, PolaritonLabel) else PolaritonLabel.parse(lab)
              for lab in labels]
    if params.dim > DEFAULT_DIM_CAP:
        raise SizeError(f"state dimension {params.dim} exceeds cap {DEFAULT_DIM_CAP}")
    vec = np.ones(1, dtype=np.complex128)
    for site, lab in enumerate(parsed):
        vec = np.kron(vec, dressed_state(lab, params, site))
    return vec


def total_excitation_of_labels(labels: Sequence[PolaritonLabel | str]) -> int:
    parsed = [lab if isinstance(lab, PolaritonLabel) else PolaritonLabel.parse(lab)
              for lab in labels]
    return sum(lab.excitation for lab in parsed)


# ---------------------------------------------------------------------------
# dressed (polariton) basis on a single site
# ---------------------------------------------------------------------------

def dressed_index(label: PolaritonLabel) -> int:
    """Position of a dressed state in the ordering G, 1-, 1+, 2-, 2+, ..."""
    if label.branch == GROUND:
        return 0
    return 2 * label.n - (1 if label.branch == MINUS else 0)


def dressed_basis_matrix(params: ModelParams, site: int = 0) -> np.ndarray:
    """Unitary with dressed states as columns (bare basis rows).

    Ordering: ``G, 1-, 1+, ..., n_max-, n_max+`` followed by the lone bare
    state ``|e, n_max>`` whose dressed partner lies beyond the photon cutoff.
    """
    d = params.site_dim
    u = np.zeros((d, d), dtype=np.complex128)
    u[:, 0] = dressed_state(PolaritonLabel.ground(), params, site)
    for n in range(1, params.n_max + 1):
        u[:, dressed_index(PolaritonLabel.minus(n))] = dressed_state(PolaritonLabel.minus(n), params, site)
        u[:, dressed_index(PolaritonLabel.plus(n))] = dressed_state(PolaritonLabel.plus(n), params, site)
    u[(params.n_max + 1) + params.n_max, d - 1] = 1.0  # |e, n_max>
    return u


def transform_to_dressed_basis(op: np.ndarray, params: ModelParams, site: int = 0) -> np.ndarray:
    """Conjugate a single-site operator into the dressed ordering, ``U^dag op U``."""
    u = dressed_basis_matrix(params, site)
    return u.conj().T @ op @ u


def creation_in_polariton_basis(params: ModelParams, include_interconverting: bool = True,
                                site: int = 0) -> np.ndarray:
    """Photon creation operator written directly in the dressed ordering.

    Built from the doublet coefficients: branch-preserving ladders weighted
    by ``c_(n,+/-)`` and, when ``include_interconverting`` is set, the
    branch-mixing ladders weighted by ``k``.  The row/column of the lone
    truncated state ``|e, n_max>`` is left zero; inside the polariton block
    the result matches the change-of-basis transform of the bare operator.
    """
    d = params.site_dim
    out = np.zeros((d, d), dtype=np.complex128)
    delta, g = params.detuning, params.g[site]
    for n in range(1, params.n_max + 1):
        co = hopping_coefficients(n, delta, g)
        lo_minus = PolaritonLabel.minus(n - 1) if n > 1 else PolaritonLabel.ground()
        lo_plus = PolaritonLabel.plus(n - 1) if n > 1 else PolaritonLabel.ground()
        out[dressed_index(PolaritonLabel.minus(n)), dressed_index(lo_minus)] += co.c_minus
        out[dressed_index(PolaritonLabel.plus(n)), dressed_index(lo_plus)] += co.c_plus
        if include_interconverting and n > 1:
            out[dressed_index(PolaritonLabel.plus(n)), dressed_index(lo_minus)] += co.k_plus
            out[dressed_index(PolaritonLabel.minus(n)), dressed_index(lo_plus)] += co.k_minus
    return out


def build_effective_hamiltonian(params: ModelParams, variant: str = "full_hop",
                                include_interconverting: bool = False,
                                dim_cap: int = OPERATOR_DIM_CAP) -> np.ndarray:
    """Array Hamiltonian projected onto the polariton states.

    Variants:

    * ``"full_hop"``: hopping carries every branch-preserving product
      (``P_+ + P_-`` on each side); ``include_interconverting`` additionally
      keeps the branch-mixing ``k`` ladders.
    * ``"rwa_hop"``: only same-branch products ``P_+^dag P_+ + P_-^dag P_-``
      survive (rotating-wave form for well-separated branches).
    * ``"lower_branch"``: per-site basis restricted to ``G, 1-, ..., n_max-``.

    Site dimension is ``2 n_max + 1`` (both branches) or ``n_max + 1``
    (lower branch only); the truncated bare remnant is excluded.
    """
    if variant not in ("full_hop", "rwa_hop", "lower_branch"):
        raise ConfigError([f"variant: unknown effective-model variant {variant!r}"])
    lower_only = variant == "lower_branch"
    sd = (params.n_max + 1) if lower_only else (2 * params.n_max + 1)
    if sd ** params.n_sites > dim_cap:
        raise SizeError(f"effective dimension {sd ** params.n_sites} exceeds cap {dim_cap}")

    def idx(label: PolaritonLabel) -> int:
        if lower_only:
            return label.n
        return dressed_index(label)

    def site_pieces(site: int):
        diag = np.zeros(sd, dtype=np.float64)
        p_minus_dag = np.zeros((sd, sd), dtype=np.complex128)
        p_plus_dag = np.zeros((sd, sd), dtype=np.complex128)
        k_dag = np.zeros((sd, sd), dtype=np.complex128)
        diag[idx(PolaritonLabel.ground())] = 0.0
        for n in range(1, params.n_max + 1):
            diag[idx(PolaritonLabel.minus(n))] = polariton_energy(PolaritonLabel.minus(n), params, site)
            if not lower_only:
                diag[idx(PolaritonLabel.plus(n))] = polariton_energy(PolaritonLabel.plus(n), params, site)
            co = hopping_coefficients(n, params.detuning, params.g[site])
            lo_minus = PolaritonLabel.minus(n - 1) if n > 1 else PolaritonLabel.ground()
            p_minus_dag[idx(PolaritonLabel.minus(n)), idx(lo_minus)] = co.c_minus
            if not lower_only:
                lo_plus = PolaritonLabel.plus(n - 1) if n > 1 else PolaritonLabel.ground()
                p_plus_dag[idx(PolaritonLabel.plus(n)), idx(lo_plus)] = co.c_plus
                if n > 1:
                    k_dag[idx(PolaritonLabel.plus(n)), idx(lo_minus)] = co.k_plus
                    k_dag[idx(PolaritonLabel.minus(n)), idx(lo_plus)] = co.k_minus
        return np.diag(diag).astype(np.complex128), p_minus_dag, p_plus_dag, k_dag

    eye = np.eye(sd, dtype=np.complex128)

    def embed(op: np.ndarray, site: int) -> np.ndarray:
        factors = [eye] * params.n_sites
        factors[site] = op
        return kron(*factors, dim_cap=dim_cap)

    dim = sd ** params.n_sites
    h = np.zeros((dim, dim), dtype=np.complex128)
    raising = []
    for j in range(params.n_sites):
        diag, pm_dag, pp_dag, k_dag = site_pieces(j)
        h += embed(diag, j)
        if variant == "rwa_hop":
            raising.append((pm_dag, pp_dag))
        elif variant == "lower_branch":
            raising.append((pm_dag,))
        else:
            total = pm_dag + pp_dag
            if include_interconverting:
                total = total + k_dag
            raising.append((total,))
    for j in range(params.n_sites - 1):
        for left_dag, right_dag in zip(raising[j], raising[j + 1]):
            term = embed(left_dag, j) @ embed(right_dag.conj().T, j + 1)
            h += params.hop[j] * (term + term.conj().T)
    return h


# ---------------------------------------------------------------------------
# conserved-excitation subspace
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class ReducedSpace:
    """Span of all product states with total excitation <= ``max_exc``.

    The array Hamiltonian commutes with the total excitation operator and
    photon loss only lowers it, so dynamics started inside this span never
    leaves it: restriction is exact, not an approximation.  Basis states are
    ordered by ascending full-space index.
    """

    params: ModelParams
    max_exc: int
    states: np.ndarray        # (dim, n_sites, 2) ints: photon, atom per site
    full_indices: np.ndarray  # (dim,) position of each basis state in the product basis
    _lookup: np.ndarray       # (full_dim,) full index -> reduced index or -1

    @property
    def dim(self) -> int:
        return int(self.states.shape[0])

    @property
    def full_dim(self) -> int:
        return int(self.params.dim)

    def reduce_vector(self, v: np.ndarray) -> np.ndarray:
        if v.shape != (self.full_dim,):
            raise SizeError(f"vector shape {v.shape} does not match full dim {self.full_dim}")
        out = np.ascontiguousarray(v[self.full_indices], dtype=np.complex128)
        lost = np.vdot(v, v).real - np.vdot(out, out).real
        if lost > 1e-12:
            raise TruncationError(f"state has weight {lost:.3e} outside the excitation subspace")
        return out

    def embed_vector(self, v: np.ndarray) -> np.ndarray:
        out = np.zeros(self.full_dim, dtype=np.complex128)
        out[self.full_indices] = v
        return out

    def reduce_operator(self, op: np.ndarray) -> np.ndarray:
        return np.ascontiguousarray(op[np.ix_(self.full_indices, self.full_indices)],
                                    dtype=np.complex128)

    def embed_density(self, rho: np.ndarray, dim_cap: int = OPERATOR_DIM_CAP) -> np.ndarray:
        if self.full_dim > dim_cap:
            raise SizeError(f"embedding a {self.full_dim}-dim density matrix exceeds cap {dim_cap}")
        out = np.zeros((self.full_dim, self.full_dim), dtype=np.complex128)
        out[np.ix_(self.full_indices, self.full_indices)] = rho
        return out

    def index_of(self, sites: tuple) -> int:
        """Reduced index of a bare product state given ((photon, atom), ...)."""
        pd = self.params.n_max + 1
        full = 0
        for p, a in sites:
            full = full * self.params.site_dim + (a * pd + p)
        red = int(self._lookup[full])
        if red < 0:
            raise SizeError(f"state {sites} not inside the excitation subspace")
        return red


def excitation_basis(params: ModelParams, max_exc: int) -> ReducedSpace:
    """Enumerate the product states with total excitation at most ``max_exc``."""
    if max_exc < 0:
        raise ConfigError([f"max_exc: must be >= 0, got {max_exc}"])
    if max_exc > params.n_max:
        raise ConfigError([
            f"max_exc: photon cutoff n_max = {params.n_max} cannot hold {max_exc} excitations"
            " on one site; raise n_max so the restriction stays exact"])
    pd = params.n_max + 1
    sd = params.site_dim
    full_dim = params.dim
    states = []
    full_indices = []
    lookup = np.full(full_dim, -1, dtype=np.int64)
    for full in range(full_dim):
        site_states = []
        total = 0
        # decode site-major: site 0 is the slowest digit
        rem = full
        for j in range(params.n_sites - 1, -1, -1):
            code = rem % sd
            rem //= sd
            atom, photon = divmod(code, pd)
            site_states.append((photon, atom))
            total += photon + atom
        if total <= max_exc:
            site_states.reverse()
            lookup[full] = len(states)
            states.append(site_states)
            full_indices.append(full)
    return ReducedSpace(
        params=params,
        max_exc=int(max_exc),
        states=np.array(states, dtype=np.int64),
        full_indices=np.array(full_indices, dtype=np.int64),
        _lookup=lookup,
    )


@dataclass(frozen=True, eq=False)
class ReducedModel:
    """Hamiltonian and jump operators restricted to an excitation subspace."""

    space: ReducedSpace
    h: np.ndarray
    collapse: tuple[np.ndarray, ...]
    collapse_sites: tuple[int, ...]
    n_tot: np.ndarray  # (dim,) integer total excitation per basis state

    @property
    def dim(self) -> int:
        return self.space.dim

    def effective_hamiltonian(self) -> np.ndarray:
        """Non-Hermitian no-jump generator ``H - (i/2) sum L^dag L``."""
        h_eff = self.h.astype(np.complex128).copy()
        for op in self.collapse:
            h_eff -= 0.5j * (op.conj().T @ op)
        return h_eff


def build_reduced_model(params: ModelParams, max_exc: int) -> ReducedModel:
    """Assemble the array Hamiltonian directly inside the excitation subspace.

    Matrix elements are written term by term from the bare-basis action of
    each directed process (atom-photon exchange, photon hops, photon loss),
    so no full-space operator is ever materialised.
    """
    space = excitation_basis(params, max_exc)
    dim = space.dim
    n = params.n_sites
    h = np.zeros((dim, dim), dtype=np.complex128)
    n_tot = np.zeros(dim, dtype=np.int64)
    dsites = damped_sites(params)
    collapse = [np.zeros((dim, dim), dtype=np.complex128) for _ in dsites]

    for i in range(dim):
        sites = [tuple(s) for s in space.states[i]]
        n_tot[i] = sum(p + a for p, a in sites)
        h[i, i] = sum(params.omega_a * a + params.omega_c * p for p, a in sites)
        for j in range(n):
            p, a = sites[j]
            # a^dag sigma^-  : photon emitted into the cavity by the atom
            if a == 1 and p + 1 <= params.n_max:
                tgt = sites.copy()
                tgt[j] = (p + 1, 0)
                h[space.index_of(tuple(tgt)), i] += params.g[j] * math.sqrt(p + 1)
            # a sigma^+      : photon absorbed by the atom
            if a == 0 and p >= 1:
                tgt = sites.copy()
                tgt[j] = (p - 1, 1)
                h[space.index_of(tuple(tgt)), i] += params.g[j] * math.sqrt(p)
        for j in range(n - 1):
            (p1, a1), (p2, a2) = sites[j], sites[j + 1]
            # a_j^dag a_{j+1} : photon hops one site to the left
            if p2 >= 1 and p1 + 1 <= params.n_max:
                tgt = sites.copy()
                tgt[j], tgt[j + 1] = (p1 + 1, a1), (p2 - 1, a2)
                h[space.index_of(tuple(tgt)), i] += params.hop[j] * math.sqrt((p1 + 1) * p2)
            # a_j a_{j+1}^dag : photon hops one site to the right
            if p1 >= 1 and p2 + 1 <= params.n_max:
                tgt = sites.copy()
                tgt[j], tgt[j + 1] = (p1 - 1, a1), (p2 + 1, a2)
                h[space.index_of(tuple(tgt)), i] += params.hop[j] * math.sqrt(p1 * (p2 + 1))
        for ch, j in enumerate(dsites):
            p, a = sites[j]
            if p >= 1:
                tgt = sites.copy()
                tgt[j] = (p - 1, a)
                collapse[ch][space.index_of(tuple(tgt)), i] = \
                    math.sqrt(params.gamma[j]) * math.sqrt(p)

    return ReducedModel(
        space=space,
        h=h,
        collapse=tuple(collapse),
        collapse_sites=dsites,
        n_tot=n_tot,
    )
