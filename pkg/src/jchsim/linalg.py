"""Dense linear algebra for small tensor-product Hilbert spaces.

All operators are plain ``numpy`` arrays, complex128, C-ordered.  Basis
ordering convention for composite systems: factor 0 is the *leftmost*
(slowest-varying) index, i.e. ``kron(A0, A1, ...)``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import NotHermitianError, SizeError

#: hard ceiling on any matrix dimension produced here (kron products, embeddings)
DEFAULT_DIM_CAP = 16384

#: absolute tolerance used when checking Hermiticity of inputs
HERMITICITY_ATOL = 1e-10


@dataclass(frozen=True)
class TensorDims:
    """Dimensions of the tensor factors making up a composite space."""

    factors: tuple[int, ...]

    def __post_init__(self):
        if len(self.factors) == 0:
            raise SizeError("TensorDims needs at least one factor")
        if any((not isinstance(d, (int, np.integer))) or d < 1 for d in self.factors):
            raise SizeError(f"factor dimensions must be positive integers, got {self.factors}")
        object.__setattr__(self, "factors", tuple(int(d) for d in self.factors))

    @property
    def total(self) -> int:
        return int(np.prod(self.factors))

    def __len__(self) -> int:
        return len(self.factors)

    @classmethod
    def coerce(cls, dims) -> "TensorDims":
        if isinstance(dims, TensorDims):
            return dims
        return cls(tuple(int(d) for d in dims))


def as_complex_matrix(m) -> np.ndarray:
    """Coerce to a square, finite, C-contiguous complex128 matrix."""
    a = np.ascontiguousarray(m, dtype=np.complex128)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise SizeError(f"expected a square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a.view(np.float64))):
        raise ValueError("matrix contains non-finite entries")
    return a


def kron(*ops, dim_cap: int = DEFAULT_DIM_CAP) -> np.ndarray:
    """Kronecker product of one or more square matrices, leftmost factor slowest.

    The resulting dimension is checked against ``dim_cap`` *before* any
    allocation happens.
    """
    if not ops:
        raise SizeError("kron needs at least one operand")
    mats = [as_complex_matrix(op) for op in ops]
    total = 1
    for m in mats:
        total *= m.shape[0]
    if total > dim_cap:
        raise SizeError(f"kron result dimension {total} exceeds cap {dim_cap}")
    out = mats[0]
    for m in mats[1:]:
        out = np.kron(out, m)
    return out


def require_hermitian(m: np.ndarray, atol: float = HERMITICITY_ATOL) -> np.ndarray:
    """Raise :class:`NotHermitianError` unless ``m`` is Hermitian within ``atol``."""
    a = as_complex_matrix(m)
    dev = np.max(np.abs(a - a.conj().T)) if a.size else 0.0
    if dev > atol:
        raise NotHermitianError(f"matrix deviates from Hermiticity by {dev:.3e} (atol {atol:.1e})")
    return a


def hermitian_eigenvalues(m, atol: float = HERMITICITY_ATOL) -> np.ndarray:
    """Eigenvalues of a Hermitian matrix, ascending, as real floats."""
    a = require_hermitian(m, atol=atol)
    return np.linalg.eigvalsh(a)


def _coerce_state(rho, dims) -> tuple[np.ndarray, TensorDims]:
    td = TensorDims.coerce(dims)
    a = as_complex_matrix(rho)
    if a.shape[0] != td.total:
        raise SizeError(f"matrix dimension {a.shape[0]} does not match factors {td.factors}")
    return a, td


def partial_transpose(rho, dims, which: int = 1) -> np.ndarray:
    """Partial transpose of a bipartite operator over factor ``which`` (0 or 1)."""
    a, td = _coerce_state(rho, dims)
    if len(td) != 2:
        raise SizeError(f"partial_transpose expects exactly two factors, got {len(td)}")
    if which not in (0, 1):
        raise SizeError(f"which must be 0 or 1, got {which}")
    da, db = td.factors
    t = a.reshape(da, db, da, db)
    if which == 0:
        t = t.transpose(2, 1, 0, 3)
    else:
        t = t.transpose(0, 3, 2, 1)
    return np.ascontiguousarray(t.reshape(da * db, da * db))


def partial_trace(rho, dims, keep) -> np.ndarray:
    """Trace out all factors not listed in ``keep`` (indices, original order kept)."""
    a, td = _coerce_state(rho, dims)
    n = len(td)
    if isinstance(keep, (int, np.integer)):
        keep = [int(keep)]
    keep = sorted(int(k) for k in keep)
    if any(k < 0 or k >= n for k in keep) or len(set(keep)) != len(keep):
        raise SizeError(f"keep indices {keep} invalid for {n} factors")
    t = a.reshape(td.factors + td.factors)
    # contract traced-out factors pairwise, highest axis first so indices stay valid
    traced = [i for i in range(n) if i not in keep]
    for i in sorted(traced, reverse=True):
        t = np.trace(t, axis1=i, axis2=i + (t.ndim // 2))
    d_keep = int(np.prod([td.factors[k] for k in keep])) if keep else 1
    return np.ascontiguousarray(t.reshape(d_keep, d_keep))


def dump_matrix_csv(m, path) -> None:
    """Write a dense matrix as ``row,col,re,im`` lines (debugging aid)."""
    a = as_complex_matrix(m)
    with open(path, "w", encoding="ascii", newline="") as fh:
        fh.write("row,col,re,im\r\n")
        for i in range(a.shape[0]):
            for j in range(a.shape[1]):
                z = a[i, j]
                fh.write(f"{i},{j},{z.real!r},{z.imag!r}\r\n")
