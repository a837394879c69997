"""Tensor-space linear algebra: invariants as property tests."""

from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from jchsim.errors import NotHermitianError, SizeError
from jchsim.linalg import (TensorDims, as_complex_matrix, hermitian_eigenvalues,
                           kron, partial_trace, partial_transpose,
                           require_hermitian)

from conftest import random_density_matrix

dims_pairs = st.tuples(st.integers(2, 4), st.integers(2, 4))
seeds = st.integers(0, 2**32 - 1)


class TestTensorDims:
    def test_total_and_len(self):
        td = TensorDims((2, 3, 4))
        assert td.total == 24
        assert len(td) == 3

    def test_coerce_passthrough_and_sequence(self):
        td = TensorDims((2, 3))
        assert TensorDims.coerce(td) is td
        assert TensorDims.coerce([2, 3]) == td

    @pytest.mark.parametrize("bad", [(), (0,), (2, -1), (2, 2.5)])
    def test_rejects_bad_factors(self, bad):
        with pytest.raises(SizeError):
            TensorDims(tuple(bad))


class TestKron:
    def test_matches_numpy(self):
        a = np.arange(4).reshape(2, 2)
        b = np.eye(3)
        assert np.array_equal(kron(a, b), np.kron(a, b))

    def test_associative_three_factors(self):
        rng = np.random.default_rng(5)
        a, b, c = (rng.normal(size=(2, 2)) for _ in range(3))
        assert np.allclose(kron(a, b, c), np.kron(a, np.kron(b, c)))

    def test_dim_cap_enforced(self):
        with pytest.raises(SizeError):
            kron(np.eye(100), np.eye(100), dim_cap=4096)


class TestHermitian:
    def test_require_hermitian_accepts_and_rejects(self):
        require_hermitian(np.diag([1.0, 2.0]))
        with pytest.raises(NotHermitianError):
            require_hermitian(np.array([[0.0, 1.0], [0.0, 0.0]]))

    def test_eigenvalues_sorted_real(self):
        vals = hermitian_eigenvalues(np.diag([3.0, -1.0, 2.0]))
        assert np.allclose(vals, [-1.0, 2.0, 3.0])

    def test_as_complex_matrix_rejects_nonsquare(self):
        with pytest.raises(SizeError):
            as_complex_matrix(np.zeros((2, 3)))


class TestPartialTranspose:
    @given(dims_pairs, seeds)
    def test_involution(self, dims, seed):
        da, db = dims
        rho = random_density_matrix(np.random.default_rng(seed), da * db)
        td = TensorDims((da, db))
        assert np.allclose(partial_transpose(partial_transpose(rho, td), td), rho)

    @given(dims_pairs, seeds)
    def test_trace_and_hermiticity_preserved(self, dims, seed):
        da, db = dims
        rho = random_density_matrix(np.random.default_rng(seed), da * db)
        td = TensorDims((da, db))
        pt = partial_transpose(rho, td)
        assert abs(np.trace(pt) - 1.0) < 1e-12
        assert np.allclose(pt, pt.conj().T)

    @given(dims_pairs, seeds)
    def test_transposing_both_factors_is_full_transpose(self, dims, seed):
        da, db = dims
        rho = random_density_matrix(np.random.default_rng(seed), da * db)
        td = TensorDims((da, db))
        both = partial_transpose(partial_transpose(rho, td, which=0), td, which=1)
        assert np.allclose(both, rho.T)

    def test_product_state_spectrum_unchanged(self):
        rng = np.random.default_rng(3)
        ra = random_density_matrix(rng, 3)
        rb = random_density_matrix(rng, 2)
        rho = np.kron(ra, rb)
        td = TensorDims((3, 2))
        before = np.sort(np.linalg.eigvalsh(rho))
        after = np.sort(np.linalg.eigvalsh(partial_transpose(rho, td)))
        assert np.allclose(before, after)

    def test_dimension_mismatch_raises(self):
        with pytest.raises(SizeError):
            partial_transpose(np.eye(5) / 5, TensorDims((2, 3)))


class TestPartialTrace:
    @given(dims_pairs, seeds)
    def test_trace_preserved_and_consistent(self, dims, seed):
        da, db = dims
        rng = np.random.default_rng(seed)
        rho = random_density_matrix(rng, da * db)
        td = TensorDims((da, db))
        left = partial_trace(rho, td, keep=0)
        right = partial_trace(rho, td, keep=1)
        assert left.shape == (da, da)
        assert right.shape == (db, db)
        assert abs(np.trace(left) - 1.0) < 1e-12
        assert abs(np.trace(right) - 1.0) < 1e-12

    def test_product_state_factors_recovered(self):
        rng = np.random.default_rng(11)
        ra = random_density_matrix(rng, 2)
        rb = random_density_matrix(rng, 4)
        rho = np.kron(ra, rb)
        td = TensorDims((2, 4))
        assert np.allclose(partial_trace(rho, td, keep=0), ra)
        assert np.allclose(partial_trace(rho, td, keep=1), rb)
