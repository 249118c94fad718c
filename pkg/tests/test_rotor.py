import numpy as np
import pytest

from rotortrack import (
    BasisMismatch,
    RotorState,
    accel_ops,
    build_basis,
    cos_op,
    expectation,
    kinetic_op,
    operator_table,
    sin_op,
)

from conftest import random_state


def brute_double_commutator(basis, op):
    """[H0, [H0, op]] / B^2 by explicit matrix products (B = 1)."""
    h0 = kinetic_op(basis).matrix
    inner = h0 @ op - op @ h0
    return h0 @ inner - inner @ h0


class TestBasis:
    def test_small_basis(self):
        b = build_basis(1)
        assert b.dim == 3
        assert list(b.m_values) == [-1, 0, 1]

    def test_m10(self):
        assert build_basis(10).dim == 21

    def test_rejects_degenerate(self):
        with pytest.raises(ValueError):
            build_basis(0)
        with pytest.raises(ValueError):
            build_basis(-3)

    def test_m_values_sorted_with_zero(self):
        b = build_basis(7)
        m = b.m_values
        assert np.all(np.diff(m) == 1)
        assert 0 in m


class TestCosSin:
    def test_cos_m1_matrix(self):
        mat = cos_op(build_basis(1)).matrix
        expected = np.array([[0, 0.5, 0], [0.5, 0, 0.5], [0, 0.5, 0]])
        assert np.array_equal(mat, expected.astype(complex))

    def test_cos_zero_diagonal(self):
        for M in (1, 3, 9):
            assert np.all(np.diag(cos_op(build_basis(M)).matrix) == 0)

    def test_cos_squared_center(self):
        # <0|cos^2|0> = 1/2 since cos^2 = (1 + cos 2phi)/2
        b = build_basis(2)
        c2 = cos_op(b).matrix @ cos_op(b).matrix
        assert c2[2, 2] == pytest.approx(0.5, abs=1e-15)

    def test_sin_entries(self):
        b = build_basis(1)
        s = sin_op(b).matrix
        # <0|S|1> is the (m=0, m'=1) entry
        assert s[1, 2] == pytest.approx(0.5j)
        assert s[2, 1] == pytest.approx(-0.5j)

    def test_sin_hermitian_exactly(self):
        s = sin_op(build_basis(5)).matrix
        assert np.abs(s - s.conj().T).max() == 0

    def test_truncation_identity_interior(self):
        # cos^2 + sin^2 acts as the identity away from the edge rows
        for M in (2, 5, 12):
            b = build_basis(M)
            total = cos_op(b).matrix @ cos_op(b).matrix + sin_op(b).matrix @ sin_op(b).matrix
            interior = total[1:-1, 1:-1]
            eye = np.eye(b.dim - 2, dtype=complex)
            assert np.abs(interior - eye).max() == 0


class TestKinetic:
    def test_diagonal_values(self):
        b = build_basis(4)
        k = kinetic_op(b).matrix
        assert k[b.M, b.M] == 0
        assert k[b.M + 3, b.M + 3] == 9
        assert k[b.M - 3, b.M - 3] == 9

    def test_trace_m1(self):
        assert np.trace(kinetic_op(build_basis(1)).matrix).real == pytest.approx(2.0)


class TestAccelOps:
    def test_ground_state_expectation_zero(self):
        b = build_basis(3)
        ax, ay = accel_ops(b)
        g = RotorState.ground(b)
        assert expectation(g, ax) == pytest.approx(0.0, abs=1e-15)
        assert expectation(g, ay) == pytest.approx(0.0, abs=1e-15)

    @pytest.mark.parametrize("M", [1, 2, 4, 8])
    def test_matches_brute_force_double_commutator(self, M):
        b = build_basis(M)
        ax, ay = accel_ops(b)
        assert np.abs(ax.matrix - brute_double_commutator(b, cos_op(b).matrix)).max() < 1e-12
        assert np.abs(ay.matrix - brute_double_commutator(b, sin_op(b).matrix)).max() < 1e-12

    @pytest.mark.parametrize("M", [1, 2, 4, 8, 16, 32, 64])
    def test_hermiticity_all_operators(self, M):
        b = build_basis(M)
        for op in (cos_op(b), sin_op(b), kinetic_op(b), *accel_ops(b)):
            assert op.hermitian
            assert np.abs(op.matrix - op.matrix.conj().T).max() < 1e-12


class TestExpectation:
    def test_ground_cos_zero(self):
        b = build_basis(2)
        assert expectation(RotorState.ground(b), cos_op(b)) == 0.0

    def test_flat_superposition(self):
        b = build_basis(1)
        s = RotorState.from_coeffs(b, [1, 1, 1])
        assert expectation(s, cos_op(b)) == pytest.approx(2.0 / 3.0, abs=1e-14)
        assert expectation(s, sin_op(b)) == pytest.approx(0.0, abs=1e-14)

    def test_hermitian_expectation_real_random(self, rng):
        b = build_basis(9)
        ops = (cos_op(b), sin_op(b), kinetic_op(b), *accel_ops(b))
        for _ in range(50):
            s = random_state(rng, 9)
            for op in ops:
                v = expectation(s, op)  # raises if imaginary part exceeds 1e-12
                assert isinstance(v, float)

    def test_basis_mismatch(self):
        with pytest.raises(BasisMismatch):
            expectation(RotorState.ground(build_basis(2)), cos_op(build_basis(3)))


class TestRotorState:
    def test_norm_enforced(self):
        b = build_basis(1)
        with pytest.raises(ValueError):
            RotorState(b, np.array([1.0, 1.0, 0.0], dtype=complex))

    def test_from_coeffs_normalizes(self):
        b = build_basis(1)
        s = RotorState.from_coeffs(b, [3.0, 0, 0])
        assert s.norm == pytest.approx(1.0, abs=1e-14)

    def test_unit_state_bounds(self):
        b = build_basis(2)
        s = RotorState.unit(b, -2)
        assert s.populations[0] == 1.0
        with pytest.raises(ValueError):
            RotorState.unit(b, 3)


class TestOperatorTable:
    def test_cached_identity(self):
        assert operator_table(6) is operator_table(6)

    def test_matrices_read_only(self):
        t = operator_table(4)
        with pytest.raises(ValueError):
            t.cos[0, 0] = 1.0

    def test_moment_stack_layout(self, rng):
        t = operator_table(5)
        s = random_state(rng, 5)
        vals = ((t.moment_stack @ s.coeffs) @ s.coeffs.conj()).real
        b = build_basis(5)
        c = cos_op(b).matrix
        assert vals[3] == pytest.approx(np.vdot(s.coeffs, c @ s.coeffs).real, abs=1e-14)
