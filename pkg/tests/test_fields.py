import numpy as np
import pytest

from rotortrack import (
    BasisSpec,
    CommutingObservable,
    FieldSample,
    GuardConfig,
    NonFinite,
    OrientationMoments,
    RotorState,
    Singularity,
    SingularityGuard,
    boundary_margin,
    determinant,
    generic_field_k0,
    orientation_moments,
    solve_fields,
    solve_from_moments,
    step,
)

from conftest import random_state

SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)
SPIN_UP = np.array([1, 0], dtype=complex)


class TestMoments:
    def test_ground_state(self):
        m = orientation_moments(RotorState.ground(BasisSpec(4)))
        assert m.cc == pytest.approx(0.5, abs=1e-14)
        assert m.ss == pytest.approx(0.5, abs=1e-14)
        assert m.sc == pytest.approx(0.0, abs=1e-14)
        assert m.cx == 0.0 and m.sy == 0.0

    def test_two_level_superposition(self):
        b = BasisSpec(2)
        c = np.zeros(5, dtype=complex)
        c[2] = c[3] = 1.0  # (|0> + |1>)/sqrt(2)
        m = orientation_moments(RotorState.from_coeffs(b, c))
        assert m.cx == pytest.approx(0.5, abs=1e-14)
        assert m.sy == pytest.approx(0.0, abs=1e-14)

    def test_interior_states_resolve_identity(self, rng):
        for _ in range(25):
            s = random_state(rng, 8, interior_margin=1)
            m = orientation_moments(s)
            assert m.cc + m.ss == pytest.approx(1.0, abs=1e-12)

    def test_moment_ranges(self, rng):
        for _ in range(100):
            m = orientation_moments(random_state(rng, 6))
            assert -1e-12 <= m.cc <= 1.0 + 1e-12
            assert -1e-12 <= m.ss <= 1.0 + 1e-12


class TestDeterminantMargin:
    def test_ground_state_quarter(self):
        m = orientation_moments(RotorState.ground(BasisSpec(3)))
        assert determinant(m) == pytest.approx(0.25, abs=1e-14)
        assert boundary_margin(m) == pytest.approx(1.0, abs=1e-14)

    def test_boundary_moments(self):
        assert determinant(OrientationMoments(cc=1.0, ss=0.0, sc=0.0, cx=0, sy=0)) == 0.0

    def test_flat_superposition_margin(self):
        b = BasisSpec(1)
        s = RotorState.from_coeffs(b, [1, 1, 1])
        assert boundary_margin(orientation_moments(s)) == pytest.approx(5.0 / 9.0, abs=1e-14)

    def test_gaussian_peak_margin(self):
        m = OrientationMoments(cc=0.85, ss=0.15, sc=0.0, cx=0.9, sy=0.0)
        assert boundary_margin(m) == pytest.approx(0.19, abs=1e-15)

    def test_cauchy_schwarz_random(self, rng):
        for _ in range(2000):
            m = orientation_moments(random_state(rng, 7))
            assert determinant(m) >= -1e-12


class TestSolveFields:
    def test_ground_state_passthrough(self):
        s = RotorState.ground(BasisSpec(6))
        fs = solve_fields(s, 0.37, -1.25)
        assert fs.eps_x == pytest.approx(0.37, abs=1e-13)
        assert fs.eps_y == pytest.approx(-1.25, abs=1e-13)

    def test_zero_rhs_zero_fields(self):
        fs = solve_fields(RotorState.ground(BasisSpec(6)), 0.0, 0.0)
        assert fs.eps_x == 0.0 and fs.eps_y == 0.0

    def test_determinant_guard_trips(self):
        m = OrientationMoments(cc=1.0 - 1e-12, ss=1e-12, sc=0.0, cx=0.5, sy=0.0)
        with pytest.raises(SingularityGuard) as exc:
            solve_from_moments(m, 0.0, 0.0, 1.0, 0.0)
        assert exc.value.reason == "determinant"

    def test_margin_guard_trips(self):
        cx = np.sqrt(1.0 - 5e-7)
        m = OrientationMoments(cc=cx**2 + 4e-7, ss=1.0 - cx**2 - 4e-7, sc=0.0, cx=cx, sy=0.0)
        with pytest.raises(SingularityGuard) as exc:
            solve_from_moments(m, 0.0, 0.0, 1.0, 0.0)
        assert exc.value.reason == "margin"

    def test_nan_input_rejected(self):
        s = RotorState.ground(BasisSpec(4))
        with pytest.raises(NonFinite):
            solve_fields(s, float("nan"), 0.0)

    def test_affine_in_accelerations(self, rng):
        s = random_state(rng, 8, interior_margin=3)
        g = GuardConfig()
        f00 = solve_fields(s, 0.0, 0.0, g)
        f10 = solve_fields(s, 1.0, 0.0, g)
        f01 = solve_fields(s, 0.0, 1.0, g)
        a, b = 0.73, -0.4
        fab = solve_fields(s, a, b, g)
        assert fab.eps_x == pytest.approx(
            f00.eps_x + a * (f10.eps_x - f00.eps_x) + b * (f01.eps_x - f00.eps_x), rel=1e-10)
        assert fab.eps_y == pytest.approx(
            f00.eps_y + a * (f10.eps_y - f00.eps_y) + b * (f01.eps_y - f00.eps_y), rel=1e-10)

    def test_never_nonfinite_random(self, rng):
        g = GuardConfig()
        for _ in range(300):
            s = random_state(rng, 6)
            a, b = rng.normal(size=2)
            try:
                fs = solve_fields(s, a, b, g)
            except SingularityGuard:
                continue
            assert np.isfinite(fs.eps_x) and np.isfinite(fs.eps_y)

    def test_ehrenfest_finite_difference(self, rng):
        # propagating under the returned constant fields must reproduce the
        # requested orientation accelerations
        h = 1e-3
        for _ in range(10):
            s = random_state(rng, 10, interior_margin=4)
            a, b = rng.uniform(-1, 1, size=2)
            fs = solve_fields(s, a, b)
            vals = {}
            for k in (-2, -1, 0, 1, 2):
                sk = step(s, fs, k * h) if k else s
                m = orientation_moments(sk)
                vals[k] = (m.cx, m.sy)
            d2x = (-vals[-2][0] + 16 * vals[-1][0] - 30 * vals[0][0]
                   + 16 * vals[1][0] - vals[2][0]) / (12 * h * h)
            d2y = (-vals[-2][1] + 16 * vals[-1][1] - 30 * vals[0][1]
                   + 16 * vals[1][1] - vals[2][1]) / (12 * h * h)
            assert abs(d2x - a) < 1e-6
            assert abs(d2y - b) < 1e-6


class TestFieldSample:
    def test_rejects_nonfinite(self):
        with pytest.raises(NonFinite):
            FieldSample(float("inf"), 0.0)

    def test_guard_config_validation(self):
        with pytest.raises(ValueError):
            GuardConfig(d_min=0.0)
        with pytest.raises(ValueError):
            GuardConfig(margin_min=-1.0)


class TestGenericEngine:
    def test_pauli_value(self):
        # H0 = sigma_z, mu = sigma_x, O = sigma_y, spin-up:
        # <[sigma_x, sigma_y]> = 2i, <[H0, sigma_y]> = -2i<sigma_x> = 0
        v = 4.2
        eps = generic_field_k0(SIGMA_Z, SIGMA_X, SIGMA_Y, SPIN_UP, v)
        assert eps == pytest.approx(v / 2.0, abs=1e-12)

    def test_pauli_singularity(self):
        with pytest.raises(Singularity):
            generic_field_k0(SIGMA_Z, SIGMA_X, SIGMA_Z, SPIN_UP, 1.0)

    def test_commuting_observable(self):
        with pytest.raises(CommutingObservable):
            generic_field_k0(SIGMA_Z, SIGMA_X, SIGMA_X, SPIN_UP, 1.0)

    def test_detuning_contributes(self):
        # spin-down flips the commutator expectation sign
        down = np.array([0, 1], dtype=complex)
        eps = generic_field_k0(SIGMA_Z, SIGMA_X, SIGMA_Y, down, 1.0)
        assert eps == pytest.approx(-0.5, abs=1e-12)
