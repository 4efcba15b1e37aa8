import math

import numpy as np
import pytest
from hypothesis import example, given, settings
from hypothesis import strategies as st

from steadystate import (
    build_kernel_weights,
    build_system,
    decompose_general,
    decompose_structural,
    propagate_order,
    propagate_order_newmark,
    qmat_structural,
    quadrature_weight_reference,
    quasiperiodic_step,
    qvec_general,
    with_retained,
)
from steadystate.errors import (
    GridMismatch,
    InvalidParameters,
    NearResonance,
    RealnessCheckFailed,
    ZeroEigenvalue,
)
from steadystate.kernel import _enforce_real
from tests.conftest import random_system

E1 = math.exp(-1.0)


class TestScalarWeights:
    def test_frozen_unit_decay(self):
        # lambda = -1, dt = 1:
        #   Q0 = e^x/lam - (e^x - 1)/(lam^2 dt) = 1 - 2/e
        #   Q1 = (e^x - 1)/(lam^2 dt) - 1/lam  = 1/e
        q = qvec_general(-1.0, 1.0)
        assert q[0] == pytest.approx(1.0 - 2.0 * E1, abs=1e-14)
        assert q[1] == pytest.approx(E1, abs=1e-14)
        assert q.imag == pytest.approx((0.0, 0.0), abs=1e-16)

    def test_trapezoid_limit(self):
        # lambda dt -> 0 degenerates to the trapezoid rule (dt/2, dt/2)
        q = qvec_general(-1e-9, 0.5)
        assert q[0] == pytest.approx(0.25, rel=1e-8)
        assert q[1] == pytest.approx(0.25, rel=1e-8)

    def test_zero_real_part_rejected(self):
        with pytest.raises(ZeroEigenvalue):
            qvec_general(0.0, 0.1)
        with pytest.raises(ZeroEigenvalue):
            qvec_general(2.0j, 0.1)

    def test_nonpositive_dt_rejected(self):
        with pytest.raises(InvalidParameters):
            qvec_general(-1.0, 0.0)
        with pytest.raises(InvalidParameters):
            qvec_general(-1.0, -0.5)

    def test_continuity_at_series_switch(self):
        # the series and closed-form branches agree where they meet
        for dt in (0.2499, 0.2501):
            a = qvec_general(-1.0, dt)
            b = quadrature_weight_reference(dt, lam=-1.0)
            assert np.abs(a - b).max() < 1e-12 * np.abs(b).max()

    @settings(max_examples=40, deadline=None)
    @given(
        re=st.floats(min_value=-1e4, max_value=-1e-3),
        im=st.floats(min_value=-50.0, max_value=50.0),
        dt=st.floats(min_value=1e-5, max_value=1.0),
    )
    @example(re=-1e-3, im=0.0, dt=1e-3)  # |x| ~ 1e-6: heavy cancellation zone
    @example(re=-1e4, im=0.0, dt=1.0)  # saturated exponential
    def test_matches_quadrature(self, re, im, dt):
        lam = complex(re, im)
        q = qvec_general(lam, dt)
        ref = quadrature_weight_reference(dt, lam=lam)
        assert np.abs(q - ref).max() <= 1e-10 * max(np.abs(ref).max(), 1e-30)


class TestStructuralWeights:
    def test_frozen_critical_unit(self):
        # omega = zeta = dt = 1 (critical): exact entries from the
        # confluent kernel integral
        Q, branch = qmat_structural(1.0, 1.0, 1.0)
        assert branch == "critical"
        expected = np.array(
            [
                [2.0 - 5.0 * E1, 3.0 * E1 - 1.0],
                [3.0 * E1 - 1.0, 1.0 - 2.0 * E1],
            ]
        )
        assert np.abs(Q - expected).max() < 1e-13

    def test_branch_tags(self):
        assert qmat_structural(2.0, 0.5, 0.1)[1] == "underdamped"
        assert qmat_structural(2.0, 1.0, 0.1)[1] == "critical"
        assert qmat_structural(2.0, 1.0 - 1e-12, 0.1)[1] == "critical"
        assert qmat_structural(2.0, 1.0 + 1e-12, 0.1)[1] == "critical"
        assert qmat_structural(2.0, 1.0 - 1e-7, 0.1)[1] == "underdamped"
        assert qmat_structural(2.0, 1.0 + 1e-7, 0.1)[1] == "overdamped"
        assert qmat_structural(2.0, 1.5, 0.1)[1] == "overdamped"

    def test_invalid_parameters(self):
        with pytest.raises(InvalidParameters):
            qmat_structural(0.0, 0.5, 0.1)
        with pytest.raises(InvalidParameters):
            qmat_structural(1.0, 0.0, 0.1)
        with pytest.raises(InvalidParameters):
            qmat_structural(1.0, 0.5, 0.0)

    def test_velocity_row_trapezoid_limit(self):
        Q, _ = qmat_structural(1.0, 0.3, 1e-6)
        assert Q[1, 0] == pytest.approx(5e-7, rel=1e-5)
        assert Q[1, 1] == pytest.approx(5e-7, rel=1e-5)
        # position picks up one more power of dt
        assert abs(Q[0, 0]) < 1e-11 and abs(Q[0, 1]) < 1e-11

    def test_continuity_at_spread_switch(self):
        # zeta = 1.05: spread = 2 omega sqrt(zeta^2-1) ~ 0.64 omega; choose
        # dt bracketing the uniform-evaluation handover
        for dt in (7.0e-3, 8.5e-3):
            Q, _ = qmat_structural(1.0, 1.05, dt)
            ref = quadrature_weight_reference(dt, omega=1.0, zeta=1.05)
            assert np.abs(Q - ref).max() < 1e-12 * np.abs(ref).max()

    @settings(max_examples=40, deadline=None)
    @given(
        omega=st.floats(min_value=1e-2, max_value=1e3),
        zeta=st.floats(min_value=1e-3, max_value=10.0),
        dt=st.floats(min_value=1e-5, max_value=1.0),
    )
    @example(omega=2.0, zeta=1.0, dt=0.3)
    @example(omega=2.0, zeta=1.0 - 1e-3, dt=0.3)
    @example(omega=2.0, zeta=1.0 + 1e-7, dt=0.3)
    @example(omega=2.0, zeta=1.0 - 1e-7, dt=1e-4)
    @example(omega=500.0, zeta=0.02, dt=0.02)  # fast oscillatory mode
    def test_matches_quadrature(self, omega, zeta, dt):
        Q, _ = qmat_structural(omega, zeta, dt)
        ref = quadrature_weight_reference(dt, omega=omega, zeta=zeta)
        assert np.abs(Q - ref).max() <= 1e-10 * max(np.abs(ref).max(), 1e-30)


class TestBuildWeights:
    def test_general_fields(self, rng):
        sys_ = random_system(rng, 2, structural=False, n_terms=0)
        spec = decompose_general(sys_)
        w = build_kernel_weights(spec, 0.05)
        assert w.kind == "general"
        assert w.q.shape == (4, 2)
        assert w.step.shape == (4,)
        assert np.abs(w.step - np.exp(spec.eigenvalues * 0.05)).max() < 1e-15

    def test_structural_fields(self, rng):
        sys_ = random_system(rng, 3, structural=True, n_terms=0)
        spec = decompose_structural(sys_)
        w = build_kernel_weights(spec, 0.05)
        assert w.kind == "structural"
        assert w.qmat.shape == (3, 2, 2)
        assert w.step.shape == (3, 2, 2)
        assert len(w.branches) == 3

    def test_retained_subset(self, rng):
        sys_ = random_system(rng, 3, structural=True, n_terms=0)
        spec = with_retained(decompose_structural(sys_), (0, 2))
        w = build_kernel_weights(spec, 0.05)
        assert w.retained == (0, 2)
        assert w.qmat.shape == (2, 2, 2)

    def test_bad_dt(self, rng):
        sys_ = random_system(rng, 2, structural=True, n_terms=0)
        spec = decompose_structural(sys_)
        with pytest.raises(InvalidParameters):
            build_kernel_weights(spec, 0.0)


def _harmonic_phi(n, dof, Omega, dt, T):
    t = np.arange(T) * dt
    phi = np.zeros((2 * n, T))
    phi[dof] = np.sin(Omega * t)
    return t, phi


class TestPropagateOrder:
    def test_harmonic_amplitude_structural(self):
        # unit-mass oscillator driven at Omega: steady position amplitude
        # 1 / sqrt((w^2 - Omega^2)^2 + (2 zeta w Omega)^2)
        omega, zeta, Omega, dt = 2.0, 0.1, 1.3, 1e-3
        sys_ = build_system(
            np.eye(1), np.array([[2 * zeta * omega]]), np.array([[omega**2]])
        )
        spec = decompose_structural(sys_)
        w = build_kernel_weights(spec, dt)
        T = int(120.0 / dt)
        t, phi = _harmonic_phi(1, 0, Omega, dt, T)
        Z = propagate_order(spec, w, phi)
        period = int(round(2 * np.pi / Omega / dt))
        tail = slice(T - 4 * period, T)
        design = np.column_stack([np.sin(Omega * t[tail]), np.cos(Omega * t[tail])])
        coef, *_ = np.linalg.lstsq(design, Z[0, tail], rcond=None)
        amp = float(np.hypot(*coef))
        expected = 1.0 / math.sqrt(
            (omega**2 - Omega**2) ** 2 + (2 * zeta * omega * Omega) ** 2
        )
        assert amp == pytest.approx(expected, rel=1e-6)

    def test_harmonic_amplitude_general_route(self):
        omega, zeta, Omega, dt = 2.0, 0.1, 1.3, 1e-3
        sys_ = build_system(
            np.eye(1),
            np.array([[2 * zeta * omega]]),
            np.array([[omega**2]]),
            damping="general",
        )
        spec = decompose_general(sys_)
        w = build_kernel_weights(spec, dt)
        T = int(120.0 / dt)
        t, phi = _harmonic_phi(1, 0, Omega, dt, T)
        Z = propagate_order(spec, w, phi)
        tail = slice(T - 19000, T)
        design = np.column_stack([np.sin(Omega * t[tail]), np.cos(Omega * t[tail])])
        coef, *_ = np.linalg.lstsq(design, Z[0, tail], rcond=None)
        expected = 1.0 / math.sqrt(
            (omega**2 - Omega**2) ** 2 + (2 * zeta * omega * Omega) ** 2
        )
        assert float(np.hypot(*coef)) == pytest.approx(expected, rel=1e-6)

    def test_dual_route_agreement(self, rng):
        # the same inhomogeneity through the structural and the general
        # decompositions gives the same trajectory
        sys_ = random_system(rng, 3, structural=True, n_terms=0)
        spec_s = decompose_structural(sys_)
        spec_g = decompose_general(build_system(sys_.M, sys_.C, sys_.K, damping="general"))
        dt = 0.02
        T = 600
        t = np.arange(T) * dt
        phi = np.zeros((6, T))
        phi[:3] = np.sin(np.outer((0.7, 1.1, 0.3), t)) * np.array([[1.0], [0.4], [-0.8]])
        Zs = propagate_order(spec_s, build_kernel_weights(spec_s, dt), phi)
        Zg = propagate_order(spec_g, build_kernel_weights(spec_g, dt), phi)
        scale = np.abs(Zs).max()
        assert np.abs(Zs - Zg).max() < 1e-8 * scale

    def test_zero_input_zero_output(self, rng):
        sys_ = random_system(rng, 2, structural=True, n_terms=0)
        spec = decompose_structural(sys_)
        w = build_kernel_weights(spec, 0.1)
        Z = propagate_order(spec, w, np.zeros((4, 50)))
        assert np.all(Z == 0.0)

    def test_grid_mismatch_shapes(self, rng):
        sys_ = random_system(rng, 2, structural=True, n_terms=0)
        spec = decompose_structural(sys_)
        w = build_kernel_weights(spec, 0.1)
        with pytest.raises(GridMismatch):
            propagate_order(spec, w, np.zeros((3, 50)))
        with pytest.raises(GridMismatch):
            propagate_order(spec, w, np.zeros((4, 1)))
        with pytest.raises(GridMismatch):
            propagate_order(spec, w, np.zeros((4, 50)), pad_length=60)

    def test_retained_mismatch(self, rng):
        sys_ = random_system(rng, 3, structural=True, n_terms=0)
        spec = decompose_structural(sys_)
        w = build_kernel_weights(spec, 0.1)
        with pytest.raises(GridMismatch):
            propagate_order(with_retained(spec, (0,)), w, np.zeros((6, 50)))

    def test_linearity(self, rng):
        sys_ = random_system(rng, 2, structural=True, n_terms=0)
        spec = decompose_structural(sys_)
        w = build_kernel_weights(spec, 0.05)
        phi1 = np.zeros((4, 100))
        phi2 = np.zeros((4, 100))
        phi1[0] = np.sin(0.3 * np.arange(100))
        phi2[1] = np.cos(0.8 * np.arange(100))
        Za = propagate_order(spec, w, 2.0 * phi1 - 0.5 * phi2)
        Zb = 2.0 * propagate_order(spec, w, phi1) - 0.5 * propagate_order(spec, w, phi2)
        assert np.abs(Za - Zb).max() < 1e-12 * max(np.abs(Zb).max(), 1e-30)


class TestNewmark:
    def test_matches_kernel_on_linear_system(self, rng):
        sys_ = random_system(rng, 2, structural=True, n_terms=0)
        spec = decompose_structural(sys_)
        dt = 0.01
        T = 2000
        t = np.arange(T) * dt
        phi = np.zeros((4, T))
        phi[0] = np.sin(1.1 * t)
        phi[1] = 0.5 * np.sin(0.4 * t + 1.0)
        Zk = propagate_order(spec, build_kernel_weights(spec, dt), phi)
        Zn = propagate_order_newmark(sys_, phi, dt)
        assert np.abs(Zk - Zn).max() < 5e-4 * np.abs(Zk).max()

    def test_second_order_convergence(self, rng):
        sys_ = random_system(rng, 2, structural=True, n_terms=0)

        def error(dt):
            T = int(20.0 / dt)
            t = np.arange(T) * dt
            phi = np.zeros((4, T))
            phi[0] = np.sin(1.1 * t)
            phi[1] = 0.5 * np.sin(0.4 * t + 1.0)
            spec = decompose_structural(sys_)
            Zk = propagate_order(spec, build_kernel_weights(spec, dt), phi)
            Zn = propagate_order_newmark(sys_, phi, dt)
            return np.abs(Zk - Zn).max()

        ratio = error(0.02) / error(0.01)
        assert 3.0 < ratio < 5.0

    def test_accepts_top_block_only(self, rng):
        sys_ = random_system(rng, 2, structural=True, n_terms=0)
        T = 200
        phi_full = np.zeros((4, T))
        phi_full[0] = np.sin(0.2 * np.arange(T))
        a = propagate_order_newmark(sys_, phi_full, 0.05)
        b = propagate_order_newmark(sys_, phi_full[:2], 0.05)
        assert np.array_equal(a, b)

    def test_nonzero_lower_block_rejected(self, rng):
        sys_ = random_system(rng, 2, structural=True, n_terms=0)
        phi = np.zeros((4, 100))
        phi[3, 10] = 1.0
        with pytest.raises(GridMismatch):
            propagate_order_newmark(sys_, phi, 0.05)


class TestRealness:
    def test_small_residue_stripped(self):
        Z = np.ones((2, 4)) + 1e-14j
        out = _enforce_real(Z, "test")
        assert out.dtype == np.float64

    def test_large_residue_raises(self):
        Z = np.ones((2, 4)) + 1e-3j
        with pytest.raises(RealnessCheckFailed):
            _enforce_real(Z, "test")


class TestQuasiperiodicStep:
    def test_frozen_constant_forcing(self):
        # k = 0, lam = -1, dt = 1, c = 1: increment (1 - e^{-1})
        val = quasiperiodic_step({0: 1.0}, [1.0], -1.0, 1.0, 0.0)
        assert val == pytest.approx(1.0 - E1, abs=1e-15)

    def test_stepping_reproduces_orbit(self):
        # w(t) = c e^{i kappa t} / (i kappa - lam) is the exact orbit; the
        # increment recursion must follow it to rounding
        lam = complex(-0.5, 0.2)
        kappa = 1.3
        c = 0.7 - 0.4j
        dt = 0.11
        orbit = lambda t: c * np.exp(1j * kappa * t) / (1j * kappa - lam)
        w = orbit(0.0)
        E = np.exp(lam * dt)
        for k in range(200):
            w = E * w + quasiperiodic_step({1: c}, [kappa], lam, dt, k * dt)
        assert abs(w - orbit(200 * dt)) < 1e-12 * abs(w)

    def test_vectorized_times(self):
        lam = -0.3 + 1.0j
        t = np.linspace(0.0, 5.0, 7)
        vec = quasiperiodic_step({2: 1.5}, [0.9], lam, 0.05, t)
        for i, ti in enumerate(t):
            one = quasiperiodic_step({2: 1.5}, [0.9], lam, 0.05, float(ti))
            assert abs(vec[i] - one) < 1e-15 * abs(one)

    def test_multifrequency_indices(self):
        lam = -0.2 + 0.4j
        val = quasiperiodic_step(
            {(1, -1): 0.3, (0, 2): 0.1j}, [1.0, 0.618], lam, 0.1, 0.7
        )
        kappa1 = 1.0 - 0.618
        kappa2 = 2 * 0.618
        by_hand = 0.3 * np.exp(1j * kappa1 * 0.7) * (
            (np.exp(1j * kappa1 * 0.1) - np.exp(lam * 0.1)) / (1j * kappa1 - lam)
        ) + 0.1j * np.exp(1j * kappa2 * 0.7) * (
            (np.exp(1j * kappa2 * 0.1) - np.exp(lam * 0.1)) / (1j * kappa2 - lam)
        )
        assert val == pytest.approx(by_hand, abs=1e-15)

    def test_near_resonance_payload(self):
        lam = complex(-1e-9, 1.0)
        with pytest.raises(NearResonance) as info:
            quasiperiodic_step({1: 1.0}, [1.0], lam, 0.1, 0.0)
        assert info.value.k == (1,)
        assert info.value.distance == pytest.approx(1e-9, rel=1e-6)

    def test_index_dimension_mismatch(self):
        with pytest.raises(GridMismatch):
            quasiperiodic_step({(1, 2): 1.0}, [1.0], -1.0, 0.1, 0.0)
