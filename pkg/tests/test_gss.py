import numpy as np
import pytest

from steadystate import (
    CoefficientTensor,
    GssExpansion,
    build_duffing,
    build_system,
    compute_taylor_gss,
    decompose_structural,
    evaluate_at_amplitude,
    evaluate_pade,
    generate_forcing,
    load_forcing,
    pade_resum,
    picard_gss,
    reduced_gss,
    reduced_model,
    with_retained,
)
from steadystate.errors import (
    DenominatorNearZero,
    DimensionMismatch,
    DivergenceWarning,
    InvalidParameters,
    NearResonance,
    UnstableLinearPart,
)
from steadystate.model import polynomial_field
from tests.conftest import first_order_field, identity_lift, random_system


def _two_tone(n=1, duration=40.0, dt=0.02, delta=0.02, **kw):
    kw.setdefault("w1", 1.3)
    kw.setdefault("w2", 0.45)
    return generate_forcing(
        "two_tone", n=n, duration=duration, dt=dt, delta=delta,
        seed=11, pad=300, dofs=tuple(range(n)), **kw
    )


class TestComputeTaylor:
    def test_linear_system_is_first_order(self, rng):
        sys_ = random_system(rng, 2, structural=True, n_terms=0)
        f = _two_tone(n=2)
        exp = compute_taylor_gss(sys_, f, order=3)
        assert np.abs(exp.tensor.order_slice(2)).max() == 0.0
        assert np.abs(exp.tensor.order_slice(3)).max() == 0.0
        assert np.abs(exp.tensor.order_slice(1)).max() > 0.0

    @pytest.mark.filterwarnings("ignore::UserWarning")
    def test_duffing_order_convergence(self):
        sys_ = build_duffing(omega=1.0, zeta=0.05, kappa3=1.0)
        f = _two_tone(delta=0.025)
        ref = picard_gss(sys_, f, tol=1e-13, max_iter=100).trajectory
        scale = np.abs(ref).max()
        errs = []
        for N in (1, 3, 5):
            exp = compute_taylor_gss(sys_, f, order=N)
            traj = evaluate_at_amplitude(exp, f.max_magnitude)
            errs.append(np.abs(traj - ref).max() / scale)
        assert errs[0] > 10.0 * errs[1] > 100.0 * errs[2]
        assert errs[2] < 1e-7

    def test_newmark_backend_consistent(self):
        sys_ = build_duffing(zeta=0.1, kappa3=0.5)
        f = _two_tone(dt=0.01, delta=0.04)
        a = compute_taylor_gss(sys_, f, order=3, backend="kernel")
        b = compute_taylor_gss(sys_, f, order=3, backend="newmark")
        za = evaluate_at_amplitude(a, f.max_magnitude)
        zb = evaluate_at_amplitude(b, f.max_magnitude)
        assert np.abs(za - zb).max() < 1e-3 * np.abs(za).max()

    def test_qp_backend_matches_kernel(self):
        # the kernel route starts from rest and carries a decaying
        # transient; compare on the late window where only the orbit is left
        sys_ = build_duffing(zeta=0.4, kappa3=0.4)
        f = _two_tone(duration=60.0, dt=0.01, delta=0.04)
        a = compute_taylor_gss(sys_, f, order=3, backend="kernel")
        b = compute_taylor_gss(
            sys_, f, order=3, backend="qp", base_frequencies=(1.3, 0.45)
        )
        za = evaluate_at_amplitude(a, f.max_magnitude)
        zb = evaluate_at_amplitude(b, f.max_magnitude)
        late = slice(2 * za.shape[1] // 3, None)
        diff = np.abs(za[:, late] - zb[:, late]).max()
        assert diff < 1e-4 * np.abs(za[:, late]).max()

    def test_qp_backend_near_resonance(self):
        sys_ = build_duffing(omega=1.0, zeta=1e-4)
        f = _two_tone(dt=0.05, delta=0.01, w1=1.0, w2=0.37)
        with pytest.raises(NearResonance):
            compute_taylor_gss(
                sys_, f, order=1, backend="qp",
                base_frequencies=(1.0, 0.37), resonance_tol=1e-2,
            )

    def test_divergence_warning(self):
        sys_ = build_duffing(zeta=0.02, kappa3=200.0)
        f = _two_tone(delta=1.0)
        with pytest.warns(DivergenceWarning):
            compute_taylor_gss(sys_, f, order=6)

    def test_invalid_arguments(self, rng):
        sys_ = build_duffing()
        f = _two_tone()
        with pytest.raises(InvalidParameters):
            compute_taylor_gss(sys_, f, order=0)
        with pytest.raises(InvalidParameters):
            compute_taylor_gss(sys_, f, order=2, backend="rk4")
        with pytest.raises(InvalidParameters):
            compute_taylor_gss(sys_, f, order=2, backend="qp")
        with pytest.raises(DimensionMismatch):
            compute_taylor_gss(sys_, _two_tone(n=2), order=2)

    def test_mode_truncation_reduces_retained(self):
        # one fast, strongly damped mode: a coarse grid drops it
        M = np.eye(2)
        K = np.diag([1.0, 2.5e5])
        # mode 2: omega = 500, zeta = 0.5, decay e^{-250 dt} ~ 4e-6
        C = 0.01 * M + 0.002 * K
        sys_ = build_system(M, C, K)
        f = _two_tone(n=2, dt=0.05)
        exp = compute_taylor_gss(sys_, f, order=1, eps_trunc=1e-3)
        assert exp.spectral.retained == (0,)


class TestEvaluate:
    def test_manual_partial_sum(self, rng):
        sys_ = build_duffing(kappa3=0.7)
        f = _two_tone(delta=0.05)
        exp = compute_taylor_gss(sys_, f, order=4)
        d = 0.031
        manual = sum(
            exp.tensor.order_slice(nu) * d**nu for nu in range(1, 5)
        )
        assert np.abs(evaluate_at_amplitude(exp, d) - manual).max() < 1e-15

    def test_max_order_truncation(self):
        sys_ = build_duffing(kappa3=0.7)
        f = _two_tone(delta=0.05)
        exp = compute_taylor_gss(sys_, f, order=4)
        z1 = evaluate_at_amplitude(exp, 0.02, max_order=1)
        assert np.abs(z1 - 0.02 * exp.tensor.order_slice(1)).max() < 1e-16
        with pytest.raises(InvalidParameters):
            evaluate_at_amplitude(exp, 0.02, max_order=9)
        with pytest.raises(InvalidParameters):
            evaluate_at_amplitude(exp, 0.02, max_order=0)

    def test_amplitude_scaling_first_order(self, rng):
        sys_ = random_system(rng, 2, structural=True, n_terms=0)
        f = _two_tone(n=2)
        exp = compute_taylor_gss(sys_, f, order=1)
        assert np.abs(
            evaluate_at_amplitude(exp, 0.2) - 2.0 * evaluate_at_amplitude(exp, 0.1)
        ).max() < 1e-14


def _geometric_expansion(rng, ratio, sigma, orders, T=16, dim=2):
    tensor = CoefficientTensor.empty(dim, orders, T, dt=0.1)
    base = rng.normal(size=(dim, T))
    for nu in range(1, orders + 1):
        tensor.insert_slice(nu, base * ratio**nu)
    return base, GssExpansion(
        system=None,
        spectral=None,
        tensor=tensor,
        order=orders,
        backend="kernel",
        delta_ref=sigma,
        forcing_sup=1.0,
        eps_trunc=1e-3,
        cache_stats={},
    )


class TestPade:
    def test_geometric_is_exact(self, rng):
        # z(delta) = base * r delta / (1 - r delta) has an exact [1/1] form
        r = 2.0
        base, exp = _geometric_expansion(rng, r, sigma=0.25, orders=4)
        pade = pade_resum(exp, 1, 1)
        assert pade.den.shape == (2, 1)
        assert np.abs(pade.den + r * 0.25).max() < 1e-12
        d = 0.45  # r*d = 0.9: near the pole, Taylor converges slowly
        closed = base * (r * d / (1.0 - r * d))
        out = evaluate_pade(pade, d)
        assert np.abs(out - closed).max() < 1e-10 * np.abs(closed).max()

    def test_pole_raises(self, rng):
        r = 2.0
        _, exp = _geometric_expansion(rng, r, sigma=0.25, orders=4)
        pade = pade_resum(exp, 1, 1)
        with pytest.raises(DenominatorNearZero) as info:
            evaluate_pade(pade, 0.5)  # r * delta = 1: the pole
        assert info.value.delta == pytest.approx(0.5)
        assert 0 <= info.value.coordinate < 2

    def test_overparameterized_flags_but_still_evaluates(self, rng):
        # [2/2] on exactly-geometric data: the denominator system is
        # rank deficient (flagged) yet the rational function is unchanged
        r = 2.0
        base, exp = _geometric_expansion(rng, r, sigma=0.25, orders=4)
        pade = pade_resum(exp, 2, 2)
        assert pade.ill_conditioned == (0, 1)
        d = 0.3
        closed = base * (r * d / (1.0 - r * d))
        out = evaluate_pade(pade, d)
        assert np.abs(out - closed).max() < 1e-9 * np.abs(closed).max()

    def test_requires_enough_orders(self, rng):
        _, exp = _geometric_expansion(rng, 1.5, sigma=0.25, orders=3)
        with pytest.raises(InvalidParameters):
            pade_resum(exp, 2, 2)
        with pytest.raises(InvalidParameters):
            pade_resum(exp, 0, 1)

    def test_agrees_with_taylor_inside_radius(self):
        # the shared per-coordinate denominator reproduces orders 1..L
        # exactly and L+1..L+M in the least-squares sense, so the defect
        # against the series vanishes at least like delta^{L+1}
        sys_ = build_duffing(zeta=0.1, kappa3=1.0)
        f = _two_tone(delta=0.05)
        exp = compute_taylor_gss(sys_, f, order=5)
        pade = pade_resum(exp, 2, 2)

        def defect(d):
            zt = evaluate_at_amplitude(exp, d)
            zp = evaluate_pade(pade, d)
            return np.abs(zt - zp).max() / np.abs(zt).max()

        d = 0.2 * f.max_magnitude
        big, small = defect(d), defect(d / 2)
        assert big < 1e-3
        assert small < big / 3.0


def _modal_reduced_model(sys_, spec, mode):
    """Exact invariant-pair reduced model of one structural mode."""
    n = sys_.n
    u = spec.U[:, mode]
    w, z = spec.omega[mode], spec.zeta[mode]
    R = polynomial_field(
        2, 2,
        [
            ((0, 1), 0, 1.0),
            ((1, 0), 1, -w * w),
            ((0, 1), 1, -2.0 * z * w),
        ],
        min_degree=1,
    )
    W_terms = []
    for i in range(n):
        W_terms.append(((1, 0), i, u[i]))
        W_terms.append(((0, 1), n + i, u[i]))
    W = polynomial_field(2, 2 * n, W_terms, min_degree=1)
    uM = u @ sys_.M
    rows = np.zeros((2, 2 * n))
    rows[0, :n] = uM
    rows[1, n:] = uM
    cols = np.zeros((2 * n, 2))
    cols[:n, 0] = u
    cols[n:, 1] = u
    return reduced_model(R, W, rows, cols)


class TestReduced:
    def test_trivial_reduction_matches_full(self, rng):
        sys_ = random_system(rng, 2, structural=True, n_terms=2)
        f = _two_tone(n=2, delta=0.03)
        spec = decompose_structural(sys_)
        dim = sys_.state_dim
        model = reduced_model(
            first_order_field(sys_),
            identity_lift(dim),
            np.eye(dim),
            np.eye(dim),
        )
        red = reduced_gss(model, with_retained(spec, tuple(range(sys_.n))), f, order=3)
        full = compute_taylor_gss(sys_, f, order=3, eps_trunc=1e-16)
        for nu in range(1, 4):
            a = red.tensor.order_slice(nu)
            b = full.tensor.order_slice(nu)
            assert np.abs(a - b).max() < 1e-10 * max(np.abs(b).max(), 1e-12)

    def test_linear_modal_split_matches_full(self, rng):
        # one mode handled through the reduced path, the rest as the
        # linear complement: together they are the full linear response
        sys_ = random_system(rng, 3, structural=True, n_terms=0)
        f = _two_tone(n=3, delta=0.1)
        spec = decompose_structural(sys_)
        model = _modal_reduced_model(sys_, spec, 0)
        red = reduced_gss(model, with_retained(spec, (0,)), f, order=1)
        full = compute_taylor_gss(sys_, f, order=1, eps_trunc=1e-16)
        za = evaluate_at_amplitude(red, f.max_magnitude)
        zb = evaluate_at_amplitude(full, f.max_magnitude)
        assert np.abs(za - zb).max() < 1e-8 * np.abs(zb).max()

    def test_unstable_reduced_part_rejected(self, rng):
        sys_ = random_system(rng, 1, structural=True, n_terms=0)
        spec = decompose_structural(sys_)
        R = polynomial_field(2, 2, [((1, 0), 0, 1.0), ((0, 1), 1, -1.0)], min_degree=1)
        W = identity_lift(2)
        model = reduced_model(R, W, np.eye(2), np.eye(2))
        f = _two_tone(n=1)
        with pytest.raises(UnstableLinearPart):
            reduced_gss(model, with_retained(spec, (0,)), f, order=1)

    def test_dimension_guards(self, rng):
        sys_ = random_system(rng, 2, structural=True, n_terms=0)
        spec = decompose_structural(sys_)
        model = reduced_model(
            first_order_field(sys_), identity_lift(4), np.eye(4), np.eye(4)
        )
        f = _two_tone(n=2)
        with pytest.raises(InvalidParameters):
            reduced_gss(model, spec, f, order=0)


class TestForcingNormalization:
    def test_expansion_is_sup_normalized(self, rng):
        # scaling the forcing leaves coefficient grids unchanged; only
        # the reference amplitude moves
        sys_ = build_duffing(kappa3=0.5)
        f1 = _two_tone(delta=0.02)
        f2 = f1.scaled(3.0)
        e1 = compute_taylor_gss(sys_, f1, order=3)
        e2 = compute_taylor_gss(sys_, f2, order=3)
        for nu in range(1, 4):
            a = e1.tensor.order_slice(nu)
            b = e2.tensor.order_slice(nu)
            assert np.abs(a - b).max() < 1e-12 * max(np.abs(a).max(), 1e-12)
        assert e2.forcing_sup == pytest.approx(3.0 * e1.forcing_sup)

    def test_zero_forcing(self, rng):
        sys_ = build_duffing()
        f = load_forcing(np.zeros((50, 1)), dt=0.1)
        exp = compute_taylor_gss(sys_, f, order=2)
        assert np.abs(exp.tensor.order_slice(1)).max() == 0.0
        assert exp.forcing_sup == 0.0
