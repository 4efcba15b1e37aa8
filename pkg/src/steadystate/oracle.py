"""Independent reference computations.

Everything here exists to check the main pipeline from a second route:

  newmark_full           nonlinear time integration of the physical
                         equations (Newton in each step); shares no code
                         with the kernel or composition stages
  picard_gss             fixed-point iteration on the full nonlinear
                         balance; deliberately reuses the kernel
                         propagation for its linear solves, so it checks
                         the composition/expansion stages, not the kernel
  quadrature_weight_reference
                         adaptive quadrature of the defining weight
                         integrals, no closed forms involved
  faadibruno_phi         inhomogeneity assembly by direct enumeration of
                         order compositions, no shared-product recursion

Expected values in the test suite that are not analytic identities come
from these routes.
"""

from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg
from scipy.integrate import quad_vec

from .composition import CoefficientTensor
from .errors import (
    DimensionMismatch,
    GridMismatch,
    InstanceTooLarge,
    InvalidParameters,
    NewtonDivergence,
    NoConvergence,
    QuadratureFailure,
)
from .kernel import build_kernel_weights, propagate_order
from .model import ForcingSignal, MechanicalSystem, evaluate_field, field_jacobian
from .spectral import (
    check_contraction,
    decompose_general,
    decompose_structural,
    select_modes,
    with_retained,
)

__all__ = [
    "newmark_full",
    "PicardResult",
    "picard_gss",
    "quadrature_weight_reference",
    "faadibruno_phi",
]


def _pack_field(fld):
    """Dense exponent/coefficient arrays for fast single-point evaluation.

    Returns (E, Cf, derivs): E is (n_terms, dim) integer exponents, Cf is
    (out_dim, n_terms), and derivs[i] = (Ei, Ci) gives the packed
    derivative field with respect to coordinate i (None where no term
    depends on it). Matches evaluate_field / field_jacobian pointwise;
    exists because the per-step Newton loop calls these thousands of
    times on single vectors.
    """
    E = np.array([m for m, _ in fld.terms], dtype=np.int64).reshape(len(fld.terms), fld.dim)
    Cf = np.column_stack([np.asarray(c, dtype=float) for _, c in fld.terms])
    derivs = []
    for i in range(fld.dim):
        rows = np.nonzero(E[:, i])[0]
        if rows.size == 0:
            derivs.append(None)
            continue
        Ei = E[rows].copy()
        Ci = Cf[:, rows] * E[rows, i]
        Ei[:, i] -= 1
        derivs.append((Ei, Ci))
    return E, Cf, derivs


def _packed_eval(E, Cf, w):
    return Cf @ np.prod(w[None, :] ** E, axis=1)


def newmark_full(
    system: MechanicalSystem,
    forcing: ForcingSignal,
    newton_tol: float = 1e-10,
    max_newton: int = 25,
    fd_jacobian: bool = False,
) -> np.ndarray:
    """Average-acceleration integration of the full nonlinear system.

    Solves M x'' + C x' + K x + f(x, x') = g(t) from rest, Newton
    iteration in every step (tolerance relative to the step's initial
    residual). Returns the (2n, T) trajectory on the forcing grid.
    fd_jacobian switches the Newton matrix to finite differences; the
    default uses the analytic polynomial Jacobian.

    Raises NewtonDivergence (with step index and last residual) when an
    increment fails to converge.
    """
    n = system.n
    if forcing.n != n:
        raise DimensionMismatch(f"forcing has {forcing.n} columns, system needs {n}")
    g = forcing.samples  # (T, n), physical amplitude
    dt = forcing.dt
    T = g.shape[0]

    beta, gamma = 0.25, 0.5
    c0 = 1.0 / (beta * dt * dt)
    c1 = gamma / (beta * dt)
    c2 = 1.0 / (beta * dt)
    c3 = 1.0 / (2.0 * beta) - 1.0

    M, C, K = system.M, system.C, system.K
    fld = system.nonlinearity
    if fld.n_terms:
        E, Cf, derivs = _pack_field(fld)

    def force(x, v):
        if fld.n_terms == 0:
            return np.zeros(n)
        return _packed_eval(E, Cf, np.concatenate([x, v]))

    def force_jac(x, v):
        w = np.concatenate([x, v])
        J = np.zeros((n, 2 * n))
        if fld.n_terms:
            for i, packed in enumerate(derivs):
                if packed is not None:
                    J[:, i] = _packed_eval(packed[0], packed[1], w)
        return J[:, :n], J[:, n:]

    x = np.zeros(n)
    v = np.zeros(n)
    a = np.linalg.solve(M, g[0] - force(x, v))
    out = np.zeros((2 * n, T))
    eye = np.eye(n)
    g_scale = float(np.linalg.norm(g, axis=1).max())

    for k in range(T - 1):
        target = g[k + 1]
        xn = x + dt * v + 0.5 * dt * dt * a  # explicit predictor

        def residual(xn_):
            an_ = c0 * (xn_ - x) - c2 * v - c3 * a
            vn_ = v + dt * ((1.0 - gamma) * a + gamma * an_)
            return M @ an_ + C @ vn_ + K @ xn_ + force(xn_, vn_) - target, vn_

        r, vn = residual(xn)
        r0 = np.linalg.norm(r)
        floor = newton_tol * max(r0, g_scale, 1e-300)
        it = 0
        while np.linalg.norm(r) > floor:
            if it >= max_newton:
                raise NewtonDivergence(
                    f"step {k + 1}: Newton stalled at residual {np.linalg.norm(r):.3e}",
                    step=k + 1,
                    residual=float(np.linalg.norm(r)),
                )
            if fd_jacobian:
                Jx = np.empty((n, n))
                h = 1e-7 * max(1.0, np.abs(xn).max())
                for j in range(n):
                    rp, _ = residual(xn + h * eye[j])
                    Jx[:, j] = (rp - r) / h
                J = Jx
            else:
                Jfx, Jfv = force_jac(xn, vn)
                J = c0 * M + c1 * C + K + Jfx + c1 * Jfv
            xn = xn - np.linalg.solve(J, r)
            r, vn = residual(xn)
            it += 1
        a = c0 * (xn - x) - c2 * v - c3 * a
        x = xn
        v = vn
        out[:n, k + 1] = x
        out[n:, k + 1] = v
    return out


@dataclass(frozen=True)
class PicardResult:
    """Fixed-point solve outcome: trajectory (2n, T), iteration count,
    and the observed contraction ratio (last successive-difference
    quotient; nan if fewer than two correction steps happened)."""

    trajectory: np.ndarray
    iterations: int
    contraction_estimate: float
    tol: float


def picard_gss(
    system: MechanicalSystem,
    forcing: ForcingSignal,
    tol: float = 1e-10,
    max_iter: int = 60,
    eps_trunc: float = 1e-12,
) -> PicardResult:
    """Picard iteration for the steady state at the forcing's amplitude.

    z_{l+1} solves the linear steady problem with inhomogeneity
    (g - f(z_l), 0); iteration stops when sup_t |z_{l+1} - z_l|_2 < tol.
    The linear solves reuse the kernel propagation on purpose: this
    oracle exists to check the amplitude-expansion bookkeeping, and a
    fixed point of the iteration is exact for the propagated dynamics.

    Warns when the sampled contraction certificate does not hold at the
    forcing amplitude. Raises NoConvergence (carrying the last iterate)
    after max_iter sweeps.
    """
    n = system.n
    if forcing.n != n:
        raise DimensionMismatch(f"forcing has {forcing.n} columns, system needs {n}")
    if system.damping_class.kind == "structural":
        spectral = decompose_structural(system)
    else:
        spectral = decompose_general(system)
    spectral = with_retained(spectral, select_modes(spectral, forcing.dt, eps=eps_trunc))
    weights = build_kernel_weights(spectral, forcing.dt)

    T = forcing.length
    g = forcing.samples
    fld = system.nonlinearity

    phi = np.zeros((2 * n, T))
    phi[:n] = g.T
    z = propagate_order(spectral, weights, phi, pad_length=forcing.pad_length)

    ball = 2.0 * float(np.linalg.norm(z, axis=0).max())
    if ball > 0.0:
        report = check_contraction(
            system, spectral, delta=ball, forcing_delta=forcing.max_magnitude
        )
        if not report.satisfied:
            warnings.warn(
                "contraction certificate not satisfied at this amplitude "
                f"(factor {report.contraction_factor:.3g}); Picard may diverge",
                UserWarning,
            )

    diffs = []
    for it in range(1, max_iter + 1):
        if fld.n_terms:
            phi[:n] = g.T - evaluate_field(fld, z)
        z_new = propagate_order(spectral, weights, phi, pad_length=forcing.pad_length)
        d = float(np.linalg.norm(z_new - z, axis=0).max())
        diffs.append(d)
        z = z_new
        if d < tol:
            ratio = diffs[-1] / diffs[-2] if len(diffs) >= 2 and diffs[-2] > 0 else float("nan")
            return PicardResult(
                trajectory=z, iterations=it, contraction_estimate=ratio, tol=tol
            )
        if fld.n_terms == 0:
            return PicardResult(
                trajectory=z, iterations=it, contraction_estimate=0.0, tol=tol
            )
    raise NoConvergence(
        f"no fixed point after {max_iter} sweeps (last correction {diffs[-1]:.3e})",
        last_iterate=z,
    )


def quadrature_weight_reference(dt, lam=None, omega=None, zeta=None):
    """Weight pair / matrix by adaptive quadrature of the kernel integral.

    Either lam (complex scalar mode) or omega and zeta (structural
    oscillator) must be given. Returns a complex (2,) array or a real
    (2, 2) array matching the closed-form conventions. Target absolute
    accuracy 1e-13; raises QuadratureFailure when the integrator cannot
    certify 1e-11.
    """
    if dt <= 0.0:
        raise InvalidParameters("dt must be positive")
    if (lam is None) == (omega is None):
        raise InvalidParameters("give exactly one of lam or (omega, zeta)")

    if lam is not None:
        lam = complex(lam)

        def integrand(s):
            k = np.exp(lam * (dt - s))
            return np.array(
                [
                    (k * (1.0 - s / dt)).real,
                    (k * (1.0 - s / dt)).imag,
                    (k * (s / dt)).real,
                    (k * (s / dt)).imag,
                ]
            )

        val, err = quad_vec(integrand, 0.0, dt, epsabs=1e-13, epsrel=1e-12)
        if err > 1e-11 * max(1.0, float(np.abs(val).max())):
            raise QuadratureFailure(f"certified error {err:.3e} too large")
        return np.array([val[0] + 1j * val[1], val[2] + 1j * val[3]])

    if zeta is None:
        raise InvalidParameters("structural reference needs both omega and zeta")
    if omega <= 0 or zeta <= 0:
        raise InvalidParameters("need omega > 0 and zeta > 0")
    L = np.array([[0.0, 1.0], [-omega * omega, -2.0 * zeta * omega]])

    def integrand(s):
        col = scipy.linalg.expm(L * (dt - s))[:, 1]
        return np.concatenate([col * (1.0 - s / dt), col * (s / dt)])

    val, err = quad_vec(integrand, 0.0, dt, epsabs=1e-13, epsrel=1e-12)
    if err > 1e-11 * max(1.0, float(np.abs(val).max())):
        raise QuadratureFailure(f"certified error {err:.3e} too large")
    return np.column_stack([val[:2], val[2:]])


def _compositions(total: int, parts: int):
    """All ways to write total as an ordered sum of `parts` nonnegatives."""
    if parts == 1:
        yield (total,)
        return
    for first in range(total + 1):
        for rest in _compositions(total - first, parts - 1):
            yield (first,) + rest


def faadibruno_phi(system: MechanicalSystem, tensor: CoefficientTensor, nu: int):
    """Order-nu inhomogeneity by direct enumeration, shape (2n, T).

    For every monomial gamma of the internal force and every way of
    assigning expansion orders to its factors, accumulates

        gamma! * F_gamma * prod_{j,i} (z^i_{l_j})^{k_ji} / k_ji!

    over the set {(k, l): rows of k nonzero, l strictly increasing,
    column sums k = gamma, order-weighted sum = nu}. No shared-product
    recursion, no caching: this is the reference the fast assembly is
    checked against. Same sign and shape conventions as the fast path
    (top block negated, zero lower block; order 1 is not handled here).

    Guards: state dimension at most 8, nu at most 6, degree at most 4;
    anything larger raises InstanceTooLarge.
    """
    n = system.n
    if 2 * n > 8:
        raise InstanceTooLarge(f"state dimension {2 * n} exceeds the oracle guard (8)")
    if nu > 6:
        raise InstanceTooLarge(f"order {nu} exceeds the oracle guard (6)")
    if system.nonlinearity.max_degree > 4:
        raise InstanceTooLarge(
            f"degree {system.nonlinearity.max_degree} exceeds the oracle guard (4)"
        )
    if nu < 2:
        raise InvalidParameters("direct enumeration covers orders >= 2")
    if tensor.state_dim != 2 * n:
        raise DimensionMismatch("tensor does not match the system")
    if tensor.orders_complete < nu - 1:
        raise GridMismatch(f"needs orders 1..{nu - 1} filled")

    T = tensor.length
    dim = 2 * n
    out = np.zeros((dim, T))

    for gamma, coeff in system.nonlinearity.terms:
        degree = sum(gamma)
        gamma_factorial = 1.0
        for gi in gamma:
            gamma_factorial *= math.factorial(gi)
        accum = np.zeros(T)
        for q in range(1, min(nu, degree) + 1):
            for l in itertools.combinations(range(1, nu), q):
                # distribute each gamma_i over the q chosen orders
                per_var = [list(_compositions(gamma[i], q)) for i in range(dim)]
                for choice in itertools.product(*per_var):
                    k = np.array(choice).T  # (q, dim): k[j, i]
                    if np.any(k.sum(axis=1) == 0):
                        continue
                    if int(np.dot(k.sum(axis=1), l)) != nu:
                        continue
                    term = np.ones(T)
                    weight = gamma_factorial
                    for j in range(q):
                        for i in range(dim):
                            kji = int(k[j, i])
                            if kji == 0:
                                continue
                            term = term * tensor.component(i, l[j]) ** kji
                            weight /= math.factorial(kji)
                    accum += weight * term
        out[:n] -= np.asarray(coeff)[:, None] * accum[None, :]
    return out
