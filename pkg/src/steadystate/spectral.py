"""Diagonalization of the linear part and convergence diagnostics.

General damping solves the generalized eigenproblem (A - lambda B) v = 0
by QZ, without forming B^{-1}. With a symmetric damping matrix both A and
B are symmetric, eigenvectors of distinct eigenvalues are orthogonal in
the bilinear form u^T B v, and the columns are normalized to V^T B V = I;
the modal input map (B V)^{-1} then equals V^T, and B^{-1} = V V^T.

A non-symmetric damping matrix (gyroscopic coupling) makes B non-symmetric
and the one-sided identity unattainable; the biorthogonal generalization
uses bilinear left eigenvectors W (rows of W^T solve w^T A = lambda w^T B)
normalized to W^T B V = I, so modal_input = W^T = (B V)^{-1} and
B^{-1} = V W^T. The symmetric case is recovered with W = V.

Note the sesquilinear variant v* B v is identically zero for underdamped
modes of the symmetric pencil (lambda != conj(lambda) forces bilinear
orthogonality against the conjugate partner), so only the transpose
normalization is available.

Structural (Rayleigh) damping reduces to the real modal problem
(K - omega^2 M) u = 0 with U^T M U = I and per-mode damping ratios
zeta_j = (c_M + c_K omega_j^2) / (2 omega_j).
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
import scipy.linalg
from scipy.stats import norm, qmc

from .errors import (
    DefectiveSpectrum,
    NotStructural,
    UnstableLinearPart,
)
from .model import MechanicalSystem, field_jacobian, first_order_blocks

__all__ = [
    "SpectralData",
    "ContractionReport",
    "decompose_general",
    "decompose_structural",
    "select_modes",
    "check_contraction",
]

_STABILITY_TOL = 1e-12
_COND_LIMIT = 1e12


@dataclass(frozen=True)
class SpectralData:
    """Eigenstructure of the linear part.

    kind 'general': eigenvalues (descending real part, conjugate pairs
    adjacent with the positive-imaginary member first), eigenvector matrix
    V, and modal_input = (B V)^{-1} (equal to V^T when the damping matrix
    is symmetric, the bilinear left-eigenvector rows W^T otherwise). kind
    'structural':
    natural frequencies (ascending), damping ratios, mass-normalized mode
    matrix U, and the Rayleigh coefficients. retained indexes eigenvalues
    (general) or oscillators (structural). gamma = max_j 1 / |Re lambda_j|.
    """

    kind: str
    state_dim: int
    retained: tuple
    gamma: float
    eigenvalues: np.ndarray | None = None  # (2n,) complex
    V: np.ndarray | None = None  # (2n, 2n) complex
    modal_input: np.ndarray | None = None  # (2n, 2n) complex
    omega: np.ndarray | None = None  # (n,) ascending
    zeta: np.ndarray | None = None  # (n,)
    U: np.ndarray | None = None  # (n, n) real
    c_M: float | None = None
    c_K: float | None = None

    @property
    def n_modes(self) -> int:
        return self.state_dim if self.kind == "general" else self.state_dim // 2

    def first_order_eigenvalues(self) -> np.ndarray:
        """All 2n first-order eigenvalues, either kind."""
        if self.kind == "general":
            return np.array(self.eigenvalues)
        lams = []
        for w, z in zip(self.omega, self.zeta):
            lams.extend(_oscillator_roots(w, z))
        return np.array(lams)

    def slow_real_parts(self) -> np.ndarray:
        """Per retained-unit slowest real part (the one closest to zero)."""
        if self.kind == "general":
            return self.eigenvalues.real.copy()
        return np.array(
            [max(r.real for r in _oscillator_roots(w, z)) for w, z in zip(self.omega, self.zeta)]
        )

    def structural_permutation(self) -> np.ndarray:
        """0/1 matrix S mapping stacked (y, y') to interleaved pairs."""
        if self.kind != "structural":
            raise NotStructural("permutation defined for structural decompositions")
        n = self.state_dim // 2
        S = np.zeros((2 * n, 2 * n))
        for j in range(n):
            S[2 * j, j] = 1.0
            S[2 * j + 1, n + j] = 1.0
        return S

    def block_lambda(self) -> np.ndarray:
        """Real block-diagonal linear part in interleaved modal pairs."""
        if self.kind != "structural":
            raise NotStructural("block form defined for structural decompositions")
        n = self.state_dim // 2
        L = np.zeros((2 * n, 2 * n))
        for j, (w, z) in enumerate(zip(self.omega, self.zeta)):
            L[2 * j, 2 * j + 1] = 1.0
            L[2 * j + 1, 2 * j] = -w * w
            L[2 * j + 1, 2 * j + 1] = -2.0 * z * w
        return L


def _oscillator_roots(omega: float, zeta: float):
    if zeta < 1.0:
        wd = omega * np.sqrt(1.0 - zeta * zeta)
        return (
            complex(-zeta * omega, wd),
            complex(-zeta * omega, -wd),
        )
    s = omega * np.sqrt(zeta * zeta - 1.0)
    return (complex(-zeta * omega + s), complex(-zeta * omega - s))


def _sign_fix(v: np.ndarray) -> np.ndarray:
    # only a +-1 freedom survives the bilinear normalization; pick the sign
    # making the largest-magnitude entry's real part positive
    idx = int(np.argmax(np.abs(v)))
    pivot = v[idx]
    if pivot.real < 0.0 or (pivot.real == 0.0 and pivot.imag < 0.0):
        return -v
    return v


def decompose_general(system: MechanicalSystem) -> SpectralData:
    """All 2n eigenpairs of (A - lambda B) v = 0 with (BV)^{-1} as rows.

    Eigenvalues sorted by descending real part; complex conjugate pairs
    adjacent, positive-imaginary member first; the conjugate member's
    eigenvector is the exact conjugate of its partner. Columns are scaled
    so modal_input @ B @ V = I: for symmetric damping that is V^T B V = I
    with modal_input = V^T; a non-symmetric damping matrix uses bilinear
    left eigenvectors W with W^T B V = I and modal_input = W^T. Raises
    UnstableLinearPart if any Re(lambda) >= -1e-12 and DefectiveSpectrum
    if the eigenvector matrix is ill conditioned (semisimplicity check).
    """
    B, A = first_order_blocks(system)
    c_scale = max(1.0, float(np.abs(system.C).max()))
    self_dual = bool(np.abs(system.C - system.C.T).max() <= 1e-13 * c_scale)
    vals, vl, vecs = scipy.linalg.eig(A, B, left=True, right=True)
    if np.any(vals.real >= -_STABILITY_TOL):
        worst = vals.real.max()
        raise UnstableLinearPart(
            f"eigenvalue with real part {worst:.3e} >= -1e-12"
        )

    dim = system.state_dim
    scale = np.abs(vals).max()

    # explicit conjugate pairing: sort-key ties are unreliable because the
    # two members of a solver-packed pair can differ in the last ulp
    pos = [i for i in range(dim) if vals[i].imag > 0.0]
    neg_pool = {i for i in range(dim) if vals[i].imag < 0.0}
    real_idx = [i for i in range(dim) if vals[i].imag == 0.0]
    if len(pos) != len(neg_pool):
        raise DefectiveSpectrum(
            "conjugate pairing failed: unbalanced complex half-planes"
        )
    units: list[tuple[int, ...]] = [(i,) for i in real_idx]
    for i in pos:
        j = min(neg_pool, key=lambda k: abs(vals[k] - np.conj(vals[i])))
        if abs(vals[j] - np.conj(vals[i])) > 1e-8 * scale:
            raise DefectiveSpectrum(
                f"no conjugate partner found for lambda={vals[i]:.6g}"
            )
        neg_pool.remove(j)
        units.append((i, j))
    units.sort(key=lambda u: (-vals[u[0]].real, abs(vals[u[0]].imag)))
    order = [k for u in units for k in u]

    vals = vals[order]
    vecs = vecs[:, order]
    # bilinear left eigenvectors satisfy w^T A = lambda w^T B; the solver
    # returns the sesquilinear convention vl^H A = lambda vl^H B
    lefts = np.conj(vl[:, order])
    V = np.zeros((dim, dim), dtype=complex)
    W = np.zeros((dim, dim), dtype=complex)
    lam_out = np.array(vals)

    # representatives: real eigenvalues and the positive-imaginary pair member
    reps = [i for i in range(dim) if vals[i].imag >= 0.0]
    # bilinear Gram-Schmidt inside clusters of (numerically) equal eigenvalues
    done: list[int] = []
    for i in reps:
        v = vecs[:, i].astype(complex)
        w = v if self_dual else lefts[:, i].astype(complex)
        for j in done:
            if abs(vals[j] - vals[i]) <= 1e-8 * scale:
                v = v - (W[:, j] @ (B @ v)) * V[:, j]
                if self_dual:
                    w = v
                else:
                    w = w - (w @ (B @ V[:, j])) * W[:, j]
        s = w @ (B @ v)
        if abs(s) < 1e-14 * (
            np.linalg.norm(w) * np.linalg.norm(v) * np.linalg.norm(B)
        ):
            raise DefectiveSpectrum(
                f"eigenvector for lambda={vals[i]:.6g} cannot be B-normalized"
            )
        v = v / np.sqrt(s)
        flipped = _sign_fix(v)
        if self_dual:
            w = flipped
        else:
            # flipping both columns preserves w^T B v = 1
            w = w / np.sqrt(s)
            if flipped is not v:
                w = -w
        V[:, i] = flipped
        W[:, i] = w
        done.append(i)
    for i in range(dim):
        if vals[i].imag < 0.0:
            # exact conjugate of the adjacent partner keeps pair symmetry
            V[:, i] = np.conj(V[:, i - 1])
            W[:, i] = np.conj(W[:, i - 1])
            lam_out[i] = np.conj(lam_out[i - 1])

    resid = np.linalg.norm(W.T @ B @ V - np.eye(dim))
    if resid > 1e-8:
        raise DefectiveSpectrum(
            f"modal normalization residual {resid:.3e} > 1e-8"
        )
    if np.linalg.cond(V) > _COND_LIMIT:
        raise DefectiveSpectrum(
            f"eigenvector condition number exceeds {_COND_LIMIT:.0e}"
        )

    return SpectralData(
        kind="general",
        state_dim=dim,
        retained=tuple(range(dim)),
        gamma=float(np.max(1.0 / np.abs(lam_out.real))),
        eigenvalues=lam_out,
        V=V,
        modal_input=W.T.copy(),
    )


def decompose_structural(system: MechanicalSystem) -> SpectralData:
    """Real modal data (omega, zeta, U) for Rayleigh-damped systems."""
    if system.damping_class.kind != "structural":
        raise NotStructural("system damping is not a mass/stiffness combination")
    w2, U = scipy.linalg.eigh(system.K, system.M)
    if w2.min() <= 0.0:
        raise UnstableLinearPart(f"nonpositive squared frequency {w2.min():.3e}")
    omega = np.sqrt(w2)
    c_M = system.damping_class.c_M
    c_K = system.damping_class.c_K
    zeta = (c_M + c_K * omega**2) / (2.0 * omega)
    if zeta.min() <= _STABILITY_TOL:
        raise UnstableLinearPart(
            f"modal damping ratio {zeta.min():.3e} <= 0; system is not asymptotically stable"
        )
    for j in range(U.shape[1]):
        col = U[:, j]
        idx = int(np.argmax(np.abs(col)))
        if col[idx] < 0.0:
            U[:, j] = -col
    slow = [max(r.real for r in _oscillator_roots(w, z)) for w, z in zip(omega, zeta)]
    return SpectralData(
        kind="structural",
        state_dim=system.state_dim,
        retained=tuple(range(system.n)),
        gamma=float(max(1.0 / abs(r) for r in slow)),
        omega=omega,
        zeta=zeta,
        U=U,
        c_M=c_M,
        c_K=c_K,
    )


def select_modes(spectral: SpectralData, dt: float, eps: float = 1e-3) -> tuple:
    """Retained index set { j : exp(dt * Re lambda_j) > eps }.

    The slowest mode is always kept, so the selection is never empty. For
    structural data the criterion uses each oscillator's slowest root, so
    conjugate pairs are retained or dropped jointly in both kinds.
    """
    if not 0.0 < eps < 1.0:
        raise ValueError(f"eps must lie in (0, 1), got {eps}")
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    reals = spectral.slow_real_parts()
    keep = [j for j, r in enumerate(reals) if np.exp(dt * r) > eps]
    slowest = int(np.argmax(reals))
    if slowest not in keep:
        keep.append(slowest)
    return tuple(sorted(keep))


def with_retained(spectral: SpectralData, retained: tuple) -> SpectralData:
    """Copy of the spectral data with the retained set replaced."""
    return replace(spectral, retained=tuple(retained))


@dataclass(frozen=True)
class ContractionReport:
    """Evaluation of the two Picard-contraction inequalities.

    contraction_factor a = 2 ||V|| ||V*|| Gamma (L^F + L^G) must stay
    below 1, and the forcing amplitude must not exceed
    admissible_delta_bound = delta (1/(||V|| ||V*|| Gamma) - 2(L^F+L^G))
    - sup_ball ||F||, which reduces to delta / (||V|| ||V*|| Gamma) for a
    linear system. The stricter variant 4 ||V|| ||V*|| Gamma (L^F + L^G)
    <= 1 is reported alongside, labeled strict_*.
    """

    delta: float
    lipschitz_F: float
    lipschitz_G: float
    gamma: float
    vnorm_product: float
    admissible_delta_bound: float
    contraction_factor: float
    satisfied: bool
    lipschitz_F_analytic: float
    sup_F: float
    strict_factor: float
    strict_satisfied: bool
    sample_count: int


def _ball_samples(dim: int, delta: float, count: int) -> np.ndarray:
    # Sobol directions, half the points pushed to the boundary sphere,
    # plus the axis extremes so coordinate-aligned suprema are hit exactly
    eng = qmc.Sobol(d=dim + 1, scramble=True, seed=20240811)
    raw = eng.random(max(count, 2))
    gauss = norm.ppf(np.clip(raw[:, :dim], 1e-12, 1 - 1e-12))
    norms = np.linalg.norm(gauss, axis=1, keepdims=True)
    norms[norms == 0.0] = 1.0
    directions = gauss / norms
    radius = delta * raw[:, dim:] ** (1.0 / dim)
    pts = directions * radius
    pts[::2] = directions[::2] * delta
    axes = np.vstack([np.eye(dim), -np.eye(dim)]) * delta
    return np.vstack([pts, axes])


def check_contraction(
    system: MechanicalSystem,
    spectral: SpectralData,
    delta: float,
    forcing_delta: float,
    sample_count: int = 256,
) -> ContractionReport:
    """Sampled Lipschitz estimate and contraction verdict on a delta-ball.

    L^F is the maximum nonlinearity Jacobian spectral norm over
    sample_count quasi-random points of the ball (boundary shell and axis
    points included); the analytic degree bound
    sum_m |m| ||F_m|| delta^{|m|-1} is reported alongside. L^G is zero for
    the pure-time forcing exercised here.
    """
    if delta <= 0.0:
        raise ValueError("delta must be positive")
    if spectral.kind == "general":
        V = spectral.V
    else:
        V = decompose_general(system).V
    vnorm = float(np.linalg.norm(V, 2))
    vnorm_product = vnorm * vnorm  # ||V*||_2 == ||V||_2
    gamma = spectral.gamma

    fld = system.nonlinearity
    lip_sampled = 0.0
    if fld.n_terms:
        for z in _ball_samples(system.state_dim, delta, sample_count):
            jac = field_jacobian(fld, z)
            lip_sampled = max(lip_sampled, float(np.linalg.norm(jac, 2)))
    lip_analytic = 0.0
    sup_f = 0.0
    for m, coeff in fld.terms:
        deg = sum(m)
        cn = float(np.linalg.norm(coeff))
        lip_analytic += deg * cn * delta ** (deg - 1)
        sup_f += cn * delta**deg

    lip_G = 0.0
    factor = 2.0 * vnorm_product * gamma * (lip_sampled + lip_G)
    bound = delta * (1.0 / (vnorm_product * gamma) - 2.0 * (lip_sampled + lip_G)) - sup_f
    bound = max(bound, 0.0)
    strict = 4.0 * vnorm_product * gamma * (lip_sampled + lip_G)
    return ContractionReport(
        delta=float(delta),
        lipschitz_F=lip_sampled,
        lipschitz_G=lip_G,
        gamma=float(gamma),
        vnorm_product=vnorm_product,
        admissible_delta_bound=float(bound),
        contraction_factor=float(factor),
        satisfied=bool(factor < 1.0 and forcing_delta <= bound),
        lipschitz_F_analytic=float(lip_analytic),
        sup_F=float(sup_f),
        strict_factor=float(strict),
        strict_satisfied=bool(strict <= 1.0),
        sample_count=int(sample_count),
    )
