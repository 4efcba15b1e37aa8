"""System definition: matrices, polynomial nonlinearities, forcing signals.

State convention: the second-order system

    M x'' + C x' + K x + f(x, x') = g(t)

is recast in first order for the state z = (x, x') as

    B z' = A z + F(z) + G(t),
    B = [[C, M], [M, 0]],  A = [[-K, 0], [0, M]],
    F(z) = (-f(z), 0),     G(t) = (g(t), 0).

The nonlinearity f is stored as it appears on the left-hand side above;
downstream assembly applies the sign flip. Trajectories are arrays of
shape (state_dim, T); forcing samples are (T, n).
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np

from .errors import (
    DampingIndefinite,
    DimensionMismatch,
    EmptySignal,
    NonlinearTermDegreeTooLow,
    NonuniformInput,
    NotPositiveDefinite,
    NotStructural,
    NotSymmetric,
)

__all__ = [
    "PolynomialField",
    "DampingClass",
    "MechanicalSystem",
    "ForcingSignal",
    "ReducedModel",
    "polynomial_field",
    "build_system",
    "evaluate_field",
    "field_jacobian",
    "load_forcing",
    "first_order_blocks",
    "reduced_model",
]

_SYM_TOL = 1e-10
_STRUCTURAL_TOL = 1e-8


def _freeze(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class PolynomialField:
    """Sparse multivariate polynomial map R^dim -> C^out_dim.

    terms maps each exponent multi-index m (length dim) to a coefficient
    vector F_m, so the field value is sum_m F_m * prod_i z_i^{m_i}.
    Multi-indices are stored in lexicographic order; iteration order is
    therefore deterministic and all downstream sums are reproducible.
    """

    dim: int
    out_dim: int
    terms: tuple  # ((exponents tuple, coeff ndarray), ...) lexicographic
    max_degree: int
    min_degree: int

    def __post_init__(self):
        for m, c in self.terms:
            c.flags.writeable = False

    @property
    def n_terms(self) -> int:
        return len(self.terms)

    def term_dict(self) -> dict:
        return {m: c for m, c in self.terms}


def polynomial_field(dim, out_dim, terms, min_degree=2):
    """Validate, merge and sort a term list into a PolynomialField.

    Parameters
    ----------
    dim, out_dim : int
        Input and output dimensions.
    terms : iterable
        Entries are either (exponents, coeff_vector) with a length-out_dim
        vector, or (exponents, target_dof, coefficient) addressing a single
        output row. Duplicate multi-indices are summed.
    min_degree : int
        Smallest admissible total degree. System nonlinearities use 2 so
        the origin stays a fixed point; reduced dynamics use 1.
    """
    merged: dict = {}
    complex_seen = False
    for entry in terms:
        if len(entry) == 2:
            m, coeff = entry
            coeff = np.asarray(coeff)
            if coeff.shape != (out_dim,):
                raise DimensionMismatch(
                    f"coefficient vector has shape {coeff.shape}, expected ({out_dim},)"
                )
        elif len(entry) == 3:
            m, dof, value = entry
            dof = int(dof)
            if not 0 <= dof < out_dim:
                raise DimensionMismatch(f"target_dof {dof} outside [0, {out_dim})")
            coeff = np.zeros(out_dim)
            coeff[dof] = value
        else:
            raise DimensionMismatch("term entries must be 2- or 3-tuples")
        m = tuple(int(e) for e in m)
        if len(m) != dim:
            raise DimensionMismatch(
                f"multi-index length {len(m)} does not match dimension {dim}"
            )
        if any(e < 0 for e in m):
            raise ValueError(f"negative exponent in multi-index {m}")
        degree = sum(m)
        if degree < min_degree:
            raise NonlinearTermDegreeTooLow(
                f"term {m} has degree {degree} < {min_degree}"
            )
        if not np.all(np.isfinite(np.asarray(coeff, dtype=complex))):
            raise ValueError(f"non-finite coefficient for multi-index {m}")
        complex_seen = complex_seen or np.iscomplexobj(coeff)
        if m in merged:
            merged[m] = merged[m] + coeff
        else:
            merged[m] = np.array(coeff, copy=True)
    dtype = complex if complex_seen else float
    ordered = tuple(
        (m, np.asarray(merged[m], dtype=dtype)) for m in sorted(merged)
    )
    max_degree = max((sum(m) for m, _ in ordered), default=0)
    return PolynomialField(
        dim=dim,
        out_dim=out_dim,
        terms=ordered,
        max_degree=max_degree,
        min_degree=min_degree,
    )


def evaluate_field(fld: PolynomialField, z):
    """Evaluate sum_m F_m z^m at a state vector or a (dim, T) batch.

    Returns an (out_dim,) vector for 1-d input, (out_dim, T) otherwise.
    Each term touches only its nonzero exponents, so cost scales with the
    sparsity of the field, not with dim.
    """
    z = np.asarray(z)
    single = z.ndim == 1
    if single:
        z = z[:, None]
    if z.shape[0] != fld.dim:
        raise DimensionMismatch(
            f"state has dimension {z.shape[0]}, field expects {fld.dim}"
        )
    T = z.shape[1]
    dtype = np.result_type(z.dtype, *(c.dtype for _, c in fld.terms), float)
    out = np.zeros((fld.out_dim, T), dtype=dtype)
    for m, coeff in fld.terms:
        mono = np.ones(T, dtype=dtype)
        for i, e in enumerate(m):
            if e == 1:
                mono = mono * z[i]
            elif e > 1:
                mono = mono * z[i] ** e
        out += coeff[:, None] * mono[None, :]
    if np.isrealobj(z) and not np.iscomplexobj(out):
        out = out.real
    return out[:, 0] if single else out


def field_jacobian(fld: PolynomialField, z):
    """Jacobian (out_dim, dim) of the field at one state vector."""
    z = np.asarray(z)
    if z.shape != (fld.dim,):
        raise DimensionMismatch(
            f"state has shape {z.shape}, field expects ({fld.dim},)"
        )
    dtype = np.result_type(z.dtype, *(c.dtype for _, c in fld.terms), float)
    jac = np.zeros((fld.out_dim, fld.dim), dtype=dtype)
    for m, coeff in fld.terms:
        for i, e in enumerate(m):
            if e == 0:
                continue
            deriv = float(e)
            for j, ej in enumerate(m):
                power = ej - 1 if j == i else ej
                if power:
                    deriv = deriv * z[j] ** power
            jac[:, i] += coeff * deriv
    return jac


@dataclass(frozen=True)
class DampingClass:
    """Damping classification: 'structural' carries C = c_M M + c_K K."""

    kind: str  # 'general' | 'structural'
    c_M: float = 0.0
    c_K: float = 0.0


@dataclass(frozen=True)
class MechanicalSystem:
    n: int
    M: np.ndarray
    C: np.ndarray
    K: np.ndarray
    nonlinearity: PolynomialField
    damping_class: DampingClass

    @property
    def state_dim(self) -> int:
        return 2 * self.n


def _check_symmetric(mat, name):
    scale = np.linalg.norm(mat)
    if scale == 0.0:
        return
    if np.linalg.norm(mat - mat.T) > _SYM_TOL * scale:
        raise NotSymmetric(f"{name} is not symmetric within tolerance {_SYM_TOL}")


def _check_spd(mat, name):
    sym = 0.5 * (mat + mat.T)
    vals = np.linalg.eigvalsh(sym)
    if vals.min() <= 0.0:
        raise NotPositiveDefinite(
            f"{name} has eigenvalue {vals.min():.3e} <= 0"
        )


def _structural_fit(M, C, K):
    # least squares over (c_M, c_K) for C ~ c_M M + c_K K
    basis = np.column_stack([M.ravel(), K.ravel()])
    coef, *_ = np.linalg.lstsq(basis, C.ravel(), rcond=None)
    resid = np.linalg.norm(C - coef[0] * M - coef[1] * K)
    scale = np.linalg.norm(C)
    rel = 0.0 if scale == 0.0 else resid / scale
    return float(coef[0]), float(coef[1]), rel


def build_system(M, C, K, terms=(), damping=None):
    """Validate matrices, classify the damping, and assemble the system.

    Parameters
    ----------
    M, C, K : (n, n) arrays
        Mass, damping, stiffness. M and K must be symmetric positive
        definite. C may carry an antisymmetric (gyroscopic) part; its
        symmetric part must be positive semi-definite.
    terms : iterable
        Nonlinear force terms over the state (x, x'), each of total
        degree >= 2, in the formats accepted by polynomial_field.
    damping : str or None
        'structural' or 'general' to override the automatic class
        detection. Forcing 'structural' on a system whose damping fails
        the fit raises NotStructural.
    """
    M = np.asarray(M, dtype=float)
    C = np.asarray(C, dtype=float)
    K = np.asarray(K, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise DimensionMismatch(f"M has shape {M.shape}, expected square")
    n = M.shape[0]
    for name, mat in (("C", C), ("K", K)):
        if mat.shape != (n, n):
            raise DimensionMismatch(f"{name} has shape {mat.shape}, expected ({n}, {n})")
    for name, mat in (("M", M), ("C", C), ("K", K)):
        if not np.all(np.isfinite(mat)):
            raise ValueError(f"{name} contains non-finite entries")

    _check_symmetric(M, "M")
    _check_symmetric(K, "K")
    _check_spd(M, "M")
    _check_spd(K, "K")
    c_sym = 0.5 * (C + C.T)
    c_scale = np.linalg.norm(C)
    if c_scale > 0.0:
        vals = np.linalg.eigvalsh(c_sym)
        if vals.min() < -1e-10 * c_scale:
            raise DampingIndefinite(
                f"symmetric part of C has eigenvalue {vals.min():.3e}"
            )

    c_M, c_K, rel = _structural_fit(M, C, K)
    fitted_structural = rel <= _STRUCTURAL_TOL
    if damping is None:
        kind = "structural" if fitted_structural else "general"
    elif damping == "structural":
        if not fitted_structural:
            raise NotStructural(
                f"structural override requested but fit residual {rel:.3e} > {_STRUCTURAL_TOL}"
            )
        kind = "structural"
    elif damping == "general":
        kind = "general"
    else:
        raise ValueError(f"unknown damping override {damping!r}")
    if kind == "structural":
        damping_class = DampingClass("structural", c_M=c_M, c_K=c_K)
    else:
        damping_class = DampingClass("general")

    fld = polynomial_field(2 * n, n, terms, min_degree=2)
    return MechanicalSystem(
        n=n,
        M=_freeze(M),
        C=_freeze(C),
        K=_freeze(K),
        nonlinearity=fld,
        damping_class=damping_class,
    )


def first_order_blocks(system: MechanicalSystem):
    """First-order pencil matrices (B, A) for B z' = A z + F + G."""
    n = system.n
    B = np.zeros((2 * n, 2 * n))
    A = np.zeros((2 * n, 2 * n))
    B[:n, :n] = system.C
    B[:n, n:] = system.M
    B[n:, :n] = system.M
    A[:n, :n] = -system.K
    A[n:, n:] = system.M
    return B, A


@dataclass(frozen=True)
class ForcingSignal:
    """Uniformly sampled force history with zero-padding metadata.

    samples includes the pad block: the first pad_length rows are exactly
    zero and t0 is the time of the first stored row (original start time
    minus pad_length * dt). max_magnitude is the supremum over rows of the
    Euclidean norm.
    """

    samples: np.ndarray  # (T, n), pad rows included
    dt: float
    t0: float
    pad_length: int
    max_magnitude: float

    @property
    def n(self) -> int:
        return self.samples.shape[1]

    @property
    def length(self) -> int:
        return self.samples.shape[0]

    def times(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(self.length)

    def scaled(self, factor: float) -> "ForcingSignal":
        scaled = self.samples * factor
        return dataclasses.replace(
            self,
            samples=_freeze(scaled),
            max_magnitude=float(
                np.linalg.norm(scaled, axis=1).max(initial=0.0)
            ),
        )


def load_forcing(samples, dt=None, t0=0.0, pad_length=0, time=None):
    """Build a ForcingSignal, prepending pad_length zero rows.

    Parameters
    ----------
    samples : (T, n) or (T,) array
        Force per DOF per time step, before padding.
    dt : float or None
        Sample spacing. May be omitted when a time column is given.
    t0 : float
        Time of the first supplied sample.
    pad_length : int
        Number of zero rows to prepend.
    time : (T,) array, optional
        Explicit time stamps; spacing must be uniform to 1e-9 relative
        and overrides dt/t0.
    """
    samples = np.asarray(samples, dtype=float)
    if samples.ndim == 1:
        samples = samples[:, None]
    if samples.ndim != 2:
        raise DimensionMismatch(f"samples must be 2-d, got shape {samples.shape}")
    T = samples.shape[0]
    if T < 2:
        raise EmptySignal(f"forcing needs at least 2 samples, got {T}")
    if time is not None:
        time = np.asarray(time, dtype=float)
        if time.shape != (T,):
            raise DimensionMismatch("time column length does not match samples")
        steps = np.diff(time)
        mean_dt = float(steps.mean())
        if mean_dt <= 0.0:
            raise NonuniformInput("time column is not increasing")
        if np.abs(steps - mean_dt).max() > 1e-9 * abs(mean_dt):
            raise NonuniformInput(
                "time column deviates from a uniform grid by more than 1e-9 relative"
            )
        dt = mean_dt
        t0 = float(time[0])
    if dt is None or not dt > 0.0:
        raise ValueError("dt must be positive (or supply a time column)")
    pad_length = int(pad_length)
    if pad_length < 0:
        raise ValueError("pad_length must be nonnegative")
    padded = np.vstack([np.zeros((pad_length, samples.shape[1])), samples])
    return ForcingSignal(
        samples=_freeze(padded),
        dt=float(dt),
        t0=float(t0) - pad_length * float(dt),
        pad_length=pad_length,
        max_magnitude=float(np.linalg.norm(padded, axis=1).max(initial=0.0)),
    )


@dataclass(frozen=True)
class ReducedModel:
    """User-supplied reduced dynamics r' = R(r) plus lift W: R^d -> R^{2n}.

    tangent_rows are the retained rows of the modal left inverse acting on
    B-normalized forcing; tangent_cols the matching eigenvector columns.
    Their product is the d x d identity.
    """

    d: int
    R: PolynomialField  # dim d -> d, includes the linear part (min_degree 1)
    W: PolynomialField  # dim d -> full state dimension
    tangent_rows: np.ndarray  # (d, 2n)
    tangent_cols: np.ndarray  # (2n, d)


def reduced_model(R, W, tangent_rows, tangent_cols):
    """Validate and assemble a ReducedModel."""
    tangent_rows = np.asarray(tangent_rows)
    tangent_cols = np.asarray(tangent_cols)
    d = R.dim
    if R.out_dim != d:
        raise DimensionMismatch("R must map R^d to R^d")
    if R.min_degree < 1 or W.min_degree < 1:
        raise DimensionMismatch("R and W must vanish at the origin")
    if W.dim != d:
        raise DimensionMismatch("W must be a map from R^d")
    full = W.out_dim
    if tangent_rows.shape != (d, full) or tangent_cols.shape != (full, d):
        raise DimensionMismatch(
            f"tangent matrices have shapes {tangent_rows.shape}, "
            f"{tangent_cols.shape}; expected ({d}, {full}) and ({full}, {d})"
        )
    prod = tangent_rows @ tangent_cols
    if np.linalg.norm(prod - np.eye(d)) > 1e-8 * max(1.0, np.linalg.norm(prod)):
        raise DimensionMismatch(
            "tangent_rows @ tangent_cols deviates from the identity beyond 1e-8"
        )
    return ReducedModel(
        d=d,
        R=R,
        W=W,
        tangent_rows=_freeze(tangent_rows),
        tangent_cols=_freeze(tangent_cols),
    )
