"""Exception hierarchy shared by all modules.

Every error raised by the library derives from :class:`SteadyStateError`,
so callers (and the CLI) can map failures to exit categories without
enumerating modules.
"""

from __future__ import annotations


class SteadyStateError(Exception):
    """Base class for all library errors."""


# ---------------------------------------------------------------- model


class NotSymmetric(SteadyStateError):
    """A matrix required to be symmetric is not (beyond tolerance)."""


class NotPositiveDefinite(SteadyStateError):
    """Mass or stiffness matrix has a non-positive eigenvalue."""


class DampingIndefinite(SteadyStateError):
    """Symmetric part of the damping matrix has a negative eigenvalue."""


class NonlinearTermDegreeTooLow(SteadyStateError):
    """A nonlinear term with total degree below 2 was supplied."""


class DimensionMismatch(SteadyStateError):
    """Array dimensions are inconsistent with the object they target."""


class NonuniformInput(SteadyStateError):
    """A supplied time column is not uniformly spaced."""


class EmptySignal(SteadyStateError):
    """Forcing input has fewer than two samples."""


# ------------------------------------------------------------- spectral


class UnstableLinearPart(SteadyStateError):
    """Some eigenvalue of the linear part has real part >= -1e-12."""


class DefectiveSpectrum(SteadyStateError):
    """Eigenvector matrix condition number exceeds the semisimplicity
    threshold (1e12)."""


class NotStructural(SteadyStateError):
    """Structural-damping decomposition requested for a system whose
    damping matrix is not a mass/stiffness combination."""


# --------------------------------------------------------------- kernel


class ZeroEigenvalue(SteadyStateError):
    """Piecewise-linear weights requested for Re(lambda) == 0."""


class InvalidParameters(SteadyStateError):
    """Structural weights requested with omega <= 0 or zeta <= 0."""


class GridMismatch(SteadyStateError):
    """Time grid, state dimension, or retained-mode set of the inputs
    disagree."""


class SingularEffectiveStiffness(SteadyStateError):
    """Newmark effective stiffness matrix is singular."""


class NearResonance(SteadyStateError):
    """A forcing harmonic sits within tolerance of an eigenvalue.

    Attributes
    ----------
    k : tuple
        Offending harmonic multi-index.
    distance : float
        |i<k,Omega> - lambda| for that harmonic.
    """

    def __init__(self, message, k=None, distance=None):
        super().__init__(message)
        self.k = k
        self.distance = distance


class RealnessCheckFailed(SteadyStateError):
    """Imaginary residue after conjugate-pair summation exceeded
    1e-10 times the result scale."""


# ---------------------------------------------------------- composition


class OrderUnavailable(SteadyStateError):
    """A coefficient slice beyond orders_complete was requested."""


# ------------------------------------------------------------------ gss


class IllConditioned(SteadyStateError):
    """Least-squares system nearly rank deficient.

    pade_resum does not raise this; it switches to a truncated-SVD solve
    and flags the coordinate in the conditioning report. The class exists
    for callers that want to treat the flag as fatal.
    """


class DenominatorNearZero(SteadyStateError):
    """Pade denominator magnitude below 1e-8 at the requested amplitude.

    Attributes
    ----------
    coordinate : int
        State coordinate whose denominator degenerated.
    delta : float
        Amplitude at which evaluation was attempted.
    """

    def __init__(self, message, coordinate=None, delta=None):
        super().__init__(message)
        self.coordinate = coordinate
        self.delta = delta


class DivergenceWarning(UserWarning):
    """Partial sums of the Taylor series grew by more than 10x between
    order N/2 and order N at the reference amplitude. Not fatal; consider
    Pade resummation."""


# --------------------------------------------------------------- oracle


class NewtonDivergence(SteadyStateError):
    """Newton iteration inside the Newmark oracle failed to converge.

    Attributes
    ----------
    step : int
        Time-step index at which the iteration diverged.
    residual : float
        Final residual norm.
    """

    def __init__(self, message, step=None, residual=None):
        super().__init__(message)
        self.step = step
        self.residual = residual


class NoConvergence(SteadyStateError):
    """Picard iteration failed to meet tolerance within max_iter.

    Attributes
    ----------
    last_iterate : numpy.ndarray or None
        Trajectory from the final completed sweep.
    """

    def __init__(self, message, last_iterate=None):
        super().__init__(message)
        self.last_iterate = last_iterate


class QuadratureFailure(SteadyStateError):
    """Adaptive quadrature did not reach the requested accuracy."""


class InstanceTooLarge(SteadyStateError):
    """Faa di Bruno oracle limits exceeded (n <= 4, nu <= 6, degree <= 4)."""


# ------------------------------------------------------------------ cli


class ConfigError(SteadyStateError):
    """Malformed configuration or input file."""


class InvalidCutoff(SteadyStateError):
    """Low-pass cutoff at or above the Nyquist frequency."""
