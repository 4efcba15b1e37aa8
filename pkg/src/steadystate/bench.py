"""Benchmark systems, forcing generators, and response metrics.

The builders return ready MechanicalSystem objects used across the test
suite and the example scripts; the forcing generators produce seeded,
reproducible ForcingSignal grids. Amplitude semantics of `delta` per
kind: chirp, two_tone and rossler scale each target dof's waveform to
peak amplitude delta; filtered_gaussian rescales so the sup over time
of the row 2-norm equals delta exactly.
"""

from __future__ import annotations

import concurrent.futures
from dataclasses import dataclass

import numpy as np

from .errors import InvalidCutoff, InvalidParameters, NearResonance
from .gss import compute_taylor_gss, evaluate_at_amplitude
from .model import ForcingSignal, MechanicalSystem, build_system, load_forcing

__all__ = [
    "build_oscillator_chain",
    "build_duffing",
    "build_gyroscopic_2dof",
    "generate_forcing",
    "nmte",
    "FrcResult",
    "frc_sweep",
]


def build_duffing(
    omega: float = 1.0, zeta: float = 0.05, kappa3: float = 1.0, m: float = 1.0
) -> MechanicalSystem:
    """Single dof with cubic stiffening: x'' + 2 zeta w x' + w^2 x + k3 x^3."""
    M = np.array([[m]])
    K = np.array([[m * omega * omega]])
    C = np.array([[2.0 * zeta * omega * m]])
    terms = [((3, 0), 0, m * kappa3)] if kappa3 != 0.0 else []
    return build_system(M, C, K, terms=terms)


def build_oscillator_chain(
    n: int,
    m: float = 1.0,
    k_lin: float = 1.0,
    c: float = 0.05,
    kappa3: float = 0.5,
) -> MechanicalSystem:
    """Grounded chain of n masses with cubic coupling springs.

    Linear part: K = k_lin * tridiag(-1, 2, -1) (both ends grounded),
    C = (c / k_lin) K, so the damping is stiffness-proportional with
    zeta_j = (c / k_lin) omega_j / 2. Each linear spring carries a cubic
    correction kappa3 * (stretch)^3: relative stretches between
    neighbors and the two ground attachments.
    """
    if n < 1:
        raise InvalidParameters(f"chain needs n >= 1, got {n}")
    M = m * np.eye(n)
    K = k_lin * (2.0 * np.eye(n) - np.eye(n, k=1) - np.eye(n, k=-1))
    C = (c / k_lin) * K

    dim = 2 * n
    terms: dict = {}

    def add(exponents, dof, coeff):
        key = (tuple(exponents), dof)
        terms[key] = terms.get(key, 0.0) + coeff

    def cubic_pair(i, j):
        """kappa3 (x_i - x_j)^3 pulling dof i (+) and dof j (-)."""
        for a, sign in (((3, 0), 1.0), ((2, 1), -3.0), ((1, 2), 3.0), ((0, 3), -1.0)):
            e = [0] * dim
            e[i] = a[0]
            e[j] = a[1]
            add(e, i, kappa3 * sign)
            add(e, j, -kappa3 * sign)

    def cubic_ground(i):
        e = [0] * dim
        e[i] = 3
        add(e, i, kappa3)

    if kappa3 != 0.0:
        cubic_ground(0)
        for i in range(n - 1):
            cubic_pair(i, i + 1)
        cubic_ground(n - 1)

    packed = [(list(e), dof, coeff) for (e, dof), coeff in terms.items() if coeff != 0.0]
    return build_system(M, C, K, terms=packed)


def build_gyroscopic_2dof(
    k1: float = 1.0,
    k2: float = 2.25,
    c: float = 0.1,
    g: float = 0.4,
    kappa3: float = 0.0,
) -> MechanicalSystem:
    """Two dofs with circulatory coupling: C = [[c, g], [-g, c]].

    The skew part makes the damping non-Rayleigh, which exercises the
    general (non-structural) decomposition. Optional cubic on dof 0.
    """
    M = np.eye(2)
    K = np.array([[k1, 0.0], [0.0, k2]])
    C = np.array([[c, g], [-g, c]])
    terms = [((3, 0, 0, 0), 0, kappa3)] if kappa3 != 0.0 else []
    return build_system(M, C, K, terms=terms)


def _rossler_series(duration, dt, seed, components, skip_time=100.0):
    """Sampled Rossler components after discarding the transient window."""
    a, b, c = 0.2, 0.2, 5.7
    rng = np.random.default_rng(seed)
    state = np.array([1.0, 1.0, 1.0]) + 0.01 * rng.standard_normal(3)

    def deriv(s):
        return np.array([-s[1] - s[2], s[0] + a * s[1], b + s[2] * (s[0] - c)])

    n_skip = int(round(skip_time / dt))
    n_keep = int(round(duration / dt)) + 1
    out = np.empty((n_keep, len(components)))
    for k in range(n_skip + n_keep):
        if k >= n_skip:
            out[k - n_skip] = state[components]
        k1 = deriv(state)
        k2 = deriv(state + 0.5 * dt * k1)
        k3 = deriv(state + 0.5 * dt * k2)
        k4 = deriv(state + dt * k3)
        state = state + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
    return out


def generate_forcing(
    kind: str,
    n: int,
    duration: float,
    dt: float,
    delta: float,
    seed: int | None = None,
    pad: int = 0,
    dofs=None,
    **params,
) -> ForcingSignal:
    """Reproducible forcing grids on a uniform grid of step dt.

    kind: 'chirp', 'filtered_gaussian', 'rossler', or 'two_tone'. dofs
    selects the target indices (default: all); other columns are zero.
    duration is the unpadded signal length in time units; pad leading
    zero rows are prepended by the signal container.

    chirp:             sin(2 pi (rate t^2 / 2 + f0 t)); params f0, rate
    filtered_gaussian: white noise low-passed at f_cut (Hz), exact sup
                       row-norm delta; raises InvalidCutoff unless
                       0 < f_cut < Nyquist
    rossler:           chaotic components (cycling x, y, z per dof),
                       100 time units of transient discarded, each
                       column peak-normalized to delta
    two_tone:          delta (sin w1 t + sin w2 t) / 2; params w1, w2
    """
    if n < 1 or duration <= 0 or dt <= 0:
        raise InvalidParameters("need n >= 1, duration > 0, dt > 0")
    targets = list(range(n)) if dofs is None else [int(d) for d in dofs]
    if any(not 0 <= d < n for d in targets):
        raise InvalidParameters(f"dofs {targets} outside 0..{n - 1}")
    T = int(round(duration / dt)) + 1
    t = dt * np.arange(T)
    samples = np.zeros((T, n))

    if kind == "chirp":
        f0 = params.pop("f0", 0.1)
        rate = params.pop("rate", 0.05)
        wave = delta * np.sin(2.0 * np.pi * (0.5 * rate * t * t + f0 * t))
        for d in targets:
            samples[:, d] = wave
    elif kind == "two_tone":
        w1 = params.pop("w1", 1.0)
        w2 = params.pop("w2", np.sqrt(2.0))
        wave = 0.5 * delta * (np.sin(w1 * t) + np.sin(w2 * t))
        for d in targets:
            samples[:, d] = wave
    elif kind == "filtered_gaussian":
        f_cut = params.pop("f_cut", None)
        if f_cut is None:
            raise InvalidParameters("filtered_gaussian needs f_cut")
        nyquist = 0.5 / dt
        if not 0.0 < f_cut < nyquist:
            raise InvalidCutoff(f"f_cut {f_cut} outside (0, {nyquist})")
        rng = np.random.default_rng(seed)
        noise = rng.standard_normal((T, len(targets)))
        freqs = np.fft.rfftfreq(T, d=dt)
        spec = np.fft.rfft(noise, axis=0)
        spec[freqs > f_cut] = 0.0
        smooth = np.fft.irfft(spec, n=T, axis=0)
        block = np.zeros((T, n))
        block[:, targets] = smooth
        sup = np.linalg.norm(block, axis=1).max()
        if sup == 0.0:
            raise InvalidCutoff("filter removed the whole signal")
        samples = block * (delta / sup)
    elif kind == "rossler":
        comps = [d % 3 for d in range(len(targets))]
        raw = _rossler_series(duration, dt, seed, comps)
        for j, d in enumerate(targets):
            col = raw[:, j]
            peak = np.abs(col).max()
            samples[:, d] = delta * col / peak if peak > 0 else 0.0
    else:
        raise InvalidParameters(f"unknown forcing kind {kind!r}")
    if params:
        raise InvalidParameters(f"unused parameters for {kind}: {sorted(params)}")
    return load_forcing(samples, dt=dt, pad_length=pad)


def nmte(pred: np.ndarray, ref: np.ndarray, skip: int = 0) -> float:
    """Normalized mean trajectory error over samples from index `skip` on.

    mean_t |pred - ref|_2 / max_t |ref|_2, both trajectories (dim, T).
    """
    pred = np.asarray(pred)
    ref = np.asarray(ref)
    if pred.shape != ref.shape:
        raise InvalidParameters(f"shape mismatch {pred.shape} vs {ref.shape}")
    diff = np.linalg.norm(pred[:, skip:] - ref[:, skip:], axis=0)
    scale = np.linalg.norm(ref[:, skip:], axis=0).max()
    if scale == 0.0:
        return 0.0 if diff.max() == 0.0 else float("inf")
    return float(diff.mean() / scale)


@dataclass(frozen=True)
class FrcResult:
    """Forced-response sweep: per grid frequency, the steady amplitude of
    every state coordinate (max |coordinate| over the final forcing
    period), with flags[i] carrying the resonance message for skipped
    points (amplitudes NaN there)."""

    omega: np.ndarray
    amplitude: np.ndarray  # (len(omega), state_dim)
    flags: tuple
    delta: float
    order: int


def _frc_point(system, omega, delta, order, harmonic_budget, periods, samples_per_period, resonance_tol, dofs):
    period = 2.0 * np.pi / omega
    dt = period / samples_per_period
    T = periods * samples_per_period + 1
    t = dt * np.arange(T)
    samples = np.zeros((T, system.n))
    targets = list(range(system.n)) if dofs is None else list(dofs)
    for d in targets:
        samples[:, d] = delta * np.sin(omega * t)
    forcing = load_forcing(samples, dt=dt)
    expansion = compute_taylor_gss(
        system,
        forcing,
        order,
        backend="qp",
        base_frequencies=(omega,),
        harmonic_budget=harmonic_budget,
        resonance_tol=resonance_tol,
        check_divergence=False,
    )
    traj = evaluate_at_amplitude(expansion, delta)
    last = traj[:, -samples_per_period:]
    return np.abs(last).max(axis=1)


def frc_sweep(
    system: MechanicalSystem,
    omega_grid,
    delta: float,
    order: int = 5,
    harmonic_budget: int = 5,
    threads: int = 1,
    periods: int = 8,
    samples_per_period: int = 256,
    resonance_tol: float | None = None,
    dofs=None,
) -> FrcResult:
    """Steady amplitude versus forcing frequency, delta sin(omega t) input.

    Each grid point gets its own dense grid (periods x samples_per_period)
    and a closed-form quasiperiodic solve at the given order; points that
    trip the resonance guard are flagged and reported as NaN rather than
    aborting the sweep. Results are assembled by grid index, so the
    output is identical for any thread count.
    """
    omega_grid = np.atleast_1d(np.asarray(omega_grid, dtype=float))
    if np.any(omega_grid <= 0):
        raise InvalidParameters("forcing frequencies must be positive")
    if threads < 1:
        raise InvalidParameters("threads must be >= 1")

    amplitudes = np.full((len(omega_grid), system.state_dim), np.nan)
    flags = [None] * len(omega_grid)

    def work(i):
        return _frc_point(
            system,
            float(omega_grid[i]),
            delta,
            order,
            harmonic_budget,
            periods,
            samples_per_period,
            resonance_tol,
            dofs,
        )

    if threads == 1:
        for i in range(len(omega_grid)):
            try:
                amplitudes[i] = work(i)
            except NearResonance as exc:
                flags[i] = str(exc)
    else:
        with concurrent.futures.ThreadPoolExecutor(max_workers=threads) as pool:
            futures = {pool.submit(work, i): i for i in range(len(omega_grid))}
            for fut in concurrent.futures.as_completed(futures):
                i = futures[fut]
                try:
                    amplitudes[i] = fut.result()
                except NearResonance as exc:
                    flags[i] = str(exc)

    return FrcResult(
        omega=omega_grid,
        amplitude=amplitudes,
        flags=tuple(flags),
        delta=delta,
        order=order,
    )
