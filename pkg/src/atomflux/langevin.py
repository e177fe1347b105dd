"""Time-domain stochastic oracle: the oscillator driven by synthesized field noise.

The quantum field enters through its symmetric (Hadamard) correlator only, so
it is simulated as a classical stationary Gaussian process whose spectral
density is the free-field Hadamard kernel at the atom, truncated at the same
ultraviolet cutoff used by the frequency-domain predictions (cutoff
consistency is mandatory: the velocity variance is log-divergent without it).

The equation of motion ``Qdd + 2 gamma Qd + omega^2 Q = xi(t)`` is advanced
with the exact homogeneous propagator over each step and piecewise-linear
forcing, which is unconditionally stable for any gamma, omega > 0.

Determinism contract: every trajectory is a pure function of
(master_seed, trajectory_index) through a splittable counter-based generator,
and all reductions run in a fixed order, so ensembles are bit-identical for
any worker count.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.fft import next_fast_len as _next_fast_len
from scipy.signal import lfilter as _lfilter

from .greens import (
    AtomParams,
    BathSpec,
    FrequencyGrid,
    atom_hadamard_ft,
    damped_cos,
    damped_sinc,
    field_hadamard_ft,
)
from .spectral import integrate_spectrum

_CHUNK_SIZE = 32  # trajectories per worker chunk; fixed so reductions never move

_TRAJECTORY_MAGIC = "atomflux-trajectory 1"


class NyquistError(ValueError):
    """Raised when the time step cannot represent the synthesis cutoff."""


@dataclass
class NoiseRealization:
    """One synthesized realization of the forcing (e/m) * field at the atom."""

    dt: float
    n_steps: int
    samples: np.ndarray
    seed: int
    cutoff: float
    spawn_key: tuple = ()

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=float)
        if self.samples.shape != (self.n_steps + 1,):
            raise ValueError(
                f"samples must have shape ({self.n_steps + 1},), got {self.samples.shape}"
            )


@dataclass
class Trajectory:
    """Discretized path of the oscillator coordinate and velocity."""

    dt: float
    q: np.ndarray
    qdot: np.ndarray
    params: AtomParams
    q0: float
    qdot0: float
    seed: int | None = None

    def __post_init__(self):
        self.q = np.asarray(self.q, dtype=float)
        self.qdot = np.asarray(self.qdot, dtype=float)
        if self.q.shape != self.qdot.shape:
            raise ValueError("q and qdot must have equal length")

    @property
    def n_steps(self) -> int:
        return self.q.size - 1

    def times(self) -> np.ndarray:
        return self.dt * np.arange(self.q.size)


@dataclass
class EquilibriumStats:
    """Post-burn-in time-and-ensemble averages with inter-trajectory standard errors."""

    mean_q: float
    se_mean_q: float
    var_q: float
    se_var_q: float
    var_qdot: float
    se_var_qdot: float
    n_traj: int
    t_burn: float

    CSV_COLUMNS = (
        "mean_q",
        "se_mean_q",
        "var_q",
        "se_var_q",
        "var_qdot",
        "se_var_qdot",
        "n_traj",
        "t_burn",
    )

    def to_dict(self) -> dict:
        return {
            "mean_q": self.mean_q,
            "se_mean_q": self.se_mean_q,
            "var_q": self.var_q,
            "se_var_q": self.se_var_q,
            "var_qdot": self.var_qdot,
            "se_var_qdot": self.se_var_qdot,
            "n_traj": self.n_traj,
            "t_burn": self.t_burn,
        }

    def csv_row(self) -> str:
        d = self.to_dict()
        return ",".join(repr(d[c]) for c in self.CSV_COLUMNS)


def noise_spectrum(kappa, p: AtomParams, bath: BathSpec):
    """Target spectral density of the forcing: (e/m)^2 * G0H(0; kappa).  Nonnegative."""
    return (p.e / p.m) ** 2 * field_hadamard_ft(0.0, kappa, bath)


def _noise_generator(seed, spawn_key=()):
    seq = np.random.SeedSequence(seed, spawn_key=tuple(spawn_key))
    return np.random.Generator(np.random.Philox(seq))


def _synthesis_amplitudes(bath, p, cutoff, dt, n_samples):
    """Per-mode Gaussian amplitudes for the shaped spectrum, on a fast FFT length.

    The record is synthesized on n_fft >= n_samples points (n_fft chosen
    FFT-friendly) and truncated, which only refines the discrete frequency
    spacing 2 pi/(n_fft dt).
    """
    n_fft = _next_fast_len(n_samples, real=True)
    dk = 2.0 * math.pi / (n_fft * dt)
    kap = dk * np.arange(n_fft // 2 + 1)
    spec = noise_spectrum(kap, p, bath)
    spec[kap > cutoff] = 0.0
    amp = np.sqrt(n_fft * spec / (2.0 * dt))
    amp_real = np.sqrt(n_fft * spec / dt)  # for the self-conjugate modes
    return n_fft, amp, amp_real


def _synthesize_samples(bath, p, cutoff, dt, n_samples, rng, pre=None) -> np.ndarray:
    if pre is None:
        pre = _synthesis_amplitudes(bath, p, cutoff, dt, n_samples)
    n_fft, amp, amp_real = pre
    a = rng.standard_normal(n_fft // 2 + 1)
    b = rng.standard_normal(n_fft // 2 + 1)
    y = amp * (a + 1j * b)
    y[0] = amp_real[0] * a[0]  # zero mode is real
    if n_fft % 2 == 0:
        y[-1] = amp_real[-1] * a[-1]  # Nyquist mode is real
    return np.fft.irfft(y, n=n_fft)[:n_samples]


def synthesize_noise(
    bath: BathSpec,
    p: AtomParams,
    cutoff: float,
    dt: float,
    t_total: float,
    seed: int,
    spawn_key: tuple = (),
) -> NoiseRealization:
    """Synthesize a stationary Gaussian forcing record by frequency-domain shaping.

    Independent complex Gaussian amplitudes with Hermitian symmetry are drawn
    with per-mode variance proportional to ``noise_spectrum`` truncated at
    ``cutoff`` and transformed to the time domain; the discrete spectrum spacing
    is 2 pi / t_total.  Deterministic given (seed, spawn_key, dt, cutoff,
    t_total, beta): identical inputs give bit-identical samples.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    if dt > math.pi / cutoff * (1.0 + 1e-12):
        raise NyquistError(
            f"dt={dt:g} cannot represent the synthesis cutoff {cutoff:g} "
            f"(need dt <= pi/cutoff = {math.pi / cutoff:g})"
        )
    n_steps = int(round(t_total / dt))
    if n_steps < 1:
        raise ValueError("t_total must cover at least one step")
    rng = _noise_generator(seed, spawn_key)
    samples = _synthesize_samples(bath, p, cutoff, dt, n_steps + 1, rng)
    return NoiseRealization(
        dt=dt, n_steps=n_steps, samples=samples, seed=seed, cutoff=cutoff, spawn_key=spawn_key
    )


def _step_coefficients(p: AtomParams, dt: float):
    """Exact homogeneous propagator over one step plus piecewise-linear forcing maps.

    Returns (e00, e01, e10, e11, f0q, f0v, f1q, f1v) such that
    y_{n+1} = E y_n + Phi0 xi_n + Phi1 (xi_{n+1} - xi_n).
    """
    w2 = p.omega**2
    dc = damped_cos(dt, p)
    ds = damped_sinc(dt, p)
    e00 = dc + p.gamma * ds
    e01 = ds
    e10 = -w2 * ds
    e11 = dc - p.gamma * ds
    # Phi0 = A^{-1} (E - 1) B, Phi1 = -A^{-1} B + A^{-2} (E - 1) B / dt
    f0q = (-2.0 * p.gamma * e01 - (e11 - 1.0)) / w2
    f0v = e01
    f1q = 1.0 / w2 + (-2.0 * p.gamma * f0q - f0v) / (w2 * dt)
    f1v = f0q / dt
    return e00, e01, e10, e11, f0q, f0v, f1q, f1v


def _ar1(lam: complex, drive: np.ndarray, z0: np.ndarray) -> np.ndarray:
    """Run z_{n+1} = lam * z_n + drive_n through a first-order filter; returns all z_n."""
    n, k = drive.shape
    out = np.empty((n + 1, k), dtype=complex)
    out[0] = z0
    zi = lam * np.atleast_2d(z0)
    out[1:], _ = _lfilter(np.array([1.0 + 0j]), np.array([1.0 + 0j, -lam]), drive, axis=0, zi=zi)
    return out


def _advance(p: AtomParams, dt: float, xi: np.ndarray, q0, qdot0):
    """Propagate columns of forcing samples to coordinate/velocity columns.

    The exact one-step map ``y_{n+1} = E y_n + Phi0 xi_n + Phi1 dxi_n`` is
    diagonalized: in the eigenbasis of the damped oscillator it splits into two
    first-order recursions with multipliers exp(mu_pm dt), mu_pm = -gamma pm
    sqrt(gamma^2 - omega^2), which are run as constant-coefficient filters at C
    speed.  First-order sections stay well conditioned even when omega*dt is
    tiny (a direct second-order recursion would lose several digits there).
    The critically damped point has a defective map and falls back to an
    explicit step loop.
    """
    e00, e01, e10, e11, f0q, f0v, f1q, f1v = _step_coefficients(p, dt)
    if xi.ndim == 1:
        xi = xi[:, None]
    n = xi.shape[0] - 1
    k = xi.shape[1]
    dxi = xi[1:] - xi[:-1]
    u = f0q * xi[:-1] + f1q * dxi  # coordinate drive per step
    w = f0v * xi[:-1] + f1v * dxi  # velocity drive per step
    q0 = np.broadcast_to(np.asarray(q0, dtype=float), (k,)).astype(float)
    v0 = np.broadcast_to(np.asarray(qdot0, dtype=float), (k,)).astype(float)

    disc = p.gamma**2 - p.omega**2
    if disc == 0:  # critically damped: defective propagator, explicit loop
        q_mat = np.empty((n + 1, k))
        v_mat = np.empty((n + 1, k))
        q_mat[0] = q0
        v_mat[0] = v0
        q, v = q0.copy(), v0.copy()
        for i in range(n):
            q, v = (
                e00 * q + e01 * v + u[i],
                e10 * q + e11 * v + w[i],
            )
            q_mat[i + 1] = q
            v_mat[i + 1] = v
        return q_mat, v_mat

    if disc < 0:
        # underdamped: the second mode is the conjugate of the first, so one
        # complex filter carries the whole state
        mu_p = complex(-p.gamma, math.sqrt(-disc))
        denom = 2j * math.sqrt(-disc)
        alpha = _ar1(np.exp(mu_p * dt), (w - np.conj(mu_p) * u) / denom, (v0 - np.conj(mu_p) * q0) / denom)
        q_mat = 2.0 * alpha.real
        v_mat = 2.0 * (mu_p * alpha).real
        return q_mat, v_mat

    # overdamped: two real decaying modes
    nu = math.sqrt(disc)
    mu_p = -p.gamma + nu
    mu_m = -p.gamma - nu
    denom = mu_p - mu_m
    alpha = _ar1(math.exp(mu_p * dt), (w - mu_m * u) / denom, (v0 - mu_m * q0) / denom).real
    beta = _ar1(math.exp(mu_m * dt), (mu_p * u - w) / denom, (mu_p * q0 - v0) / denom).real
    q_mat = alpha + beta
    v_mat = mu_p * alpha + mu_m * beta
    return q_mat, v_mat


def integrate(p: AtomParams, noise: NoiseRealization, q0: float = 0.0, qdot0: float = 0.0) -> Trajectory:
    """Advance the driven oscillator through one noise record.

    The homogeneous map is exact, so undriven motion reproduces the closed-form
    decaying oscillation to rounding accuracy at any step size.
    """
    q_mat, v_mat = _advance(p, noise.dt, noise.samples[:, None], q0, qdot0)
    return Trajectory(
        dt=noise.dt,
        q=q_mat[:, 0],
        qdot=v_mat[:, 0],
        params=p,
        q0=float(q0),
        qdot0=float(qdot0),
        seed=noise.seed,
    )


def predicted_variance(p: AtomParams, bath: BathSpec, cutoff: float, n_points: int = 32768) -> float:
    """Frequency-domain equilibrium coordinate variance at the same cutoff.

    (1/m) \\int dkappa/2pi coth(beta kappa/2) Im GR(kappa) over (-cutoff, cutoff);
    use the synthesis cutoff here, never a different one.
    """
    grid = FrequencyGrid(cutoff, n_points)
    res = integrate_spectrum(lambda k: atom_hadamard_ft(k, p, bath), grid)
    return res.value / p.m


def equilibrium_stats(trajs: list[Trajectory], t_burn: float) -> EquilibriumStats:
    """Time-and-ensemble averages of Q, Q^2, Qdot^2 after discarding the burn-in.

    The forcing has zero mean, so the second moments are reported directly as
    variances; standard errors come from the scatter of per-trajectory time
    averages.
    """
    if not trajs:
        raise ValueError("need at least one trajectory")
    dt = trajs[0].dt
    ib = int(math.ceil(t_burn / dt))
    if any(t.n_steps + 1 - ib < 16 for t in trajs):
        raise ValueError("insufficient post-burn-in samples (trajectory shorter than t_burn + window)")
    q_means = np.array([t.q[ib:].mean() for t in trajs])
    q2_means = np.array([(t.q[ib:] ** 2).mean() for t in trajs])
    v2_means = np.array([(t.qdot[ib:] ** 2).mean() for t in trajs])
    return _stats_from_traj_means(q_means, q2_means, v2_means, t_burn)


def _stats_from_traj_means(q_means, q2_means, v2_means, t_burn) -> EquilibriumStats:
    n = q_means.size
    root_n = math.sqrt(n)

    def se(arr):
        return float(arr.std(ddof=1) / root_n) if n > 1 else float("inf")

    return EquilibriumStats(
        mean_q=float(q_means.mean()),
        se_mean_q=se(q_means),
        var_q=float(q2_means.mean()),
        se_var_q=se(q2_means),
        var_qdot=float(v2_means.mean()),
        se_var_qdot=se(v2_means),
        n_traj=int(n),
        t_burn=float(t_burn),
    )


@dataclass
class EnsembleResult:
    """Ensemble summary: variance-vs-time series plus equilibrium statistics."""

    dt: float
    n_steps: int
    var_q_series: np.ndarray
    stats: EquilibriumStats
    n_traj: int
    master_seed: int

    def times(self) -> np.ndarray:
        return self.dt * np.arange(self.n_steps + 1)


def _ensemble_chunk(args):
    (p, bath, cutoff, dt, n_steps, master_seed, start, stop, q0, qdot0, burn_index) = args
    k = stop - start
    pre = _synthesis_amplitudes(bath, p, cutoff, dt, n_steps + 1)
    xi = np.empty((n_steps + 1, k))
    for j, idx in enumerate(range(start, stop)):
        rng = _noise_generator(master_seed, (idx,))
        xi[:, j] = _synthesize_samples(bath, p, cutoff, dt, n_steps + 1, rng, pre)
    q_mat, v_mat = _advance(p, dt, xi, q0, qdot0)
    sum_q2_t = np.einsum("ti,ti->t", q_mat, q_mat)
    q_means = q_mat[burn_index:].mean(axis=0)
    q2_means = np.einsum("ti,ti->i", q_mat[burn_index:], q_mat[burn_index:]) / (
        n_steps + 1 - burn_index
    )
    v2_means = np.einsum("ti,ti->i", v_mat[burn_index:], v_mat[burn_index:]) / (
        n_steps + 1 - burn_index
    )
    return sum_q2_t, q_means, q2_means, v2_means


def run_ensemble(
    p: AtomParams,
    bath: BathSpec,
    cutoff: float,
    dt: float,
    t_total: float,
    n_traj: int,
    master_seed: int,
    q0: float = 0.0,
    qdot0: float = 0.0,
    t_burn: float | None = None,
    workers: int = 1,
) -> EnsembleResult:
    """Simulate an ensemble of independent trajectories and reduce it deterministically.

    Trajectory ``i`` is seeded by (master_seed, spawn_key=(i,)); chunking and the
    reduction order are fixed, so the result is bit-identical for any
    ``workers`` count.  Default burn-in is 20 relaxation times.
    """
    if dt > math.pi / cutoff * (1.0 + 1e-12):
        raise NyquistError(f"dt={dt:g} violates the Nyquist bound pi/cutoff={math.pi / cutoff:g}")
    if t_burn is None:
        t_burn = 20.0 / p.gamma
    n_steps = int(round(t_total / dt))
    burn_index = int(math.ceil(t_burn / dt))
    if n_steps + 1 - burn_index < 16:
        raise ValueError("insufficient post-burn-in samples: increase t_total or reduce t_burn")
    bounds = [
        (s, min(s + _CHUNK_SIZE, n_traj)) for s in range(0, n_traj, _CHUNK_SIZE)
    ]
    jobs = [
        (p, bath, cutoff, dt, n_steps, master_seed, s, e, q0, qdot0, burn_index)
        for s, e in bounds
    ]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_ensemble_chunk, jobs))
    else:
        results = [_ensemble_chunk(job) for job in jobs]

    sum_q2 = np.zeros(n_steps + 1)
    q_means, q2_means, v2_means = [], [], []
    for chunk_sum, qm, q2m, v2m in results:  # fixed chunk order
        sum_q2 += chunk_sum
        q_means.append(qm)
        q2_means.append(q2m)
        v2_means.append(v2m)
    stats = _stats_from_traj_means(
        np.concatenate(q_means), np.concatenate(q2_means), np.concatenate(v2_means), t_burn
    )
    return EnsembleResult(
        dt=dt,
        n_steps=n_steps,
        var_q_series=sum_q2 / n_traj,
        stats=stats,
        n_traj=n_traj,
        master_seed=master_seed,
    )


def fit_decay_rate(
    times: np.ndarray,
    var_series: np.ndarray,
    var_equilibrium: float,
    fit_window: tuple[float, float],
    smooth_time: float,
) -> float:
    """Fit the relaxation rate of the ensemble-variance deficit.

    The deficit ``var_equilibrium - var(t)`` decays with envelope exp(-rate*t)
    modulated at twice the oscillation frequency; it is boxcar-smoothed over
    ``smooth_time`` and log-linearly fitted inside ``fit_window``.  Returns the
    fitted rate (expected: 2 gamma).
    """
    times = np.asarray(times, dtype=float)
    deficit = var_equilibrium - np.asarray(var_series, dtype=float)
    dt = times[1] - times[0]
    width = max(1, int(round(smooth_time / dt)))
    if width % 2 == 0:
        width += 1
    kernel = np.full(width, 1.0 / width)
    smooth = np.convolve(deficit, kernel, mode="same")
    lo, hi = fit_window
    half = (width // 2) * dt
    mask = (times >= max(lo, half)) & (times <= min(hi, times[-1] - half)) & (smooth > 0)
    if np.count_nonzero(mask) < 8:
        raise ValueError("fit window leaves too few usable points")
    slope, _ = np.polyfit(times[mask], np.log(smooth[mask]), 1)
    return -float(slope)


def save_trajectory(path, traj: Trajectory):
    """Write a trajectory as a small text header plus two float64 column blocks."""
    p = traj.params
    header = "\n".join(
        [
            _TRAJECTORY_MAGIC,
            f"dt={traj.dt!r}",
            f"n_steps={traj.n_steps}",
            f"e={p.e!r}",
            f"m={p.m!r}",
            f"omega={p.omega!r}",
            f"q0={traj.q0!r}",
            f"qdot0={traj.qdot0!r}",
            f"seed={traj.seed!r}",
            "---",
            "",
        ]
    )
    with open(path, "wb") as fh:
        fh.write(header.encode("ascii"))
        fh.write(traj.q.astype("<f8").tobytes())
        fh.write(traj.qdot.astype("<f8").tobytes())


def load_trajectory(path) -> Trajectory:
    with open(path, "rb") as fh:
        raw = fh.read()
    end = raw.index(b"---\n")
    lines = raw[:end].decode("ascii").strip().split("\n")
    if lines[0] != _TRAJECTORY_MAGIC:
        raise ValueError(f"not a trajectory file: {path}")
    meta = dict(line.split("=", 1) for line in lines[1:])
    n = int(meta["n_steps"]) + 1
    body = raw[end + 4 :]
    q = np.frombuffer(body[: 8 * n], dtype="<f8").copy()
    qdot = np.frombuffer(body[8 * n : 16 * n], dtype="<f8").copy()
    params = AtomParams(e=float(meta["e"]), m=float(meta["m"]), omega=float(meta["omega"]))
    seed = None if meta["seed"] == "None" else int(meta["seed"])
    return Trajectory(
        dt=float(meta["dt"]),
        q=q,
        qdot=qdot,
        params=params,
        q0=float(meta["q0"]),
        qdot0=float(meta["qdot0"]),
        seed=seed,
    )
