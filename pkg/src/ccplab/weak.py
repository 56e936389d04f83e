"""Monte Carlo von Neumann measurements with post-selection.

Pointer model
-------------
The meter starts in ``phi(q) ~ exp(-q^2 / (4 sigma^2))`` (position spread
``sigma``) and couples through ``exp(-i g A (x) P_ptr / hbar)``, which
shifts the pointer by ``g a`` for each eigenvalue ``a`` of ``A``. After
post-selecting the system on ``|post>`` the pointer is

    chi(q) = sum_a c_a phi(q - g a),    c_a = <post|Pi_a|pre>,

with ``Pi_a`` the eigenprojectors. ``|chi|^2`` and its Fourier partner are
sums of Gaussians with closed-form CDFs, so pointer readings are drawn
exactly by inverting those CDFs. To first order in ``g``,

    <q> = g Re W,        <k> = g hbar Im W / (2 sigma^2),

where ``W = <post|A|pre>/<post|pre>`` is the weak value.

Random numbers
--------------
Trial ``i`` consumes two uniforms: draws ``2r`` and ``2r + 1``
(``r = i mod BLOCK_TRIALS``) of a Philox4x64 stream keyed by
``(master_seed, i // BLOCK_TRIALS)``. The first decides post-selection,
the second is the pointer quantile. Blocks are processed independently,
so results do not depend on the number of workers.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.special import erfc, ndtr, ndtri

from .ccp import EPS_OVERLAP, weak_value
from .errors import ConfigError, InsufficientTrials, NotHermitian, OrthogonalConditions
from .hilbert import HERMITICITY_TOL, OperatorMatrix, StateVector, _check_space, hermiticity_residual, inner

BLOCK_TRIALS = 1 << 16
MIN_ACCEPTED = 100


@dataclass(frozen=True, eq=False)
class WeakSimConfig:
    pre: StateVector
    post: StateVector
    observable: OperatorMatrix
    coupling: float
    pointer_width: float = 1.0
    trials: int = 100_000
    master_seed: int = 0

    def __post_init__(self):
        _check_space(self.pre.space, self.post.space)
        _check_space(self.pre.space, self.observable.space)
        if hermiticity_residual(self.observable.entries) >= HERMITICITY_TOL:
            raise NotHermitian("the measured observable must be Hermitian")
        g, sigma = float(self.coupling), float(self.pointer_width)
        if not math.isfinite(g) or g < 0:
            raise ConfigError(f"coupling must be finite and >= 0, got {self.coupling}")
        if not math.isfinite(sigma) or sigma <= 0:
            raise ConfigError(f"pointer_width must be > 0, got {self.pointer_width}")
        if int(self.trials) != self.trials or self.trials < 1:
            raise ConfigError(f"trials must be a positive integer, got {self.trials}")
        if int(self.master_seed) != self.master_seed or not 0 <= self.master_seed < 2**64:
            raise ConfigError("master_seed must be an integer in [0, 2**64)")
        if abs(inner(self.post, self.pre)) < EPS_OVERLAP:
            raise OrthogonalConditions("pre- and post-selected states are orthogonal")
        object.__setattr__(self, "coupling", g)
        object.__setattr__(self, "pointer_width", sigma)
        object.__setattr__(self, "trials", int(self.trials))
        object.__setattr__(self, "master_seed", int(self.master_seed))

    def with_coupling(self, g: float) -> "WeakSimConfig":
        return WeakSimConfig(self.pre, self.post, self.observable, g, self.pointer_width, self.trials, self.master_seed)

    def with_trials(self, n: int) -> "WeakSimConfig":
        return WeakSimConfig(self.pre, self.post, self.observable, self.coupling, self.pointer_width, n, self.master_seed)

    def analytic_weak_value(self) -> complex:
        return weak_value(self.observable, self.pre, self.post)


class PointerModel:
    """Closed-form post-selected pointer distributions for one configuration."""

    def __init__(self, config: WeakSimConfig, eig_tol: float = 1e-9):
        self.sigma = config.pointer_width
        self.hbar = config.pre.space.hbar
        self.g = config.coupling
        evals, evecs = np.linalg.eigh(config.observable.entries)
        post, pre = config.post.amplitudes, config.pre.amplitudes
        groups: list[list[int]] = []
        for n in range(len(evals)):
            if groups and evals[n] - evals[groups[-1][0]] <= eig_tol * max(1.0, abs(evals[n])):
                groups[-1].append(n)
            else:
                groups.append([n])
        self.eigenvalues = np.array([evals[grp].mean() for grp in groups])
        self.amplitudes = np.array(
            [np.vdot(evecs[:, grp].conj().T @ post, evecs[:, grp].conj().T @ pre) for grp in groups]
        )
        self.shifts = self.g * self.eigenvalues
        self.tau = self.hbar / (2 * self.sigma)  # pointer momentum spread

        c, s, sig = self.amplitudes, self.shifts, self.sigma
        n = len(c)
        self._pairs = [(i, j) for i in range(n) for j in range(i, n)]
        # Position density: sum of real-weighted Gaussians N(mu, sigma^2).
        self._q_weight = np.array(
            [(1 if i == j else 2) * (np.conj(c[i]) * c[j]).real * np.exp(-((s[i] - s[j]) ** 2) / (8 * sig**2)) for i, j in self._pairs]
        )
        self._q_mean = np.array([0.5 * (s[i] + s[j]) for i, j in self._pairs])
        # Momentum density: N(0, tau^2) times sum_ij conj(c_i) c_j exp(i k beta_ij).
        self._k_coef = np.array([(1 if i == j else 2) * np.conj(c[i]) * c[j] for i, j in self._pairs])
        self._k_beta = np.array([(s[i] - s[j]) / self.hbar for i, j in self._pairs])
        self.acceptance = float(self._q_weight.sum())

    # Position --------------------------------------------------------------
    def position_cdf(self, q):
        z = (np.asarray(q)[..., None] - self._q_mean) / self.sigma
        return (ndtr(z) @ self._q_weight) / self.acceptance

    def position_pdf(self, q):
        z = (np.asarray(q)[..., None] - self._q_mean) / self.sigma
        dens = np.exp(-0.5 * z**2) / (np.sqrt(2 * np.pi) * self.sigma)
        return (dens @ self._q_weight) / self.acceptance

    def mean_position(self) -> float:
        return float(self._q_weight @ self._q_mean / self.acceptance)

    # Momentum --------------------------------------------------------------
    def momentum_cdf(self, k):
        tau, beta = self.tau, self._k_beta
        z = (np.asarray(k)[..., None] - 1j * beta * tau**2) / tau
        phi = 0.5 * erfc(-z / np.sqrt(2))
        terms = self._k_coef * np.exp(-0.5 * (beta * tau) ** 2) * phi
        return terms.sum(axis=-1).real / self.acceptance

    def momentum_pdf(self, k):
        k = np.asarray(k)
        gauss = np.exp(-0.5 * (k / self.tau) ** 2) / (np.sqrt(2 * np.pi) * self.tau)
        mod = (self._k_coef * np.exp(1j * k[..., None] * self._k_beta)).sum(axis=-1).real
        return gauss * mod / self.acceptance

    def mean_momentum(self) -> float:
        tau, beta = self.tau, self._k_beta
        terms = self._k_coef * 1j * beta * tau**2 * np.exp(-0.5 * (beta * tau) ** 2)
        return float(terms.sum().real / self.acceptance)

    # Sampling --------------------------------------------------------------
    def sample_positions(self, u: np.ndarray) -> np.ndarray:
        lo = self.shifts.min() - 40 * self.sigma
        hi = self.shifts.max() + 40 * self.sigma
        guess = self.mean_position() + self.sigma * ndtri(u)
        return _invert_cdf(self.position_cdf, self.position_pdf, u, guess, lo, hi, 1e-13 * self.sigma)

    def sample_momenta(self, u: np.ndarray) -> np.ndarray:
        spread = np.abs(self._k_beta).max() * self.tau**2
        lo, hi = -40 * self.tau - spread, 40 * self.tau + spread
        guess = self.mean_momentum() + self.tau * ndtri(u)
        return _invert_cdf(self.momentum_cdf, self.momentum_pdf, u, guess, lo, hi, 1e-13 * self.tau)


def _invert_cdf(cdf, pdf, u, guess, lo, hi, tol, max_iter=200):
    """Solve ``cdf(x) = u`` elementwise by Newton steps kept inside a shrinking bracket.

    Every element iterates independently until its own step falls below
    ``tol``, so the result for one element never depends on its neighbours.
    """
    x = np.clip(np.asarray(guess, dtype=float), lo, hi).copy()
    lo = np.full_like(x, lo)
    hi = np.full_like(x, hi)
    active = np.arange(x.size)
    for _ in range(max_iter):
        if active.size == 0:
            break
        xa, ua = x[active], u[active]
        F = cdf(xa) - ua
        below = F < 0
        lo[active] = np.where(below, xa, lo[active])
        hi[active] = np.where(below, hi[active], xa)
        f = pdf(xa)
        with np.errstate(divide="ignore", invalid="ignore"):
            xn = xa - F / f
        la, ha = lo[active], hi[active]
        bad = ~((xn > la) & (xn < ha)) | ~(f > 0)
        xn = np.where(bad, 0.5 * (la + ha), xn)
        done = (np.abs(xn - xa) <= tol) | (ha - la <= tol)
        x[active] = xn
        active = active[~done]
    return x


@dataclass(frozen=True, eq=False)
class MeasurementRecord:
    accepted_trials: int
    total_trials: int
    positions: np.ndarray
    momenta: np.ndarray
    config: WeakSimConfig = field(repr=False)
    expected_acceptance: float = float("nan")

    @property
    def acceptance_fraction(self) -> float:
        return self.accepted_trials / self.total_trials

    def acceptance_stderr(self) -> float:
        p = self.expected_acceptance
        return math.sqrt(p * (1 - p) / self.total_trials)


@dataclass(frozen=True)
class WeakValueEstimate:
    re: float
    im: float
    stderr_re: float
    stderr_im: float
    trials_used: int

    @property
    def value(self) -> complex:
        return complex(self.re, self.im)


def _block_uniforms(master_seed: int, block: int, n: int) -> np.ndarray:
    bitgen = np.random.Philox(key=(block << 64) | master_seed)
    u = np.random.Generator(bitgen).random(2 * n).reshape(n, 2)
    # Shift off zero so quantiles stay finite.
    return u + 2.0**-54


def _block_sizes(total: int) -> list[int]:
    full, rest = divmod(total, BLOCK_TRIALS)
    return [BLOCK_TRIALS] * full + ([rest] if rest else [])


def _map(fn, items, workers):
    if workers is None or workers <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def simulate(config: WeakSimConfig, workers: int | None = None) -> MeasurementRecord:
    """Run ``config.trials`` post-selected weak measurements.

    Accepted trials alternate between pointer-position readout (even
    acceptance rank) and pointer-momentum readout (odd rank).
    """
    model = PointerModel(config)
    sizes = _block_sizes(config.trials)

    def draw(b):
        u = _block_uniforms(config.master_seed, b, sizes[b])
        accepted = u[:, 0] < model.acceptance
        return accepted, u[accepted, 1]

    drawn = _map(draw, range(len(sizes)), workers)
    counts = [int(acc.sum()) for acc, _ in drawn]
    offsets = np.concatenate([[0], np.cumsum(counts)[:-1]]).astype(int)

    def sample(b):
        quantiles = drawn[b][1]
        rank = offsets[b] + np.arange(quantiles.size)
        even = rank % 2 == 0
        return model.sample_positions(quantiles[even]), model.sample_momenta(quantiles[~even])

    sampled = _map(sample, range(len(sizes)), workers)
    positions = np.concatenate([s[0] for s in sampled]) if sampled else np.empty(0)
    momenta = np.concatenate([s[1] for s in sampled]) if sampled else np.empty(0)
    return MeasurementRecord(
        accepted_trials=int(sum(counts)),
        total_trials=config.trials,
        positions=positions,
        momenta=momenta,
        config=config,
        expected_acceptance=model.acceptance,
    )


def _mean_and_stderr(samples: np.ndarray) -> tuple[float, float]:
    # fsum is exactly rounded, hence independent of summation order.
    n = samples.size
    mean = math.fsum(samples) / n
    var = math.fsum((samples - mean) ** 2) / (n - 1)
    return mean, math.sqrt(var / n)


def estimate_weak_value(record: MeasurementRecord) -> WeakValueEstimate:
    """First-order pointer-shift estimator of the weak value.

    ``Re W = <q>/g`` and ``Im W = 2 sigma^2 <k> / (g hbar)``; the bias is
    ``O(g)`` relative to the analytic value.
    """
    cfg = record.config
    if record.accepted_trials < MIN_ACCEPTED or record.positions.size < 2 or record.momenta.size < 2:
        raise InsufficientTrials(f"need at least {MIN_ACCEPTED} accepted trials, got {record.accepted_trials}")
    if cfg.coupling <= 0:
        raise ConfigError("weak-value estimation needs a positive coupling")
    g, sigma, hbar = cfg.coupling, cfg.pointer_width, cfg.pre.space.hbar
    mq, sq = _mean_and_stderr(record.positions)
    mk, sk = _mean_and_stderr(record.momenta)
    scale_im = 2 * sigma**2 / (g * hbar)
    return WeakValueEstimate(
        re=mq / g,
        im=scale_im * mk,
        stderr_re=sq / g,
        stderr_im=scale_im * sk,
        trials_used=record.accepted_trials,
    )


@dataclass(frozen=True)
class BiasRow:
    coupling: float
    estimate: WeakValueEstimate
    analytic: complex
    error: float
    error_stderr: float
    indistinguishable_from_previous: bool


@dataclass(frozen=True)
class BiasScan:
    rows: tuple

    def is_monotone(self, bands: float = 2.0) -> bool:
        """No row's error exceeds its predecessor's by more than ``bands`` combined stderrs."""
        for prev, row in zip(self.rows, self.rows[1:]):
            if row.error - prev.error > bands * math.hypot(row.error_stderr, prev.error_stderr):
                return False
        return True


def bias_scan(base_config: WeakSimConfig, couplings, workers: int | None = None, bands: float = 2.0) -> BiasScan:
    """Estimator error ``|estimate - W|`` along decreasing couplings.

    ``error_stderr`` is the rms noise of the error vector,
    ``hypot(stderr_re, stderr_im)``. A row is flagged indistinguishable
    when its error differs from the previous one by less than ``bands``
    combined stderrs.
    """
    couplings = [float(g) for g in couplings]
    if not couplings or any(g <= 0 for g in couplings):
        raise ConfigError("couplings must be a non-empty list of positive values")
    if any(b > a for a, b in zip(couplings, couplings[1:])):
        raise ConfigError("couplings must be sorted in descending order")
    W = base_config.analytic_weak_value()
    rows = []
    for g in couplings:
        est = estimate_weak_value(simulate(base_config.with_coupling(g), workers=workers))
        err = abs(est.value - W)
        se = math.hypot(est.stderr_re, est.stderr_im)
        flag = bool(rows) and abs(err - rows[-1].error) < bands * math.hypot(se, rows[-1].error_stderr)
        rows.append(BiasRow(g, est, W, err, se, flag))
    return BiasScan(tuple(rows))
