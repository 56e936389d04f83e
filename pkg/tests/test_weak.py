import math

import numpy as np
import pytest
import sympy as sp
from scipy.integrate import quad

from ccplab.ccp import weak_value
from ccplab.errors import ConfigError, InsufficientTrials, NotHermitian, OrthogonalConditions
from ccplab.hilbert import HilbertSpec, OperatorMatrix, StateVector, projector, random_state
from ccplab.weak import (
    BLOCK_TRIALS,
    PointerModel,
    WeakSimConfig,
    bias_scan,
    estimate_weak_value,
    simulate,
)

QUBIT = HilbertSpec(2)


def qubit(*amps):
    return StateVector(np.array(amps, dtype=complex), QUBIT)


def example(g=0.02, trials=100_000, seed=0, sigma=1.0):
    return WeakSimConfig(qubit(1, 0), qubit(1, 1), projector(qubit(1, 1j)), g, sigma, trials, seed)


def within(estimate, target, stderr, k):
    return abs(estimate - target) <= k * stderr


# --- estimator constants ---


def test_estimator_constants_small_g_expansion():
    # Pointer phi(q) ~ exp(-q^2/4 s^2); to first order the post-selected pointer
    # is <b|a> (phi - g W phi'). Its mean position and momentum fix the constants.
    q = sp.symbols("q", real=True)
    s, g, hb = sp.symbols("sigma g hbar", positive=True)
    wr, wi = sp.symbols("w_r w_i", real=True)
    phi = sp.exp(-(q**2) / (4 * s**2))
    psi = phi - g * (wr + sp.I * wi) * sp.diff(phi, q)
    psi_c = phi - g * (wr - sp.I * wi) * sp.diff(phi, q)

    def integral(expr):
        return sp.integrate(sp.expand(expr), (q, -sp.oo, sp.oo))

    norm = integral(psi_c * psi)
    mean_q = integral(q * psi_c * psi) / norm
    mean_k = integral(psi_c * (-sp.I * hb) * sp.diff(psi, q)) / norm
    d_q = sp.simplify(sp.diff(mean_q, g).subs(g, 0))
    d_k = sp.simplify(sp.diff(mean_k, g).subs(g, 0))
    assert sp.simplify(d_q - wr) == 0
    assert sp.simplify(2 * s**2 / hb * d_k - wi) == 0


def test_pointer_model_means_against_quadrature(rng):
    # Oracle: build psi(q) = sum_i c_i phi(q - g a_i) explicitly and integrate.
    space = HilbertSpec(3)
    pre, post = random_state(space, rng), random_state(space, rng)
    A = projector(random_state(space, rng))
    cfg = WeakSimConfig(pre, post, A, 0.3, 0.8, 10, 0)
    model = PointerModel(cfg)
    evals, vecs = np.linalg.eigh(A.entries)
    c = (vecs.conj().T @ post.amplitudes).conj() * (vecs.conj().T @ pre.amplitudes)
    sig = 0.8
    norm0 = (2 * np.pi * sig**2) ** -0.25

    def psi(x):
        return sum(ci * norm0 * np.exp(-((x - 0.3 * a) ** 2) / (4 * sig**2)) for ci, a in zip(c, evals))

    def dpsi(x):
        return sum(
            ci * norm0 * np.exp(-((x - 0.3 * a) ** 2) / (4 * sig**2)) * (-(x - 0.3 * a) / (2 * sig**2))
            for ci, a in zip(c, evals)
        )

    acc, _ = quad(lambda x: abs(psi(x)) ** 2, -np.inf, np.inf, epsabs=1e-13)
    mq, _ = quad(lambda x: x * abs(psi(x)) ** 2, -np.inf, np.inf, epsabs=1e-13)
    mk, _ = quad(lambda x: (np.conj(psi(x)) * -1j * dpsi(x)).real, -np.inf, np.inf, epsabs=1e-13)
    assert abs(model.acceptance - acc) < 1e-10
    assert abs(model.mean_position() - mq / acc) < 1e-9
    assert abs(model.mean_momentum() - mk / acc) < 1e-9


@pytest.mark.parametrize("g", [0.02, 0.7])
def test_pointer_cdfs_integrate_pdfs(g):
    model = PointerModel(example(g))
    for x in (-2.0, 0.1, 1.5):
        pq, _ = quad(model.position_pdf, -np.inf, x, epsabs=1e-13)
        pk, _ = quad(model.momentum_pdf, -np.inf, x, epsabs=1e-13)
        assert abs(model.position_cdf(x) - pq) < 1e-10
        assert abs(model.momentum_cdf(x) - pk) < 1e-10


def test_samplers_invert_cdfs():
    model = PointerModel(example(0.4))
    u = np.linspace(1e-6, 1 - 1e-6, 41)
    np.testing.assert_allclose(model.position_cdf(model.sample_positions(u)), u, atol=1e-12)
    np.testing.assert_allclose(model.momentum_cdf(model.sample_momenta(u)), u, atol=1e-12)


# --- simulate ---


def test_zero_coupling_acceptance_and_no_shift():
    cfg = example(g=0.0, trials=200_000, seed=3)
    rec = simulate(cfg)
    born = abs(np.vdot(cfg.post.amplitudes, cfg.pre.amplitudes)) ** 2
    assert within(rec.acceptance_fraction, born, rec.acceptance_stderr(), 5)
    for samples in (rec.positions, rec.momenta):
        assert abs(samples.mean()) <= 5 * samples.std(ddof=1) / math.sqrt(samples.size)


def test_alternating_schedule():
    rec = simulate(example(trials=30_001, seed=5))
    assert rec.accepted_trials == rec.positions.size + rec.momenta.size
    assert rec.positions.size - rec.momenta.size in (0, 1)
    assert rec.accepted_trials <= rec.total_trials


def test_post_equals_pre_gives_born_shift(rng):
    space = HilbertSpec(3)
    pre, m = random_state(space, rng), random_state(space, rng)
    g = 0.05
    rec = simulate(WeakSimConfig(pre, pre, projector(m), g, 1.0, 400_000, 11))
    born = abs(np.vdot(m.amplitudes, pre.amplitudes)) ** 2
    se = rec.positions.std(ddof=1) / math.sqrt(rec.positions.size)
    assert within(rec.positions.mean(), g * born, se, 5)


def test_qubit_example_shift_directions():
    g = 0.05
    rec = simulate(example(g, 400_000, 2))
    model = PointerModel(example(g))
    se_q = rec.positions.std(ddof=1) / math.sqrt(rec.positions.size)
    se_k = rec.momenta.std(ddof=1) / math.sqrt(rec.momenta.size)
    assert within(rec.positions.mean(), g / 2, se_q, 5)
    assert within(rec.momenta.mean(), g * 0.5 / (2 * 1.0**2), se_k, 5)
    assert abs(model.mean_position() - g / 2) < 2 * g**2


def test_determinism_across_workers():
    cfg = example(trials=3 * BLOCK_TRIALS + 17, seed=99)
    a, b, c = simulate(cfg), simulate(cfg, workers=4), simulate(cfg, workers=3)
    for r in (b, c):
        assert r.accepted_trials == a.accepted_trials
        assert r.positions.tobytes() == a.positions.tobytes()
        assert r.momenta.tobytes() == a.momenta.tobytes()
    other = simulate(example(trials=3 * BLOCK_TRIALS + 17, seed=100))
    assert other.positions.tobytes() != a.positions.tobytes()


def test_prefix_stability():
    # Trial i depends only on (seed, i): a shorter run is a prefix of a longer one.
    short = simulate(example(trials=BLOCK_TRIALS, seed=4))
    long = simulate(example(trials=2 * BLOCK_TRIALS, seed=4))
    n = short.positions.size
    assert short.positions.tobytes() == long.positions[:n].tobytes()


# --- estimate ---


@pytest.mark.slow
def test_qubit_estimate_converges():
    est = estimate_weak_value(simulate(example(0.01, 1_000_000, 21)))
    assert within(est.re, 0.5, est.stderr_re, 3)
    assert within(est.im, 0.5, est.stderr_im, 3)


def test_identity_observable_gives_one(rng):
    space = HilbertSpec(3)
    pre, post = random_state(space, rng), random_state(space, rng)
    A = OperatorMatrix(np.eye(3), space, hermitian=True)
    est = estimate_weak_value(simulate(WeakSimConfig(pre, post, A, 0.1, 1.0, 200_000, 8)))
    assert within(est.re, 1.0, est.stderr_re, 3)
    assert within(est.im, 0.0, est.stderr_im, 3)


def test_real_weak_value_has_no_imaginary_part():
    sx = OperatorMatrix(np.array([[0, 1], [1, 0]]), QUBIT, hermitian=True)
    pre, post = qubit(1, 0), qubit(np.cos(0.3), np.sin(0.3))
    W = weak_value(sx, pre, post)
    assert abs(W.imag) < 1e-15
    est = estimate_weak_value(simulate(WeakSimConfig(pre, post, sx, 0.05, 1.0, 300_000, 13)))
    assert within(est.im, 0.0, est.stderr_im, 3)


def test_stderr_scaling_under_doubling():
    ratios = []
    for rep in range(10):
        base = example(0.1, 20_000, 1000 + rep)
        e1 = estimate_weak_value(simulate(base))
        e2 = estimate_weak_value(simulate(base.with_trials(40_000).with_coupling(0.1)))
        ratios += [e2.stderr_re / e1.stderr_re, e2.stderr_im / e1.stderr_im]
    assert all(0.60 <= r <= 0.82 for r in ratios), ratios


def test_estimator_preconditions():
    with pytest.raises(InsufficientTrials):
        estimate_weak_value(simulate(example(trials=50)))
    with pytest.raises(ConfigError):
        estimate_weak_value(simulate(example(g=0.0, trials=1000)))


# --- bias scan ---


@pytest.mark.slow
def test_bias_scan_monotone():
    scan = bias_scan(example(trials=1_000_000, seed=17), [0.5, 0.1, 0.02])
    assert scan.is_monotone(2.0)
    assert [r.coupling for r in scan.rows] == [0.5, 0.1, 0.02]
    assert scan.rows[0].error > 2 * scan.rows[0].error_stderr  # finite-g bias is resolved


def test_bias_scan_noise_floor_flags_rows():
    scan = bias_scan(example(trials=4000, seed=5), [0.002, 0.001])
    assert scan.rows[1].indistinguishable_from_previous
    assert not scan.rows[0].indistinguishable_from_previous


def test_bias_scan_validation():
    with pytest.raises(ConfigError):
        bias_scan(example(trials=1000), [0.01, 0.1])
    with pytest.raises(ConfigError):
        bias_scan(example(trials=1000), [0.1, 0.0])
    with pytest.raises(ConfigError):
        bias_scan(example(trials=1000), [])


# --- config validation ---


def test_config_validation():
    with pytest.raises(ConfigError):
        example(g=-0.1)
    with pytest.raises(ConfigError):
        example(sigma=0.0)
    with pytest.raises(ConfigError):
        example(trials=0)
    with pytest.raises(OrthogonalConditions):
        WeakSimConfig(qubit(1, 0), qubit(0, 1), projector(qubit(1, 1)), 0.1)
    bad = OperatorMatrix(np.array([[0, 1], [0, 0]]), QUBIT)
    with pytest.raises(NotHermitian):
        WeakSimConfig(qubit(1, 0), qubit(1, 1), bad, 0.1)
