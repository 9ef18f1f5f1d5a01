"""Executable verification suite behind ``capbm check``.

Every check returns a :class:`CheckResult` with the measured value, the
tolerance it is held to and the verdict. ``quick`` covers special functions,
model invariants and file round trips; ``full`` adds the enumeration-based
comparisons (conditionals, gradients, sampler stationarity).
"""
import math
import os
import tempfile
from dataclasses import dataclass

import numpy as np

from . import formats, oracle
from .data import ComplexDataset, load_dataset, save_dataset
from .learning import polar_gradients
from .model import (
    CapBmParams,
    CapRbmParams,
    InputSums,
    PhasorState,
    amp_prob,
    energy_capbm,
    energy_caprbm,
    input_sums,
    phase_conditional,
)
from .sampler import (
    HIDDEN_TO_VISIBLE,
    VISIBLE_TO_HIDDEN,
    ChainState,
    gibbs_sweep,
    rbm_sample_layer,
    unit_rate,
)
from .special import bessel_ratio, log_bessel_i0, log_bessel_i1, make_rng, sample_von_mises


@dataclass(frozen=True)
class CheckResult:
    name: str
    measured: float
    tolerance: float
    passed: bool
    comparison: str = "<"

    def line(self):
        verdict = "PASS" if self.passed else "FAIL"
        return f"[{verdict}] {self.name}: measured {self.measured:.3g} {self.comparison} {self.tolerance:.3g}"


def _below(name, measured, tol):
    return CheckResult(name, float(measured), tol, bool(measured < tol))


def _above(name, measured, tol):
    return CheckResult(name, float(measured), tol, bool(measured > tol), ">")


def series_i0(a):
    """Independent scalar power series for I0 and I1 (math.fsum over terms)."""
    x = 0.25 * a * a
    terms0, terms1 = [1.0], [0.5 * a]
    t0, t1 = 1.0, 0.5 * a
    m = 1
    while True:
        t0 *= x / (m * m)
        t1 *= x / (m * (m + 1))
        terms0.append(t0)
        terms1.append(t1)
        if m > x and t0 < 1e-18 * terms0[0]:
            break
        m += 1
    return math.fsum(terms0), math.fsum(terms1)


# -- core math ---------------------------------------------------------------


def check_log_i0_series():
    worst = 0.0
    for a in np.linspace(0.05, 20.0, 60):
        i0, _ = series_i0(a)
        worst = max(worst, abs(log_bessel_i0(a) - math.log(i0)) / math.log(i0))
    return _below("log I0 vs power series, a<=20 (rel)", worst, 1e-12)


def check_log_i0_asymptotic():
    a = 500.0
    approx = a - 0.5 * math.log(2 * math.pi * a)
    return _below("log I0(500) vs a - ln(2 pi a)/2 (abs)", abs(log_bessel_i0(a) - approx), 1e-3)


def check_log_i0_shape():
    a = np.linspace(0.0, 50.0, 2001)
    f = log_bessel_i0(a)
    d1 = np.diff(f)
    d2 = np.diff(f, 2)
    h = 1e-6
    slope0 = (log_bessel_i0(h) - log_bessel_i0(0.0)) / h
    bad = float(np.sum(d1 < 0) + np.sum(d2 < -1e-12)) + abs(slope0) * 1e3
    return _below("log I0 monotone, convex, zero slope at 0 (violations)", bad, 1e-2)


def check_ratio_series():
    worst = 0.0
    for a in (0.1, 0.5, 1.0, 2.0, 5.0, 10.0, 50.0):
        if a < 30:
            i0, i1 = series_i0(a)
            ref = i1 / i0
        else:
            ref = math.exp(log_bessel_i1(a) - log_bessel_i0(a))
        worst = max(worst, abs(bessel_ratio(a) - ref) / ref)
    return _below("I1/I0 vs series (rel)", worst, 1e-10)


def check_von_mises_moments(seed=11, n=100_000):
    rng = make_rng(seed)
    worst = 0.0
    for mean, kappa in ((math.pi / 3, 4.0), (0.0, 2.0), (5.0, 0.3), (1.0, 40.0)):
        x = sample_von_mises(mean, np.full(n, kappa), rng)
        emp = np.mean(np.exp(1j * x))
        expected = bessel_ratio(kappa) * np.exp(1j * mean)
        worst = max(worst, abs(emp - expected) * math.sqrt(n) / 4.0)
    return _below("von Mises mean resultant, |err| * sqrt(n) / 4", worst, 1.0)


# -- model ----------------------------------------------------------------


def check_global_phase(seed=12):
    rng = make_rng(seed)
    worst = 0.0
    for _ in range(20):
        p = CapBmParams.random(6, rng)
        s = PhasorState.random((6,), rng)
        shift = rng.uniform(0, 2 * math.pi)
        e0 = energy_capbm(p, s)
        e1 = energy_capbm(p, PhasorState(s.amps, s.phases + shift))
        worst = max(worst, abs(e0 - e1))
    return _below("energy invariant under global phase shift", worst, 1e-12)


def check_hermitian_realness(seed=13):
    rng = make_rng(seed)
    worst = 0.0
    for _ in range(20):
        p = CapBmParams.random(6, rng)
        z = PhasorState.random((6,), rng).z
        worst = max(worst, abs((z.conj() @ p.W @ z).imag))
    return _below("Im(z^H W z) for Hermitian W", worst, 1e-12)


def check_energy_reference(seed=14):
    rng = make_rng(seed)
    worst = 0.0
    for _ in range(20):
        p = CapBmParams.random(4, rng)
        s = PhasorState.random((4,), rng)
        W, J, eps = oracle.dense_couplings(p)
        worst = max(worst, abs(energy_capbm(p, s) - oracle.reference_energy(W, J, eps, s.z)[0]))
        r = CapRbmParams.random(3, 2, rng, w_scale=1.0, j_scale=1.0, bias_scale=1.0)
        v, h = PhasorState.random((3,), rng), PhasorState.random((2,), rng)
        full = CapBmParams.from_rbm(r)
        joint = PhasorState(np.concatenate([v.amps, h.amps]), np.concatenate([v.phases, h.phases]))
        worst = max(worst, abs(energy_caprbm(r, v, h) - energy_capbm(full, joint)))
    return _below("energy vs dense reference and RBM embedding", worst, 1e-12)


def check_amp_prob_shape():
    a = np.linspace(0, 20, 401)
    mu = np.linspace(-10, 10, 401)
    pa = amp_prob(InputSums(a, np.zeros_like(a), np.zeros_like(a)), -1.0)
    pm = amp_prob(InputSums(np.full_like(mu, 2.0), np.zeros_like(mu), mu), 0.5)
    h = 1e-6
    slope0 = (amp_prob(InputSums(h, 0.0, 0.0), 0.3) - amp_prob(InputSums(0.0, 0.0, 0.0), 0.3)) / h
    bad = float(np.sum(np.diff(pa) < 0) + np.sum(np.diff(pm) < 0)) + abs(slope0) * 1e3
    return _below("amp_prob monotone in a and mu, zero slope at a=0", bad, 1e-2)


def check_rate_bound(seed=15):
    rng = make_rng(seed)
    u = rng.normal(size=1000) * 10 + 1j * rng.normal(size=1000) * 10
    s = InputSums.from_complex(u, rng.normal(size=1000) * 5)
    z, p = unit_rate(s, rng.normal(size=1000) * 5)
    excess = float(np.max(np.abs(z) - p))
    return CheckResult("rate bound |E z| <= E|z| (max excess)", excess, 0.0, bool(excess <= 0.0), "<=")


# -- files ----------------------------------------------------------------


def check_round_trips(seed=16):
    rng = make_rng(seed)
    mismatches = 0
    with tempfile.TemporaryDirectory() as tmp:
        for params in (CapBmParams.random(5, rng), CapRbmParams.random(7, 3, rng, 1.0, 1.0, 1.0)):
            path = os.path.join(tmp, "m.capm")
            formats.save_params(params, path)
            with open(path, "rb") as f:
                raw = f.read()
            back = formats.load_params(path)
            mismatches += formats.encode_params(back) != raw
        ds = ComplexDataset(rng.normal(size=(4, 6)) + 1j * rng.normal(size=(4, 6)), (3, 2))
        path = os.path.join(tmp, "d.cpxd")
        save_dataset(ds, path)
        back = load_dataset(path)
        mismatches += back.samples.tobytes() != ds.samples.tobytes() or back.shape != ds.shape
    return CheckResult("CAPM/CPXD bit-exact round trips (mismatches)", mismatches, 0, mismatches == 0, "==")


# -- enumeration-based ---------------------------------------------------------


def check_conditionals(n_models=20, K=256, seed=21):
    """Enumerated conditionals against the closed-form amplitude and phase laws."""
    rng = make_rng(seed)
    amp_err = 0.0
    tv = 0.0
    for _ in range(n_models):
        params = CapBmParams.random(3, rng, b_scale=2.0, j_scale=1.0, eps_scale=1.0)
        dm = oracle.DiscretizedModel(params, K)
        rest = PhasorState(np.ones(3), rng.uniform(0, 2 * math.pi, 3))
        for j in range(3):
            s = input_sums(params, rest, j)
            p = amp_prob(s, params.eps[j])
            amp_err = max(amp_err, abs(oracle.exact_marginal_amp(dm, rest, j) - p) / p)
            mean, kappa = phase_conditional(s)
            tv = max(tv, oracle.phase_tv(dm, rest, j, mean, kappa))
    return [
        _below(f"A1 amplitude conditional vs enumeration, K={K} (rel)", amp_err, 1e-3),
        _below(f"A1 phase conditional TV vs von Mises, K={K}", tv, 1e-3),
    ]


def random_grid_data(n, n_visible, K, rng, p_on=0.6):
    amps = (rng.random((n, n_visible)) < p_on).astype(float)
    phases = 2 * math.pi * rng.integers(0, K, (n, n_visible)) / K
    return PhasorState(amps, phases)


def random_test_rbm(n_visible, n_hidden, rng):
    shape = (n_visible, n_hidden)
    mod = rng.uniform(0.2, 1.5, shape)
    ph = rng.uniform(0, 2 * math.pi, shape)
    return CapRbmParams(
        mod * np.exp(1j * ph),
        rng.normal(0, 0.7, shape),
        rng.normal(0, 0.7, n_visible),
        rng.normal(0, 0.7, n_hidden),
    )


def gradient_errors(params, data, K, step=1e-5, floor=1e-8):
    """Max relative error of the analytic gradients against finite differences."""
    dm = oracle.DiscretizedModel(params, K)
    pos = oracle.exact_data_stats(dm, data)
    neg = oracle.exact_model_stats(dm)
    analytic = polar_gradients(params, pos, neg)
    numeric = oracle.fd_gradients(dm, data, step=step)
    worst = 0.0
    for an, fd in zip(analytic, numeric):
        mask = np.abs(an) > floor
        if np.any(mask):
            worst = max(worst, float(np.max(np.abs(an[mask] - fd[mask]) / np.abs(an[mask]))))
    return worst


def check_gradients(n_models=10, K=32, seed=22):
    rng = make_rng(seed)
    worst = 0.0
    for _ in range(n_models):
        params = random_test_rbm(3, 2, rng)
        data = random_grid_data(8, 3, K, rng)
        worst = max(worst, gradient_errors(params, data, K))
    return _below(f"A2 analytic gradients vs finite differences, K={K} (rel)", worst, 1e-4)


def gibbs_tv(params, K=64, n_bins=4, n_chains=1000, n_sweeps=1000, burn_in=100, order="fixed", seed=23):
    """TV between chain frequencies and the enumerated law on coarse (amplitude, phase-bin) cells."""
    exact = oracle.coarse_table(oracle.enumerate_boltzmann(oracle.DiscretizedModel(params, K)), n_bins)
    rng = make_rng(seed)
    chain = ChainState(PhasorState.random((n_chains, params.n_units), rng), rng)
    for _ in range(burn_in):
        chain = gibbs_sweep(params, chain, order=order)
    counts = np.zeros_like(exact)
    for _ in range(n_sweeps):
        chain = gibbs_sweep(params, chain, order=order)
        counts += oracle.coarse_histogram(chain.state, K, n_bins)
    return oracle.total_variation(counts / n_sweeps, exact)


def rbm_block_tv(params, K=64, n_bins=4, n_chains=1000, n_steps=1000, burn_in=100, seed=24):
    """TV between block-Gibbs visible frequencies and the exact visible marginal."""
    exact = oracle.coarse_table(oracle.rbm_visible_table(oracle.DiscretizedModel(params, K)), n_bins)
    rng = make_rng(seed)
    v = PhasorState.random((n_chains, params.n_visible), rng)
    counts = np.zeros_like(exact)
    for step in range(burn_in + n_steps):
        h = rbm_sample_layer(params, v, VISIBLE_TO_HIDDEN, rng)
        v = rbm_sample_layer(params, h, HIDDEN_TO_VISIBLE, rng)
        if step >= burn_in:
            counts += oracle.coarse_histogram(v, K, n_bins)
    return oracle.total_variation(counts / n_steps, exact)


def stationarity_params(seed=25):
    return CapBmParams.random(3, make_rng(seed), b_scale=1.5, j_scale=1.0, eps_scale=0.5)


def check_gibbs_stationarity():
    params = stationarity_params()
    return [
        _below("A5 Gibbs chain TV vs enumeration (fixed order, 1e6 sweeps)", gibbs_tv(params), 0.02),
        _below("Gibbs chain TV vs enumeration (random order)", gibbs_tv(params, order="random", seed=26), 0.02),
    ]


def check_rbm_stationarity(seed=27):
    params = random_test_rbm(3, 2, make_rng(seed))
    return _below("RBM block sampler TV vs enumeration", rbm_block_tv(params), 0.03)


QUICK = (
    check_log_i0_series,
    check_log_i0_asymptotic,
    check_log_i0_shape,
    check_ratio_series,
    check_von_mises_moments,
    check_global_phase,
    check_hermitian_realness,
    check_energy_reference,
    check_amp_prob_shape,
    check_rate_bound,
    check_round_trips,
)
FULL = QUICK + (check_conditionals, check_gradients, check_gibbs_stationarity, check_rbm_stationarity)


def run_checks(level="quick", report=print):
    """Run the suite; returns the list of results. ``report`` receives one line per check."""
    suite = {"quick": QUICK, "full": FULL}[level]
    results = []
    for fn in suite:
        out = fn()
        for r in out if isinstance(out, list) else [out]:
            results.append(r)
            if report is not None:
                report(r.line())
    return results
