import math

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from capbm import formats
from capbm.model import CapBmParams, CapRbmParams, InputSums, PhasorState, amp_prob, energy_capbm, energy_caprbm
from capbm.sampler import unit_rate
from capbm.special import bessel_ratio, log_bessel_i0, make_rng, wrap_angle

finite = st.floats(-1e6, 1e6, allow_nan=False)
nonneg = st.floats(0.0, 1e5, allow_nan=False)
settings.register_profile("capbm", max_examples=60, deadline=None)
settings.load_profile("capbm")


@given(nonneg, nonneg)
def test_log_i0_monotone(a, b):
    lo, hi = sorted((a, b))
    assert log_bessel_i0(lo) <= log_bessel_i0(hi)
    assert 0.0 <= bessel_ratio(lo) <= bessel_ratio(hi) < 1.0


@given(st.floats(-1e9, 1e9, allow_nan=False))
def test_wrap_angle_range(x):
    w = wrap_angle(x)
    assert 0.0 <= w < 2 * math.pi
    assert abs(math.cos(w) - math.cos(x)) < 1e-15 * abs(x) + 1e-12


@given(nonneg, st.floats(0, 2 * math.pi), finite, finite)
def test_rate_bound(a, alpha, mu, eps):
    z, p = unit_rate(InputSums(a, alpha, mu), eps)
    assert 0.0 <= p <= 1.0
    assert abs(z) <= p


@given(nonneg, st.floats(-50, 50), st.floats(-50, 50), st.floats(-50, 50))
def test_amp_prob_monotone_in_mu(a, mu1, mu2, eps):
    lo, hi = sorted((mu1, mu2))
    assert amp_prob(InputSums(a, 0.0, lo), eps) <= amp_prob(InputSums(a, 0.0, hi), eps)


@given(st.integers(1, 6), st.integers(0, 2**32 - 1), st.floats(0, 2 * math.pi))
def test_energy_global_phase(n, seed, shift):
    rng = make_rng(seed)
    p = CapBmParams.random(n, rng, b_scale=3.0)
    s = PhasorState.random((n,), rng)
    rotated = PhasorState(s.amps, s.phases + shift)
    assert abs(energy_capbm(p, s) - energy_capbm(p, rotated)) < 1e-10


@given(st.integers(1, 4), st.integers(1, 4), st.integers(0, 2**32 - 1), st.floats(0, 2 * math.pi))
def test_rbm_energy_global_phase(V, H, seed, shift):
    rng = make_rng(seed)
    r = CapRbmParams.random(V, H, rng, 2.0, 1.0, 1.0)
    v, h = PhasorState.random((V,), rng), PhasorState.random((H,), rng)
    e0 = energy_caprbm(r, v, h)
    e1 = energy_caprbm(r, PhasorState(v.amps, v.phases + shift), PhasorState(h.amps, h.phases + shift))
    assert abs(e0 - e1) < 1e-10


@given(st.integers(1, 5), st.integers(1, 5), st.integers(0, 2**32 - 1))
def test_capm_round_trip(V, H, seed):
    rng = make_rng(seed)
    for p in (CapBmParams.random(V, rng), CapRbmParams.random(V, H, rng, 1.0, 1.0, 1.0)):
        raw = formats.encode_params(p)
        assert formats.encode_params(formats.decode_params(raw)) == raw


@given(arrays(np.complex128, st.tuples(st.integers(0, 4), st.integers(1, 6)),
              elements=st.complex_numbers(max_magnitude=1e100, allow_nan=False, allow_infinity=False)))
def test_cpxd_round_trip(samples):
    raw = formats.encode_dataset(samples)
    back, shape = formats.decode_dataset(raw)
    assert shape is None
    assert back.tobytes() == samples.tobytes()
