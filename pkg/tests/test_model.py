import math

import numpy as np
import pytest

from capbm import oracle
from capbm.checks import random_grid_data
from capbm.errors import DomainError, ShapeError
from capbm.model import (
    CapBmParams,
    CapRbmParams,
    InputSums,
    PhasorState,
    amp_prob,
    energy_capbm,
    energy_caprbm,
    free_energy,
    hidden_to_visible_sums,
    input_sums,
    phase_conditional,
    visible_to_hidden_sums,
)
from capbm.special import make_rng


@pytest.fixture
def rng():
    return make_rng(1234)


def two_unit(b=1.0, theta=0.0, J=0.0, eps=(0.0, 0.0)):
    return CapBmParams(
        np.array([[0, b], [b, 0]]),
        np.array([[0, theta], [-theta, 0]]),
        np.array([[0, J], [J, 0]]),
        np.array(eps),
    )


# -- states and parameters ---------------------------------------------------


def test_state_validation():
    with pytest.raises(DomainError):
        PhasorState(np.array([0.5]), np.array([0.0]))
    with pytest.raises(ShapeError):
        PhasorState(np.zeros(2), np.zeros(3))
    s = PhasorState(np.array([1.0]), np.array([-math.pi / 2]))
    assert s.phases[0] == pytest.approx(1.5 * math.pi)


def test_state_from_complex():
    s = PhasorState.from_complex([0, 1j, -1])
    assert list(s.amps) == [0, 1, 1]
    assert np.allclose(s.z, [0, 1j, -1])
    with pytest.raises(DomainError):
        PhasorState.from_complex([0.5])


def test_params_invariants():
    with pytest.raises(DomainError):
        two_unit(b=-1.0)
    with pytest.raises(DomainError):
        CapBmParams(np.zeros((2, 2)), np.array([[0, 1.0], [1.0, 0]]), np.zeros((2, 2)), np.zeros(2))
    with pytest.raises(DomainError):
        CapBmParams(np.eye(2), np.zeros((2, 2)), np.zeros((2, 2)), np.zeros(2))
    with pytest.raises(ShapeError):
        CapBmParams(np.zeros((2, 2)), np.zeros((2, 2)), np.zeros((3, 3)), np.zeros(2))
    with pytest.raises(ShapeError):
        CapRbmParams(np.zeros((2, 3)), np.zeros((2, 2)), np.zeros(2), np.zeros(3))
    # theta = pi is its own negative modulo 2 pi
    p = two_unit(theta=math.pi)
    assert np.allclose(p.W, p.W.conj().T)


def test_params_random_are_valid(rng):
    for n in (1, 2, 7):
        p = CapBmParams.random(n, rng)
        assert np.allclose(p.W, p.W.conj().T)
        assert np.all(np.diag(p.b) == 0)


def test_from_complex_round_trip(rng):
    p = CapBmParams.random(5, rng)
    q = CapBmParams.from_complex(p.W, p.J, p.eps)
    assert np.allclose(q.W, p.W, atol=1e-14)


def test_rbm_polar_view(rng):
    r = CapRbmParams.random(4, 3, rng, w_scale=1.0)
    assert np.all(r.coupling_modulus >= 0)
    back = CapRbmParams.from_polar(r.coupling_modulus, r.coupling_phase, r.J, r.a, r.b)
    assert np.allclose(back.W, r.W)


# -- energies ------------------------------------------------------------


def test_energy_all_off_is_zero(rng):
    p = CapBmParams.random(4, rng)
    assert energy_capbm(p, PhasorState.off(4)) == 0.0
    r = CapRbmParams.random(3, 2, rng, 1.0, 1.0, 1.0)
    assert energy_caprbm(r, PhasorState.off(3), PhasorState.off(2)) == 0.0


def test_energy_two_aligned_units():
    s = PhasorState(np.ones(2), np.array([0.7, 0.7]))
    assert energy_capbm(two_unit(), s) == pytest.approx(-1.0, abs=1e-15)


def test_energy_matches_dense_evaluator(rng):
    for _ in range(25):
        p = CapBmParams.random(4, rng)
        s = PhasorState.random((4,), rng)
        W, J, eps = oracle.dense_couplings(p)
        assert abs(energy_capbm(p, s) - oracle.reference_energy(W, J, eps, s.z)[0]) < 1e-12


def test_energy_batched(rng):
    p = CapBmParams.random(4, rng)
    s = PhasorState.random((6, 4), rng)
    e = energy_capbm(p, s)
    assert e.shape == (6,)
    assert np.allclose(e, [energy_capbm(p, s[i]) for i in range(6)], atol=1e-14)


def test_rbm_energy_single_pair():
    phi, tv, th = 0.4, 1.1, 2.9
    r = CapRbmParams(np.array([[np.exp(1j * phi)]]), np.zeros((1, 1)), np.zeros(1), np.zeros(1))
    v = PhasorState(np.ones(1), np.array([tv]))
    h = PhasorState(np.ones(1), np.array([th]))
    assert energy_caprbm(r, v, h) == pytest.approx(-math.cos(th - tv + phi), abs=1e-15)


def test_rbm_energy_matches_embedding(rng):
    for _ in range(25):
        r = CapRbmParams.random(3, 2, rng, 1.0, 1.0, 1.0)
        v, h = PhasorState.random((3,), rng), PhasorState.random((2,), rng)
        full = CapBmParams.from_rbm(r)
        joint = PhasorState(np.r_[v.amps, h.amps], np.r_[v.phases, h.phases])
        W, J, eps = oracle.dense_couplings(r)
        assert abs(energy_caprbm(r, v, h) - energy_capbm(full, joint)) < 1e-12
        assert abs(energy_caprbm(r, v, h) - oracle.reference_energy(W, J, eps, joint.z)[0]) < 1e-12


def test_energy_global_phase_invariance(rng):
    p = CapBmParams.random(6, rng)
    s = PhasorState.random((6,), rng)
    for shift in (0.3, math.pi, 5.9):
        assert energy_capbm(p, PhasorState(s.amps, s.phases + shift)) == pytest.approx(energy_capbm(p, s), abs=1e-12)


# -- conditionals -------------------------------------------------------------


def test_input_sums_isolated_unit(rng):
    p = CapBmParams.random(3, rng)
    s = input_sums(p, PhasorState(np.array([1.0, 0, 0]), np.array([1.0, 2.0, 3.0])), 0)
    assert (s.a, s.alpha, s.mu) == (0.0, 0.0, 0.0)


def test_input_sums_single_term():
    p = two_unit(b=2.0, theta=math.pi / 4)
    s = input_sums(p, PhasorState(np.array([0.0, 1.0]), np.array([0.0, math.pi / 4])), 0)
    assert s.a == pytest.approx(2.0)
    assert s.alpha == pytest.approx(math.pi / 2)


def test_input_sums_dense(rng):
    p = CapBmParams.random(5, rng)
    st = PhasorState.random((5,), rng)
    for j in range(5):
        s = input_sums(p, st, j)
        u = sum(p.W[j, k] * st.z[k] for k in range(5) if k != j and st.amps[k])
        mu = sum(p.J[j, k] for k in range(5) if k != j and st.amps[k])
        assert abs(s.u - u) < 1e-12 and abs(s.mu - mu) < 1e-12


def test_rbm_sums_match_embedding(rng):
    r = CapRbmParams.random(3, 2, rng, 1.0, 1.0, 1.0)
    full = CapBmParams.from_rbm(r)
    v, h = PhasorState.random((3,), rng, p_on=0.8), PhasorState.random((2,), rng, p_on=0.8)
    joint = PhasorState(np.r_[v.amps, h.amps], np.r_[v.phases, h.phases])
    sh = visible_to_hidden_sums(r, v)
    sv = hidden_to_visible_sums(r, h)
    for k in range(2):
        ref = input_sums(full, PhasorState(np.r_[v.amps, 0, 0], np.r_[v.phases, 0, 0]), 3 + k)
        assert abs(sh.u[k] - ref.u) < 1e-12 and abs(sh.mu[k] - ref.mu) < 1e-12
    for j in range(3):
        rest = PhasorState(np.r_[0, 0, 0, h.amps], np.r_[0, 0, 0, h.phases])
        ref = input_sums(full, rest, j)
        assert abs(sv.u[j] - ref.u) < 1e-12 and abs(sv.mu[j] - ref.mu) < 1e-12
    assert joint.n_units == 5


def test_amp_prob_examples():
    assert amp_prob(InputSums(0.0, 0.0, 0.7), 0.7) == 0.5
    assert amp_prob(InputSums(0.0, 0.0, math.log(3)), 0.0) == pytest.approx(0.75)
    assert amp_prob(InputSums(2.0, 0.0, 0.0), 0.0) == pytest.approx(0.69508, abs=1e-5)


def test_amp_prob_saturates_without_overflow():
    assert amp_prob(InputSums(1e5, 0.0, 0.0), 0.0) == 1.0
    assert amp_prob(InputSums(0.0, 0.0, -1e4), 0.0) == 0.0
    with pytest.raises(DomainError):
        amp_prob(InputSums(1.0, 0.0, np.nan), 0.0)


def test_phase_conditional_readoff():
    assert phase_conditional(InputSums.from_complex(3 * np.exp(1.2j), 0.0)) == pytest.approx((1.2, 3.0))
    assert phase_conditional(InputSums.from_complex(0j, 0.0)) == (0.0, 0.0)


def test_free_energy_matches_enumeration(rng):
    # exp(-F(v)) integrates the hidden layer; compare with the oracle's per-visible sum
    r = CapRbmParams.random(3, 2, rng, 1.0, 0.5, 0.5)
    K = 64
    dm = oracle.DiscretizedModel(r, K)
    v = random_grid_data(5, 3, K, rng)
    ref = oracle.exact_loglik(dm, v, reduce="none") + oracle.rbm_log_partition(dm)
    # the hidden sum is over a K-point phase grid: spectrally accurate for smooth integrands
    assert np.allclose(-free_energy(r, v), ref, atol=1e-9)
