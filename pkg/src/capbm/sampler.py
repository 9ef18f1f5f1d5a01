"""Gibbs sampling and rates.

Full machines are swept unit by unit. Restricted machines alternate block
updates of the hidden and the visible layer; one *step* (or alternation) is
one hidden update followed by one visible update.

Chains may be batched: a ``PhasorState`` with shape ``(n_chains, n_units)``
runs that many independent chains in lockstep, sharing one generator.
"""
from dataclasses import dataclass, replace

import numpy as np
from scipy.special import expit

from .errors import ShapeError
from .model import (
    InputSums,
    PhasorState,
    amp_logit,
    amp_prob,
    hidden_to_visible_sums,
    visible_to_hidden_sums,
)
from .special import log_i0_and_ratio, sample_von_mises

VISIBLE_TO_HIDDEN = "visible->hidden"
HIDDEN_TO_VISIBLE = "hidden->visible"


@dataclass(frozen=True)
class ChainState:
    state: PhasorState
    rng: np.random.Generator
    sweep_count: int = 0


@dataclass(frozen=True)
class Rate:
    """Expected complex activity and expected modulus per unit.

    ``abs(complex_mean) <= amp_mean`` always; the two differ whenever the
    phase is not deterministic.
    """

    complex_mean: np.ndarray
    amp_mean: np.ndarray


def _sample_unit(amps, phases, j, params, rng, clamp_amplitudes):
    z = amps * np.exp(1j * phases)
    u = z @ params.W[j]
    mu = amps @ params.J[j]
    s = InputSums.from_complex(u, mu)
    if clamp_amplitudes:
        on = np.ones(np.shape(u), dtype=bool)
    else:
        on = rng.random(np.shape(u)) < amp_prob(s, params.eps[j])
    amps[..., j] = on
    if np.ndim(on) == 0:
        if on:
            phases[..., j] = sample_von_mises(s.alpha, s.a, rng)
        return
    idx = np.flatnonzero(on)
    if idx.size:
        col = phases[..., j]
        col.flat[idx] = sample_von_mises(np.ravel(s.alpha)[idx], np.ravel(s.a)[idx], rng)
        phases[..., j] = col


def gibbs_update_unit(params, chain, j, clamp_amplitudes=False):
    """Resample unit ``j``: amplitude from its Bernoulli conditional, then the phase if active.

    An inactive unit keeps its previous phase. With ``clamp_amplitudes`` every
    amplitude is forced to 1, which recovers the pure-phase (directional unit)
    machine.
    """
    if not 0 <= j < params.n_units:
        raise IndexError(f"unit index {j} out of range")
    if chain.state.n_units != params.n_units:
        raise ShapeError("chain state does not match the model")
    amps = chain.state.amps.copy()
    phases = chain.state.phases.copy()
    _sample_unit(amps, phases, j, params, chain.rng, clamp_amplitudes)
    return replace(chain, state=PhasorState(amps, phases))


def gibbs_sweep(params, chain, order="fixed", clamp_amplitudes=False):
    """Update every unit once, in ascending order or in a fresh random permutation."""
    if chain.state.n_units != params.n_units:
        raise ShapeError("chain state does not match the model")
    n = params.n_units
    if order == "fixed":
        units = range(n)
    elif order == "random":
        units = chain.rng.permutation(n)
    else:
        raise ValueError(f"unknown sweep order {order!r}")
    amps = chain.state.amps.copy()
    phases = chain.state.phases.copy()
    if clamp_amplitudes:
        amps[...] = 1.0
    for j in units:
        _sample_unit(amps, phases, int(j), params, chain.rng, clamp_amplitudes)
    return ChainState(PhasorState(amps, phases), chain.rng, chain.sweep_count + 1)


def run_chain(params, chain, n_sweeps, order="fixed", clamp_amplitudes=False, callback=None):
    """Apply ``n_sweeps`` sweeps; ``callback(chain)`` is called after each one."""
    for _ in range(n_sweeps):
        chain = gibbs_sweep(params, chain, order=order, clamp_amplitudes=clamp_amplitudes)
        if callback is not None:
            callback(chain)
    return chain


def sample_from_sums(s, eps, rng, p=None):
    """Draw independent units given their input sums and biases.

    ``p`` may carry activation probabilities already computed from the same
    sums. Inactive units get phase 0.
    """
    if p is None:
        p = amp_prob(s, eps)
    on = rng.random(np.shape(p)) < p
    phases = np.zeros(np.shape(p))
    idx = np.flatnonzero(on)
    if idx.size:
        phases.flat[idx] = sample_von_mises(
            np.ravel(s.alpha)[idx], np.ravel(s.a)[idx], rng
        )
    return PhasorState(on.astype(float), phases)


def unit_rate(s, eps):
    """(expected complex value, expected modulus) of a unit with inputs ``s`` and bias ``eps``.

    The complex mean is the activation probability times the von Mises
    mean resultant ``I1(a)/I0(a)`` in the direction ``alpha``.
    """
    log_i0, ratio = log_i0_and_ratio(s.a)
    p = expit(amp_logit(s, eps, log_i0=log_i0))
    z = p * ratio * np.exp(1j * np.asarray(s.alpha))
    if np.ndim(p) == 0:
        return complex(z), float(p)
    return z, p


def sums_rate(s, eps):
    return Rate(*unit_rate(s, eps))


def _layer_sums(params, given, direction):
    if direction == VISIBLE_TO_HIDDEN:
        return visible_to_hidden_sums(params, given), params.b
    if direction == HIDDEN_TO_VISIBLE:
        return hidden_to_visible_sums(params, given), params.a
    raise ValueError(f"unknown direction {direction!r}")


def rbm_sample_layer(params, given, direction, rng):
    """Sample the target layer of a restricted machine given the source layer."""
    s, bias = _layer_sums(params, given, direction)
    return sample_from_sums(s, bias, rng)


def layer_rate(params, given, direction):
    s, bias = _layer_sums(params, given, direction)
    return Rate(*unit_rate(s, bias))


def rbm_alternate(params, v, rng):
    """One step: sample hidden given ``v``, then visible given that hidden; returns (v', h)."""
    h = rbm_sample_layer(params, v, VISIBLE_TO_HIDDEN, rng)
    return rbm_sample_layer(params, h, HIDDEN_TO_VISIBLE, rng), h


def rbm_reconstruct(params, v0, n_alternations, rng, checkpoints=None):
    """Visible rates after ``n_alternations`` steps started from ``v0``.

    The last visible update reports the rate instead of a sample. With
    ``checkpoints`` (an iterable of step counts <= n_alternations) a dict
    ``{step: Rate}`` is returned instead, all from a single chain.
    """
    want = sorted(set(checkpoints)) if checkpoints is not None else [n_alternations]
    if want and want[-1] > n_alternations:
        raise ValueError("checkpoint beyond the number of alternations")
    out = {}
    if 0 in want:
        out[0] = Rate(v0.z, v0.amps.copy())
    v = v0
    for step in range(1, n_alternations + 1):
        h = rbm_sample_layer(params, v, VISIBLE_TO_HIDDEN, rng)
        if step in want:
            out[step] = layer_rate(params, h, HIDDEN_TO_VISIBLE)
        if step < n_alternations:
            v = rbm_sample_layer(params, h, HIDDEN_TO_VISIBLE, rng)
    if checkpoints is None:
        return out[n_alternations]
    return out


def rbm_free_samples(params, n_chains, n_steps, rng, checkpoints=None):
    """Run free chains from random visible states (Bernoulli(0.5) amplitudes, uniform phases)."""
    v0 = PhasorState.random((n_chains, params.n_visible), rng)
    return rbm_reconstruct(params, v0, n_steps, rng, checkpoints=checkpoints)
