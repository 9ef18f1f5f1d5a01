"""Brute-force reference computations on phase-discretised machines.

Each unit takes one "off" state carrying measure 2*pi and K "on" states at
phases 2*pi*k/K carrying 2*pi/K each, so the per-unit measure (4*pi) mirrors
the continuous model: a sum over the two moduli with a phase integral under
each. Probabilities below are densities with respect to that measure.

Nothing here calls the energy, conditional or gradient code of the model,
sampler or learning modules; energies are recomputed from the dense complex
coupling matrix.
"""
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import i0e, logsumexp

from .errors import EnumerationGuardError, ShapeError
from .learning import GradientStats
from .model import CapBmParams, CapRbmParams, PhasorState

MAX_STATES = 10**7
_CHUNK = 1 << 16


@dataclass(frozen=True)
class DiscretizedModel:
    params: object
    K: int

    def __post_init__(self):
        K = int(self.K)
        if K < 16 or K & (K - 1):
            raise ValueError("K must be a power of two >= 16")
        if not isinstance(self.params, (CapBmParams, CapRbmParams)):
            raise TypeError("params must be CapBmParams or CapRbmParams")
        object.__setattr__(self, "K", K)

    @property
    def n_units(self):
        p = self.params
        return p.n_units if isinstance(p, CapBmParams) else p.n_visible + p.n_hidden

    @property
    def grid(self):
        return 2.0 * np.pi * np.arange(self.K) / self.K


def unit_table(K, clamped=False):
    """(amps, phases, log_weights) for the K+1 states of one unit; state 0 is off.

    With ``clamped`` the off state is dropped and only the K phases remain.
    """
    amps = np.ones(K + 1)
    amps[0] = 0.0
    phases = np.concatenate([[0.0], 2.0 * np.pi * np.arange(K) / K])
    log_w = np.full(K + 1, math.log(2.0 * np.pi / K))
    log_w[0] = math.log(2.0 * np.pi)
    if clamped:
        return amps[1:], phases[1:], log_w[1:]
    return amps, phases, log_w


def dense_couplings(params):
    """(W, J, eps) as dense (Hermitian, symmetric, vector) arrays of the full network."""
    if isinstance(params, CapBmParams):
        return params.b * np.exp(1j * params.theta), params.J, params.eps
    V, H = params.n_visible, params.n_hidden
    W = np.zeros((V + H, V + H), dtype=complex)
    J = np.zeros((V + H, V + H))
    W[:V, V:] = params.W
    W[V:, :V] = np.conj(params.W).T
    J[:V, V:] = params.J
    J[V:, :V] = params.J.T
    return W, J, np.concatenate([params.a, params.b])


def reference_energy(W, J, eps, z):
    """``-1/2 Re(z^H W z) - 1/2 |z|^T J |z| + eps.|z|`` for rows of ``z``."""
    z = np.atleast_2d(z)
    amps = np.abs(z)
    quad = np.einsum("mj,jk,mk->m", z.conj(), W, z)
    return -0.5 * quad.real - 0.5 * np.einsum("mj,jk,mk->m", amps, J, amps) + amps @ eps


def _guard(count, limit):
    if count > limit:
        raise EnumerationGuardError(f"{count} states exceed the enumeration limit {limit}")


@dataclass(frozen=True)
class BoltzmannTable:
    """Exact probabilities of every discretised state, indexed in mixed radix K+1."""

    probs: np.ndarray
    log_z: float
    n_units: int
    K: int
    clamped: bool = False

    def states(self, index):
        """Per-unit state indices (0 = off, k >= 1 = on at phase 2*pi*(k-1)/K)."""
        radix = self.K if self.clamped else self.K + 1
        digits = np.stack(np.unravel_index(index, (radix,) * self.n_units), axis=-1)
        return digits + 1 if self.clamped else digits


def enumerate_boltzmann(dm, max_states=MAX_STATES, clamp_amplitudes=False):
    """Exact law of the whole network; ``clamp_amplitudes`` keeps every unit on."""
    n, K = dm.n_units, dm.K
    radix = K if clamp_amplitudes else K + 1
    count = radix**n
    _guard(count, max_states)
    W, J, eps = dense_couplings(dm.params)
    amps, phases, log_w = unit_table(K, clamp_amplitudes)
    unit_z = amps * np.exp(1j * phases)
    log_p = np.empty(count)
    for start in range(0, count, _CHUNK):
        index = np.arange(start, min(start + _CHUNK, count))
        digits = np.stack(np.unravel_index(index, (radix,) * n), axis=-1)
        log_p[index] = log_w[digits].sum(axis=1) - reference_energy(W, J, eps, unit_z[digits])
    shift = log_p.max()
    total = math.fsum(np.exp(log_p - shift))
    log_z = shift + math.log(total)
    return BoltzmannTable(np.exp(log_p - log_z), log_z, n, K, clamp_amplitudes)


def _check_rest(dm, rest):
    if rest.amps.ndim != 1 or rest.n_units != dm.n_units:
        raise ShapeError("rest must be a single state of the full network")


def exact_conditional(dm, rest, j):
    """Probabilities of unit ``j``'s K+1 states with every other unit clamped to ``rest``."""
    _check_rest(dm, rest)
    if not 0 <= j < dm.n_units:
        raise IndexError(f"unit index {j} out of range")
    W, J, eps = dense_couplings(dm.params)
    amps, phases, log_w = unit_table(dm.K)
    z = np.tile(rest.z, (dm.K + 1, 1))
    z[:, j] = amps * np.exp(1j * phases)
    log_p = log_w - reference_energy(W, J, eps, z)
    return np.exp(log_p - logsumexp(log_p))


def exact_marginal_amp(dm, rest, j):
    """P(unit j active | rest) by direct summation over its states."""
    return float(1.0 - exact_conditional(dm, rest, j)[0])


def exact_phase_conditional(dm, rest, j):
    """Probabilities of the K phase bins of unit ``j`` given it is active."""
    p = exact_conditional(dm, rest, j)[1:]
    return p / math.fsum(p)


def von_mises_grid(mean, concentration, K):
    """Von Mises density at the K grid phases times the bin width 2*pi/K."""
    grid = 2.0 * np.pi * np.arange(K) / K
    dens = np.exp(concentration * (np.cos(grid - mean) - 1.0)) / (2.0 * np.pi * i0e(concentration))
    return dens * 2.0 * np.pi / K


def phase_tv(dm, rest, j, mean, concentration):
    """Total variation between the enumerated phase law and a von Mises(mean, concentration)."""
    p = exact_phase_conditional(dm, rest, j)
    q = von_mises_grid(mean, concentration, dm.K)
    return 0.5 * float(np.abs(p - q).sum())


def snap_to_grid(state, K, tol=1e-9):
    """Per-unit state indices (0 = off, 1 + k = on at phase 2*pi*k/K) of grid-aligned states."""
    k = np.rint(state.phases * K / (2.0 * np.pi))
    if np.any(np.abs(state.phases - 2.0 * np.pi * k / K) > tol * K):
        raise ValueError("phases are not on the K-point grid")
    k = k.astype(int) % K
    return np.where(state.amps > 0, k + 1, 0)


def _rbm(dm):
    if not isinstance(dm.params, CapRbmParams):
        raise TypeError("this oracle needs a restricted machine")
    return dm.params


def _hidden_terms(rbm, K, vz, vamps):
    """Per visible configuration: log of each hidden unit's state sum and its moments.

    Given the visibles the hidden units are independent, so the sum over all
    hidden configurations is the product of per-unit sums over K+1 states.
    Returns ``(log_sums (M,H), complex_mean (M,H), amp_mean (M,H))``.
    """
    amps, phases, log_w = unit_table(K)
    hz = amps * np.exp(1j * phases)
    cross = vz.conj() @ rbm.W
    field = vamps @ rbm.J
    # -E restricted to hidden unit k in state s: Re(cross_k * hz_s) + |hz_s| (field_k - b_k)
    neg_e = (cross[..., None] * hz).real + amps * (field - rbm.b)[..., None]
    log_terms = log_w + neg_e
    log_sums = logsumexp(log_terms, axis=-1)
    post = np.exp(log_terms - log_sums[..., None])
    return log_sums, post @ hz, post @ amps


def _visible_chunks(V, K, max_states):
    count = (K + 1) ** V
    _guard(count, max_states)
    amps, phases, log_w = unit_table(K)
    unit_z = amps * np.exp(1j * phases)
    for start in range(0, count, _CHUNK):
        index = np.arange(start, min(start + _CHUNK, count))
        digits = np.stack(np.unravel_index(index, (K + 1,) * V), axis=-1)
        yield unit_z[digits], amps[digits], log_w[digits].sum(axis=1)


def _log_unnorm(rbm, K, vz, vamps):
    log_sums, hz_mean, hamp_mean = _hidden_terms(rbm, K, vz, vamps)
    return log_sums.sum(axis=-1) - vamps @ rbm.a, hz_mean, hamp_mean


def rbm_log_partition(dm, max_states=MAX_STATES):
    rbm = _rbm(dm)
    parts = []
    for vz, vamps, log_w in _visible_chunks(rbm.n_visible, dm.K, max_states):
        parts.append(log_w + _log_unnorm(rbm, dm.K, vz, vamps)[0])
    log_p = np.concatenate(parts)
    shift = log_p.max()
    return shift + math.log(math.fsum(np.exp(log_p - shift)))


def rbm_visible_table(dm, max_states=MAX_STATES):
    """Exact marginal law of the visible layer, with the hidden layer summed out."""
    rbm = _rbm(dm)
    parts = []
    for vz, vamps, log_w in _visible_chunks(rbm.n_visible, dm.K, max_states):
        parts.append(log_w + _log_unnorm(rbm, dm.K, vz, vamps)[0])
    log_p = np.concatenate(parts)
    shift = log_p.max()
    log_z = shift + math.log(math.fsum(np.exp(log_p - shift)))
    return BoltzmannTable(np.exp(log_p - log_z), log_z, rbm.n_visible, dm.K)


def _data_arrays(dm, data):
    rbm = _rbm(dm)
    if data.n_units != rbm.n_visible:
        raise ShapeError("data does not match the visible layer")
    idx = snap_to_grid(data, dm.K)
    amps, phases, _ = unit_table(dm.K)
    idx = np.atleast_2d(idx)
    return amps[idx] * np.exp(1j * phases[idx]), amps[idx]


def exact_loglik(dm, data, reduce="sum", max_states=MAX_STATES):
    """Exact log density of grid-aligned visible data, hidden layer summed out.

    ``reduce`` is "sum", "mean" or "none".
    """
    rbm = _rbm(dm)
    vz, vamps = _data_arrays(dm, data)
    log_f = _log_unnorm(rbm, dm.K, vz, vamps)[0]
    ll = log_f - rbm_log_partition(dm, max_states)
    if reduce == "sum":
        return math.fsum(ll)
    if reduce == "mean":
        return math.fsum(ll) / ll.size
    if reduce == "none":
        return ll
    raise ValueError(f"unknown reduction {reduce!r}")


def exact_data_stats(dm, data):
    """Data-side expectations: data visibles against exact hidden posteriors."""
    rbm = _rbm(dm)
    vz, vamps = _data_arrays(dm, data)
    _, hz, hamp = _hidden_terms(rbm, dm.K, vz, vamps)
    n = vz.shape[0]
    return GradientStats(vz.T @ hz.conj() / n, vamps.T @ hamp / n, vamps.mean(axis=0), hamp.mean(axis=0))


def exact_model_stats(dm, max_states=MAX_STATES):
    """Model-side expectations from the exact joint distribution."""
    rbm = _rbm(dm)
    log_z = rbm_log_partition(dm, max_states)
    V, H = rbm.n_visible, rbm.n_hidden
    pair_c = np.zeros((V, H), dtype=complex)
    pair_a = np.zeros((V, H))
    unit_v = np.zeros(V)
    unit_h = np.zeros(H)
    for vz, vamps, log_w in _visible_chunks(V, dm.K, max_states):
        log_f, hz, hamp = _log_unnorm(rbm, dm.K, vz, vamps)
        p = np.exp(log_w + log_f - log_z)
        pair_c += (vz * p[:, None]).T @ hz.conj()
        pair_a += (vamps * p[:, None]).T @ hamp
        unit_v += p @ vamps
        unit_h += p @ hamp
    return GradientStats(pair_c, pair_a, unit_v, unit_h)


def fd_gradients(dm, data, step=1e-5, max_states=MAX_STATES):
    """Centred finite differences of the mean exact log-likelihood.

    Coordinates: coupling modulus, coupling phase, J, visible bias, hidden
    bias; returned in that order with the parameter shapes.
    """
    rbm = _rbm(dm)
    mod, ph = np.abs(rbm.W), np.angle(rbm.W)

    def loglik(mod_, ph_, J_, a_, b_):
        p = CapRbmParams(mod_ * np.exp(1j * ph_), J_, a_, b_)
        return exact_loglik(DiscretizedModel(p, dm.K), data, reduce="mean", max_states=max_states)

    base = [mod, ph, rbm.J, rbm.a, rbm.b]
    grads = []
    for which, arr in enumerate(base):
        g = np.zeros_like(arr)
        for idx in np.ndindex(arr.shape):
            vals = []
            for sign in (1.0, -1.0):
                args = [x.copy() for x in base]
                args[which][idx] += sign * step
                vals.append(loglik(*args))
            g[idx] = (vals[0] - vals[1]) / (2.0 * step)
        grads.append(g)
    return tuple(grads)


def coarse_cells(K, n_bins):
    """Map each of a unit's K+1 discrete states to a coarse cell (0 = off, 1..n_bins)."""
    k = np.arange(K)
    return np.concatenate([[0], 1 + np.floor((k + 0.5) * n_bins / K).astype(int)])


def coarse_table(table, n_bins):
    """Aggregate an exact table into cells of (amplitude, coarse phase bin) per unit.

    Coarse bin edges sit half a fine bin below the grid points so each fine
    state stands for the phase interval centred on it.
    """
    n, K = table.n_units, table.K
    cell_of = coarse_cells(K, n_bins)
    out = np.zeros((n_bins + 1) ** n)
    for start in range(0, table.probs.size, _CHUNK):
        index = np.arange(start, min(start + _CHUNK, table.probs.size))
        cells = cell_of[table.states(index)]
        flat = np.ravel_multi_index(tuple(cells.T), (n_bins + 1,) * n)
        np.add.at(out, flat, table.probs[index])
    return out


def coarse_histogram(states, K, n_bins):
    """Empirical cell frequencies of continuous states, binned consistently with ``coarse_table``."""
    amps = np.atleast_2d(states.amps)
    phases = np.atleast_2d(states.phases)
    n = amps.shape[1]
    shifted = np.mod(phases + np.pi / K, 2.0 * np.pi)
    bins = np.minimum((shifted * n_bins / (2.0 * np.pi)).astype(int), n_bins - 1)
    cells = np.where(amps > 0, 1 + bins, 0)
    flat = np.ravel_multi_index(tuple(cells.T), (n_bins + 1,) * n)
    return np.bincount(flat, minlength=(n_bins + 1) ** n) / amps.shape[0]


def total_variation(p, q):
    return 0.5 * float(np.abs(np.asarray(p) - np.asarray(q)).sum())
