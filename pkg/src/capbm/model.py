"""State and parameter containers, energies and single-unit conditionals.

A unit is a phasor ``z_j = |z_j| exp(i phi_j)`` with ``|z_j|`` in {0, 1}.
The fully connected machine has energy

    E(z) = -1/2 z^H W z - 1/2 |z|^T J |z| + eps^T |z|,   W_jk = b_jk exp(i theta_jk),

and the restricted (bipartite) machine

    E(v, h) = -Re(v^H W h) - |v|^T J |h| + a^T |v| + b^T |h|.

States may carry leading batch dimensions: ``amps`` and ``phases`` have
shape ``(..., n_units)`` and every function here broadcasts over them.
"""
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.special import expit

from .errors import DomainError, ShapeError
from .special import TWO_PI, log_bessel_i0, wrap_angle


@dataclass(frozen=True)
class PhasorState:
    """Unit amplitudes (0/1) and phases in [0, 2*pi).

    The phase of an inactive unit is kept but has no effect on anything.
    """

    amps: np.ndarray
    phases: np.ndarray

    def __post_init__(self):
        amps = np.asarray(self.amps, dtype=float)
        phases = np.asarray(self.phases, dtype=float)
        if amps.shape != phases.shape:
            raise ShapeError(f"amps {amps.shape} and phases {phases.shape} differ")
        if not np.all((amps == 0) | (amps == 1)):
            raise DomainError("amplitudes must be 0 or 1")
        object.__setattr__(self, "amps", amps)
        object.__setattr__(self, "phases", np.asarray(wrap_angle(phases), dtype=float))

    @property
    def n_units(self):
        return self.amps.shape[-1]

    @cached_property
    def z(self):
        """Complex unit values ``amps * exp(i phases)``."""
        return self.amps * np.exp(1j * self.phases)

    def copy(self):
        return PhasorState(self.amps.copy(), self.phases.copy())

    def __getitem__(self, idx):
        return PhasorState(self.amps[idx], self.phases[idx])

    @classmethod
    def from_complex(cls, z, tol=1e-9):
        """Build a state from complex values whose moduli are 0 or 1 (within ``tol``)."""
        z = np.asarray(z, dtype=complex)
        mod = np.abs(z)
        on = np.abs(mod - 1.0) <= tol
        off = mod <= tol
        if not np.all(on | off):
            raise DomainError("complex values must have modulus 0 or 1")
        phases = np.where(on, np.angle(z), 0.0)
        return cls(on.astype(float), phases)

    @classmethod
    def off(cls, shape):
        return cls(np.zeros(shape), np.zeros(shape))

    @classmethod
    def random(cls, shape, rng, p_on=0.5):
        """Independent Bernoulli(p_on) amplitudes with uniform phases."""
        amps = (rng.random(shape) < p_on).astype(float)
        return cls(amps, rng.uniform(0.0, TWO_PI, size=shape))


@dataclass(frozen=True)
class CapBmParams:
    """Fully connected machine in polar form.

    ``b`` (symmetric, >= 0) and ``theta`` (antisymmetric mod 2*pi) define the
    Hermitian coupling ``W = b * exp(i theta)``; ``J`` is symmetric and real;
    ``eps`` is the bias. All diagonals are zero.
    """

    b: np.ndarray
    theta: np.ndarray
    J: np.ndarray
    eps: np.ndarray

    def __post_init__(self):
        b = np.array(self.b, dtype=float)
        theta = np.array(self.theta, dtype=float)
        J = np.array(self.J, dtype=float)
        eps = np.array(self.eps, dtype=float)
        n = eps.shape[0] if eps.ndim == 1 else -1
        for name, m in (("b", b), ("theta", theta), ("J", J)):
            if m.shape != (n, n):
                raise ShapeError(f"{name} must be {n}x{n}, got {m.shape}")
        if np.any(b < 0):
            raise DomainError("coupling moduli b must be nonnegative")
        if not (np.allclose(b, b.T, atol=1e-12) and np.allclose(J, J.T, atol=1e-12)):
            raise DomainError("b and J must be symmetric")
        anti = np.angle(np.exp(1j * (theta + theta.T)))
        if not np.allclose(anti, 0.0, atol=1e-9):
            raise DomainError("theta must be antisymmetric modulo 2*pi")
        if np.any(np.diag(b) != 0) or np.any(np.diag(J) != 0):
            raise DomainError("self-couplings must be zero")
        theta = np.asarray(wrap_angle(theta))
        np.fill_diagonal(theta, 0.0)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "theta", theta)
        object.__setattr__(self, "J", J)
        object.__setattr__(self, "eps", eps)

    @property
    def n_units(self):
        return self.eps.shape[0]

    @property
    def W(self):
        return self.b * np.exp(1j * self.theta)

    @classmethod
    def from_complex(cls, W, J, eps):
        """Polar decomposition of a Hermitian ``W``; the diagonal is dropped."""
        W = np.array(W, dtype=complex)
        if not np.allclose(W, W.conj().T, atol=1e-12):
            raise DomainError("W must be Hermitian")
        np.fill_diagonal(W, 0.0)
        b = np.triu(np.abs(W), 1)
        theta = np.triu(np.angle(W), 1)
        return cls(b + b.T, theta - theta.T, J, eps)

    @classmethod
    def random(cls, n, rng, b_scale=1.0, j_scale=1.0, eps_scale=1.0):
        b = np.triu(rng.uniform(0.0, b_scale, (n, n)), 1)
        theta = np.triu(rng.uniform(0.0, TWO_PI, (n, n)), 1)
        J = np.triu(rng.normal(0.0, j_scale, (n, n)), 1)
        return cls(b + b.T, theta - theta.T, J + J.T, rng.normal(0.0, eps_scale, n))

    @classmethod
    def from_rbm(cls, rbm):
        """Embed a bipartite machine as a fully connected one with block couplings.

        The off-diagonal blocks appear twice in ``z^H W z`` which cancels the 1/2.
        """
        V, H = rbm.n_visible, rbm.n_hidden
        W = np.zeros((V + H, V + H), dtype=complex)
        W[:V, V:] = rbm.W
        W[V:, :V] = rbm.W.conj().T
        J = np.zeros((V + H, V + H))
        J[:V, V:] = rbm.J
        J[V:, :V] = rbm.J.T
        return cls.from_complex(W, J, np.concatenate([rbm.a, rbm.b]))


@dataclass(frozen=True)
class CapRbmParams:
    """Bipartite machine: complex ``W`` (V x H), real ``J`` (V x H), biases ``a`` (V) and ``b`` (H)."""

    W: np.ndarray
    J: np.ndarray
    a: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        W = np.array(self.W, dtype=complex)
        J = np.array(self.J, dtype=float)
        a = np.array(self.a, dtype=float)
        b = np.array(self.b, dtype=float)
        if a.ndim != 1 or b.ndim != 1:
            raise ShapeError("biases must be vectors")
        if W.shape != (a.size, b.size) or J.shape != W.shape:
            raise ShapeError(f"W and J must be {a.size}x{b.size}, got {W.shape} and {J.shape}")
        object.__setattr__(self, "W", W)
        object.__setattr__(self, "J", J)
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)

    @property
    def n_visible(self):
        return self.a.size

    @property
    def n_hidden(self):
        return self.b.size

    @property
    def coupling_modulus(self):
        return np.abs(self.W)

    @property
    def coupling_phase(self):
        return np.asarray(wrap_angle(np.angle(self.W)))

    @classmethod
    def zeros(cls, n_visible, n_hidden):
        return cls(
            np.zeros((n_visible, n_hidden), dtype=complex),
            np.zeros((n_visible, n_hidden)),
            np.zeros(n_visible),
            np.zeros(n_hidden),
        )

    @classmethod
    def random(cls, n_visible, n_hidden, rng, w_scale=0.01, j_scale=0.0, bias_scale=0.0):
        shape = (n_visible, n_hidden)
        W = w_scale * (rng.normal(size=shape) + 1j * rng.normal(size=shape)) / np.sqrt(2.0)
        return cls(
            W,
            j_scale * rng.normal(size=shape),
            bias_scale * rng.normal(size=n_visible),
            bias_scale * rng.normal(size=n_hidden),
        )

    @classmethod
    def from_polar(cls, modulus, phase, J, a, b):
        return cls(np.asarray(modulus) * np.exp(1j * np.asarray(phase)), J, a, b)

    def replace(self, **changes):
        fields = {"W": self.W, "J": self.J, "a": self.a, "b": self.b}
        fields.update(changes)
        return CapRbmParams(**fields)


@dataclass(frozen=True)
class InputSums:
    """Inputs to one unit (or a batch of units): ``u = a exp(i alpha)`` and ``mu``."""

    a: np.ndarray
    alpha: np.ndarray
    mu: np.ndarray

    @classmethod
    def from_complex(cls, u, mu):
        u = np.asarray(u, dtype=complex)
        a = np.abs(u)
        alpha = np.where(a > 0, wrap_angle(np.angle(u)), 0.0)
        if np.ndim(u) == 0:
            return cls(float(a), float(alpha), float(mu))
        return cls(a, alpha, np.asarray(mu, dtype=float))

    @property
    def u(self):
        return self.a * np.exp(1j * np.asarray(self.alpha))


def _check_state(state, n):
    if state.n_units != n:
        raise ShapeError(f"state has {state.n_units} units, model has {n}")


def energy_capbm(params, state):
    """Energy of a fully connected machine; real by construction.

    Uses the polar pair expansion
    ``-sum_{j<k} b_jk |z_j||z_k| cos(theta_jk + phi_k - phi_j)``
    so no imaginary residue is ever formed.
    """
    _check_state(state, params.n_units)
    amps, ph = state.amps, state.phases
    rel = params.theta + ph[..., None, :] - ph[..., :, None]
    pair_on = amps[..., :, None] * amps[..., None, :]
    coupling = 0.5 * np.sum(params.b * pair_on * np.cos(rel), axis=(-2, -1))
    amp_coupling = 0.5 * np.einsum("...j,jk,...k->...", amps, params.J, amps)
    out = -coupling - amp_coupling + amps @ params.eps
    return float(out) if np.ndim(out) == 0 else out


def energy_caprbm(params, v, h):
    """Energy of the bipartite machine; ``-Re(v^H W h) - |v|^T J |h| + a.|v| + b.|h|``."""
    if v.n_units != params.n_visible or h.n_units != params.n_hidden:
        raise ShapeError("state sizes do not match the RBM")
    cross = np.einsum("...j,jk,...k->...", v.z.conj(), params.W, h.z).real
    amp = np.einsum("...j,jk,...k->...", v.amps, params.J, h.amps)
    out = -cross - amp + v.amps @ params.a + h.amps @ params.b
    return float(out) if np.ndim(out) == 0 else out


def input_sums(params, state, j):
    """Input sums to unit ``j`` of a fully connected machine.

    Only active units contribute; the diagonal is zero so the k != j
    restriction is automatic.
    """
    _check_state(state, params.n_units)
    if not 0 <= j < params.n_units:
        raise IndexError(f"unit index {j} out of range")
    u = state.z @ params.W[j]
    mu = state.amps @ params.J[j]
    return InputSums.from_complex(u, mu)


def visible_to_hidden_sums(params, v):
    """Hidden-layer input sums ``u = W^H v`` and ``mu = J^T |v|``."""
    if v.n_units != params.n_visible:
        raise ShapeError("visible state size does not match the RBM")
    return InputSums.from_complex(v.z @ params.W.conj(), v.amps @ params.J)


def hidden_to_visible_sums(params, h):
    """Visible-layer input sums ``u = W h`` and ``mu = J |h|``."""
    if h.n_units != params.n_hidden:
        raise ShapeError("hidden state size does not match the RBM")
    return InputSums.from_complex(h.z @ params.W.T, h.amps @ params.J.T)


def amp_logit(s, eps, log_i0=None):
    """Log-odds of the unit being active: ``mu - eps + ln I0(a)``."""
    mu = np.asarray(s.mu, dtype=float)
    eps = np.asarray(eps, dtype=float)
    if not (np.all(np.isfinite(mu)) and np.all(np.isfinite(eps))):
        raise DomainError("input sums and bias must be finite")
    if log_i0 is None:
        log_i0 = log_bessel_i0(s.a)
    return mu - eps + log_i0


def amp_prob(s, eps):
    """Probability that a unit is active given the rest of the network."""
    out = expit(amp_logit(s, eps))
    return float(out) if np.ndim(out) == 0 else out


def phase_conditional(s):
    """(mean, concentration) of the von Mises phase law of an active unit."""
    return s.alpha, s.a


def free_energy(params, v):
    """Free energy of visible states with the hidden layer summed out analytically.

    ``F(v) = a.|v| - sum_k log(1 + exp(mu_k - b_k + ln I0(|u_k|))) - H log(2 pi)``.
    """
    s = visible_to_hidden_sums(params, v)
    logits = amp_logit(s, params.b)
    out = v.amps @ params.a - np.sum(np.logaddexp(0.0, logits), axis=-1)
    out = out - params.n_hidden * np.log(TWO_PI)
    return float(out) if np.ndim(out) == 0 else out
