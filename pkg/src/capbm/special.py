"""Modified Bessel functions in the log domain, angle helpers and von Mises sampling.

Everything here is vectorised over numpy arrays and accepts plain floats.
``I0`` and ``I1`` are evaluated with their power series below ``SERIES_CUTOFF``
and with the large-argument asymptotic expansion above it, so nothing
overflows even for arguments of order 1e6.
"""
import numpy as np

from .errors import DomainError

TWO_PI = 2.0 * np.pi

SERIES_CUTOFF = 15.0
_SERIES_TERMS = 40
_ASYMPTOTIC_TERMS = 30


def make_rng(seed=0):
    """Project-wide random source: numpy ``Generator`` on the counter-based Philox bit generator."""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))


def split_rng(rng, n):
    """Spawn ``n`` statistically independent child generators (SeedSequence spawning)."""
    return rng.spawn(n)


def derive_seed(seed, stream):
    """Integer seed for an independent named stream of a run seed."""
    return int(np.random.SeedSequence([seed, stream]).generate_state(1)[0])


def wrap_angle(x):
    """Map angles to [0, 2*pi)."""
    out = np.mod(x, TWO_PI)
    # mod of a tiny negative number rounds up to exactly 2*pi
    out = np.where(out >= TWO_PI, 0.0, out)
    if np.ndim(out) == 0:
        return float(out)
    return out


def _check_arg(a, name="a"):
    a = np.asarray(a, dtype=float)
    if not np.all(np.isfinite(a)):
        raise DomainError(f"{name} must be finite")
    if np.any(a < 0):
        raise DomainError(f"{name} must be nonnegative")
    return a


def _series(a):
    """Power series parts for a < SERIES_CUTOFF.

    Returns ``(tail0, sum1)`` with ``I0(a) = 1 + tail0`` and
    ``I1(a) = (a/2) * sum1``. All terms are positive; the loop stops once the
    largest remaining term is below double precision of its sum.
    """
    x = 0.25 * a * a
    x_max = x.max(initial=0.0)
    t0 = np.ones_like(a)
    t1 = np.ones_like(a)
    tail0 = np.zeros_like(a)
    sum1 = np.ones_like(a)
    for m in range(1, _SERIES_TERMS):
        t0 = t0 * x / (m * m)
        t1 = t1 * x / (m * (m + 1))
        tail0 += t0
        sum1 += t1
        if m * m > x_max and not np.any(t0 > 1e-17 * (1.0 + tail0)):
            break
    return tail0, sum1


def _asymptotic(a):
    """Asymptotic sums S0, S1 with I_nu(a) = e^a / sqrt(2 pi a) * S_nu, valid for a >= SERIES_CUTOFF."""
    inv8a = 1.0 / (8.0 * a)
    c0 = np.ones_like(a)
    c1 = np.ones_like(a)
    s0 = np.ones_like(a)
    s1 = np.ones_like(a)
    for k in range(1, _ASYMPTOTIC_TERMS):
        odd2 = (2 * k - 1) ** 2
        c0 = c0 * odd2 * inv8a / k
        c1 = c1 * (odd2 - 4) * inv8a / k
        s0 += c0
        s1 += c1
        if not np.any(c0 > 1e-17):
            break
    return s0, s1


def _evaluate(a, small_fn, large_fn):
    """Apply ``small_fn`` below the cutoff and ``large_fn`` above it, elementwise."""
    flat = a.ravel()
    out = np.empty_like(flat)
    small = flat < SERIES_CUTOFF
    if np.all(small):
        return small_fn(flat).reshape(a.shape)
    if np.any(small):
        out[small] = small_fn(flat[small])
    out[~small] = large_fn(flat[~small])
    return out.reshape(a.shape)


def _scalarize(out, a):
    return float(out) if np.ndim(a) == 0 else out


def log_bessel_i0(a):
    """Natural log of the modified Bessel function I0 for ``a >= 0``."""
    a = _check_arg(a)

    def small(x):
        return np.log1p(_series(x)[0])

    def large(x):
        return x - 0.5 * np.log(TWO_PI * x) + np.log(_asymptotic(x)[0])

    return _scalarize(_evaluate(a, small, large), a)


def log_bessel_i1(a):
    """Natural log of I1; -inf at 0."""
    a = _check_arg(a)

    def small(x):
        with np.errstate(divide="ignore"):
            return np.log(0.5 * x) + np.log(_series(x)[1])

    def large(x):
        return x - 0.5 * np.log(TWO_PI * x) + np.log(_asymptotic(x)[1])

    return _scalarize(_evaluate(a, small, large), a)


def bessel_ratio(a):
    """I1(a) / I0(a): mean resultant length of a von Mises law with concentration ``a``."""
    a = _check_arg(a)

    def small(x):
        tail0, sum1 = _series(x)
        return 0.5 * x * sum1 / (1.0 + tail0)

    def large(x):
        s0, s1 = _asymptotic(x)
        return s1 / s0

    return _scalarize(_evaluate(a, small, large), a)


def log_i0_and_ratio(a):
    """``(ln I0(a), I1(a)/I0(a))`` from a single series or asymptotic pass."""
    a = _check_arg(a)
    flat = a.ravel()
    log_i0 = np.empty_like(flat)
    ratio = np.empty_like(flat)
    small = flat < SERIES_CUTOFF
    if np.any(small):
        x = flat[small]
        tail0, sum1 = _series(x)
        log_i0[small] = np.log1p(tail0)
        ratio[small] = 0.5 * x * sum1 / (1.0 + tail0)
    if not np.all(small):
        x = flat[~small]
        s0, s1 = _asymptotic(x)
        log_i0[~small] = x - 0.5 * np.log(TWO_PI * x) + np.log(s0)
        ratio[~small] = s1 / s0
    if np.ndim(a) == 0:
        return float(log_i0[0]), float(ratio[0])
    return log_i0.reshape(a.shape), ratio.reshape(a.shape)


def sample_von_mises(mean, concentration, rng):
    """Draw exact von Mises variates with the Best-Fisher rejection algorithm.

    ``mean`` and ``concentration`` broadcast against each other; the result
    has the broadcast shape and lies in [0, 2*pi). Zero concentration gives a
    uniform angle. The intermediate quantities are rearranged so that very
    large concentrations do not lose precision to cancellation.
    """
    kappa = np.asarray(concentration, dtype=float)
    if not np.all(np.isfinite(kappa)) or np.any(kappa < 0):
        raise DomainError("concentration must be finite and nonnegative")
    mean = np.asarray(mean, dtype=float)
    shape = np.broadcast_shapes(mean.shape, kappa.shape)
    mean = np.broadcast_to(mean, shape).ravel()
    kappa = np.broadcast_to(kappa, shape).ravel()
    n = kappa.size
    out = np.empty(n)

    uniform = kappa < 1e-8
    if np.any(uniform):
        out[uniform] = rng.uniform(0.0, TWO_PI, size=int(uniform.sum()))

    idx = np.flatnonzero(~uniform)
    if idx.size:
        k = kappa[idx]
        root = np.sqrt(1.0 + 4.0 * k * k)
        tau = 1.0 + root
        rho = 2.0 * k * tau / ((root + 1.0) * (tau + np.sqrt(2.0 * tau)))
        # 1 - rho, with 2k - tau evaluated without cancellation
        two_k_minus_tau = -4.0 * k / (2.0 * k - 1.0 + np.sqrt(1.0 + 4.0 * k * k))
        one_minus_rho = (two_k_minus_tau + np.sqrt(2.0 * tau)) / (2.0 * k)
        r = (1.0 + rho * rho) / (2.0 * rho)
        r_minus_1 = one_minus_rho * one_minus_rho / (2.0 * rho)
        theta = np.empty(idx.size)
        pending = np.arange(idx.size)
        while pending.size:
            m = pending.size
            u1 = rng.random(m)
            u2 = rng.random(m)
            u3 = rng.random(m)
            zc = np.cos(np.pi * u1)
            rr = r[pending]
            denom = rr + zc
            one_minus_f = r_minus_1[pending] * (1.0 - zc) / denom
            c = k[pending] * r_minus_1[pending] * (rr + 1.0) / denom
            with np.errstate(divide="ignore"):
                accept = (c * (2.0 - c) - u2 > 0) | (np.log(c / u2) + 1.0 - c >= 0)
            ang = 2.0 * np.arcsin(np.sqrt(np.clip(0.5 * one_minus_f, 0.0, 1.0)))
            ang = np.where(u3 > 0.5, ang, -ang)
            theta[pending[accept]] = ang[accept]
            pending = pending[~accept]
        out[idx] = mean[idx] + theta

    out = wrap_angle(out).reshape(shape)
    if shape == ():
        return float(out)
    return out
