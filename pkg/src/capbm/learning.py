"""Maximum-likelihood gradients and CD-1 / PCD training for the restricted machine.

All gradients returned here point uphill on the data log-likelihood:

    d/d b_jk     =  <|v_j||h_k| cos(theta_jk + phi_k - phi_j)>_data - <...>_model
    d/d theta_jk = -<|v_j||h_k| b_jk sin(theta_jk + phi_k - phi_j)>_data + <...>_model
    d/d J_jk     =  <|v_j||h_k|>_data - <|v_j||h_k|>_model
    d/d a_j      = -<|v_j|>_data + <|v_j|>_model      (same for the hidden bias)

Training keeps ``W`` in rectangular form, where the same gradient is
``<v h*>_data - <v h*>_model``; the polar pair above is its chain-rule image.
"""
import json
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import ShapeError
from .formats import save_params
from .model import CapRbmParams, PhasorState, free_energy, visible_to_hidden_sums
from .sampler import (
    HIDDEN_TO_VISIBLE,
    VISIBLE_TO_HIDDEN,
    layer_rate,
    rbm_reconstruct,
    rbm_sample_layer,
    sample_from_sums,
    sums_rate,
)
from .special import make_rng


@dataclass(frozen=True)
class GradientStats:
    """Batch averages ``<v h*>``, ``<|v||h|>``, ``<|v|>`` and ``<|h|>``."""

    pair_complex: np.ndarray
    pair_amp: np.ndarray
    unit_amp_v: np.ndarray
    unit_amp_h: np.ndarray


@dataclass
class TrainConfig:
    learning_rate: float = 0.01
    epochs: int = 10
    batch_size: int = 50
    # None resolves to 1e-4 for PCD and 0 for CD-1
    weight_decay: float = None
    algorithm: str = "cd1"
    n_persistent_chains: int = None
    seed: int = 0
    amp_coupling: bool = True
    monitor_size: int = 500
    log_every: int = 0

    def __post_init__(self):
        self.algorithm = self.algorithm.lower()
        if self.algorithm not in ("cd1", "pcd"):
            raise ValueError(f"unknown algorithm {self.algorithm!r}")
        if self.weight_decay is None:
            self.weight_decay = 1e-4 if self.algorithm == "pcd" else 0.0
        if self.n_persistent_chains is None:
            self.n_persistent_chains = self.batch_size
        if self.learning_rate < 0 or self.weight_decay < 0:
            raise ValueError("learning_rate and weight_decay must be nonnegative")
        if self.epochs < 0 or self.batch_size < 1 or self.n_persistent_chains < 1:
            raise ValueError("epochs must be >= 0, batch_size and chains >= 1")


@dataclass
class TrainLog:
    records: list = field(default_factory=list)

    def add(self, epoch, batch, metric, value):
        self.records.append({"epoch": epoch, "batch": batch, "metric": metric, "value": float(value)})

    def values(self, metric):
        return [r["value"] for r in self.records if r["metric"] == metric]

    def write(self, path):
        with open(path, "w") as f:
            for r in self.records:
                f.write(json.dumps(r) + "\n")

    @classmethod
    def read(cls, path):
        with open(path) as f:
            return cls([json.loads(line) for line in f if line.strip()])


def collect_stats(v, h, v_amp=None, h_amp=None):
    """Average pair and unit statistics over a batch.

    ``v`` and ``h`` are complex arrays of shape (batch, n) or (n,). They may be
    samples or rates; for rates pass the expected moduli as ``v_amp`` /
    ``h_amp`` since ``E|z|`` differs from ``|E z|``.
    """
    v = np.atleast_2d(np.asarray(v, dtype=complex))
    h = np.atleast_2d(np.asarray(h, dtype=complex))
    if v.shape[0] != h.shape[0]:
        raise ShapeError("visible and hidden batches differ in length")
    v_amp = np.abs(v) if v_amp is None else np.atleast_2d(np.asarray(v_amp, dtype=float))
    h_amp = np.abs(h) if h_amp is None else np.atleast_2d(np.asarray(h_amp, dtype=float))
    if v_amp.shape != v.shape or h_amp.shape != h.shape:
        raise ShapeError("amplitude arrays must match the complex arrays")
    n = v.shape[0]
    return GradientStats(
        pair_complex=v.T @ h.conj() / n,
        pair_amp=v_amp.T @ h_amp / n,
        unit_amp_v=v_amp.mean(axis=0),
        unit_amp_h=h_amp.mean(axis=0),
    )


def rect_gradients(positive, negative):
    """(dW, dJ, da, db) with ``W`` in rectangular form."""
    return (
        positive.pair_complex - negative.pair_complex,
        positive.pair_amp - negative.pair_amp,
        negative.unit_amp_v - positive.unit_amp_v,
        negative.unit_amp_h - positive.unit_amp_h,
    )


def polar_gradients(params, positive, negative):
    """(db, dtheta, dJ, d_eps_v, d_eps_h) for ``W_jk = b_jk exp(i theta_jk)``."""
    rot = np.exp(1j * np.angle(params.W))
    # S_jk = <v_j* h_k>, so b |v||h| cos(theta + phi_k - phi_j) = b Re(e^{i theta} S)
    diff = np.conj(positive.pair_complex) - np.conj(negative.pair_complex)
    db = np.real(rot * diff)
    dtheta = -np.abs(params.W) * np.imag(rot * diff)
    _, dJ, da, dbias = rect_gradients(positive, negative)
    return db, dtheta, dJ, da, dbias


def positive_stats(params, v):
    """Visibles ``v`` against the exact hidden rates they induce."""
    hr = layer_rate(params, v, VISIBLE_TO_HIDDEN)
    return collect_stats(v.z, hr.complex_mean, v.amps, hr.amp_mean)


def _apply(params, positive, negative, cfg):
    dW, dJ, da, db = rect_gradients(positive, negative)
    lr, wd = cfg.learning_rate, cfg.weight_decay
    W = params.W + lr * (dW - wd * params.W)
    if cfg.amp_coupling:
        J = params.J + lr * (dJ - wd * params.J)
    else:
        J = np.zeros_like(params.J)
    return CapRbmParams(W, J, params.a + lr * da, params.b + lr * db)


def contrastive_step(params, batch, cfg, rng, negative_start=None):
    """Shared body of CD-1 and PCD.

    The negative chain starts at ``negative_start`` (the batch itself for
    CD-1, the persistent chains for PCD) and is advanced one step; its
    statistics use the sampled visibles and the hidden rates they induce.
    Returns ``(new_params, advanced_chains, positive, negative)``.
    """
    if batch.amps.shape[0] == 0:
        raise ValueError("empty batch")
    if batch.n_units != params.n_visible:
        raise ShapeError("batch does not match the visible layer")
    start = batch if negative_start is None else negative_start
    if start.n_units != params.n_visible:
        raise ShapeError("persistent chains do not match the visible layer")
    s_data = visible_to_hidden_sums(params, batch)
    h_data = sums_rate(s_data, params.b)
    pos = collect_stats(batch.z, h_data.complex_mean, batch.amps, h_data.amp_mean)
    if negative_start is None:
        h = sample_from_sums(s_data, params.b, rng, p=h_data.amp_mean)
    else:
        h = rbm_sample_layer(params, start, VISIBLE_TO_HIDDEN, rng)
    v_neg = rbm_sample_layer(params, h, HIDDEN_TO_VISIBLE, rng)
    neg = positive_stats(params, v_neg)
    return _apply(params, pos, neg, cfg), v_neg, pos, neg


def cd1_update(params, batch, cfg, rng):
    new, _, _, _ = contrastive_step(params, batch, cfg, rng)
    return new


def pcd_update(params, batch, cfg, persistent_chains, rng):
    new, chains, _, _ = contrastive_step(params, batch, cfg, rng, negative_start=persistent_chains)
    return new, chains


def amp_cosine_similarity(data_amps, rate_amps):
    """Mean over samples of the cosine between data moduli and expected moduli."""
    x = np.atleast_2d(data_amps)
    y = np.atleast_2d(rate_amps)
    num = np.sum(x * y, axis=1)
    den = np.linalg.norm(x, axis=1) * np.linalg.norm(y, axis=1)
    return float(np.mean(np.where(den > 0, num / np.where(den > 0, den, 1.0), 0.0)))


def as_states(data):
    """Accept a ComplexDataset, a complex array or a PhasorState and return a PhasorState."""
    if isinstance(data, PhasorState):
        return data
    samples = getattr(data, "samples", data)
    return PhasorState.from_complex(np.asarray(samples))


def init_params(data, n_hidden, rng, w_scale=0.01):
    """Small random complex couplings, J = 0, visible bias matched to the data on-rate."""
    v = as_states(data)
    p = np.clip(v.amps.mean(axis=0), 1e-3, 1 - 1e-3)
    params = CapRbmParams.random(v.n_units, n_hidden, rng, w_scale=w_scale)
    return params.replace(a=-np.log(p / (1.0 - p)))


def _monitor(params, v, rng, log, epoch, batch):
    rate = rbm_reconstruct(params, v, 1, rng)
    log.add(epoch, batch, "recon_amp_cosine", amp_cosine_similarity(v.amps, rate.amp_mean))
    log.add(epoch, batch, "free_energy", np.mean(free_energy(params, v)))


def train(params, data, cfg, callbacks=(), persistent_chains=None, checkpoint_path=None):
    """Mini-batch CD-1 or PCD.

    Returns ``(params, log)``, plus the final persistent chains when
    ``cfg.algorithm == "pcd"``. Each callback is called as
    ``cb(epoch, params, log)`` at the end of every epoch. All randomness
    comes from ``cfg.seed``.
    """
    v = as_states(data)
    n = v.amps.shape[0]
    if v.n_units != params.n_visible:
        raise ShapeError(f"data has {v.n_units} units, model has {params.n_visible} visibles")
    if cfg.epochs and cfg.batch_size > n:
        raise ValueError("batch_size exceeds the dataset size")
    if not cfg.amp_coupling:
        params = params.replace(J=np.zeros_like(params.J))
    rng = make_rng(cfg.seed)
    monitor_rng = make_rng([cfg.seed, 1])
    monitor = v[: min(cfg.monitor_size, n)]
    log = TrainLog()
    pcd = cfg.algorithm == "pcd"
    if pcd and persistent_chains is None:
        persistent_chains = PhasorState.random((cfg.n_persistent_chains, params.n_visible), rng)

    for epoch in range(cfg.epochs):
        order = rng.permutation(n)
        for bi, start in enumerate(range(0, n, cfg.batch_size)):
            batch = v[order[start : start + cfg.batch_size]]
            if pcd:
                params, persistent_chains = pcd_update(params, batch, cfg, persistent_chains, rng)
            else:
                params = cd1_update(params, batch, cfg, rng)
            if cfg.log_every and (bi + 1) % cfg.log_every == 0:
                _monitor(params, monitor, monitor_rng, log, epoch, bi)
        _monitor(params, monitor, monitor_rng, log, epoch, -1)
        if checkpoint_path is not None:
            save_params(params, checkpoint_path)
        for cb in callbacks:
            cb(epoch, params, log)
    if pcd:
        return params, log, persistent_chains
    return params, log


def config_dict(cfg):
    return asdict(cfg)
