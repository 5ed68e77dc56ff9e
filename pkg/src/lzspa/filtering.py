"""Discrete filtering through a known memoryless channel with an SPA standing in for the noisy-sequence law.

Orientation: ``channel.pi[x, z] = P(Z = z | X = x)``.  The clean marginal
is recovered from a noisy one as ``inv_t @ p_z`` where ``inv_t`` is the
(left pseudo-) inverse of ``pi.T``; that needs ``|A_X| <= |A_Z|`` and full
rank, which covers the square invertible case as well as the 2-in/3-out
channel of the additive-noise Markov experiment.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .spa import SPA

TIE_TOL = 1e-9
EXACT_ENUM_LIMIT = 4096


class ChannelError(ValueError):
    pass


@dataclass(frozen=True)
class Channel:
    pi: np.ndarray
    inv_t: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        pi = np.asarray(self.pi, dtype=np.float64)
        if pi.ndim != 2:
            raise ChannelError("channel matrix must be 2-D")
        if np.any(pi < 0) or not np.allclose(pi.sum(axis=1), 1.0, atol=1e-9):
            raise ChannelError("channel rows must be PMFs")
        nx, nz = pi.shape
        if nx > nz or np.linalg.matrix_rank(pi) < nx:
            raise ChannelError("channel must have full row rank (left-invertible transpose)")
        inv_t = np.linalg.pinv(pi.T)
        if not np.allclose(inv_t @ pi.T, np.eye(nx), atol=1e-9):
            raise ChannelError("pseudo-inverse residual above tolerance")
        object.__setattr__(self, "pi", pi)
        object.__setattr__(self, "inv_t", inv_t)

    @property
    def n_inputs(self) -> int:
        return self.pi.shape[0]

    @property
    def n_outputs(self) -> int:
        return self.pi.shape[1]

    @property
    def c1(self) -> float:
        """Largest absolute entry of the inverse map times ``|A_X|``."""
        return float(np.abs(self.inv_t).max() * self.n_inputs)

    @classmethod
    def bsc(cls, delta: float) -> "Channel":
        return cls(np.array([[1 - delta, delta], [delta, 1 - delta]]))

    @classmethod
    def identity(cls, size: int) -> "Channel":
        return cls(np.eye(size))


@dataclass(frozen=True)
class LossMatrix:
    """``lam[x, xhat]``; ``recon`` optionally maps estimate indices to values."""

    lam: np.ndarray
    recon: np.ndarray | None = None

    def __post_init__(self):
        lam = np.asarray(self.lam, dtype=np.float64)
        if lam.ndim != 2 or np.any(lam < 0):
            raise ValueError("loss matrix must be 2-D and non-negative")
        object.__setattr__(self, "lam", lam)

    @property
    def lambda_max(self) -> float:
        return float(self.lam.max())

    @classmethod
    def hamming(cls, size: int) -> "LossMatrix":
        return cls(1.0 - np.eye(size), np.arange(size, dtype=np.float64))

    @classmethod
    def squared(cls, source_values: Sequence[float], recon_values: Sequence[float] | None = None) -> "LossMatrix":
        src = np.asarray(source_values, dtype=np.float64)
        rec = src if recon_values is None else np.asarray(recon_values, dtype=np.float64)
        return cls((src[:, None] - rec[None, :]) ** 2, rec)


def squared_loss_pm1(grid_points: int = 201) -> LossMatrix:
    """Squared error for X in {-1, +1}, estimates on an even grid over [-1, 1].

    The grid contains 0 and is fine enough that the Bayes response is the
    posterior mean up to grid resolution.
    """
    return LossMatrix.squared([-1.0, 1.0], np.linspace(-1.0, 1.0, grid_points))


def bayes_response(p_x, loss: LossMatrix) -> int:
    """Index of the estimate minimizing expected loss; near-ties go to the lowest index."""
    return int(bayes_responses(np.asarray(p_x, dtype=np.float64)[None, :], loss)[0])


def bayes_responses(posteriors: np.ndarray, loss: LossMatrix) -> np.ndarray:
    expected = np.asarray(posteriors, dtype=np.float64) @ loss.lam
    best = expected.min(axis=1, keepdims=True)
    near = expected <= best + TIE_TOL * (1.0 + np.abs(best))
    return near.argmax(axis=1)


def _clamp(v: np.ndarray) -> tuple[np.ndarray, float]:
    neg = float(-v[v < 0].sum()) if np.any(v < 0) else 0.0
    v = np.maximum(v, 0.0)
    s = v.sum()
    return (v / s if s > 0 else v), neg


def posterior_F(p_z, channel: Channel, z: int) -> tuple[np.ndarray, float]:
    """``P(X | Z = z)`` from a noisy marginal ``p_z``: ``pi[:, z] * (inv_t @ p_z) / p_z[z]``.

    Returns the posterior clamped onto the simplex together with the
    negative mass of the inverted marginal ``inv_t @ p_z`` (zero whenever
    ``p_z`` lies in the range of the channel).  If clamping wipes out every entry
    the likelihood column ``pi[:, z]`` alone is used.
    """
    p_z = np.asarray(p_z, dtype=np.float64)
    if not p_z[z] > 0:
        raise ChannelError(f"observed symbol {z} has zero predicted probability")
    p_x = channel.inv_t @ p_z
    neg = float(-p_x[p_x < 0].sum())
    post, _ = _clamp(channel.pi[:, z] * p_x / p_z[z])
    if post.sum() == 0:
        col = channel.pi[:, z]
        post = col / col.sum()
    return post, neg


def clean_marginal(p_z, channel: Channel) -> tuple[np.ndarray, float]:
    """``inv_t @ p_z`` clamped onto the simplex (used by the delayed filter)."""
    p_x, neg = _clamp(channel.inv_t @ np.asarray(p_z, dtype=np.float64))
    if p_x.sum() == 0:
        p_x = np.full(channel.n_inputs, 1.0 / channel.n_inputs)
    return p_x, neg


# -- regimes ---------------------------------------------------------------------


@dataclass(frozen=True)
class FilterConfig:
    regime: str = "causal"
    lag: int = 0
    mc_samples: int | None = None
    seed: int = 0

    def __post_init__(self):
        if self.regime not in ("causal", "delay", "lookahead"):
            raise ValueError(f"unknown regime {self.regime!r}")
        if self.regime == "delay" and self.lag < 1:
            raise ValueError("delay must be >= 1")
        if self.regime == "lookahead" and self.lag < 0:
            raise ValueError("look-ahead must be >= 0")
        if self.mc_samples is not None and self.mc_samples < 1:
            raise ValueError("mc_samples must be >= 1")

    @classmethod
    def parse(cls, text: str, mc_samples: int | None = None, seed: int = 0) -> "FilterConfig":
        """``causal``, ``delay:d`` or ``lookahead:l``."""
        name, _, arg = text.partition(":")
        return cls(name, int(arg) if arg else 0, mc_samples, seed)

    @property
    def label(self) -> str:
        return "causal" if self.regime == "causal" else f"{self.regime}:{self.lag}"


@dataclass
class FilterResult:
    estimates: np.ndarray
    posteriors: np.ndarray
    spa_bits: float = 0.0
    clamp_max: float = 0.0

    def values(self, loss: LossMatrix) -> np.ndarray:
        rec = loss.recon if loss.recon is not None else np.arange(loss.lam.shape[1], dtype=np.float64)
        return rec[self.estimates]


def _check_alphabet(spa: SPA, channel: Channel) -> None:
    if spa.alphabet_size != channel.n_outputs:
        raise ChannelError(f"SPA alphabet {spa.alphabet_size} != channel output alphabet {channel.n_outputs}")


def causal_filter(spa: SPA, channel: Channel, loss: LossMatrix, zs: Sequence[int]) -> FilterResult:
    """Bayes response to ``F(Q(.|Z^{t-1}), pi, Z_t)``; the SPA then observes ``Z_t``.

    The SPA is consumed: it ends up having observed the whole noisy sequence.
    """
    _check_alphabet(spa, channel)
    n = len(zs)
    posts = np.empty((n, channel.n_inputs))
    bits = 0.0
    worst = 0.0
    for t, z in enumerate(zs):
        q = spa.next_dist()
        posts[t], neg = posterior_F(q, channel, z)
        worst = max(worst, neg)
        bits -= math.log2(q[z])
        spa.observe(z)
    return FilterResult(bayes_responses(posts, loss), posts, bits, worst)


def exact_marginal(spa: SPA, depth: int) -> np.ndarray:
    """``Q(Z_{s+depth+1} | past)`` by summing over every length-``depth`` continuation."""
    q = spa.next_dist()
    if depth == 0:
        return q
    acc = np.zeros_like(q)
    for a in range(q.shape[0]):
        if q[a] <= 0:
            continue
        snap = spa.snapshot()
        spa.observe(a)
        acc += q[a] * exact_marginal(spa, depth - 1)
        spa.restore(snap)
    return acc


def mc_marginal(spa: SPA, depth: int, samples: int, rng: np.random.Generator) -> np.ndarray:
    """Monte-Carlo estimate of the same marginal from ``samples`` sampled continuations.

    Each continuation is drawn from the SPA and contributes the SPA's
    next-symbol PMF at its end.  Identical draws are grouped, so paths are
    drawn level by level as multinomial counts; the estimator is exactly the
    average over ``samples`` independent rollouts.
    """
    return _mc_sum(spa, depth, samples, rng) / samples


def _mc_sum(spa: SPA, depth: int, samples: int, rng: np.random.Generator) -> np.ndarray:
    q = spa.next_dist()
    if depth == 0:
        return samples * q
    counts = rng.multinomial(samples, q / q.sum())
    acc = np.zeros_like(q)
    for a in np.flatnonzero(counts):
        snap = spa.snapshot()
        spa.observe(int(a))
        acc += _mc_sum(spa, depth - 1, int(counts[a]), rng)
        spa.restore(snap)
    return acc


def delayed_filter(
    spa: SPA,
    channel: Channel,
    loss: LossMatrix,
    zs: Sequence[int],
    d: int,
    mc_samples: int | None = None,
    seed: int = 0,
    method: str = "auto",
) -> FilterResult:
    """Estimate ``X_t`` from ``Z^{t-d}`` only, via ``inv_t @ Q(Z_t | Z^{t-d})``.

    ``method`` is ``"exact"`` (enumerate the ``d-1`` unseen symbols),
    ``"mc"`` (``mc_samples`` sampled continuations) or ``"auto"``, which
    enumerates whenever ``|A_Z|**(d-1)`` is at most 4096 and samples
    otherwise.
    """
    if d < 1:
        raise ValueError("delay must be >= 1")
    _check_alphabet(spa, channel)
    if method == "auto":
        method = "exact" if channel.n_outputs ** (d - 1) <= EXACT_ENUM_LIMIT else "mc"
    if method == "mc" and not mc_samples:
        raise ValueError("Monte-Carlo marginalization needs mc_samples >= 1")
    rng = np.random.default_rng(seed)
    n = len(zs)
    posts = np.empty((n, channel.n_inputs))
    known = 0
    worst = 0.0
    for t in range(n):
        target = max(t - d + 1, 0)
        while known < target:
            spa.observe(zs[known])
            known += 1
        depth = t - known
        if method == "exact":
            q = exact_marginal(spa, depth)
        else:
            q = mc_marginal(spa, depth, mc_samples, rng)
        posts[t], neg = clean_marginal(q, channel)
        worst = max(worst, neg)
    while known < n:
        spa.observe(zs[known])
        known += 1
    return FilterResult(bayes_responses(posts, loss), posts, 0.0, worst)


def lookahead_conditional(spa: SPA, future: Sequence[int]) -> np.ndarray:
    """``Q(Z_t | Z^{t-1}, future)`` by Bayes' rule over the SPA's chain rule."""
    q = spa.next_dist()
    logw = np.full(q.shape[0], -np.inf)
    for a in range(q.shape[0]):
        if q[a] <= 0:
            continue
        snap = spa.snapshot()
        lw = math.log(q[a])
        spa.observe(a)
        for s in future:
            p = spa.prob(s)
            if p <= 0:
                lw = -math.inf
                break
            lw += math.log(p)
            spa.observe(s)
        spa.restore(snap)
        logw[a] = lw
    w = np.exp(logw - logw.max())
    return w / w.sum()


def lookahead_filter(spa: SPA, channel: Channel, loss: LossMatrix, zs: Sequence[int], ell: int) -> FilterResult:
    """Bayes response to ``F(Q(Z_t | Z^{t-1}, Z_{t+1}^{t+ell}), pi, Z_t)``.

    Near the end of the sequence the window is cut short at ``n``.
    """
    if ell < 0:
        raise ValueError("look-ahead must be >= 0")
    _check_alphabet(spa, channel)
    n = len(zs)
    posts = np.empty((n, channel.n_inputs))
    bits = 0.0
    worst = 0.0
    for t in range(n):
        z = zs[t]
        if ell == 0:
            q = spa.next_dist()
        else:
            q = lookahead_conditional(spa, zs[t + 1: t + 1 + ell])
        posts[t], neg = posterior_F(q, channel, z)
        worst = max(worst, neg)
        bits -= math.log2(spa.prob(z))
        spa.observe(z)
    return FilterResult(bayes_responses(posts, loss), posts, bits, worst)


def run_filter(spa: SPA, channel: Channel, loss: LossMatrix, zs: Sequence[int], config: FilterConfig) -> FilterResult:
    if config.regime == "causal":
        return causal_filter(spa, channel, loss, zs)
    if config.regime == "delay":
        method = "mc" if config.mc_samples else "auto"
        return delayed_filter(spa, channel, loss, zs, config.lag, config.mc_samples, config.seed, method)
    return lookahead_filter(spa, channel, loss, zs, config.lag)


# -- known-source oracle ---------------------------------------------------------------


@dataclass(frozen=True)
class MarkovSource:
    """First-order Markov chain on ``0..k-1``."""

    transition: np.ndarray
    initial: np.ndarray

    def __post_init__(self):
        T = np.asarray(self.transition, dtype=np.float64)
        p0 = np.asarray(self.initial, dtype=np.float64)
        if T.ndim != 2 or T.shape[0] != T.shape[1] or not np.allclose(T.sum(axis=1), 1.0):
            raise ValueError("transition matrix must be square with PMF rows")
        if p0.shape != (T.shape[0],) or not np.isclose(p0.sum(), 1.0):
            raise ValueError("initial distribution must be a PMF over the states")
        object.__setattr__(self, "transition", T)
        object.__setattr__(self, "initial", p0)

    @classmethod
    def symmetric_binary(cls, p: float) -> "MarkovSource":
        return cls(np.array([[1 - p, p], [p, 1 - p]]), np.array([0.5, 0.5]))


class HMMTrueSPA(SPA):
    """The exact law of the noisy sequence when a Markov source passes through a DMC."""

    def __init__(self, source: MarkovSource, channel: Channel):
        if source.transition.shape[0] != channel.n_inputs:
            raise ChannelError("source states do not match channel inputs")
        self.source = source
        self.channel = channel
        self.alphabet_size = channel.n_outputs
        self.pred = source.initial.copy()

    def next_dist(self) -> np.ndarray:
        return self.pred @ self.channel.pi

    def prob(self, symbol: int) -> float:
        return float(self.pred @ self.channel.pi[:, symbol])

    def observe(self, symbol: int) -> None:
        self._check_symbol(symbol)
        post = self.pred * self.channel.pi[:, symbol]
        self.pred = (post / post.sum()) @ self.source.transition

    def reset(self) -> None:
        self.pred = self.source.initial.copy()

    def snapshot(self):
        return self.pred.copy()

    def restore(self, snap) -> None:
        self.pred = snap.copy()


def dp_optimal_filter(
    source: MarkovSource,
    channel: Channel,
    loss: LossMatrix,
    zs: Sequence[int],
    config: FilterConfig,
    x_values: Sequence[float] | None = None,
) -> tuple[np.ndarray, float | None, np.ndarray]:
    """Exact Bayes filter for a known Markov source (forward / forward-backward recursions).

    Returns ``(estimates, mse, posteriors)``; ``mse`` is ``None`` unless
    the clean values are supplied.
    """
    if not isinstance(source, MarkovSource):
        raise TypeError("the dynamic-programming oracle needs a first-order Markov source")
    T, pi = source.transition, channel.pi
    zs = np.asarray(zs, dtype=np.int64)
    n = zs.shape[0]
    k = T.shape[0]
    filt = np.empty((n, k))
    pred = source.initial.copy()
    for t in range(n):
        post = pred * pi[:, zs[t]]
        post /= post.sum()
        filt[t] = post
        pred = post @ T

    if config.regime == "causal":
        posts = filt
    elif config.regime == "delay":
        d = config.lag
        Td = np.linalg.matrix_power(T, d)
        posts = np.empty((n, k))
        prior = source.initial.copy()
        for t in range(n):
            if t - d >= 0:
                posts[t] = filt[t - d] @ Td
            else:
                posts[t] = prior
                prior = prior @ T
    else:
        ell = config.lag
        posts = np.empty((n, k))
        for t in range(n):
            beta = np.ones(k)
            for s in range(min(n - 1, t + ell), t, -1):
                beta = T @ (pi[:, zs[s]] * beta)
                beta /= beta.sum()
            w = filt[t] * beta
            posts[t] = w / w.sum()

    est = bayes_responses(posts, loss)
    mse = None
    if x_values is not None:
        rec = loss.recon if loss.recon is not None else np.arange(loss.lam.shape[1], dtype=np.float64)
        mse = float(np.mean((rec[est] - np.asarray(x_values, dtype=np.float64)) ** 2))
    return est, mse, posts


# -- bounds and the experiment -------------------------------------------------------------


@dataclass(frozen=True)
class ExcessLossBound:
    c1: float
    lambda_max: float
    kl_per_symbol: float
    factor: float
    bound: float


def excess_loss_bound(kl_total_nats: float, n: int, channel: Channel, loss: LossMatrix,
                      config: FilterConfig | None = None) -> ExcessLossBound:
    """``sqrt(2 C1 Lmax) * sqrt(factor * KL / n)``; factor is 1, d or 1 + l by regime.

    ``kl_total_nats`` is the relative entropy between the true and assigned
    laws of the whole noisy sequence, in nats.
    """
    if kl_total_nats < 0:
        raise ValueError("relative entropy must be non-negative")
    config = config or FilterConfig()
    if config.regime == "causal":
        factor = 1.0
    elif config.regime == "delay":
        factor = float(config.lag)
    else:
        factor = 1.0 + config.lag
    c1 = channel.c1
    lmax = loss.lambda_max
    kl = kl_total_nats / n
    return ExcessLossBound(c1, lmax, kl, factor, math.sqrt(2 * c1 * lmax) * math.sqrt(factor * kl))


def kl_estimate_nats(zs: Sequence[int], true_spa: SPA, model_spa: SPA) -> float:
    """Single-realization estimate of ``D(P_{Z^n} || Q_{Z^n})``: the log-likelihood ratio.

    Both SPAs are left unchanged.
    """
    total = 0.0
    snaps = true_spa.snapshot(), model_spa.snapshot()
    try:
        for z in zs:
            total += math.log(true_spa.prob(z)) - math.log(model_spa.prob(z))
            true_spa.observe(z)
            model_spa.observe(z)
    finally:
        true_spa.restore(snaps[0])
        model_spa.restore(snaps[1])
    return total


MARKOV_CHANNEL = np.array([[0.5, 0.5, 0.0], [0.0, 0.5, 0.5]])


def simulate_markov_channel(p: float, n: int, seed: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """Symmetric binary Markov ``X`` in {-1, +1} (flip probability ``p``) plus fair +-1 noise.

    Returns ``(x, z)`` with ``z = (x + noise + 2) / 2`` in {0, 1, 2}.
    """
    if not 0 < p < 1:
        raise ValueError("flip probability must be in (0, 1)")
    rng = np.random.default_rng(seed)
    start = rng.integers(0, 2)
    flips = rng.random(n) < p
    flips[0] = False
    bits = (start + np.cumsum(flips)) % 2
    x = 2 * bits - 1
    noise = 2 * rng.integers(0, 2, n) - 1
    z = (x + noise + 2) // 2
    return x.astype(np.int64), z.astype(np.int64)


def mse(estimate_values: np.ndarray, x: np.ndarray) -> float:
    return float(np.mean((np.asarray(estimate_values, dtype=np.float64) - np.asarray(x, dtype=np.float64)) ** 2))
