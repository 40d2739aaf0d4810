"""Blind separation of per-antenna displacement series.

FastICA in deflation mode with the kurtosis (pow3) contrast, plus the
kurtosis-profile rule that picks how many components to keep.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.signal import detrend
from scipy.stats import kurtosis

from .dsp import DisplacementSeries


class RankDeficientError(ValueError):
    """Fewer independent channels than requested components."""


class ConvergenceWarning(UserWarning):
    pass


@dataclass
class SeparationResult:
    unmixing_W: np.ndarray          # [C, channels], applied to centred observations
    sources: np.ndarray             # [C, N], zero-mean, unit variance
    kurtosis_per_component: np.ndarray
    n_components: int
    converged: bool
    whitening: np.ndarray           # [C, channels]
    rotation: np.ndarray            # [C, C], orthonormal rows in whitened space
    mixing: np.ndarray              # [channels, C], back-projection of each source
    mean: np.ndarray                # [channels]
    iterations: list = field(default_factory=list)


def prepare_observations(X, *, linear_detrend: bool = True) -> np.ndarray:
    """Per-channel linear detrend (or plain centring) of [channels, N] data."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if linear_detrend:
        return detrend(X, axis=1, type="linear")
    return X - X.mean(axis=1, keepdims=True)


def whiten(X: np.ndarray, n_components: int, rank_tol: float = 1e-10):
    """PCA whitening to ``n_components`` dimensions.

    Returns (Z, K, mean) with Z = K (X - mean) and cov(Z) = I.
    """
    mean = X.mean(axis=1)
    Xc = X - mean[:, None]
    cov = Xc @ Xc.T / Xc.shape[1]
    evals, evecs = np.linalg.eigh(cov)
    order = np.argsort(evals)[::-1]
    evals, evecs = evals[order], evecs[:, order]
    rank = int(np.sum(evals > rank_tol * max(evals[0], np.finfo(float).tiny)))
    if n_components > rank:
        raise RankDeficientError(
            f"covariance has rank {rank}; cannot extract {n_components} components")
    K = (evecs[:, :n_components] / np.sqrt(evals[:n_components])).T
    return K @ Xc, K, mean


def fast_ica(X, n_components: int, seed: int = 0, *, max_iter: int = 200,
             tol: float = 1e-6) -> SeparationResult:
    """Deflationary FastICA with g(u) = u^3.

    ``X`` is [channels, N].  Each new weight vector is Gram-Schmidt
    orthogonalised against those already found.  A component stops when
    |<w_new, w_old>| > 1 - tol; after ``max_iter`` the last iterate is kept
    and ``converged`` is False.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    m, n = X.shape
    if not 1 <= n_components <= m:
        raise ValueError(f"n_components must be in [1, {m}]")
    if n <= 10 * m:
        raise ValueError(f"need more than {10 * m} samples for {m} channels, got {n}")
    Z, K, mean = whiten(X, n_components)
    rng = np.random.default_rng(seed)
    W = np.zeros((n_components, n_components))
    all_converged = True
    iters = []
    for p in range(n_components):
        w = rng.standard_normal(n_components)
        w -= W[:p].T @ (W[:p] @ w)
        w /= np.linalg.norm(w)
        ok = False
        for it in range(1, max_iter + 1):
            wz = w @ Z
            w_new = (Z * wz ** 3).mean(axis=1) - 3.0 * w
            w_new -= W[:p].T @ (W[:p] @ w_new)
            nrm = np.linalg.norm(w_new)
            if nrm == 0:
                break
            w_new /= nrm
            done = abs(w_new @ w) > 1.0 - tol
            w = w_new
            if done:
                ok = True
                break
        iters.append(it)
        all_converged &= ok
        W[p] = w
    if not all_converged:
        warnings.warn("FastICA hit the iteration limit on at least one component", ConvergenceWarning)
    S = W @ Z
    unmix = W @ K
    mixing = np.linalg.pinv(unmix)
    return SeparationResult(
        unmixing_W=unmix, sources=S,
        kurtosis_per_component=kurtosis(S, axis=1, fisher=True, bias=True),
        n_components=n_components, converged=bool(all_converged), whitening=K,
        rotation=W, mixing=mixing, mean=mean, iterations=iters)


@dataclass
class ComponentProfile:
    count: int
    n_values: np.ndarray
    mean_abs_kurtosis: np.ndarray
    flags: tuple = ()


def kurtosis_profile(X, seed: int = 0, max_components: int | None = None,
                     flat_tol: float = 1e-6) -> ComponentProfile:
    """Fit FastICA for n = 1..max and score each model by mean |kurtosis|.

    The count is the model reached by the largest increase in mean absolute
    kurtosis: ``n_values[argmax(diff(means)) + 1]``.  When no increase
    exceeds ``flat_tol`` the count is 1 and the profile carries a
    ``"no-structure"`` flag.  Models that fail to fit are dropped and
    flagged.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    m = X.shape[0]
    if m < 2:
        raise ValueError("need at least 2 channels")
    top = m if max_components is None else min(max_components, m)
    n_vals, means, flags = [], [], []
    for n in range(1, top + 1):
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", ConvergenceWarning)
                res = fast_ica(X, n, seed=seed)
        except RankDeficientError:
            flags.append(f"skipped-n{n}")
            continue
        n_vals.append(n)
        means.append(float(np.mean(np.abs(res.kurtosis_per_component))))
    if not n_vals:
        raise RankDeficientError("no FastICA model could be fitted")
    n_vals = np.asarray(n_vals)
    means = np.asarray(means)
    count, extra = count_from_profile(n_vals, means, flat_tol)
    return ComponentProfile(count, n_vals, means, tuple(flags) + extra)


def count_from_profile(n_values, means, flat_tol: float = 1e-6) -> tuple[int, tuple]:
    """Component count from a mean-|kurtosis| profile over model sizes."""
    diffs = np.diff(np.asarray(means, dtype=float))
    if diffs.size == 0 or np.all(diffs <= flat_tol):
        return 1, ("no-structure",)
    return int(np.asarray(n_values)[int(np.argmax(diffs)) + 1]), ()


def select_component_count(X, seed: int = 0, max_components: int | None = None) -> int:
    return kurtosis_profile(X, seed, max_components).count


def reconstruct_sources(result: SeparationResult, rate_hz: float | None = None) -> list[DisplacementSeries]:
    """Back-project each component to displacement units, largest first.

    Amplitude is the RMS of the component's contribution over all channels.
    Each series is scaled by that amplitude and signed so its strongest
    mixing coefficient is positive, so IC sign flips do not matter.
    """
    A = result.mixing
    out = []
    for i in range(result.n_components):
        col = A[:, i]
        amp = float(np.linalg.norm(col) / np.sqrt(col.size))
        sign = 1.0 if col[np.argmax(np.abs(col))] >= 0 else -1.0
        out.append(DisplacementSeries(result.sources[i] * amp * sign, rate_hz,
                                      amplitude_m=amp,
                                      kurtosis=float(result.kurtosis_per_component[i])))
    out.sort(key=lambda s: s.amplitude_m, reverse=True)
    return out


def amari_index(W, A) -> float:
    """Amari performance index of the global system W @ A (0 = perfect)."""
    P = np.abs(np.asarray(W) @ np.asarray(A))
    n = P.shape[0]
    if n < 2:
        return 0.0
    rows = (P.sum(axis=1) / P.max(axis=1) - 1.0).sum()
    cols = (P.sum(axis=0) / P.max(axis=0) - 1.0).sum()
    return float((rows + cols) / (2.0 * n * (n - 1)))
