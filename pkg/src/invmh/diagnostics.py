"""Statistical verification of finished chains: a permutation test for
detailed balance, effective sample size with Geyer truncation, and
batch-means moment checks against analytic targets."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "ChainSummary",
    "detailed_balance_test",
    "transition_pairs",
    "ess",
    "moment_check",
    "MomentReport",
    "summarize_chain",
]

DEFAULT_PERMUTATIONS = 999
DEFAULT_MAX_PAIRS = 2000


def transition_pairs(observable: np.ndarray) -> np.ndarray:
    """Consecutive pairs ``(g(q_k), g(q_{k+1}))`` of a scalar chain, the
    input of :func:`detailed_balance_test`."""
    x = np.asarray(observable, dtype=float).ravel()
    return np.column_stack([x[:-1], x[1:]])


def detailed_balance_test(
    pairs: np.ndarray,
    rng: np.random.Generator,
    n_permutations: int = DEFAULT_PERMUTATIONS,
    max_pairs: int = DEFAULT_MAX_PAIRS,
) -> float:
    """Permutation two-sample test of detailed balance on transition pairs.

    Under detailed balance of a stationary chain the pair ``(x, y)`` has the
    same law as ``(y, x)``, so the orientation of each pair is exchangeable.
    The statistic is the energy distance between the sample of pairs and its
    coordinate-swapped mirror; the reference distribution flips each pair
    independently.  Swapping is an isometry of the plane, which collapses
    each permutation statistic to the quadratic form
    ``(2/n^2) s^T (C - E) s`` over signs ``s``, with ``C`` the cross and
    ``E`` the within distance matrix, so all permutations are evaluated with
    one matrix product.

    At most ``max_pairs`` pairs enter the distance matrices (a uniform
    subsample is drawn above that); fewer than 100 pairs is an error.
    Returns a p-value that is exact under exchangeability.
    """
    pairs = np.asarray(pairs, dtype=float)
    if pairs.ndim != 2 or pairs.shape[1] != 2:
        raise ValueError("pairs must be an (n, 2) array")
    n = pairs.shape[0]
    if n < 100:
        raise ValueError(f"detailed balance test is underpowered below 100 pairs (got {n})")
    if n > max_pairs:
        idx = rng.choice(n, size=max_pairs, replace=False)
        idx.sort()
        pairs = pairs[idx]
        n = max_pairs

    mirrored = pairs[:, ::-1]
    sq = np.sum(pairs**2, axis=1)
    # |a_i - a_j| and |a_i - T a_j| via the Gram trick; swapping preserves
    # the squared norms.
    within = sq[:, None] + sq[None, :] - 2.0 * (pairs @ pairs.T)
    cross = sq[:, None] + sq[None, :] - 2.0 * (pairs @ mirrored.T)
    np.maximum(within, 0.0, out=within)
    np.maximum(cross, 0.0, out=cross)
    gap = np.sqrt(cross) - np.sqrt(within)

    scale = 2.0 / (n * n)
    observed = scale * float(gap.sum())
    signs = rng.integers(0, 2, size=(n, n_permutations)).astype(float) * 2.0 - 1.0
    stats = scale * np.sum(signs * (gap @ signs), axis=0)
    n_at_least = int(np.sum(stats >= observed - 1e-15))
    return (1 + n_at_least) / (1 + n_permutations)


def ess(chain: np.ndarray, with_flag: bool = False):
    """Effective sample size ``N / (1 + 2 sum rho_k)`` with Geyer
    initial-positive-sequence truncation of the autocorrelations.

    A zero-variance chain is degenerate: its ESS is reported as ``N`` with
    the flag set.  The estimate is invariant under affine transformations
    and clipped to ``[1, N]``.
    """
    x = np.asarray(chain, dtype=float).ravel()
    n = x.size
    if n < 10:
        raise ValueError("ess requires a chain of length >= 10")
    x = x - x.mean()
    variance = float(x @ x) / n
    if variance == 0.0 or not math.isfinite(variance):
        return (float(n), True) if with_flag else float(n)

    size = 1 << (2 * n - 1).bit_length()
    transformed = np.fft.rfft(x, size)
    acov = np.fft.irfft(transformed * np.conj(transformed), size)[:n] / n
    rho = acov / acov[0]

    # Sum of autocorrelation pairs is positive for any reversible chain;
    # truncate at the first nonpositive pair.
    n_pairs = n // 2
    pair_sums = rho[0 : 2 * n_pairs : 2] + rho[1 : 2 * n_pairs : 2]
    tau = 0.0
    for value in pair_sums:
        if value <= 0.0:
            break
        tau += 2.0 * value
    tau -= 1.0
    tau = max(tau, 1e-12)
    value = min(float(n), max(1.0, n / tau))
    return (value, False) if with_flag else value


@dataclass(frozen=True)
class MomentReport:
    """Batch-means comparison of empirical moments against analytic values;
    ``mean_z`` and ``var_z`` are per-coordinate z-scores."""

    means: np.ndarray
    mean_se: np.ndarray
    mean_z: np.ndarray
    variances: np.ndarray
    var_se: np.ndarray
    var_z: np.ndarray

    def max_abs_z(self) -> float:
        return float(max(np.max(np.abs(self.mean_z)), np.max(np.abs(self.var_z))))


def moment_check(
    chain: np.ndarray,
    mean_true: np.ndarray,
    var_true: np.ndarray,
    batch_count: int = 20,
) -> MomentReport:
    """Compare per-coordinate chain means and variances against analytic
    values using batch-means standard errors: ``z = (estimate - truth)/SE``.
    """
    chain = np.asarray(chain, dtype=float)
    if chain.ndim == 1:
        chain = chain[:, None]
    n = chain.shape[0]
    if batch_count < 10:
        raise ValueError("batch_count must be at least 10")
    if n < batch_count:
        raise ValueError("chain shorter than the number of batches")
    batch = n // batch_count
    used = batch * batch_count
    data = chain[:used]
    mean_true = np.broadcast_to(np.asarray(mean_true, dtype=float), data.shape[1:])
    var_true = np.broadcast_to(np.asarray(var_true, dtype=float), data.shape[1:])

    overall_mean = data.mean(axis=0)
    blocks = data.reshape(batch_count, batch, -1)
    block_means = blocks.mean(axis=1)
    mean_se = block_means.std(axis=0, ddof=1) / math.sqrt(batch_count)

    centered_sq = (data - overall_mean) ** 2
    overall_var = centered_sq.mean(axis=0)
    block_vars = centered_sq.reshape(batch_count, batch, -1).mean(axis=1)
    var_se = block_vars.std(axis=0, ddof=1) / math.sqrt(batch_count)

    with np.errstate(divide="ignore", invalid="ignore"):
        mean_z = (overall_mean - mean_true) / mean_se
        var_z = (overall_var - var_true) / var_se
    return MomentReport(
        means=overall_mean,
        mean_se=mean_se,
        mean_z=mean_z,
        variances=overall_var,
        var_se=var_se,
        var_z=var_z,
    )


@dataclass
class ChainSummary:
    """Per-chain report: acceptance rate, per-observable ESS, per-coordinate
    moments with batch-means standard errors, and detailed-balance p-values
    for the default observables (first coordinate and squared norm)."""

    acceptance_rate: float
    ess: dict[str, float]
    means: list[float]
    mean_se: list[float]
    variances: list[float]
    variance_se: list[float]
    db_pvalue: dict[str, float]
    n_steps: int = 0
    degenerate: dict[str, bool] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "acceptance_rate": self.acceptance_rate,
            "ess": self.ess,
            "means": self.means,
            "mean_se": self.mean_se,
            "variances": self.variances,
            "variance_se": self.variance_se,
            "db_pvalue": self.db_pvalue,
            "n_steps": self.n_steps,
            "degenerate": self.degenerate,
        }


def default_observables(positions: np.ndarray) -> dict[str, np.ndarray]:
    return {
        "coord_0": positions[:, 0],
        "sq_norm": np.sum(positions**2, axis=1),
    }


def summarize_chain(
    positions: np.ndarray,
    accepted: np.ndarray,
    rng: np.random.Generator,
    burn_in: int = 0,
    batch_count: int = 20,
    db_max_pairs: int = DEFAULT_MAX_PAIRS,
) -> ChainSummary:
    """Build a :class:`ChainSummary` from a realized chain.

    ``burn_in`` initial states are dropped before any statistic is formed.
    The detailed-balance test and ESS are computed per default observable;
    chains too short for a test report NaN for it.
    """
    positions = np.atleast_2d(np.asarray(positions, dtype=float))
    kept = positions[burn_in:]
    accepted = np.asarray(accepted, dtype=bool)
    acceptance = float(accepted.mean()) if accepted.size else 0.0

    observables = default_observables(kept)
    ess_values: dict[str, float] = {}
    degenerate: dict[str, bool] = {}
    pvalues: dict[str, float] = {}
    for name, series in observables.items():
        if series.size >= 10:
            value, flag = ess(series, with_flag=True)
        else:
            value, flag = float("nan"), True
        ess_values[name] = value
        degenerate[name] = bool(flag)
        pairs = transition_pairs(series)
        if pairs.shape[0] >= 100:
            pvalues[name] = detailed_balance_test(pairs, rng, max_pairs=db_max_pairs)
        else:
            pvalues[name] = float("nan")

    n, d = kept.shape
    if n >= batch_count:
        report = moment_check(
            kept, np.zeros(d), np.ones(d), batch_count=batch_count
        )
        means = report.means
        mean_se = report.mean_se
        variances = report.variances
        var_se = report.var_se
    else:
        means = kept.mean(axis=0) if n else np.full(d, np.nan)
        mean_se = np.full(d, np.nan)
        variances = kept.var(axis=0) if n else np.full(d, np.nan)
        var_se = np.full(d, np.nan)

    return ChainSummary(
        acceptance_rate=acceptance,
        ess=ess_values,
        means=[float(x) for x in means],
        mean_se=[float(x) for x in mean_se],
        variances=[float(x) for x in variances],
        variance_se=[float(x) for x in var_se],
        db_pvalue=pvalues,
        n_steps=int(accepted.size),
        degenerate=degenerate,
    )
