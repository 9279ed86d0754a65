# v1.0.0 - Work Package 4: Evaluation (Monte-Carlo KL, aligned accuracy, L1 recovery)
import os
from typing import Callable, Dict, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy.integrate import trapezoid
from scipy.optimize import brentq, linear_sum_assignment

from errors import DimensionMismatchError, IndexOutOfRangeError, InvalidArgumentError, LengthMismatchError
from grid import build_grid, digitize
from mixture import MixtureDensity, ProductMixture
from models import CLIP_DEFAULT, SINC_PAD_DEFAULT
from smooth import HistogramConditional, SmoothConditional, SmoothMarginalSet, cdf_samples_from_factor

DENSITY_FLOOR = 1e-12


def kl_monte_carlo(true_model: ProductMixture, learned_model: ProductMixture,
                   mc_points: int = 1000, seed: int = 0) -> Tuple[float, float]:
    """
    (1/M') sum log f(x)/f̂(x) over M' draws from the true model, and its standard error.
    The learned density is floored at DENSITY_FLOOR.
    """
    if mc_points < 1:
        raise InvalidArgumentError(f"Need at least one Monte-Carlo point, got {mc_points}")
    if true_model.N != learned_model.N:
        raise DimensionMismatchError(f"True model has {true_model.N} variables, learned has {learned_model.N}")
    X = true_model.sample(mc_points, seed).values
    log_true = true_model.log_density(X)
    log_learned = np.maximum(learned_model.log_density(X), np.log(DENSITY_FLOOR))
    ratio = log_true - log_learned
    stderr = float(ratio.std(ddof=1) / np.sqrt(mc_points)) if mc_points > 1 else 0.0
    return float(ratio.mean()), stderr


def clustering_accuracy(true_labels, predicted_labels, R: int) -> Tuple[float, np.ndarray]:
    """
    Accuracy under the Hungarian-optimal matching of labels.
    permutation[r] is the predicted label matched to true label r.
    """
    true_labels = np.asarray(true_labels, dtype=int).ravel()
    predicted_labels = np.asarray(predicted_labels, dtype=int).ravel()
    if true_labels.size != predicted_labels.size:
        raise LengthMismatchError(f"{true_labels.size} true labels vs {predicted_labels.size} predictions")
    if true_labels.size == 0:
        raise InvalidArgumentError("No labels to compare")
    for name, labels in (("true", true_labels), ("predicted", predicted_labels)):
        if labels.min() < 0 or labels.max() >= R:
            raise IndexOutOfRangeError(f"{name} labels must lie in [0, {R})")

    confusion = np.zeros((R, R))
    np.add.at(confusion, (true_labels, predicted_labels), 1.0)
    rows, cols = linear_sum_assignment(confusion, maximize=True)
    permutation = np.empty(R, dtype=int)
    permutation[rows] = cols
    accuracy = confusion[rows, cols].sum() / true_labels.size
    return float(accuracy), permutation


def align_factors(true_factors: np.ndarray, learned_factors: np.ndarray) -> np.ndarray:
    """
    Min-cost matching on columnwise L1 distance summed over variables (both N x I x R).
    permutation[r] is the learned column matched to true column r.
    """
    true_factors = np.asarray(true_factors, dtype=float)
    learned_factors = np.asarray(learned_factors, dtype=float)
    if true_factors.shape != learned_factors.shape:
        raise DimensionMismatchError(f"Factor shapes differ: {true_factors.shape} vs {learned_factors.shape}")
    cost = np.abs(true_factors[:, :, :, None] - learned_factors[:, :, None, :]).sum(axis=(0, 1))
    rows, cols = linear_sum_assignment(cost)
    permutation = np.empty(cost.shape[0], dtype=int)
    permutation[rows] = cols
    return permutation


def l1_distance(f: Callable, g: Callable, lo: float, hi: float, points: int = 512) -> float:
    """Trapezoid approximation of the integral of |f - g| over [lo, hi]."""
    if points < 2 or not hi > lo:
        raise InvalidArgumentError(f"Need points >= 2 and hi > lo, got {points}, [{lo}, {hi}]")
    xs = np.linspace(lo, hi, points)
    return float(trapezoid(np.abs(f(xs) - g(xs)), xs))


def conditional_l1_error(true_mix: ProductMixture, learned: ProductMixture, permutation: Sequence[int],
                         points_per_axis: int = 512) -> np.ndarray:
    """N x R matrix of L1 errors between f_true(.|r) and f_learned(.|permutation[r])."""
    if true_mix.N != learned.N or true_mix.R != learned.R:
        raise DimensionMismatchError("True and learned models differ in N or R")
    permutation = np.asarray(permutation, dtype=int)
    errors = np.zeros((true_mix.N, true_mix.R))
    for n in range(true_mix.N):
        for r in range(true_mix.R):
            truth = true_mix.conditional(n, r)
            estimate = learned.conditional(n, int(permutation[r]))
            lo_t, hi_t = truth.support_range()
            lo_e, hi_e = estimate.support_range()
            errors[n, r] = l1_distance(truth.pdf, estimate.pdf, min(lo_t, lo_e), max(hi_t, hi_e), points_per_axis)
    return errors


def univariate_comparison(true_mix: ProductMixture, samples: int, bins: int = 10,
                          clip: Tuple[float, float] = CLIP_DEFAULT, pad: int = SINC_PAD_DEFAULT,
                          mc_points: int = 1000, seed: int = 0) -> Dict[str, float]:
    """
    Histogram vs sinc-interpolated density estimate of a univariate mixture from
    `samples` draws. Both estimators share one grid and are scored on the same
    Monte-Carlo test points.
    """
    if true_mix.N != 1:
        raise DimensionMismatchError(f"Expected a univariate mixture, got N={true_mix.N}")
    data = true_mix.sample(samples, seed)
    grid = build_grid(data, bins, clip)
    counts = np.bincount(digitize(grid, 0, data.values[:, 0]), minlength=bins).astype(float)
    masses = counts / counts.sum()
    edges = grid.edges[0]

    estimates = {
        "histogram": MixtureDensity([1.0], SmoothMarginalSet([[HistogramConditional(masses, edges)]], grid.edges)),
        "sinc": MixtureDensity([1.0], SmoothMarginalSet([[cdf_samples_from_factor(masses, edges, pad)]], grid.edges)),
    }
    out = {"samples": float(samples)}
    for name, estimate in estimates.items():
        kl, stderr = kl_monte_carlo(true_mix, estimate, mc_points, seed + 1)
        out[f"kl_{name}"] = kl
        out[f"kl_{name}_stderr"] = stderr
    return out


def append_sweep_row(path: str, row: Dict) -> None:
    """Append one row to a sweep CSV, writing the header when the file is new."""
    frame = pd.DataFrame([row])
    new_file = not os.path.exists(path) or os.path.getsize(path) == 0
    frame.to_csv(path, mode="a", header=new_file, index=False)


def discretize_truth(true_mix: ProductMixture, edges) -> np.ndarray:
    """N x I x R bin masses of the true conditionals on a grid, each column renormalized."""
    edges = np.asarray(edges, dtype=float)
    if edges.shape[0] != true_mix.N:
        raise DimensionMismatchError(f"{edges.shape[0]} edge rows for {true_mix.N} variables")
    factors = np.zeros((true_mix.N, edges.shape[1] - 1, true_mix.R))
    for n in range(true_mix.N):
        for r in range(true_mix.R):
            masses = np.diff(true_mix.conditional(n, r).cdf(edges[n]))
            total = masses.sum()
            factors[n, :, r] = masses / total if total > 0 else 1.0 / masses.size
    return factors


# --------------------------------------------------------------------------
# Univariate toy example
# --------------------------------------------------------------------------
def support_quantiles(cond, clip: Tuple[float, float] = CLIP_DEFAULT) -> Tuple[float, float]:
    """Exact clip quantiles of a closed-form conditional."""
    lo, hi = cond.support_range()
    out = []
    for q in clip:
        if q <= float(cond.cdf(lo)):
            out.append(lo)
        elif q >= float(cond.cdf(hi)):
            out.append(hi)
        else:
            out.append(brentq(lambda x: float(cond.cdf(x)) - q, lo, hi, xtol=1e-12))
    return out[0], out[1]


def exact_cdf_conditional(cond, bins: int = 10, clip: Tuple[float, float] = CLIP_DEFAULT,
                          pad: int = SINC_PAD_DEFAULT) -> SmoothConditional:
    """Sinc conditional built from the exact bin masses of `cond` over its clipped support."""
    lo, hi = support_quantiles(cond, clip)
    edges = np.linspace(lo, hi, bins + 1)
    return cdf_samples_from_factor(np.diff(cond.cdf(edges)), edges, pad)


def toy_curves(cond, bins: int = 10, clip: Tuple[float, float] = CLIP_DEFAULT,
               pad: int = SINC_PAD_DEFAULT, resolution: int = 1001) -> pd.DataFrame:
    """
    Recovered vs true curves on the clipped support. The truth is conditioned on
    the support, which is the distribution the CDF samples describe.
    """
    estimate = exact_cdf_conditional(cond, bins, clip, pad)
    lo, hi = estimate.support
    F_lo, F_hi = float(cond.cdf(lo)), float(cond.cdf(hi))
    mass = F_hi - F_lo
    xs = np.linspace(lo, hi, resolution)
    return pd.DataFrame({
        "x": xs,
        "cdf_true": (cond.cdf(xs) - F_lo) / mass,
        "cdf_est": estimate.cdf(xs),
        "pdf_true": cond.pdf(xs) / mass,
        "pdf_est": estimate.pdf(xs),
    })


def toy_kl_table(true_mix: ProductMixture, sample_sizes: Sequence[int], trials: int = 10, bins: int = 10,
                 clip: Tuple[float, float] = CLIP_DEFAULT, pad: int = SINC_PAD_DEFAULT,
                 mc_points: int = 1000, seed: int = 0) -> pd.DataFrame:
    """One univariate_comparison row per (sample size, trial)."""
    rows = []
    for s, M in enumerate(sample_sizes):
        for t in range(trials):
            row = univariate_comparison(true_mix, int(M), bins, clip, pad, mc_points, seed + 1000 * s + 10 * t)
            row["trial"] = t
            rows.append(row)
    return pd.DataFrame(rows)
