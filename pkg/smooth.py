# v1.0.0 - Work Package 3: Smooth Conditionals (sinc interpolation)
"""
Conditional CDFs are rebuilt from their values at the bin edges by Shannon
interpolation; the PDF is the analytic derivative of that interpolant.

Sample k sits at d^0 + k*T. Samples k = 0..I come from the factor column; the
padding is 0 for k = -L..-1 and 1 for k = I+1..I+L.
"""
from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np

from errors import DimensionMismatchError, InvalidArgumentError, InvalidFactorError
from models import SINC_PAD_DEFAULT

PDF_FLOOR = 1e-12
SAMPLING_GRID = 1024
_CHUNK = 2048


def sinc_derivative(u: np.ndarray) -> np.ndarray:
    """d/du of sin(πu)/(πu); equals 0 at u = 0."""
    u = np.asarray(u, dtype=float)
    out = np.empty_like(u)
    small = np.abs(u) < 1e-6
    out[small] = -(np.pi ** 2 / 3.0) * u[small]
    v = u[~small]
    out[~small] = (np.pi * v * np.cos(np.pi * v) - np.sin(np.pi * v)) / (np.pi * v ** 2)
    return out


def sinc_interpolate(x, origin: float, spacing: float, values, start: int = 0, derivative: bool = False) -> np.ndarray:
    """
    sum_j values[j] * sinc((x - origin)/spacing - (start + j)), or its x-derivative.
    Evaluated in chunks of x so memory stays bounded.
    """
    x = np.asarray(x, dtype=float)
    values = np.asarray(values, dtype=float).ravel()
    k = start + np.arange(values.size)
    kernel = sinc_derivative if derivative else np.sinc
    flat = x.ravel()
    out = np.empty(flat.size)
    for begin in range(0, flat.size, _CHUNK):
        u = (flat[begin:begin + _CHUNK, None] - origin) / spacing - k[None, :]
        out[begin:begin + _CHUNK] = kernel(u) @ values
    if derivative:
        out /= spacing
    return out.reshape(x.shape)


def nyquist_spacing(omega_c: float) -> float:
    """Sample spacing π/ω_c for a signal band-limited to ω_c."""
    if not omega_c > 0:
        raise InvalidArgumentError(f"Cutoff frequency must be positive, got {omega_c}")
    return float(np.pi / omega_c)


@dataclass(frozen=True)
class SmoothConditional:
    """
    cdf_samples: F(d^0..d^I), with F(d^0) = 0 and F(d^I) = 1.
    origin: d^0.  spacing: T.  pad: L samples of padding on each side.
    """
    cdf_samples: np.ndarray
    origin: float
    spacing: float
    pad: int = SINC_PAD_DEFAULT

    def __post_init__(self):
        samples = np.asarray(self.cdf_samples, dtype=float).ravel()
        if samples.size < 3:
            raise InvalidArgumentError("Need at least two bins of CDF samples")
        if self.spacing <= 0:
            raise InvalidArgumentError(f"Sample spacing must be positive, got {self.spacing}")
        if self.pad < samples.size - 1:
            raise InvalidArgumentError(f"Padding L={self.pad} must be at least I={samples.size - 1}")
        object.__setattr__(self, "cdf_samples", samples)

    @property
    def I(self) -> int:
        return self.cdf_samples.size - 1

    @property
    def support(self) -> Tuple[float, float]:
        return self.origin, self.origin + self.I * self.spacing

    def support_range(self) -> Tuple[float, float]:
        lo, hi = self.support
        return lo - self.spacing, hi + self.spacing

    def padded_samples(self) -> Tuple[np.ndarray, np.ndarray]:
        """Positions and values of all 2L + I + 1 samples."""
        k = np.arange(-self.pad, self.I + self.pad + 1)
        values = np.concatenate([np.zeros(self.pad), self.cdf_samples, np.ones(self.pad)])
        return self.origin + k * self.spacing, values

    def _evaluate(self, x, derivative: bool) -> np.ndarray:
        # zero padding on the left contributes nothing
        values = np.concatenate([self.cdf_samples, np.ones(self.pad)])
        return sinc_interpolate(x, self.origin, self.spacing, values, start=0, derivative=derivative)

    def cdf(self, x, clamp: bool = True) -> np.ndarray:
        raw = self._evaluate(x, derivative=False)
        return np.clip(raw, 0.0, 1.0) if clamp else raw

    def pdf(self, x) -> np.ndarray:
        """Raw derivative of the interpolant; may dip below 0 from ringing."""
        return self._evaluate(x, derivative=True)

    def pdf_floored(self, x) -> np.ndarray:
        return np.maximum(self.pdf(x), PDF_FLOOR)

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        """Inverse transform on a fixed grid of the clamped, running-max CDF."""
        lo, hi = self.support
        xs = np.linspace(lo, hi, SAMPLING_GRID)
        F = np.maximum.accumulate(self.cdf(xs))
        F[0], F[-1] = 0.0, 1.0
        return np.interp(rng.uniform(size=size), F, xs)


@dataclass(frozen=True)
class HistogramConditional:
    """Piecewise-constant density from bin masses; the plain histogram estimate."""
    masses: np.ndarray
    edges: np.ndarray

    def __post_init__(self):
        masses = np.asarray(self.masses, dtype=float).ravel()
        edges = np.asarray(self.edges, dtype=float).ravel()
        if edges.size != masses.size + 1:
            raise DimensionMismatchError(f"{masses.size} masses need {masses.size + 1} edges, got {edges.size}")
        if np.any(masses < 0):
            raise InvalidFactorError("Bin masses must be nonnegative")
        object.__setattr__(self, "masses", masses / masses.sum())
        object.__setattr__(self, "edges", edges)

    @property
    def support(self) -> Tuple[float, float]:
        return float(self.edges[0]), float(self.edges[-1])

    def support_range(self) -> Tuple[float, float]:
        return self.support

    def cdf(self, x, clamp: bool = True) -> np.ndarray:
        F = np.concatenate([[0.0], np.cumsum(self.masses)])
        return np.interp(np.asarray(x, dtype=float), self.edges, F)

    def pdf(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        widths = np.diff(self.edges)
        idx = np.clip(np.searchsorted(self.edges, x, side="left") - 1, 0, self.masses.size - 1)
        inside = (x >= self.edges[0]) & (x <= self.edges[-1])
        return np.where(inside, self.masses[idx] / widths[idx], 0.0)

    def pdf_floored(self, x) -> np.ndarray:
        return np.maximum(self.pdf(x), PDF_FLOOR)

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        F = np.concatenate([[0.0], np.cumsum(self.masses)])
        F[-1] = 1.0
        return np.interp(rng.uniform(size=size), F, self.edges)


def _check_column(column) -> np.ndarray:
    column = np.asarray(column, dtype=float).ravel()
    if np.any(column < 0):
        raise InvalidFactorError("Factor column has negative entries")
    if column.sum() <= 0:
        raise InvalidFactorError("Factor column has no mass")
    return column


def cdf_samples_from_factor(column, edges, pad: int = SINC_PAD_DEFAULT) -> SmoothConditional:
    """F(d^0) = 0, F(d^i) = cumulative mass, F(d^I) = 1 exactly."""
    column = _check_column(column)
    edges = np.asarray(edges, dtype=float).ravel()
    if edges.size != column.size + 1:
        raise DimensionMismatchError(f"{column.size} bins need {column.size + 1} edges, got {edges.size}")
    F = np.concatenate([[0.0], np.cumsum(column)])
    F = F / F[-1]
    F[-1] = 1.0
    spacing = (edges[-1] - edges[0]) / column.size
    return SmoothConditional(F, float(edges[0]), float(spacing), pad)


def interp_cdf(sc: SmoothConditional, x, clamp: bool = True) -> np.ndarray:
    return sc.cdf(x, clamp=clamp)


def pdf(sc: SmoothConditional, x) -> np.ndarray:
    return sc.pdf(x)


class SmoothMarginalSet:
    """
    N x R conditionals of a learned model, all sharing the model's grid.
    """
    def __init__(self, conditionals: Sequence[Sequence], edges: np.ndarray):
        self.conditionals: List[List] = [list(row) for row in conditionals]
        self.edges = np.asarray(edges, dtype=float)
        R = {len(row) for row in self.conditionals}
        if len(R) != 1:
            raise DimensionMismatchError("Every variable needs the same number of components")
        if self.edges.shape[0] != len(self.conditionals):
            raise DimensionMismatchError(f"{self.edges.shape[0]} edge rows for {len(self.conditionals)} variables")

    @property
    def N(self) -> int:
        return len(self.conditionals)

    @property
    def R(self) -> int:
        return len(self.conditionals[0])

    def __getitem__(self, nr):
        n, r = nr
        return self.conditionals[n][r]

    @classmethod
    def from_factors(cls, factors: np.ndarray, edges: np.ndarray, pad: int = SINC_PAD_DEFAULT,
                     kind: str = "sinc") -> "SmoothMarginalSet":
        factors = np.asarray(factors, dtype=float)
        edges = np.asarray(edges, dtype=float)
        if factors.shape[0] != edges.shape[0] or factors.shape[1] + 1 != edges.shape[1]:
            raise DimensionMismatchError(
                f"Factors of shape {factors.shape} do not fit edges of shape {edges.shape}"
            )
        if kind == "sinc":
            build = lambda col, e: cdf_samples_from_factor(col, e, pad)
        elif kind == "histogram":
            build = HistogramConditional
        else:
            raise InvalidArgumentError(f"Unknown conditional kind '{kind}'")
        rows = [[build(factors[n][:, r], edges[n]) for r in range(factors.shape[2])]
                for n in range(factors.shape[0])]
        return cls(rows, edges)
