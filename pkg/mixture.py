# v1.0.0 - Work Package 3: Product Mixtures (density, posterior, clustering, sampling)
from typing import List, Sequence

import numpy as np
from scipy import stats
from scipy.special import logsumexp

from errors import AllMissingError, DimensionMismatchError, InvalidArgumentError, ModelKindError
from grid import Dataset
from models import (
    SINC_PAD_DEFAULT,
    GaussianSpec,
    Gmm2Spec,
    LaplaceSpec,
    ModelDocument,
    ShiftedGammaSpec,
)
from smooth import PDF_FLOOR, SmoothMarginalSet

TAIL_MASS = 1e-6


class ParametricConditional:
    """
    Closed-form pdf/cdf/sampler for one conditional descriptor.
    """
    def __init__(self, spec):
        self.spec = spec
        if isinstance(spec, GaussianSpec):
            self._parts = [(1.0, stats.norm(loc=spec.mean, scale=np.sqrt(spec.var)))]
        elif isinstance(spec, Gmm2Spec):
            self._parts = [
                (0.5, stats.norm(loc=spec.mean1, scale=np.sqrt(spec.var1))),
                (0.5, stats.norm(loc=spec.mean2, scale=np.sqrt(spec.var2))),
            ]
        elif isinstance(spec, ShiftedGammaSpec):
            self._parts = [(1.0, stats.gamma(a=spec.shape, loc=spec.loc, scale=spec.scale))]
        elif isinstance(spec, LaplaceSpec):
            # std σ means scale σ/√2
            self._parts = [(1.0, stats.laplace(loc=spec.mean, scale=spec.std / np.sqrt(2.0)))]
        else:
            raise InvalidArgumentError(f"Unsupported conditional descriptor {type(spec).__name__}")

    def pdf(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return sum(w * d.pdf(x) for w, d in self._parts)

    def pdf_floored(self, x) -> np.ndarray:
        return np.maximum(self.pdf(x), PDF_FLOOR)

    def cdf(self, x, clamp: bool = True) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return sum(w * d.cdf(x) for w, d in self._parts)

    def mean(self) -> float:
        return float(sum(w * d.mean() for w, d in self._parts))

    def var(self) -> float:
        m = self.mean()
        second = sum(w * (d.var() + d.mean() ** 2) for w, d in self._parts)
        return float(second - m ** 2)

    def support_range(self):
        lo = min(d.ppf(TAIL_MASS) for _, d in self._parts)
        hi = max(d.ppf(1.0 - TAIL_MASS) for _, d in self._parts)
        return float(lo), float(hi)

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        if len(self._parts) == 1:
            return self._parts[0][1].rvs(size=size, random_state=rng)
        pick = rng.choice(len(self._parts), size=size, p=[w for w, _ in self._parts])
        out = np.empty(size)
        for i, (_, d) in enumerate(self._parts):
            idx = np.flatnonzero(pick == i)
            out[idx] = d.rvs(size=idx.size, random_state=rng)
        return out


class ProductMixture:
    """
    sum_r w_r prod_n f(x_n | r). Subclasses provide conditional(n, r).
    Missing cells (NaN) are marginalized by leaving their factor out.
    """
    def __init__(self, weights):
        weights = np.asarray(weights, dtype=float).ravel()
        if weights.size < 1 or np.any(weights < 0) or abs(weights.sum() - 1.0) > 1e-9:
            raise InvalidArgumentError("Mixture weights must lie on the probability simplex")
        self.weights = weights

    @property
    def R(self) -> int:
        return self.weights.size

    @property
    def N(self) -> int:
        raise NotImplementedError

    def conditional(self, n: int, r: int):
        raise NotImplementedError

    def component_pdf(self, n: int, x) -> np.ndarray:
        """len(x) x R floored conditional densities of variable n."""
        x = np.asarray(x, dtype=float)
        return np.stack([self.conditional(n, r).pdf_floored(x) for r in range(self.R)], axis=-1)

    def _records(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X[None, :]
        if X.ndim != 2 or X.shape[1] != self.N:
            raise DimensionMismatchError(f"Expected records with {self.N} variables, got shape {X.shape}")
        if np.any(np.all(np.isnan(X), axis=1)):
            raise AllMissingError("A record has no observed cell")
        return X

    def log_terms(self, X) -> np.ndarray:
        """M x R matrix of log w_r + sum over observed n of log f(x_n | r)."""
        X = self._records(X)
        terms = np.tile(np.log(np.maximum(self.weights, 1e-300)), (X.shape[0], 1))
        for n in range(self.N):
            seen = ~np.isnan(X[:, n])
            if seen.any():
                terms[seen] += np.log(self.component_pdf(n, X[seen, n]))
        return terms

    def log_density(self, X) -> np.ndarray:
        return logsumexp(self.log_terms(X), axis=1)

    def marginal_pdf(self, n: int, x) -> np.ndarray:
        return self.component_pdf(n, x) @ self.weights

    def marginal_cdf(self, n: int, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return sum(w * self.conditional(n, r).cdf(x) for r, w in enumerate(self.weights))

    def sample(self, count: int, seed: int) -> Dataset:
        """Ancestral sampling; the drawn components become the labels."""
        if count < 1:
            raise InvalidArgumentError(f"Sample count must be positive, got {count}")
        rng = np.random.default_rng(seed)
        labels = rng.choice(self.R, size=count, p=self.weights / self.weights.sum())
        X = np.empty((count, self.N))
        for n in range(self.N):
            for r in range(self.R):
                idx = np.flatnonzero(labels == r)
                if idx.size:
                    X[idx, n] = self.conditional(n, r).sample(rng, idx.size)
        return Dataset(X, labels=labels)


class MixtureDensity(ProductMixture):
    """
    Learned model: CPD weights plus smooth (or histogram) conditionals built from the factors.
    """
    def __init__(self, weights, conditionals: SmoothMarginalSet):
        super().__init__(weights)
        if conditionals.R != self.R:
            raise DimensionMismatchError(f"{conditionals.R} conditional columns for {self.R} weights")
        self.conditionals = conditionals

    @property
    def N(self) -> int:
        return self.conditionals.N

    @property
    def edges(self) -> np.ndarray:
        return self.conditionals.edges

    def conditional(self, n: int, r: int):
        return self.conditionals[n, r]

    @classmethod
    def from_model(cls, model, edges, pad: int = SINC_PAD_DEFAULT, kind: str = "sinc") -> "MixtureDensity":
        """Assemble from a CoupledModel (weights + N x I x R factors) and its grid edges."""
        return cls(model.weights, SmoothMarginalSet.from_factors(model.factors, edges, pad, kind))


class ParametricMixture(ProductMixture):
    """Ground-truth mixture with closed-form conditionals."""
    def __init__(self, weights, specs: Sequence[Sequence]):
        super().__init__(weights)
        self.specs: List[List] = [list(row) for row in specs]
        if any(len(row) != self.R for row in self.specs):
            raise DimensionMismatchError(f"Every variable needs {self.R} conditional descriptors")
        self._conditionals = [[ParametricConditional(s) for s in row] for row in self.specs]

    @property
    def N(self) -> int:
        return len(self.specs)

    def conditional(self, n: int, r: int) -> ParametricConditional:
        return self._conditionals[n][r]

    def to_document(self, config=None) -> ModelDocument:
        return ModelDocument(
            kind="parametric", N=self.N, R=self.R, weights=self.weights.tolist(),
            conditionals=self.specs, config=dict(config or {}),
        )

    @classmethod
    def from_document(cls, doc: ModelDocument) -> "ParametricMixture":
        if doc.kind != "parametric" or doc.conditionals is None:
            raise ModelKindError(f"Expected a parametric model document, got '{doc.kind}'")
        return cls(doc.weights, doc.conditionals)


# --------------------------------------------------------------------------
# Functional surface
# --------------------------------------------------------------------------
def _scalar_if_single(x, values):
    return float(values[0]) if np.asarray(x).ndim == 1 else values


def joint_density(m: ProductMixture, x):
    """Density at one record (1-D x) or at every row of a matrix."""
    return _scalar_if_single(x, np.exp(m.log_density(x)))


def posterior(m: ProductMixture, x) -> np.ndarray:
    terms = m.log_terms(x)
    post = np.exp(terms - logsumexp(terms, axis=1, keepdims=True))
    post /= post.sum(axis=1, keepdims=True)
    return post[0] if np.asarray(x).ndim == 1 else post


def map_cluster(m: ProductMixture, x):
    """Most probable component; exact ties go to the lowest index."""
    labels = np.argmax(m.log_terms(x), axis=1)
    return int(labels[0]) if np.asarray(x).ndim == 1 else labels


def sample(m: ProductMixture, count: int, seed: int) -> Dataset:
    return m.sample(count, seed)
