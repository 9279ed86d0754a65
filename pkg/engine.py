# v1.0.0 - Work Package 2: Coupled CPD Engine (Headless)
"""
Joint simplex-constrained CPD of all triple histograms.

Blocks are updated cyclically (A_1 .. A_N, then the weights) with exponentiated
gradient steps whose sizes come from an Armijo backtracking rule. Coupling is
realized by summing per-triple gradients over every triple that contains the block.
"""
from dataclasses import dataclass
from itertools import combinations
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from console import log, warn
from errors import DimensionMismatchError, InsufficientVariablesError, InvalidArgumentError
from grid import TripleHistogramSet
from models import FitReport, IdentifiabilityAdvisory, SolverConfig
from tensor import KL_FLOOR, fro_div, khatri_rao, kl_div, reconstruct, unfold, vectorize

POSITIVITY_FLOOR = 1e-16
INIT_LOW, INIT_HIGH = 0.1, 1.0


@dataclass(frozen=True)
class CoupledModel:
    """
    weights: simplex vector of length R.
    factors: N x I x R array; factors[n] is the column-stochastic A_n.
    """
    weights: np.ndarray
    factors: np.ndarray

    def __post_init__(self):
        weights = np.asarray(self.weights, dtype=float).ravel()
        factors = np.asarray(self.factors, dtype=float)
        if factors.ndim != 3 or factors.shape[2] != weights.shape[0]:
            raise DimensionMismatchError(
                f"Factors of shape {factors.shape} do not match {weights.shape[0]} weights"
            )
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "factors", factors)

    @property
    def N(self) -> int:
        return self.factors.shape[0]

    @property
    def I(self) -> int:
        return self.factors.shape[1]

    @property
    def R(self) -> int:
        return self.weights.shape[0]

    def with_factor(self, n: int, block: np.ndarray) -> "CoupledModel":
        factors = self.factors.copy()
        factors[n] = block
        return CoupledModel(self.weights, factors)

    def with_weights(self, weights: np.ndarray) -> "CoupledModel":
        return CoupledModel(weights, self.factors)

    def permuted(self, perm: Sequence[int]) -> "CoupledModel":
        """Component r of the result is component perm[r] of this model."""
        perm = np.asarray(perm, dtype=int)
        return CoupledModel(self.weights[perm], self.factors[:, :, perm])

    def is_feasible(self, tol: float = 1e-9) -> bool:
        return (
            bool(np.all(self.weights >= 0))
            and abs(self.weights.sum() - 1.0) <= tol
            and bool(np.all(self.factors >= 0))
            and bool(np.all(np.abs(self.factors.sum(axis=1) - 1.0) <= tol))
        )


def _normalize_columns(M: np.ndarray) -> np.ndarray:
    return M / M.sum(axis=0, keepdims=True)


def init_random(N: int, I: int, R: int, seed: int) -> CoupledModel:
    """Entries i.i.d. U(0.1, 1.0), then every column and the weights put on the simplex."""
    if N < 3:
        raise InsufficientVariablesError(f"Need at least 3 variables for third-order statistics, got {N}")
    if I < 2:
        raise InvalidArgumentError(f"Need at least 2 bins, got {I}")
    if R < 1:
        raise InvalidArgumentError(f"Rank must be positive, got {R}")
    rng = np.random.default_rng(seed)
    factors = rng.uniform(INIT_LOW, INIT_HIGH, size=(N, I, R))
    weights = rng.uniform(INIT_LOW, INIT_HIGH, size=R)
    return CoupledModel(weights / weights.sum(), factors / factors.sum(axis=1, keepdims=True))


# --------------------------------------------------------------------------
# Objective and gradients
# --------------------------------------------------------------------------
def _divergence(loss: str) -> Callable:
    if loss == "kl":
        return kl_div
    if loss == "fro":
        return fro_div
    raise InvalidArgumentError(f"Unknown loss '{loss}'")


def _check_dims(model: CoupledModel, hists: TripleHistogramSet):
    if model.N != hists.N or model.I != hists.I:
        raise DimensionMismatchError(
            f"Model is N={model.N}, I={model.I}; histograms are N={hists.N}, I={hists.I}"
        )


def _triple_model(model: CoupledModel, triple) -> np.ndarray:
    j, k, l = triple
    return reconstruct(model.weights, model.factors[j], model.factors[k], model.factors[l])


def model_histograms(model: CoupledModel) -> TripleHistogramSet:
    """Exact triple tensors of a model, one per j < k < l."""
    tensors = {t: _triple_model(model, t) for t in combinations(range(model.N), 3)}
    return TripleHistogramSet(N=model.N, I=model.I, tensors=tensors, counts={t: 0 for t in tensors})


def objective(model: CoupledModel, hists: TripleHistogramSet, loss: str = "kl",
              triples: Optional[Sequence] = None) -> float:
    """Sum of divergences over the available triples (or the given subset)."""
    _check_dims(model, hists)
    div = _divergence(loss)
    total = 0.0
    for t in (hists.triples if triples is None else triples):
        total += div(hists.tensors[t], _triple_model(model, t))
    return total


def loss_derivative(X: np.ndarray, Y: np.ndarray, loss: str) -> np.ndarray:
    """dD(X, Y)/dY entrywise. KL is flat where Y sits on the clamping floor."""
    if loss == "kl":
        return np.where(Y > KL_FLOOR, -X / np.maximum(Y, KL_FLOOR), 0.0)
    if loss == "fro":
        return 2.0 * (Y - X)
    raise InvalidArgumentError(f"Unknown loss '{loss}'")


def triple_factor_gradient(X: np.ndarray, weights: np.ndarray, blocks: Sequence[np.ndarray],
                           position: int, loss: str) -> np.ndarray:
    """
    Gradient of D(X, [[λ; A, B, C]]) w.r.t. the block at `position` (0, 1 or 2),
    through the matricized form unfold(Y, p+1) = (F_slow ⊙ F_fast) diag(λ) F_pᵀ.
    """
    Y = reconstruct(weights, *blocks)
    D = loss_derivative(X, Y, loss)
    rest = [q for q in (0, 1, 2) if q != position]
    kr = khatri_rao(blocks[rest[1]], blocks[rest[0]]) * weights
    return unfold(D, position + 1).T @ kr


def triple_weight_gradient(X: np.ndarray, weights: np.ndarray, blocks: Sequence[np.ndarray],
                           loss: str) -> np.ndarray:
    """Gradient w.r.t. λ through vec(Y) = (C ⊙ B ⊙ A) λ."""
    A, B, C = blocks
    Y = reconstruct(weights, A, B, C)
    D = loss_derivative(X, Y, loss)
    return khatri_rao(C, khatri_rao(B, A)).T @ vectorize(D)


def grad_factor(model: CoupledModel, hists: TripleHistogramSet, j: int, loss: str = "kl") -> np.ndarray:
    """Gradient w.r.t. A_j accumulated over every triple containing j, in sorted triple order."""
    _check_dims(model, hists)
    grad = np.zeros((model.I, model.R))
    for t in hists.containing(j):
        blocks = [model.factors[v] for v in t]
        grad += triple_factor_gradient(hists.tensors[t], model.weights, blocks, t.index(j), loss)
    return grad


def grad_lambda(model: CoupledModel, hists: TripleHistogramSet, loss: str = "kl") -> np.ndarray:
    _check_dims(model, hists)
    grad = np.zeros(model.R)
    for t in hists.triples:
        blocks = [model.factors[v] for v in t]
        grad += triple_weight_gradient(hists.tensors[t], model.weights, blocks, loss)
    return grad


class StackedTerms:
    """
    Every triple that touches one block, matricized along that block and stacked.
    The data side is fixed for a fit; the model side is linear in the block,
    design @ block.T for a factor and design @ weights for the weights, so only
    `design` is rebuilt when the other blocks move.
    """
    def __init__(self, data: np.ndarray, loss: str = "kl"):
        _divergence(loss)
        self.data = data
        self.loss = loss
        self.mask = data > 0
        self.positive = data[self.mask]
        self.log_positive = np.log(self.positive)
        self.design: Optional[np.ndarray] = None

    def predict(self, block: np.ndarray) -> np.ndarray:
        return self.design @ block.T if block.ndim == 2 else self.design @ block

    def value(self, block: np.ndarray) -> float:
        Y = self.predict(block)
        if self.loss == "kl":
            y = np.maximum(Y[self.mask], KL_FLOOR)
            return float(np.sum(self.positive * (self.log_positive - np.log(y))))
        return float(np.sum((self.data - Y) ** 2))

    def gradient(self, block: np.ndarray) -> np.ndarray:
        D = loss_derivative(self.data, self.predict(block), self.loss)
        return D.T @ self.design if block.ndim == 2 else self.design.T @ D


def _factor_data(hists: TripleHistogramSet, n: int) -> np.ndarray:
    return np.vstack([unfold(hists.tensors[t], t.index(n) + 1) for t in hists.containing(n)])


def _factor_design(model: CoupledModel, hists: TripleHistogramSet, n: int) -> np.ndarray:
    design = []
    for t in hists.containing(n):
        rest = [v for v in t if v != n]
        design.append(khatri_rao(model.factors[rest[1]], model.factors[rest[0]]) * model.weights)
    return np.vstack(design)


def _weight_data(hists: TripleHistogramSet) -> np.ndarray:
    return np.concatenate([vectorize(hists.tensors[t]) for t in hists.triples])


def _weight_design(model: CoupledModel, hists: TripleHistogramSet) -> np.ndarray:
    return np.vstack([
        khatri_rao(model.factors[l], khatri_rao(model.factors[k], model.factors[j]))
        for j, k, l in hists.triples
    ])


def factor_terms(model: CoupledModel, hists: TripleHistogramSet, n: int, loss: str = "kl") -> StackedTerms:
    """Mode unfoldings along A_n of the triples containing n, with the fixed Khatri-Rao products."""
    _check_dims(model, hists)
    terms = StackedTerms(_factor_data(hists, n), loss)
    terms.design = _factor_design(model, hists, n)
    return terms


def weight_terms(model: CoupledModel, hists: TripleHistogramSet, loss: str = "kl") -> StackedTerms:
    _check_dims(model, hists)
    terms = StackedTerms(_weight_data(hists), loss)
    terms.design = _weight_design(model, hists)
    return terms


# --------------------------------------------------------------------------
# Mirror-descent step and line search
# --------------------------------------------------------------------------
def eg_update(block: np.ndarray, gradient: np.ndarray, eta: float) -> np.ndarray:
    """
    block ∘ exp(-η gradient), floored at POSITIVITY_FLOOR, then every column
    (or the vector) renormalized to sum 1.
    """
    block = np.asarray(block, dtype=float)
    z = -eta * np.asarray(gradient, dtype=float)
    # per-column shift cancels in the normalization and keeps exp in range
    z = z - z.max(axis=0, keepdims=True)
    updated = np.maximum(block * np.exp(z), POSITIVITY_FLOOR)
    return updated / updated.sum(axis=0, keepdims=True)


def tangent_norm_sq(gradient: np.ndarray) -> float:
    """Squared Euclidean norm of the gradient projected onto the simplex tangent space."""
    g = np.asarray(gradient, dtype=float)
    centered = g - g.mean(axis=0, keepdims=True)
    return float(np.sum(centered ** 2))


def armijo_step(block: np.ndarray, gradient: np.ndarray, f: Callable[[np.ndarray], float],
                f_current: Optional[float] = None, step0: float = 1.0, beta: float = 0.5,
                sigma: float = 1e-4, max_backtracks: int = 30) -> Tuple[float, np.ndarray, float]:
    """
    Largest η = step0 * beta^t, t = 0..max_backtracks, with
        f(eg_update(block, gradient, η)) <= f(block) - sigma * η * ||P gradient||^2.
    Returns (η, new block, objective at new block); (0, block, f(block)) when no t works.
    """
    if f_current is None:
        f_current = f(block)
    decrease = sigma * tangent_norm_sq(gradient)
    eta = step0
    for _ in range(max_backtracks + 1):
        candidate = eg_update(block, gradient, eta)
        value = f(candidate)
        if value <= f_current - eta * decrease:
            return eta, candidate, value
        eta *= beta
    return 0.0, block, f_current


# --------------------------------------------------------------------------
# Identifiability advisory
# --------------------------------------------------------------------------
def check_identifiability(N: int, I: int, R: int) -> IdentifiabilityAdvisory:
    if N < 3:
        raise InsufficientVariablesError(f"Need at least 3 variables, got {N}")
    if I < 2:
        raise InvalidArgumentError(f"Need at least 2 bins, got {I}")
    third = N // 3
    split_bound = ((N - 1) // 2 - 1) * I
    alpha = (third * I).bit_length() - 1
    generic_bound = 2 ** (2 * (alpha - 1)) if alpha >= 1 else 0
    quadratic = (third * I + 1) ** 2 / 16.0

    # block tensor over S1, S2, S3 with |S1| = |S2| = floor(N/3), generic k-ranks
    sizes = (third * I, third * I, (N - 2 * third) * I)
    kruskal = sum(min(s, R) for s in sizes) >= 2 * R + 2

    return IdentifiabilityAdvisory(
        N=N, I=I, R=R,
        kruskal_ok=kruskal,
        theorem1_bound=split_bound, theorem1_ok=R <= split_bound,
        alpha=alpha,
        theorem2_bound=generic_bound, theorem2_ok=R <= generic_bound,
        quadratic_bound=quadratic, quadratic_ok=R <= quadratic,
    )


# --------------------------------------------------------------------------
# Engine
# --------------------------------------------------------------------------
class CpdEngine:
    """
    State machine for one restart: each round visits A_1 .. A_N and then the
    weights, and the engine completes when the relative decrease falls below
    tolerance or max_outer_iters rounds have run.
    """
    def __init__(self, hists: TripleHistogramSet, config: SolverConfig):
        if len(hists) == 0:
            raise InvalidArgumentError("No histograms to factorize")
        self.hists = hists
        self.config = config
        self.model: Optional[CoupledModel] = None
        self.status = "IDLE"
        self.rounds_completed = 0
        self.trajectory: List[float] = []
        self.converged = False
        loss = config.loss
        self._factor_terms: Dict[int, StackedTerms] = {
            n: StackedTerms(_factor_data(hists, n), loss) for n in range(hists.N) if hists.containing(n)
        }
        self._weight_terms = StackedTerms(_weight_data(hists), loss)

    def initialize(self, model: CoupledModel):
        _check_dims(model, self.hists)
        if model.R != self.config.rank:
            raise DimensionMismatchError(f"Initial model has rank {model.R}, config asks for {self.config.rank}")
        # private copy: blocks are updated in place
        self.model = CoupledModel(model.weights.copy(), model.factors.copy())
        self.status = "RUNNING"
        self.rounds_completed = 0
        self.converged = False
        self.trajectory = [objective(model, self.hists, self.config.loss)]

    def _descend(self, block: np.ndarray, terms: StackedTerms) -> float:
        """inner_iters EG steps on one block, written back into the array; returns the block objective."""
        cfg = self.config
        value = terms.value(block)
        for _ in range(cfg.inner_iters):
            gradient = terms.gradient(block)
            eta, candidate, value = armijo_step(block, gradient, terms.value, f_current=value,
                                                step0=cfg.step0, beta=cfg.backtrack,
                                                sigma=cfg.sigma, max_backtracks=cfg.max_backtracks)
            if eta == 0.0:
                break
            block[...] = candidate
        return value

    def update_factor(self, n: int):
        """Only triples containing n enter the line search; the other blocks stay fixed."""
        terms = self._factor_terms.get(n)
        if terms is None:
            return
        terms.design = _factor_design(self.model, self.hists, n)
        self._descend(self.model.factors[n], terms)

    def update_weights(self) -> float:
        """Every triple depends on the weights, so the returned value is the full objective."""
        self._weight_terms.design = _weight_design(self.model, self.hists)
        return self._descend(self.model.weights, self._weight_terms)

    def advance_round(self):
        if self.status != "RUNNING":
            return
        for n in range(self.model.N):
            self.update_factor(n)
        current = self.update_weights()
        previous = self.trajectory[-1]
        self.trajectory.append(current)
        self.rounds_completed += 1

        scale = abs(previous)
        relative = (previous - current) / scale if scale > 0 else 0.0
        if relative < self.config.tol:
            self.converged = True
            self.status = "COMPLETED"
        elif self.rounds_completed >= self.config.max_outer_iters:
            self.status = "COMPLETED"

    def run(self) -> CoupledModel:
        if self.model is None:
            raise InvalidArgumentError("Engine not initialized")
        while self.status == "RUNNING":
            self.advance_round()
        return self.model


def refine(model: CoupledModel, hists: TripleHistogramSet, config: SolverConfig) -> Tuple[CoupledModel, FitReport]:
    """Single run of the solver from a supplied initialization."""
    engine = CpdEngine(hists, config)
    engine.initialize(model)
    fitted = engine.run()
    report = FitReport(
        trajectory=engine.trajectory,
        iterations=engine.rounds_completed,
        converged=engine.converged,
        restart_objectives=[engine.trajectory[-1]],
        selected_restart=0,
    )
    return fitted, report


def fit(hists: TripleHistogramSet, config: SolverConfig) -> Tuple[CoupledModel, FitReport]:
    """
    Best of config.restarts random initializations (restart k seeded with seed + k),
    judged by final objective.
    """
    if len(hists) == 0:
        raise InvalidArgumentError("No histograms to factorize")
    advisory = check_identifiability(hists.N, hists.I, config.rank)
    if not advisory.theorem2_ok:
        warn("CpdEngine", f"Rank {config.rank} exceeds the generic uniqueness bound "
                          f"{advisory.theorem2_bound} for N={hists.N}, I={hists.I}; fitting anyway.")

    best: Optional[Tuple[CoupledModel, FitReport]] = None
    finals: List[float] = []
    selected = 0
    for k in range(config.restarts):
        init = init_random(hists.N, hists.I, config.rank, config.seed + k)
        fitted, report = refine(init, hists, config)
        final = report.trajectory[-1]
        finals.append(final)
        log("CpdEngine", f"Restart {k + 1}/{config.restarts}: objective {final:.6g} "
                         f"after {report.iterations} rounds (converged={report.converged}).")
        if best is None or final < best[1].trajectory[-1]:
            best = (fitted, report)
            selected = k

    model, report = best
    report = report.model_copy(update={"restart_objectives": finals, "selected_restart": selected})
    log("CpdEngine", f"Selected restart {selected + 1} with objective {finals[selected]:.6g}.")
    return model, report
