# v1.0.0 - Work Package 4: Diagonal Gaussian Mixture EM Baseline
import warnings
from typing import List, Tuple

import numpy as np
from sklearn.exceptions import ConvergenceWarning
from sklearn.mixture import GaussianMixture

from console import log, warn
from errors import DegenerateSupportError, InsufficientDataError, InvalidArgumentError, ModelKindError
from grid import Dataset
from mixture import ParametricConditional, ProductMixture, joint_density, map_cluster, posterior
from models import GaussianSpec, ModelDocument
from smooth import PDF_FLOOR

VARIANCE_FLOOR = 1e-6


class DiagGmm(ProductMixture):
    """
    weights (R,), means and variances (N, R): component r is prod_n N(mu_nr, var_nr).
    """
    def __init__(self, weights, means, variances, floor_active: bool = False):
        super().__init__(weights)
        self.means = np.asarray(means, dtype=float)
        self.variances = np.asarray(variances, dtype=float)
        if self.means.shape != self.variances.shape or self.means.shape[1] != self.R:
            raise InvalidArgumentError(
                f"Means {self.means.shape} and variances {self.variances.shape} must both be N x {self.R}"
            )
        if np.any(self.variances <= 0):
            raise InvalidArgumentError("Variances must be positive")
        self.floor_active = floor_active

    @property
    def N(self) -> int:
        return self.means.shape[0]

    def conditional(self, n: int, r: int) -> ParametricConditional:
        return ParametricConditional(GaussianSpec(mean=self.means[n, r], var=self.variances[n, r]))

    def component_pdf(self, n: int, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)[..., None]
        mu, var = self.means[n], self.variances[n]
        dens = np.exp(-0.5 * (x - mu) ** 2 / var) / np.sqrt(2.0 * np.pi * var)
        return np.maximum(dens, PDF_FLOOR)

    def to_document(self, config=None, trajectory=None) -> ModelDocument:
        return ModelDocument(
            kind="diag-gmm", N=self.N, R=self.R, weights=self.weights.tolist(),
            means=self.means.tolist(), variances=self.variances.tolist(),
            variance_floor_active=self.floor_active,
            config=dict(config or {}), trajectory=list(trajectory or []),
        )

    @classmethod
    def from_document(cls, doc: ModelDocument) -> "DiagGmm":
        if doc.kind != "diag-gmm" or doc.means is None or doc.variances is None:
            raise ModelKindError(f"Expected a diag-gmm model document, got '{doc.kind}'")
        return cls(doc.weights, doc.means, doc.variances, bool(doc.variance_floor_active))


def _apply_variance_floor(gm: GaussianMixture) -> bool:
    """Clamp diagonal covariances from below, keeping sklearn's cached precisions in step."""
    low = gm.covariances_ < VARIANCE_FLOOR
    if not np.any(low):
        return False
    gm.covariances_ = np.maximum(gm.covariances_, VARIANCE_FLOOR)
    gm.precisions_cholesky_ = 1.0 / np.sqrt(gm.covariances_)
    gm.precisions_ = 1.0 / gm.covariances_
    return True


def _run_em(X: np.ndarray, R: int, max_iters: int, tol: float, seed: int):
    """
    One restart, stepped one EM iteration per `fit` call through warm_start so the
    log-likelihood after every iteration is recorded.
    """
    gm = GaussianMixture(n_components=R, covariance_type="diag", init_params="k-means++",
                         reg_covar=0.0, max_iter=1, tol=0.0, warm_start=True, random_state=seed)
    trajectory: List[float] = []
    floor_active = False
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ConvergenceWarning)
        for _ in range(max_iters):
            try:
                gm.fit(X)
            except ValueError as e:
                raise DegenerateSupportError(f"EM restart seeded {seed} collapsed a component: {e}") from e
            floor_active |= _apply_variance_floor(gm)
            ll = float(gm.score(X)) * X.shape[0]
            done = bool(trajectory) and ll - trajectory[-1] < tol * abs(trajectory[-1])
            trajectory.append(ll)
            if done:
                break

    model = DiagGmm(gm.weights_, gm.means_.T, gm.covariances_.T, floor_active)
    return model, trajectory


def em_fit(data: Dataset, R: int, max_iters: int = 500, tol: float = 1e-8,
           restarts: int = 5, seed: int = 0) -> Tuple[DiagGmm, List[float]]:
    """
    EM on the complete records only; best final log-likelihood over restarts
    (restart k seeded with seed + k).
    """
    if R < 1 or restarts < 1 or max_iters < 1:
        raise InvalidArgumentError("R, restarts and max_iters must all be positive")
    X = data.complete_rows()
    if X.shape[0] < max(R, 2):
        raise InsufficientDataError(f"{X.shape[0]} complete records cannot support {R} components")
    if X.shape[0] < data.M:
        log("EmBaseline", f"Using {X.shape[0]} of {data.M} records (complete cases).")

    best, best_traj = None, None
    for k in range(restarts):
        model, traj = _run_em(X, R, max_iters, tol, seed + k)
        log("EmBaseline", f"Restart {k + 1}/{restarts}: log-likelihood {traj[-1]:.6g} after {len(traj)} iterations.")
        if best is None or traj[-1] > best_traj[-1]:
            best, best_traj = model, traj
    if best.floor_active:
        warn("EmBaseline", f"Variance floor {VARIANCE_FLOOR} was active in the selected model.")
    return best, best_traj


def gmm_density(model: DiagGmm, x):
    return joint_density(model, x)


def gmm_posterior(model: DiagGmm, x):
    return posterior(model, x)


def gmm_cluster(model: DiagGmm, x):
    return map_cluster(model, x)
