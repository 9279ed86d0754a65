# v1.0.0 - Work Package 4: Synthetic Settings
"""
Ground-truth mixtures for the four synthetic families and datasets drawn from them.
"""
import numpy as np

from console import log
from errors import InvalidArgumentError, UnknownFamilyError
from grid import Dataset
from mixture import ParametricMixture
from models import FAMILIES, GaussianSpec, Gmm2Spec, LaplaceSpec, SettingSpec, ShiftedGammaSpec

GAMMA_SHAPE = 5.0


def gen_weights(R: int, alpha: float = 10.0, seed: int = 0) -> np.ndarray:
    """Symmetric Dirichlet(alpha) draw."""
    if R < 1:
        raise InvalidArgumentError(f"Need at least one component, got {R}")
    if R == 1:
        return np.ones(1)
    rng = np.random.default_rng(seed)
    return rng.dirichlet(np.full(R, float(alpha)))


def _draw_spec(family: str, rng: np.random.Generator):
    if family == "gaussian":
        return GaussianSpec(mean=rng.uniform(-5, 5), var=rng.uniform(1, 2))
    if family == "gmm2":
        return Gmm2Spec(
            mean1=rng.uniform(0, 7), var1=rng.uniform(1, 4),
            mean2=rng.uniform(-7, 0), var2=rng.uniform(1, 4),
        )
    if family == "gamma":
        return ShiftedGammaSpec(shape=GAMMA_SHAPE, loc=rng.uniform(-5, 0), scale=rng.uniform(0.1, 0.5))
    if family == "laplace":
        return LaplaceSpec(mean=rng.uniform(-5, 5), std=np.sqrt(rng.uniform(5, 10)))
    raise UnknownFamilyError(f"Unknown family '{family}'; expected one of {', '.join(FAMILIES)}")


def make_setting(spec: SettingSpec) -> ParametricMixture:
    """Weights from Dirichlet(alpha), then per (n, r) parameters drawn per family."""
    family = spec.family.lower()
    if family not in FAMILIES:
        raise UnknownFamilyError(f"Unknown family '{spec.family}'; expected one of {', '.join(FAMILIES)}")
    weights = gen_weights(spec.R, spec.alpha, spec.seed)
    # separate stream so the weights do not shift the parameter draws
    rng = np.random.default_rng([spec.seed, 1])
    specs = [[_draw_spec(family, rng) for _ in range(spec.R)] for _ in range(spec.N)]
    log("Synth", f"Built {family} setting: N={spec.N}, R={spec.R}, seed={spec.seed}.")
    return ParametricMixture(weights, specs)


def generate_dataset(mix: ParametricMixture, M: int, missing_rate: float = 0.0, seed: int = 0) -> Dataset:
    """Ancestral sample of M records; each cell then hidden independently with probability missing_rate."""
    if M < 1:
        raise InvalidArgumentError(f"Need at least one record, got {M}")
    if not 0.0 <= missing_rate < 1.0:
        raise InvalidArgumentError(f"missing_rate must be in [0, 1), got {missing_rate}")
    data = mix.sample(M, seed)
    if missing_rate == 0.0:
        return data
    rng = np.random.default_rng([seed, 2])
    values = data.values.copy()
    values[rng.uniform(size=values.shape) < missing_rate] = np.nan
    # a record must keep at least one observed cell
    empty = np.flatnonzero(np.all(np.isnan(values), axis=1))
    if empty.size:
        keep = rng.integers(0, values.shape[1], size=empty.size)
        values[empty, keep] = data.values[empty, keep]
    return Dataset(values, data.names, data.labels)


def toy_mixture() -> ParametricMixture:
    """Univariate 0.5 N(-6, 25) + 0.5 N(10, 25)."""
    return ParametricMixture([1.0], [[Gmm2Spec(mean1=-6.0, var1=25.0, mean2=10.0, var2=25.0)]])
