# v1.0.0 - Work Package 1: Data Models (configs, reports, documents)
from typing import Annotated, Any, Dict, List, Literal, Optional, Union

from pydantic import BaseModel, Field, model_validator

SINC_PAD_DEFAULT = 128
CLIP_DEFAULT = (0.005, 0.995)
FAMILIES = ("gaussian", "gmm2", "gamma", "laplace")


class JsonDocument(BaseModel):
    """Shared JSON round trip."""

    def to_json(self) -> str:
        return self.model_dump_json(indent=2)

    @classmethod
    def from_json(cls, json_str: str):
        return cls.model_validate_json(json_str)


# --------------------------------------------------------------------------
# Solver
# --------------------------------------------------------------------------
class SolverConfig(JsonDocument):
    """
    Parameters of the coupled CPD solver.
    """
    loss: Literal["kl", "fro"] = Field("kl", description="Divergence between histograms and model")
    rank: int = Field(..., ge=1, description="Number of mixture components R")
    max_outer_iters: int = Field(500, ge=1, description="Cap on full sweeps over all blocks")
    inner_iters: int = Field(5, ge=1, description="EG steps per block per sweep")
    tol: float = Field(1e-6, gt=0.0, description="Relative objective decrease that counts as converged")
    step0: float = Field(1.0, gt=0.0, description="Initial Armijo step")
    backtrack: float = Field(0.5, gt=0.0, lt=1.0, description="Armijo backtracking factor beta")
    sigma: float = Field(1e-4, gt=0.0, lt=1.0, description="Armijo sufficient-decrease constant")
    max_backtracks: int = Field(30, ge=0, description="Armijo t_max")
    seed: int = Field(0, description="Seed of the first restart; restart k uses seed + k")
    restarts: int = Field(5, ge=1, description="Random initializations, best objective kept")


class FitReport(JsonDocument):
    trajectory: List[float] = Field(default_factory=list, description="Objective after each outer iteration (selected restart)")
    iterations: int = Field(0, ge=0)
    converged: bool = Field(False)
    restart_objectives: List[float] = Field(default_factory=list)
    selected_restart: int = Field(0, ge=0)


class IdentifiabilityAdvisory(JsonDocument):
    """
    Deterministic rank bounds for the coupled model. Advisory only; the solver runs regardless.
    """
    N: int
    I: int
    R: int
    kruskal_ok: bool = Field(..., description="Kruskal condition on the block tensor under generic k-ranks")
    theorem1_bound: int = Field(..., description="(floor((N-1)/2) - 1) * I")
    theorem1_ok: bool
    alpha: int = Field(..., description="floor(log2(floor(N/3) * I))")
    theorem2_bound: int = Field(..., description="2^(2(alpha-1))")
    theorem2_ok: bool
    quadratic_bound: float = Field(..., description="(floor(N/3) * I + 1)^2 / 16")
    quadratic_ok: bool


# --------------------------------------------------------------------------
# Parametric conditionals (ground truth of the synthetic settings)
# --------------------------------------------------------------------------
class GaussianSpec(BaseModel):
    kind: Literal["gaussian"] = "gaussian"
    mean: float
    var: float = Field(..., gt=0.0)


class Gmm2Spec(BaseModel):
    """Equal-weight pair of Gaussians."""
    kind: Literal["gmm2"] = "gmm2"
    mean1: float
    var1: float = Field(..., gt=0.0)
    mean2: float
    var2: float = Field(..., gt=0.0)


class ShiftedGammaSpec(BaseModel):
    """pdf ∝ (x - loc)^(shape-1) exp(-(x - loc)/scale) for x > loc."""
    kind: Literal["gamma"] = "gamma"
    shape: float = Field(..., gt=0.0)
    loc: float
    scale: float = Field(..., gt=0.0)


class LaplaceSpec(BaseModel):
    """Laplace parameterized by its standard deviation."""
    kind: Literal["laplace"] = "laplace"
    mean: float
    std: float = Field(..., gt=0.0)


ConditionalSpec = Annotated[
    Union[GaussianSpec, Gmm2Spec, ShiftedGammaSpec, LaplaceSpec],
    Field(discriminator="kind"),
]


class SettingSpec(JsonDocument):
    family: str = Field(..., description="One of gaussian, gmm2, gamma, laplace")
    N: int = Field(10, ge=3)
    R: int = Field(5, ge=1)
    seed: int = Field(0)
    alpha: float = Field(10.0, gt=0.0, description="Symmetric Dirichlet concentration of the weights")


# --------------------------------------------------------------------------
# Reports
# --------------------------------------------------------------------------
class EvalReport(JsonDocument):
    kl_estimate: Optional[float] = None
    kl_stderr: Optional[float] = None
    accuracy: Optional[float] = Field(None, ge=0.0, le=1.0)
    permutation: Optional[List[int]] = Field(None, description="permutation[r] = learned component matched to true component r")
    l1_errors: Optional[List[List[float]]] = Field(None, description="N x R conditional L1 errors")
    test_size: int = Field(0, ge=0)
    config: Dict[str, Any] = Field(default_factory=dict)


# --------------------------------------------------------------------------
# Model documents
# --------------------------------------------------------------------------
class ModelDocument(JsonDocument):
    """
    Serialized model envelope. `kind` decides which of the optional blocks are filled.
    """
    kind: Literal["coupled-sinc", "parametric", "diag-gmm"]
    N: int = Field(..., ge=1)
    R: int = Field(..., ge=1)
    I: Optional[int] = Field(None, ge=2)
    weights: List[float] = Field(..., alias="lambda")
    # coupled-sinc
    factors: Optional[List[List[List[float]]]] = Field(None, description="Per variable, I rows of R entries")
    edges: Optional[List[List[float]]] = Field(None, description="Per variable, I+1 bin edges")
    sinc_pad: Optional[int] = Field(None, ge=1)
    conditional: Optional[Literal["sinc", "histogram"]] = None
    # parametric
    conditionals: Optional[List[List[ConditionalSpec]]] = Field(None, description="N x R descriptors")
    # diag-gmm
    means: Optional[List[List[float]]] = None
    variances: Optional[List[List[float]]] = None
    variance_floor_active: Optional[bool] = None
    # provenance
    samples: Optional[int] = Field(None, description="Records the model was learned from")
    config: Dict[str, Any] = Field(default_factory=dict)
    trajectory: List[float] = Field(default_factory=list)
    report: Optional[FitReport] = None
    advisory: Optional[IdentifiabilityAdvisory] = None

    model_config = {"populate_by_name": True}

    def to_json(self) -> str:
        return self.model_dump_json(indent=2, by_alias=True, exclude_none=True)


# --------------------------------------------------------------------------
# CLI run configurations
# --------------------------------------------------------------------------
class ClipMixin(BaseModel):
    clip_lo: float = Field(CLIP_DEFAULT[0], ge=0.0, lt=1.0)
    clip_hi: float = Field(CLIP_DEFAULT[1], gt=0.0, le=1.0)

    @model_validator(mode="after")
    def _ordered_clip(self):
        if self.clip_lo >= self.clip_hi:
            raise ValueError(f"clip_lo ({self.clip_lo}) must be below clip_hi ({self.clip_hi})")
        return self


class SincGridMixin(BaseModel):
    bins: int = Field(10, ge=2, description="Uniform intervals I per variable")
    sinc_pad: int = Field(SINC_PAD_DEFAULT, ge=1, description="Padding length L on each side, at least I")

    @model_validator(mode="after")
    def _pad_covers_bins(self):
        if self.sinc_pad < self.bins:
            raise ValueError(f"sinc_pad ({self.sinc_pad}) must be at least bins ({self.bins})")
        return self


class GenerateConfig(JsonDocument):
    family: str = Field("gaussian")
    n_vars: int = Field(10, ge=3)
    rank: int = Field(5, ge=1)
    samples: int = Field(10000, ge=1)
    missing_rate: float = Field(0.0, ge=0.0, lt=1.0)
    alpha: float = Field(10.0, gt=0.0)
    seed: int = Field(0)
    out: str = Field(..., description="CSV path; the truth sidecar goes next to it")


class FitConfig(ClipMixin, SincGridMixin, JsonDocument):
    data: str
    out: str
    method: Literal["cpd", "em"] = "cpd"
    rank: int = Field(5, ge=1)
    loss: Literal["kl", "fro"] = "kl"
    restarts: int = Field(5, ge=1)
    seed: int = Field(0)
    max_outer_iters: int = Field(500, ge=1)
    inner_iters: int = Field(5, ge=1)
    tol: float = Field(1e-6, gt=0.0)
    conditional: Literal["sinc", "histogram"] = "sinc"
    em_max_iters: int = Field(500, ge=1)


class EvalConfig(JsonDocument):
    truth: Optional[str] = Field(None, description="Parametric truth document")
    model: Optional[str] = Field(None, description="Learned model document")
    labels: Optional[str] = Field(None, description="Predicted labels CSV")
    data: Optional[str] = Field(None, description="Dataset CSV with a label column")
    mc_points: int = Field(1000, ge=1)
    seed: int = Field(0)
    l1_points: int = Field(512, ge=2)
    out: str
    table: Optional[str] = Field(None, description="Sweep CSV that receives one row")


class ClusterConfig(JsonDocument):
    model: str
    data: str
    out: str


class ExportConfig(JsonDocument):
    model: str
    out: str
    variable: int = Field(1, ge=1)
    component: int = Field(1, ge=1)
    resolution: int = Field(1001, ge=2)
    truth: Optional[str] = None
    truth_component: Optional[int] = Field(None, ge=1)


class ToyConfig(ClipMixin, SincGridMixin, JsonDocument):
    out_dir: str
    sample_sizes: List[int] = Field(default_factory=lambda: [1000, 10000, 100000])
    trials: int = Field(10, ge=1)
    mc_points: int = Field(1000, ge=1)
    resolution: int = Field(1001, ge=2)
    seed: int = Field(0)
