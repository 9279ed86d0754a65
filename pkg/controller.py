# v1.0.0 - Work Package 5: Pipeline Controller
"""
Glue between the numeric modules: grid -> triple histograms -> coupled CPD ->
smooth assembly, plus conversion of every model kind to and from its JSON document.
"""
from typing import Optional, Tuple

import numpy as np

from baseline_em import DiagGmm, em_fit
from console import log
from engine import CoupledModel, check_identifiability, fit
from errors import DimensionMismatchError, InsufficientVariablesError, ModelKindError
from grid import Dataset, DiscretizationGrid, TripleHistogramSet, build_grid, estimate_triple_histograms
from mixture import MixtureDensity, ParametricMixture, ProductMixture
from models import SINC_PAD_DEFAULT, FitConfig, FitReport, IdentifiabilityAdvisory, ModelDocument, SolverConfig


class FitResult:
    """Everything one fit produces: the coupled model, its smooth assembly and the bookkeeping."""
    def __init__(self, model: CoupledModel, density: MixtureDensity, grid: DiscretizationGrid,
                 report: FitReport, advisory: IdentifiabilityAdvisory):
        self.model = model
        self.density = density
        self.grid = grid
        self.report = report
        self.advisory = advisory

    @property
    def final_objective(self) -> float:
        return self.report.trajectory[-1]


class PipelineController:
    """
    Runs the learning pipeline for one FitConfig.
    """
    def __init__(self, config: FitConfig):
        self.config = config

    def solver_config(self) -> SolverConfig:
        cfg = self.config
        return SolverConfig(
            loss=cfg.loss, rank=cfg.rank, restarts=cfg.restarts, seed=cfg.seed,
            max_outer_iters=cfg.max_outer_iters, inner_iters=cfg.inner_iters, tol=cfg.tol,
        )

    def fit_histograms(self, hists: TripleHistogramSet, grid: DiscretizationGrid) -> FitResult:
        """Histograms supplied directly (exact-statistics path)."""
        if grid.N != hists.N or grid.I != hists.I:
            raise DimensionMismatchError(
                f"Grid is N={grid.N}, I={grid.I}; histograms are N={hists.N}, I={hists.I}"
            )
        advisory = check_identifiability(hists.N, hists.I, self.config.rank)
        model, report = fit(hists, self.solver_config())
        density = MixtureDensity.from_model(model, grid.edges, self.config.sinc_pad, self.config.conditional)
        return FitResult(model, density, grid, report, advisory)

    def fit_dataset(self, data: Dataset) -> FitResult:
        if data.N < 3:
            raise InsufficientVariablesError(f"Need at least 3 variables, dataset has {data.N}")
        grid = build_grid(data, self.config.bins, (self.config.clip_lo, self.config.clip_hi))
        hists = estimate_triple_histograms(data, grid)
        result = self.fit_histograms(hists, grid)
        log("Controller", f"Fit finished: objective {result.final_objective:.6g}, "
                          f"{result.report.iterations} rounds, converged={result.report.converged}.")
        return result

    def fit_em(self, data: Dataset) -> Tuple[DiagGmm, list]:
        cfg = self.config
        return em_fit(data, cfg.rank, max_iters=cfg.em_max_iters, restarts=cfg.restarts, seed=cfg.seed)

    def document(self, result: FitResult, samples: Optional[int] = None) -> ModelDocument:
        return coupled_document(result.model, result.grid.edges, self.config.sinc_pad, self.config.conditional,
                                report=result.report, advisory=result.advisory,
                                config=self.config.model_dump(), samples=samples)


def coupled_document(model: CoupledModel, edges: np.ndarray, pad: int, conditional: str = "sinc",
                     report: Optional[FitReport] = None, advisory: Optional[IdentifiabilityAdvisory] = None,
                     config: Optional[dict] = None, samples: Optional[int] = None) -> ModelDocument:
    return ModelDocument(
        kind="coupled-sinc", N=model.N, R=model.R, I=model.I,
        weights=model.weights.tolist(), factors=model.factors.tolist(),
        edges=np.asarray(edges, dtype=float).tolist(), sinc_pad=pad, conditional=conditional,
        samples=samples, config=dict(config or {}),
        trajectory=list(report.trajectory) if report else [],
        report=report, advisory=advisory,
    )


def coupled_from_document(doc: ModelDocument) -> Tuple[CoupledModel, np.ndarray]:
    if doc.kind != "coupled-sinc" or doc.factors is None or doc.edges is None:
        raise ModelKindError(f"Expected a coupled-sinc model document, got '{doc.kind}'")
    model = CoupledModel(np.asarray(doc.weights), np.asarray(doc.factors))
    edges = np.asarray(doc.edges, dtype=float)
    if edges.shape != (model.N, model.I + 1):
        raise DimensionMismatchError(f"Edges of shape {edges.shape} do not fit N={model.N}, I={model.I}")
    return model, edges


def mixture_from_document(doc: ModelDocument) -> ProductMixture:
    """Any model document as an evaluable product mixture."""
    if doc.kind == "coupled-sinc":
        model, edges = coupled_from_document(doc)
        return MixtureDensity.from_model(model, edges, doc.sinc_pad or SINC_PAD_DEFAULT, doc.conditional or "sinc")
    if doc.kind == "parametric":
        return ParametricMixture.from_document(doc)
    if doc.kind == "diag-gmm":
        return DiagGmm.from_document(doc)
    raise ModelKindError(f"Unknown model kind '{doc.kind}'")
