"""
Subcommand handlers. Each takes a resolved RunConfig, writes its files through a
RunService and returns the output directory.
"""

import json
import logging
import os
from typing import Dict, List, Literal, Optional, Tuple, Union

import numpy as np
import pandas as pd
from pydantic import BaseModel, Field, field_validator, model_validator

from app.core.assumptions import check_all
from app.core.exceptions import ConfigurationError
from app.core.inference import (
    bootstrap_ci_glv,
    confidence_intervals,
    fit_glv_ls,
    fit_sglv_amle,
    predict_one_step,
)
from app.core.numerics import RngStream
from app.core.simulator import simulate_observed
from app.models.experiment import McConfig
from app.models.fit import GlvFit, SglvFit
from app.models.params import ModelParams, ObservationSeries
from app.models.simulation import SamplingSchedule, SimConfig
from app.services.experiments import DEFAULT_K_GRID, run_crossval_grid, run_mc_study
from app.services.ingest import (
    aggregate_taxa,
    filter_time_range,
    load_counts_csv,
    select_top_k,
    to_proportions,
)
from app.services.run_service import RunService
from app.services.visualization import SeriesVisualization
from config.config import Config

logger = logging.getLogger(__name__)


class RunConfig(BaseModel):
    """Resolved options of one CLI invocation"""
    command: str
    params: Optional[str] = None
    series: Optional[str] = None
    counts: Optional[str] = None
    taxonomy: Optional[str] = None
    fit: Optional[str] = None
    out: Optional[str] = None
    seed: int = Field(default_factory=lambda: Config.DEFAULT_SEED)
    jobs: int = Field(default_factory=lambda: Config.JOBS)
    level: float = 0.95
    k: List[int] = Field(default_factory=lambda: list(DEFAULT_K_GRID))
    splits: int = 100
    pseudocount: float = Field(default_factory=lambda: Config.DEFAULT_PSEUDOCOUNT)
    renormalize: Literal["top", "full"] = "top"
    rank: Optional[str] = "family"
    top: int = 5
    n: Optional[List[int]] = None
    n_obs: int = Field(default=1000, gt=0)
    x0: Optional[List[float]] = None
    sigma_scale: float = 1.0
    fine_dt: float = Field(default_factory=lambda: Config.FINE_DT)
    psd_tol: float = Field(default_factory=lambda: Config.PSD_TOLERANCE)
    t_min: Optional[float] = None
    t_max: Optional[float] = None
    case: str = "case1"
    replicates: int = Field(default_factory=lambda: Config.MC_REPLICATES)
    B: int = Field(default_factory=lambda: Config.BOOTSTRAP_REPLICATES)
    model: Literal["sglv", "glv"] = "sglv"

    @field_validator("k")
    @classmethod
    def _k(cls, v):
        if not v or min(v) < 2:
            raise ValueError("every k must be at least 2")
        return v

    @model_validator(mode="after")
    def _check(self):
        if not 0 < self.level < 1:
            raise ValueError("level must lie in (0, 1)")
        if self.jobs < 1 or self.splits < 1 or self.replicates < 1 or self.top < 1:
            raise ValueError("jobs, splits, replicates and top must be positive")
        if self.sigma_scale < 0 or self.pseudocount < 0:
            raise ValueError("sigma-scale and pseudocount must be non-negative")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be an unsigned 64-bit integer")
        return self

    @classmethod
    def from_args(cls, args) -> "RunConfig":
        values = {key: value for key, value in vars(args).items() if value is not None}
        return cls(**values)

    def require(self, *names: str) -> None:
        missing = [f"--{n.replace('_', '-')}" for n in names if getattr(self, n) is None]
        if missing:
            raise ConfigurationError(f"{self.command} requires {', '.join(missing)}")

    def output_dir(self) -> str:
        return self.out or os.path.join(Config.OUTPUT_DIR, self.command)

    def to_dict(self) -> Dict:
        """Configuration echo; the output directory does not affect results."""
        return self.model_dump(exclude={"out"})


def _run_service(config: RunConfig) -> RunService:
    return RunService(config.output_dir(), config.to_dict(), seed=config.seed)


def _load_params(config: RunConfig) -> Tuple[ModelParams, np.ndarray, Dict]:
    """Parameters, initial state and the raw document of ``--params``."""
    config.require("params")
    with open(config.params, "r") as f:
        try:
            document = json.load(f)
        except json.JSONDecodeError as e:
            raise ConfigurationError(f"{config.params}: {e}") from e
    params = ModelParams.from_dict(document)
    x0 = config.x0 if config.x0 is not None else document.get("x0")
    if x0 is None:
        raise ConfigurationError(f"{config.params} has no x0; pass --x0")
    x0 = np.asarray(x0, dtype=float)
    if x0.shape != (params.n_species,):
        raise ConfigurationError(f"x0 must have {params.n_species} entries")
    if config.sigma_scale != 1.0:
        params = params.with_sigma(params.sigma * config.sigma_scale)
    return params, x0, document


def _load_series(config: RunConfig) -> ObservationSeries:
    config.require("series")
    return ObservationSeries.load_csv(config.series)


def _load_fit(config: RunConfig, series: ObservationSeries) -> Union[SglvFit, GlvFit]:
    """The ``--model`` entry of a fit file, or a fresh fit to the series."""
    if config.fit is None:
        return fit_sglv_amle(series) if config.model == "sglv" else fit_glv_ls(series)
    payload = RunService.read_json(config.fit)
    if config.model not in payload:
        raise ConfigurationError(f"{config.fit} has no {config.model} fit")
    cls = SglvFit if config.model == "sglv" else GlvFit
    fit = cls.from_dict(payload[config.model])
    series.check_species(fit.n_species)
    return fit


def cmd_simulate(config: RunConfig) -> str:
    """Simulate one observed path and write it as a trajectory CSV."""
    params, x0, document = _load_params(config)
    schedule = SamplingSchedule(**{**document.get("schedule", {}), "n_obs": config.n_obs})
    sim = SimConfig(x0=x0, fine_dt=config.fine_dt, seed=config.seed)

    series = simulate_observed(params, sim, schedule)
    run = _run_service(config)
    run.write_series("trajectory.csv", series)
    run.write_json("simulate.json", {
        "params": params.to_dict(),
        "schedule": schedule.to_dict(),
        "simulation": sim.to_dict(),
        "total_time": series.total_time,
    })
    return run.output_dir


def cmd_fit(config: RunConfig) -> str:
    """
    Fit both models and write estimates, intervals, the significant-interaction
    network and the assumption report of the fitted SGLV parameters.
    """
    series = _load_series(config)
    sglv = fit_sglv_amle(series)
    glv = fit_glv_ls(series)
    wald = confidence_intervals(sglv, config.level)
    boot = bootstrap_ci_glv(series, glv, config.B, config.level, RngStream(config.seed))
    report = check_all(sglv.to_params(), series.values[0], tol=config.psd_tol)

    run = _run_service(config)
    run.write_json("fit.json", {"sglv": sglv.to_dict(), "glv": glv.to_dict()})
    run.write_json("ci.json", {"sglv": wald.to_dict(), "glv": boot.to_dict()})
    network = wald.network(growth=sglv.r_hat)
    run.write_json("network.json", network)
    SeriesVisualization(run.output_dir).plot_network(network)
    run.write_json("assumptions.json", report.to_dict())
    return run.output_dir


def cmd_check(config: RunConfig) -> str:
    """Evaluate the four stability assumptions for a parameter document."""
    params, x0, _ = _load_params(config)
    report = check_all(params, x0, tol=config.psd_tol)
    logger.info("assumptions A1=%s A2=%s A3=%s A4=%s", report.a1_pass, report.a2_pass,
                report.a3_pass, report.a4_pass)
    run = _run_service(config)
    run.write_json("check.json", report.to_dict())
    return run.output_dir


def _mc_config(config: RunConfig) -> McConfig:
    overrides = {"replicates": config.replicates, "seed": config.seed,
                 "fine_dt": config.fine_dt}
    if config.n:
        overrides["n_obs"] = config.n
    if config.params is None:
        mc = McConfig.case(config.case, **overrides)
        if config.sigma_scale != 1.0:
            mc.params = mc.params.with_sigma(mc.params.sigma * config.sigma_scale)
        return mc
    params, x0, document = _load_params(config)
    if "schedule" in document:
        overrides["schedule"] = SamplingSchedule(**document["schedule"])
    name = os.path.splitext(os.path.basename(config.params))[0]
    return McConfig(case_name=name, params=params, x0=x0.tolist(), **overrides)


def cmd_mc(config: RunConfig) -> str:
    """Monte Carlo MSE tables; the text rendering goes to stdout."""
    result = run_mc_study(_mc_config(config), jobs=config.jobs)
    run = _run_service(config)
    run.write_csv("mc.csv", result.to_dataframe())
    run.write_json("mc.json", result.to_dict())
    print(result.render())
    return run.output_dir


def cmd_crossval(config: RunConfig) -> str:
    """Cross-validated prediction errors for every ``--k``."""
    series = _load_series(config)
    result = run_crossval_grid(series, config.k, config.splits, RngStream(config.seed),
                               jobs=config.jobs)
    run = _run_service(config)
    run.write_csv("crossval.csv", result.to_dataframe())
    run.write_json("crossval.json", result.to_dict())
    return run.output_dir


def cmd_ingest(config: RunConfig) -> str:
    """Counts and taxonomy to a proportion series of the top taxa."""
    config.require("counts")
    table = load_counts_csv(config.counts, config.taxonomy)
    if config.t_min is not None or config.t_max is not None:
        table = filter_time_range(table, config.t_min, config.t_max)
    if config.rank and config.rank != "none":
        table = aggregate_taxa(table, config.rank)
    table = select_top_k(table, config.top)
    series = to_proportions(table, config.pseudocount, config.renormalize)

    run = _run_service(config)
    run.write_series("series.csv", series)
    run.write_json("ingest.json", {
        "taxa": table.taxa_ids,
        "lineages": {t: table.lineage(t) for t in table.taxa_ids},
        "totals": [int(v) for v in table.totals],
        "n_samples": series.n_obs,
    })
    return run.output_dir


def prediction_frame(series: ObservationSeries, fit: Union[SglvFit, GlvFit]) -> pd.DataFrame:
    """Observed and one-step predicted log values at every time after the first."""
    u = series.log_values
    predicted = predict_one_step(fit, u[:-1], series.gaps)
    columns = {"time": series.times[1:]}
    for k, name in enumerate(series.labels):
        columns[f"{name}_observed"] = u[1:, k]
        columns[f"{name}_predicted"] = predicted[:, k]
    return pd.DataFrame(columns)


def cmd_predict(config: RunConfig) -> str:
    """One-step predictions of a series under a fitted model."""
    series = _load_series(config)
    fit = _load_fit(config, series)
    frame = prediction_frame(series, fit)
    observed = frame[[f"{n}_observed" for n in series.labels]].to_numpy()
    predicted = frame[[f"{n}_predicted" for n in series.labels]].to_numpy()

    run = _run_service(config)
    run.write_csv("predictions.csv", frame)
    run.write_json("predict.json", {
        "model": config.model,
        "mspe": float(np.mean(np.sum((observed - predicted) ** 2, axis=1))),
    })
    return run.output_dir


def cmd_plot(config: RunConfig) -> str:
    """Proportion and log-prediction figures as SVG."""
    series = _load_series(config)
    fit = None
    # a fresh fit needs at least N + 3 points
    if config.fit is not None or series.n_obs >= series.n_species + 3:
        fit = _load_fit(config, series)
    SeriesVisualization(config.output_dir()).plot_all(series, fit)
    return config.output_dir()


COMMANDS = {
    "simulate": cmd_simulate,
    "fit": cmd_fit,
    "check": cmd_check,
    "mc": cmd_mc,
    "crossval": cmd_crossval,
    "ingest": cmd_ingest,
    "predict": cmd_predict,
    "plot": cmd_plot,
}
