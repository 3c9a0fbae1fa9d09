from dataclasses import dataclass, field

import numpy as np
from pydantic import BaseModel, Field

from prc_studio.bayes.proposal import build_proposal
from prc_studio.bayes.sampler import (
    importance_resample,
    summarize_identified,
    summarize_posterior,
)
from prc_studio.configuration import FitControls
from prc_studio.errors.errors import (
    BoundaryError,
    InvalidInputError,
    ModeNotFoundError,
    NumericalError,
    OutOfRegimeError,
)
from prc_studio.estimation.em import fit
from prc_studio.formatting import format_float
from prc_studio.message_handler.base import MessageHandler, get_message_handler, warn
from prc_studio.message_handler.types import EventScope, EventType, LogEvent
from prc_studio.model.base import identified_functionals, identified_names
from prc_studio.parallel import derive_seed, ordered_map
from prc_studio.prc.base import PrcQuery, prc_posterior, prc_quadrature
from prc_studio.simulation.base import SimConfig, simulate_dataset

RUN_FAILURES = (
    BoundaryError,
    InvalidInputError,
    ModeNotFoundError,
    NumericalError,
    OutOfRegimeError,
)


class QuerySpec(BaseModel):
    w: int = Field(ge=0)
    m1: int = Field(ge=1)
    m2: int = Field(ge=1)
    q1: float
    q2: float

    @property
    def name(self) -> str:
        return f"PRC({self.w}|{self.m1}x{self.m2};Q={self.q1:g}/{self.q2:g})"


class CoverageConfig(BaseModel):
    sim: SimConfig
    runs: int = Field(default=50, ge=2)
    alpha: float = Field(default=0.001, gt=0, lt=1)
    queries: list[QuerySpec] = []
    proposals: int = Field(default=2000, ge=1)
    resamples: int = Field(default=200, ge=1)
    mc_draws: int = Field(default=20_000, ge=1)
    fit_controls: FitControls = FitControls()


@dataclass
class RunOutcome:
    run: int
    seed: int
    covered: dict[str, bool] = field(default_factory=dict)
    error: str | None = None

    @property
    def failed(self) -> bool:
        return self.error is not None


@dataclass
class CoverageReport:
    quantities: list[str]
    coverage: dict[str, float]
    runs: int
    failed: int
    outcomes: list[RunOutcome]
    parameter_names: list[str]

    @property
    def mean_parameter_coverage(self) -> float:
        return float(np.mean([self.coverage[name] for name in self.parameter_names]))

    @property
    def mean_coverage(self) -> float:
        return float(np.mean(list(self.coverage.values())))

    def to_dict(self) -> dict:
        return {
            "runs": self.runs,
            "failed": self.failed,
            "coverage": self.coverage,
            "mean_parameter_coverage": self.mean_parameter_coverage,
            "mean_coverage": self.mean_coverage,
            "failures": [
                {"run": outcome.run, "seed": outcome.seed, "error": outcome.error}
                for outcome in self.outcomes
                if outcome.failed
            ],
        }


def true_prc_values(cfg: CoverageConfig) -> dict[str, float]:
    tau = cfg.sim.tau()
    scheme = cfg.sim.quality_scheme()
    return {
        spec.name: prc_quadrature(
            PrcQuery(spec.w, spec.m1, spec.m2, spec.q1, spec.q2, scheme), tau
        )
        for spec in cfg.queries
    }


def single_run(
    cfg: CoverageConfig,
    run: int,
    true_prcs: dict[str, float],
    msg_handler: MessageHandler | None = None,
) -> RunOutcome:
    """simulate -> fit -> posterior -> intervals for one derived seed; library failures are recorded."""
    seed = derive_seed(cfg.sim.seed, "run", run)
    outcome = RunOutcome(run=run, seed=seed)
    sim_cfg = cfg.sim.model_copy(update={"seed": seed})
    scheme = sim_cfg.quality_scheme()
    try:
        simulated = simulate_dataset(sim_cfg, msg_handler)
        result = fit(simulated.dataset, controls=cfg.fit_controls, msg_handler=msg_handler, threads=1)
        samples = importance_resample(
            simulated.dataset,
            build_proposal(result, msg_handler),
            H=cfg.proposals,
            R=cfg.resamples,
            seed=derive_seed(seed, "posterior"),
            msg_handler=msg_handler,
            threads=1,
        )
        truth = simulated.truth.tau
        for summaries, values in (
            (summarize_posterior(samples, cfg.alpha), truth.to_vector()),
            (summarize_identified(samples, cfg.alpha), identified_functionals(truth, scheme)),
        ):
            for summary, value in zip(summaries, values):
                outcome.covered[summary.name] = bool(summary.ci_low <= value <= summary.ci_high)
        for spec in cfg.queries:
            report = prc_posterior(
                PrcQuery(spec.w, spec.m1, spec.m2, spec.q1, spec.q2, scheme),
                samples,
                mc_draws=cfg.mc_draws,
                alpha=cfg.alpha,
                seed=derive_seed(seed, "prc"),
                threads=1,
            )
            true_value = true_prcs[spec.name]
            outcome.covered[spec.name] = bool(report.ci_low <= true_value <= report.ci_high)
    except RUN_FAILURES as e:
        outcome.covered = {}
        outcome.error = f"{type(e).__name__}: {getattr(e, 'message', str(e))}"
    return outcome


def run_coverage(
    cfg: CoverageConfig,
    msg_handler: MessageHandler | None = None,
    threads: int | None = None,
) -> CoverageReport:
    """
    Empirical coverage of the posterior intervals of tau, of the identified parameters and of the
    PRC queries over independent runs. The headline parameter coverage is over the identified ones.
    """
    msg_handler = msg_handler or get_message_handler()
    scheme = cfg.sim.quality_scheme()
    parameter_names = identified_names(scheme)
    quantities = list(dict.fromkeys(scheme.tau_names() + parameter_names))
    quantities += [spec.name for spec in cfg.queries]
    if scheme.is_categorical and cfg.queries:
        warn(
            msg_handler,
            EventScope.SIMULATION,
            "coverage_unidentified_queries",
            "Under a categorical scheme the PRC and the raw tau components move along a flat "
            "direction of the likelihood; their coverage depends on where the fit lands on it",
        )
    true_prcs = true_prc_values(cfg)

    outcomes = ordered_map(
        lambda run: single_run(cfg, run, true_prcs, msg_handler),
        range(cfg.runs),
        threads,
    )
    succeeded = [outcome for outcome in outcomes if not outcome.failed]
    failed = len(outcomes) - len(succeeded)
    for outcome in outcomes:
        if outcome.failed:
            warn(
                msg_handler,
                EventScope.SIMULATION,
                "coverage_run_failed",
                f"Run {outcome.run} failed and is excluded: {outcome.error}",
                {"seed": outcome.seed},
            )
    if not succeeded:
        raise NumericalError(
            "Every coverage run failed.", {"runs": cfg.runs, "errors": [o.error for o in outcomes]}
        )

    coverage = {
        name: float(np.mean([outcome.covered[name] for outcome in succeeded]))
        for name in quantities
    }
    report = CoverageReport(
        quantities=quantities,
        coverage=coverage,
        runs=cfg.runs,
        failed=failed,
        outcomes=outcomes,
        parameter_names=parameter_names,
    )
    msg_handler.send_message(
        LogEvent(
            "coverage_done",
            EventType.SUCCESS,
            EventScope.SIMULATION,
            f"Coverage over {len(succeeded)} runs ({failed} failed)",
            {"mean_parameter_coverage": report.mean_parameter_coverage},
        )
    )
    return report


def render_coverage_text(report: CoverageReport) -> str:
    width = max(len(name) for name in report.quantities)
    lines = [f"{'quantity'.ljust(width)}  coverage"]
    lines += [f"{name.ljust(width)}  {report.coverage[name]:.3f}" for name in report.quantities]
    lines.append(f"{'mean (identified)'.ljust(width)}  {report.mean_parameter_coverage:.3f}")
    lines.append(f"{'mean (all)'.ljust(width)}  {report.mean_coverage:.3f}")
    lines.append(f"runs: {report.runs}, failed: {report.failed}")
    return "\n".join(lines)


def render_coverage_csv(report: CoverageReport) -> str:
    lines = ["quantity,coverage"]
    lines += [f"{name},{format_float(report.coverage[name])}" for name in report.quantities]
    return "\n".join(lines) + "\n"
