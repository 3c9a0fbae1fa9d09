import pytest

from prc_studio.domain.types import QualityScheme
from prc_studio.errors.errors import NumericalError
from prc_studio.simulation.base import SimConfig
from prc_studio.simulation.coverage import (
    CoverageConfig,
    QuerySpec,
    RunOutcome,
    render_coverage_csv,
    render_coverage_text,
    run_coverage,
    single_run,
)
from tests.unit.conftest import TAU_CATEGORICAL

# Every quantity a categorical:3 run reports, in report order.
NAMES = QualityScheme.parse("categorical:3").tau_names() + ["c1", "c2", "c3"]


def _config(runs: int = 4) -> CoverageConfig:
    return CoverageConfig(
        sim=SimConfig(tau_true=TAU_CATEGORICAL, f=3, l=2, m_fixed=30, seed=7),
        runs=runs,
        queries=[QuerySpec(w=6, m1=38, m2=38, q1=3, q2=3)],
    )


def _outcome(run: int, hits: int, error: str | None = None) -> RunOutcome:
    names = NAMES + [QuerySpec(w=6, m1=38, m2=38, q1=3, q2=3).name]
    covered = {} if error else {name: k < hits for k, name in enumerate(names)}
    return RunOutcome(run=run, seed=run, covered=covered, error=error)


def test_coverage_fractions(mocker, msg_handler):
    mocker.patch(
        "prc_studio.simulation.coverage.true_prc_values", return_value={}
    )
    mocker.patch(
        "prc_studio.simulation.coverage.single_run",
        side_effect=lambda cfg, run, truth, handler: _outcome(run, hits=2 * run),
    )

    report = run_coverage(_config(runs=4), msg_handler, threads=1)

    # runs 0..3 cover the first 2 * run quantities
    assert report.quantities == NAMES + [QuerySpec(w=6, m1=38, m2=38, q1=3, q2=3).name]
    assert report.coverage["theta0"] == pytest.approx(0.75)
    assert report.coverage["theta2"] == pytest.approx(0.5)
    assert report.coverage["log_sigma2"] == pytest.approx(0.25)
    assert report.coverage["c1"] == pytest.approx(0.25)
    assert report.coverage["c3"] == 0.0
    assert report.failed == 0
    # c1, c2, c3 and log_sigma2
    assert report.mean_parameter_coverage == pytest.approx(0.5 / 4)
    events = [call.args[0].name for call in msg_handler.send_message.call_args_list]
    assert "coverage_unidentified_queries" in events

    text = render_coverage_text(report)
    assert "runs: 4, failed: 0" in text
    assert render_coverage_csv(report).splitlines()[0] == "quantity,coverage"


def test_failed_runs_are_excluded(mocker, msg_handler):
    mocker.patch("prc_studio.simulation.coverage.true_prc_values", return_value={})
    outcomes = [_outcome(0, hits=10), _outcome(1, hits=0, error="NumericalError: x")]
    mocker.patch(
        "prc_studio.simulation.coverage.single_run",
        side_effect=lambda cfg, run, truth, handler: outcomes[run],
    )

    report = run_coverage(_config(runs=2), msg_handler, threads=1)

    assert report.failed == 1
    assert all(value == 1.0 for value in report.coverage.values())
    assert report.to_dict()["failures"] == [
        {"run": 1, "seed": 1, "error": "NumericalError: x"}
    ]
    events = [call.args[0].name for call in msg_handler.send_message.call_args_list]
    assert "coverage_run_failed" in events


def test_every_run_failing(mocker, msg_handler):
    mocker.patch("prc_studio.simulation.coverage.true_prc_values", return_value={})
    mocker.patch(
        "prc_studio.simulation.coverage.single_run",
        side_effect=lambda cfg, run, truth, handler: _outcome(run, 0, error="BoundaryError: y"),
    )

    with pytest.raises(NumericalError):
        run_coverage(_config(runs=3), msg_handler, threads=1)


def test_single_run_records_library_failures(mocker, msg_handler):
    mocker.patch(
        "prc_studio.simulation.coverage.fit",
        side_effect=NumericalError("Hessian not invertible"),
    )

    outcome = single_run(_config(), 0, {}, msg_handler)

    assert outcome.failed
    assert outcome.error == "NumericalError: Hessian not invertible"
    assert outcome.covered == {}


def test_single_run_seeds_differ(mocker, msg_handler):
    mocker.patch("prc_studio.simulation.coverage.fit", side_effect=NumericalError("stop"))

    seeds = {single_run(_config(), run, {}, msg_handler).seed for run in range(3)}

    assert len(seeds) == 3
