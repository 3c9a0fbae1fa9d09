import json
import os
from argparse import Namespace

import numpy as np

from prc_studio.bayes.proposal import build_proposal
from prc_studio.bayes.sampler import PosteriorSamples, importance_resample, summarize_posterior
from prc_studio.bayes.storage import load_samples, save_samples
from prc_studio.cli.manifest import RunManifest
from prc_studio.configuration import FitControls
from prc_studio.dataset_handler.matches import load_matches, save_matches
from prc_studio.dataset_handler.minutiae import build_matches_from_minutiae, load_minutia_set
from prc_studio.dataset_handler.summaries import (
    Statistic,
    render_summary_csv,
    render_summary_text,
    summarize,
)
from prc_studio.domain.types import MatchConfig, QualityScheme, Tau
from prc_studio.errors.errors import InvalidInputError
from prc_studio.estimation.em import fit
from prc_studio.estimation.model_file import load_model, save_model
from prc_studio.formatting import format_float
from prc_studio.matcher.base import count_matches
from prc_studio.message_handler.base import MessageHandler
from prc_studio.message_handler.types import EventScope, EventType, LogEvent
from prc_studio.prc.base import PrcQuery, PrcReport, draw_variates, prc_posterior, prc_quadrature
from prc_studio.prc.design import design_w_grid
from prc_studio.prc.tables import (
    format_label,
    prc_grid,
    reference_comparison,
    render_design_csv,
    render_design_text,
    render_matrix_text,
    render_prc_grid_csv,
    render_prc_grid_text,
    render_ratio_text,
)
from prc_studio.presets.presets import (
    get_default_presets,
    get_preset,
    preset_tau,
    samples_from_summary,
    sim_config,
)
from prc_studio.simulation.base import SimConfig, simulate_dataset
from prc_studio.simulation.coverage import (
    CoverageConfig,
    QuerySpec,
    render_coverage_csv,
    render_coverage_text,
    run_coverage,
)
from prc_studio.simulation.truth import write_truth

# Flags that change how a run executes but never what it computes.
NON_SEMANTIC_FLAGS = {"threads", "verbose", "handler", "command"}


def _manifest(args: Namespace, input_paths: list[str], seeds: dict | None = None) -> RunManifest:
    flags = {key: value for key, value in vars(args).items() if key not in NON_SEMANTIC_FLAGS}
    return RunManifest.for_command(args.command, flags, input_paths, seeds)


def _write(path: str, text: str, manifest: RunManifest):
    with open(path, "w", encoding="utf-8") as f:
        f.write(f"# manifest: {manifest.id}\n{text}")
    manifest.finish()
    manifest.write_sidecar(path)


def _floats(text: str, name: str) -> list[float]:
    try:
        return [float(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise InvalidInputError(name, text, f"--{name} takes comma-separated numbers.")


def _quality(value: float, scheme: QualityScheme):
    scheme.validate_quality(value)
    return int(value) if scheme.is_categorical else float(value)


def _labels(args: Namespace, scheme: QualityScheme) -> list:
    if args.labels:
        return [_quality(value, scheme) for value in _floats(args.labels, "labels")]
    if args.preset:
        return get_preset(args.preset).labels
    if scheme.is_categorical:
        return scheme.labels()
    raise InvalidInputError("labels", None, "Continuous schemes need --labels for a grid.")


def _samples(args: Namespace) -> PosteriorSamples:
    if args.samples:
        return load_samples(args.samples)
    if args.preset:
        return samples_from_summary(args.preset, args.R, args.seed)
    raise InvalidInputError("samples", None, "Give --samples or --preset.")


def _minutia_counts(args: Namespace) -> tuple[int, int]:
    if args.m1 is not None and args.m2 is not None:
        return args.m1, args.m2
    if args.preset:
        m1, m2 = get_preset(args.preset).default_m
        return args.m1 or m1, args.m2 or m2
    raise InvalidInputError("m1, m2", (args.m1, args.m2), "Give --m1 and --m2 or a --preset.")


def _input_paths(*paths) -> list[str]:
    return [path for path in paths if path]


def _report_line(name: str, report: PrcReport) -> str:
    return (
        f"{name}: mean {report.mean:.4f}, sd {report.sd:.4g}, "
        f"{100 * (1 - report.alpha):g}% CI [{report.ci_low:.4f}, {report.ci_high:.4f}]"
    )


def _report_row(name: str, query: PrcQuery, report: PrcReport) -> str:
    return ",".join(
        [
            name,
            str(query.w),
            str(query.m1),
            str(query.m2),
            format_label(query.q1),
            format_label(query.q2),
            format_float(report.mean),
            format_float(report.sd),
            format_float(report.ci_low),
            format_float(report.ci_high),
        ]
    )


def cmd_summarize(args: Namespace, msg_handler: MessageHandler) -> int:
    scheme = QualityScheme.parse(args.scheme)
    dataset = load_matches(args.matches, scheme, args.relabel_qmax)
    manifest = _manifest(args, [args.matches])
    if args.out_dir:
        os.makedirs(args.out_dir, exist_ok=True)
    for statistic in Statistic:
        table = summarize(dataset, statistic, args.bins)
        print(render_summary_text(table) + "\n")
        if args.out_dir:
            _write(
                os.path.join(args.out_dir, f"{statistic.value}.csv"),
                render_summary_csv(table),
                manifest,
            )
    return 0


def cmd_fit(args: Namespace, msg_handler: MessageHandler) -> int:
    scheme = QualityScheme.parse(args.scheme)
    dataset = load_matches(args.matches, scheme, args.relabel_qmax)
    init = Tau.from_vector(list(args.init), scheme) if args.init else None
    controls = FitControls(
        tol=args.tol,
        max_em_iterations=args.max_iter,
        fixed_log_sigma2=args.fixed_log_sigma2,
    )
    manifest = _manifest(args, [args.matches])
    result = fit(dataset, init, controls, msg_handler=msg_handler, threads=args.threads)

    save_model(args.out, result, manifest.id)
    manifest.finish()
    manifest.write_sidecar(args.out)

    print(f"EM iterations: {result.em_iterations} (converged: {result.converged})")
    for name, value in result.tau_hat.to_dict(scheme).items():
        print(f"{name:>12}  {value: .6f}")
    return 0


def cmd_posterior(args: Namespace, msg_handler: MessageHandler) -> int:
    result = load_model(args.model)
    dataset = load_matches(args.matches, result.scheme, args.relabel_qmax)
    manifest = _manifest(args, [args.model, args.matches], {"posterior": args.seed})
    samples = importance_resample(
        dataset,
        build_proposal(result, msg_handler),
        H=args.H,
        R=args.R,
        seed=args.seed,
        msg_handler=msg_handler,
        threads=args.threads,
    )
    save_samples(args.out, samples, {"manifest": manifest.id})
    manifest.finish()
    manifest.write_sidecar(args.out)

    print(f"ESS: {samples.ess:.1f} of {samples.proposals} proposals ({samples.failed} failed)")
    print(f"{'':>12}  {'mean':>10}  {'sd':>10}  CI")
    for summary in summarize_posterior(samples, args.alpha):
        print(
            f"{summary.name:>12}  {summary.mean:10.4f}  {summary.sd:10.4f}  "
            f"[{summary.ci_low:.4f}, {summary.ci_high:.4f}]"
        )
    return 0


def cmd_prc(args: Namespace, msg_handler: MessageHandler) -> int:
    samples = _samples(args)
    scheme = samples.scheme
    m1, m2 = _minutia_counts(args)
    manifest = _manifest(args, _input_paths(args.samples), {"prc": args.seed})

    if args.grid:
        grid = prc_grid(
            samples,
            args.w,
            m1,
            m2,
            _labels(args, scheme),
            mc_draws=args.mc,
            alpha=args.alpha,
            seed=args.seed,
            threads=args.threads,
        )
        print(render_prc_grid_text(grid))
        if args.out:
            _write(args.out, render_prc_grid_csv(grid), manifest)
        return 0

    if args.q1 is None or args.q2 is None:
        raise InvalidInputError("q1, q2", (args.q1, args.q2), "Give --q1 and --q2, or --grid.")
    variates = draw_variates(args.seed, args.mc)
    q1, q2 = _quality(args.q1, scheme), _quality(args.q2, scheme)
    queries = [("observed", PrcQuery(args.w, m1, m2, q1, q2, scheme))]
    if args.what_if:
        q1, q2 = (_quality(value, scheme) for value in _floats(args.what_if, "what-if"))
        queries.append(("what-if", PrcQuery(args.w, m1, m2, q1, q2, scheme)))

    rows = ["query,w,m1,m2,q1,q2,mean,sd,ci_low,ci_high"]
    for name, query in queries:
        report = prc_posterior(
            query, samples, alpha=args.alpha, variates=variates, threads=args.threads
        )
        print(
            _report_line(
                f"PRC({query.w} | {m1},{m2}; Q=({format_label(query.q1)},{format_label(query.q2)}))",
                report,
            )
        )
        rows.append(_report_row(name, query, report))
    if args.out:
        _write(args.out, "\n".join(rows) + "\n", manifest)
    return 0


def cmd_design_w(args: Namespace, msg_handler: MessageHandler) -> int:
    samples = _samples(args)
    m1, m2 = _minutia_counts(args)
    labels = _labels(args, samples.scheme)
    manifest = _manifest(args, _input_paths(args.samples), {"prc": args.seed})
    grid = design_w_grid(
        m1, m2, labels, samples, args.target, mc_draws=args.mc, seed=args.seed, threads=args.threads
    )
    title = f"Smallest w with PRC(w | {m1},{m2}) <= {args.target:g}; * means no such w exists"
    print(render_design_text(grid, labels, title))
    if args.out:
        _write(args.out, render_design_csv(grid, labels), manifest)
    return 0


def cmd_match(args: Namespace, msg_handler: MessageHandler) -> int:
    cfg = MatchConfig(args.r0, args.u0, anchor_search=not args.no_anchor_search)
    if args.qualities:
        if not args.minutiae or not args.out:
            raise InvalidInputError(
                "minutiae", args.minutiae, "Building a match table needs --minutiae and --out."
            )
        manifest = _manifest(args, args.minutiae + [args.qualities])
        dataset = build_matches_from_minutiae(
            args.minutiae,
            args.qualities,
            cfg,
            QualityScheme.parse(args.scheme),
            args.relabel_qmax,
            msg_handler,
            args.threads,
        )
        save_matches(args.out, dataset, [f"manifest: {manifest.id}"])
        manifest.finish()
        manifest.write_sidecar(args.out)
        print(f"Wrote {dataset.n_pairs} impostor pairs to {args.out}")
        return 0

    if not args.a or not args.b:
        raise InvalidInputError("a, b", (args.a, args.b), "Give --a and --b, or --qualities.")
    set_a, set_b = load_minutia_set(args.a), load_minutia_set(args.b)
    w = count_matches(set_a, set_b, cfg)
    print(f"w={w} m_a={len(set_a)} m_b={len(set_b)}")
    return 0


def _simulation_config(args: Namespace) -> SimConfig:
    if args.preset:
        return sim_config(args.preset, args.f, args.l, args.seed)
    if not args.tau:
        raise InvalidInputError("tau", None, "Give --preset or --tau with --scheme.")
    scheme = QualityScheme.parse(args.scheme)
    return SimConfig(
        tau_true=list(args.tau),
        scheme=args.scheme,
        f=args.f,
        l=args.l,
        quality_rule="labels" if scheme.is_categorical else "uniform",
        m_rule="fixed",
        m_fixed=args.m,
        seed=args.seed,
    )


def cmd_simulate(args: Namespace, msg_handler: MessageHandler) -> int:
    cfg = _simulation_config(args)
    manifest = _manifest(args, [], {"simulation": cfg.seed})
    simulated = simulate_dataset(cfg, msg_handler)
    save_matches(args.out, simulated.dataset, [f"manifest: {manifest.id}", f"scheme: {cfg.scheme}"])
    truth_path = args.truth or os.path.join(os.path.dirname(os.path.abspath(args.out)), "truth.csv")
    write_truth(truth_path, simulated)
    manifest.finish()
    manifest.write_sidecar(args.out)
    print(
        f"Simulated {simulated.dataset.n_pairs} pairs; mean Y {np.mean(simulated.dataset.y):.4f}; "
        f"truth written to {truth_path}"
    )
    return 0


def _default_query(cfg: SimConfig, preset_name: str | None) -> QuerySpec:
    scheme = cfg.quality_scheme()
    m1, m2 = get_preset(preset_name).default_m if preset_name else (cfg.m_fixed, cfg.m_fixed)
    top = scheme.qmax if scheme.is_categorical else 0.5
    return QuerySpec(w=12, m1=m1, m2=m2, q1=top, q2=top)


def _query_spec(text: str) -> QuerySpec:
    values = _floats(text, "query")
    if len(values) != 5:
        raise InvalidInputError("query", text, "--query takes w,m1,m2,q1,q2.")
    w, m1, m2, q1, q2 = values
    return QuerySpec(w=int(w), m1=int(m1), m2=int(m2), q1=q1, q2=q2)


def cmd_validate(args: Namespace, msg_handler: MessageHandler) -> int:
    if args.config:
        with open(args.config, "r", encoding="utf-8") as f:
            cfg = CoverageConfig.model_validate_json(f.read())
        inputs = [args.config]
    else:
        sim = _simulation_config(args)
        queries = [_query_spec(text) for text in args.query or []] or [
            _default_query(sim, args.preset)
        ]
        cfg = CoverageConfig(
            sim=sim,
            runs=args.runs,
            alpha=args.alpha,
            queries=queries,
            proposals=args.H,
            resamples=args.R,
            mc_draws=args.mc,
        )
        inputs = []
    manifest = _manifest(args, inputs, {"coverage": cfg.sim.seed})
    report = run_coverage(cfg, msg_handler, args.threads)
    print(render_coverage_text(report))
    if args.out:
        _write(args.out, render_coverage_csv(report), manifest)
    return 0


def cmd_presets(args: Namespace, msg_handler: MessageHandler) -> int:
    if args.show:
        print(json.dumps(get_preset(args.show).raw, indent=2))
        return 0
    for preset in get_default_presets():
        print(f"{preset.name:<18} {preset.database:<14} {str(preset.scheme):<15} m={preset.default_m}")
    return 0


def cmd_diagnose(args: Namespace, msg_handler: MessageHandler) -> int:
    """PRC at the preset's posterior means over its published grid, and the ratio to the published table."""
    preset = get_preset(args.preset)
    reference = preset.reference_prc
    if not reference:
        raise InvalidInputError("preset", args.preset, "This preset has no published PRC table.")
    tau = preset_tau(args.preset)
    labels = reference["labels"]
    means = np.array(
        [
            [
                prc_quadrature(
                    PrcQuery(reference["w"], reference["m1"], reference["m2"], q1, q2, preset.scheme),
                    tau,
                )
                for q2 in labels
            ]
            for q1 in labels
        ]
    )
    ratios = reference_comparison(means, reference["mean"])
    header = f"PRC({reference['w']} | {reference['m1']},{reference['m2']})"
    print(render_matrix_text(means, labels, f"{header} at posterior means"))
    print()
    print(render_matrix_text(np.asarray(reference["mean"]), labels, f"{header} published"))
    print()
    print(render_ratio_text(ratios, labels, "computed / published"))

    example = preset.forensic_example
    if example:
        checks = [("observed", example["q1"], example["q2"], example["mean"])]
        if "what_if" in example:
            what_if = example["what_if"]
            checks.append(("what-if", what_if["q1"], what_if["q2"], what_if["mean"]))
        for name, q1, q2, published in checks:
            value = prc_quadrature(
                PrcQuery(example["w"], example["m1"], example["m2"], q1, q2, preset.scheme), tau
            )
            print(
                f"{name} PRC({example['w']} | {example['m1']},{example['m2']}; Q=({q1},{q2})): "
                f"{value:.4f} (published {published:.4f})"
            )

    msg_handler.send_message(
        LogEvent(
            "diagnose_done",
            EventType.INFO,
            EventScope.CLI,
            f"Largest ratio to the published table: {float(np.max(ratios)):.3f}",
            {"preset": args.preset},
        )
    )
    return 0
