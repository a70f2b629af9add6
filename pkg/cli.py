"""
Command-line surface: transfer sweeps, verification campaigns, the
convolution demo and the energy report.

    scmac sweep sac --out out/
    scmac verify --config golden.cfg --trials 10000 --seed 7
    scmac verify --jobs jobs.txt
    scmac conv image.txt weights.txt
    scmac report
"""
from __future__ import annotations

import logging
from dataclasses import asdict, dataclass
from pathlib import Path

import click
import numpy as np
import pandas as pd

from analog_chain import ChainFlag, linearity_error, zero_reference
from config import load_config
from data_service import (
    KERNEL_SIZE,
    SWEEP_TARGETS,
    DataFormatError,
    convolution_jobs,
    load_image,
    load_jobs,
    load_weights,
    results_frame,
    sweep_frame,
    sweep_rng,
    write_csv,
    write_feature_map,
    write_text,
)
from energy_model import breakdown_frame, headline_figures, headline_frame, report_text
from errors import SimulatorError
from mac_engine import (
    KernelInput,
    MacJob,
    adc_decode_bound,
    error_metrics,
    nominal_ledger,
    renormalize,
    run_campaign,
    run_mac,
    run_trials,
)
from sc_codec import (
    NEGATIVE,
    POSITIVE,
    SignedMagnitude,
    coverage_check,
    decode,
    encode,
    iter_operand_pairs,
    sc_multiply,
)

logger = logging.getLogger(__name__)


def common_options(func):
    options = [
        click.option("--config", "config_path", envvar="SCMAC_CONFIG",
                     type=click.Path(exists=True, dir_okay=False, path_type=Path),
                     help="Key-value config file (default: built-in defaults)."),
        click.option("--out", "out_dir", type=click.Path(file_okay=False, path_type=Path),
                     help="Output directory (overrides run.out_dir)."),
        click.option("--seed", type=int, envvar="SCMAC_SEED", help="Campaign seed (u64)."),
        click.option("--trials", type=int, help="Randomized trial count."),
    ]
    for option in reversed(options):
        func = option(func)
    return func


def _load(config_path, seed, trials, out_dir):
    try:
        return load_config(config_path).with_overrides(seed=seed, trials=trials, out_dir=out_dir)
    except SimulatorError as exc:
        raise click.ClickException(str(exc)) from exc


@click.group()
@click.option("-v", "--verbose", is_flag=True, help="Debug logging.")
def cli(verbose):
    """Stochastic-computing mixed-signal MAC engine simulator."""
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.INFO,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )


@cli.command()
@click.argument("target", type=click.Choice(SWEEP_TARGETS + ("all",)))
@common_options
def sweep(target, config_path, out_dir, seed, trials):
    """Transfer characteristic of one stage (or the whole engine) as CSV."""
    cfg = _load(config_path, seed, trials, out_dir)
    targets = SWEEP_TARGETS if target == "all" else (target,)
    for name in targets:
        frame = sweep_frame(name, cfg, sweep_rng(name, cfg))
        linear = frame[frame["flags"] == ""]
        if len(linear) > 1:
            residual = linearity_error(linear.iloc[:, 0], linear.iloc[:, 1])
            logger.info(f"{name} sweep: max residual from linear fit {residual:.3e}")
        try:
            path = write_csv(frame, cfg.out_dir / f"sweep_{name}.csv", cfg.seed)
        except SimulatorError as exc:
            raise click.ClickException(str(exc)) from exc
        click.echo(f"{name}: {len(frame)} rows -> {path}")


@dataclass
class Check:
    suite: str
    invariant: str
    cases: int = 0
    failures: int = 0

    def add(self, ok):
        self.cases += 1
        if not ok:
            self.failures += 1
        return self


def codec_checks(codec):
    round_trip = Check("codec", "round_trip")
    periodic = Check("codec", "periodicity")
    for levels in (codec.activation_levels, codec.weight_levels):
        for sign in (POSITIVE, NEGATIVE):
            for magnitude in range(levels + 1):
                value = SignedMagnitude(sign, magnitude, levels)
                stream = encode(value, codec)
                round_trip.add(decode(stream).equivalent(value))
                periodic.add(stream.is_periodic())

    exact = Check("codec", "exact_product")
    signs = Check("codec", "sign_algebra")
    for a, w in iter_operand_pairs(codec):
        product = sc_multiply(encode(a, codec), encode(w, codec))
        exact.add(product.ones == a.magnitude * w.magnitude)
        if a.magnitude and w.magnitude:
            signs.add(product.sign == a.sign * w.sign)

    full_a = encode(SignedMagnitude(POSITIVE, codec.activation_levels, codec.activation_levels), codec)
    full_w = encode(SignedMagnitude(POSITIVE, codec.weight_levels, codec.weight_levels), codec)
    coverage = Check("codec", "coverage").add(coverage_check(full_a, full_w))
    return [round_trip, periodic, exact, signs, coverage]


def _underflow_expected(result, cal):
    t_ref = zero_reference(cal).width
    return any(cal.pulse_per_count * (neg - pos) > t_ref for pos, neg in result.counts)


def single_tap_checks(cfg):
    engine, cal = cfg.engine, cfg.analog
    rng = None if cal.is_ideal else np.random.default_rng(cfg.seed)
    equivalence = Check("single_tap", "oracle_equivalence")
    flags = Check("single_tap", "flag_soundness")
    idle = KernelInput.zeros(engine)
    for tap in (0, engine.taps - 1):
        for a, w in iter_operand_pairs(engine.codec):
            activations = list(idle.activations)
            weights = list(idle.weights)
            activations[tap], weights[tap] = a, w
            job = MacJob((KernelInput(activations, weights),) + (idle,) * (engine.feature_map_count - 1))
            result = run_mac(job, cal, engine, rng)
            equivalence.add(result.decoded_sum == result.oracle_sum)
            flags.add(bool(result.flags & ChainFlag.PP_UNDERFLOW) == _underflow_expected(result, cal))
    return [equivalence, flags]


def campaign_checks(cfg, results):
    engine, cal = cfg.engine, cfg.analog
    equivalence = Check("campaign", "oracle_equivalence")
    codes = Check("campaign", "adc_code_within_one")
    adc = Check("campaign", "adc_decode_bound")
    flags = Check("campaign", "flag_soundness")
    bound = adc_decode_bound(cal, engine)
    for result in results:
        equivalence.add(result.decoded_sum == result.oracle_sum)
        codes.add(result.code_error <= 1)
        adc.add(result.adc_int_error <= bound)
        flags.add(bool(result.flags & ChainFlag.PP_UNDERFLOW) == _underflow_expected(result, cal))

    zero = run_mac(MacJob.zeros(engine), cal, engine)
    baseline = Check("campaign", "baseline_cancellation").add(zero.decoded_sum == 0)
    return [equivalence, codes, adc, flags, baseline]


def _campaign(cfg, jobs_path):
    if jobs_path is None:
        return run_campaign(cfg.analog, cfg.engine, cfg.trials, cfg.seed, cfg.energy)
    jobs = load_jobs(jobs_path, cfg.engine)
    if not jobs:
        raise DataFormatError(f"{jobs_path}: no jobs")
    return run_trials(len(jobs), lambda i, _: jobs[i], cfg.analog, cfg.engine, cfg.seed, cfg.energy)


@cli.command()
@click.option("--jobs", "jobs_path", type=click.Path(exists=True, dir_okay=False, path_type=Path),
              help="Job file to run in place of the randomized campaign.")
@common_options
def verify(config_path, out_dir, seed, trials, jobs_path):
    """Exhaustive codec and single-tap suites plus a seeded campaign.

    The campaign draws random jobs unless --jobs names a job file.
    """
    cfg = _load(config_path, seed, trials, out_dir)
    checks = codec_checks(cfg.codec) + single_tap_checks(cfg)
    try:
        campaign = _campaign(cfg, jobs_path)
    except SimulatorError as exc:
        raise click.ClickException(str(exc)) from exc
    checks += campaign_checks(cfg, campaign.results)
    summary = error_metrics(campaign.results)

    try:
        write_csv(pd.DataFrame([asdict(c) for c in checks]), cfg.out_dir / "verify.csv", cfg.seed)
        write_csv(results_frame(campaign.results), cfg.out_dir / "campaign.csv", cfg.seed)
    except SimulatorError as exc:
        raise click.ClickException(str(exc)) from exc

    for check in checks:
        status = "PASS" if check.failures == 0 else "FAIL"
        click.echo(f"{status} {check.suite}/{check.invariant}: {check.cases - check.failures}/{check.cases}")
    click.echo(
        f"max analog error {summary.max_abs_error_volts:.3e} V, max integer error {summary.max_int_error}, "
        f"max ADC code error {summary.max_code_error}, flags {summary.flag_counts}"
    )
    failed = [c for c in checks if c.failures]
    if failed:
        logger.error(f"{len(failed)} invariant(s) failed: {', '.join(c.suite + '/' + c.invariant for c in failed)}")
        raise SystemExit(1)


def _deviation(decoded, oracle):
    diff = (decoded - oracle).astype(float)
    return float(np.abs(diff).max()), float(np.sqrt(np.mean(diff ** 2)))


@cli.command()
@click.argument("image_path", type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.argument("weights_path", type=click.Path(exists=True, dir_okay=False, path_type=Path))
@common_options
def conv(image_path, weights_path, config_path, out_dir, seed, trials):
    """Slide the 5x5+bias kernel over a multi-channel image, one MAC job per pixel."""
    cfg = _load(config_path, seed, trials, out_dir)
    engine = cfg.engine
    try:
        image = load_image(image_path, engine.codec.activation_levels)
        kernels, bias = load_weights(weights_path, engine.codec.weight_levels)
        pixels = convolution_jobs(image, kernels, bias, engine)
        run = run_trials(len(pixels), lambda i, _: pixels[i][1], cfg.analog, engine, cfg.seed, cfg.energy)
    except SimulatorError as exc:
        raise click.ClickException(str(exc)) from exc

    shape = (image.shape[1] - KERNEL_SIZE + 1, image.shape[2] - KERNEL_SIZE + 1)
    decoded = np.array([r.decoded_sum for r in run.results]).reshape(shape)
    adc_decoded = np.array([r.adc_decoded_sum for r in run.results]).reshape(shape)
    oracle = np.array([r.oracle_sum for r in run.results]).reshape(shape)
    mac_count = len(pixels) * engine.feature_map_count

    out = cfg.out_dir
    try:
        write_feature_map(out / "conv_decoded.txt", decoded, cfg.seed)
        write_feature_map(out / "conv_adc_decoded.txt", adc_decoded, cfg.seed)
        write_feature_map(out / "conv_oracle.txt", oracle, cfg.seed)
        if engine.renorm_enabled:
            renormed = [renormalize(r.adc_decoded_sum, engine).signed for r in run.results]
            write_feature_map(out / "conv_next_layer.txt", np.array(renormed).reshape(shape), cfg.seed)
        write_csv(results_frame(run.results), out / "conv_results.csv", cfg.seed)
        write_csv(breakdown_frame(run.ledger, mac_count), out / "conv_energy.csv", cfg.seed)
        write_text(out / "conv_energy.txt", report_text(run.ledger, mac_count))
    except SimulatorError as exc:
        raise click.ClickException(str(exc)) from exc

    max_dev, rms_dev = _deviation(decoded, oracle)
    max_adc, rms_adc = _deviation(adc_decoded, oracle)
    click.echo(f"output map {shape[0]}x{shape[1]}, {mac_count} MACs")
    click.echo(f"pre-ADC deviation: max {max_dev:g}, RMS {rms_dev:g}")
    click.echo(f"post-ADC deviation: max {max_adc:g}, RMS {rms_adc:g}")
    click.echo(report_text(run.ledger, mac_count), nl=False)


@cli.command()
@common_options
def report(config_path, out_dir, seed, trials):
    """Per-component energy breakdown and the headline efficiency figures."""
    cfg = _load(config_path, seed, trials, out_dir)
    ledger = nominal_ledger(cfg.energy, cfg.engine)
    mac_count = cfg.engine.feature_map_count
    figures = headline_figures(ledger, mac_count)
    try:
        write_csv(breakdown_frame(ledger, mac_count), cfg.out_dir / "energy_breakdown.csv", cfg.seed)
        write_csv(headline_frame(figures), cfg.out_dir / "energy_headline.csv", cfg.seed)
        write_text(cfg.out_dir / "energy_report.txt", report_text(ledger, mac_count))
    except SimulatorError as exc:
        raise click.ClickException(str(exc)) from exc
    click.echo(report_text(ledger, mac_count), nl=False)
    if any(abs(d) > 0.01 for d in figures.deviations().values()):
        logger.warning("headline figures deviate more than 1% from the reference design point")


def main():
    cli(prog_name="scmac")


if __name__ == "__main__":
    main()
