"""
Mixed-signal MAC engine: encode, parallel AND multiply, sign-split SAC
summation, VTC/PP per feature map, INT accumulation over the feature maps,
flash ADC, and digital decode against an exact integer oracle.
"""
from __future__ import annotations

import enum
import functools
import logging
import math
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
import pandas as pd

from analog_chain import (
    AnalogLevel,
    ChainFlag,
    flag_names,
    int_accumulate,
    int_readout,
    pp_combine,
    sac_transfer,
    vtc_transfer,
    zero_reference,
)
from energy_model import Component, EnergyConfig, EnergyLedger, merge
from errors import InvariantError, SimulatorError
from sc_codec import CodecConfig, SignedMagnitude, encode, sc_multiply

logger = logging.getLogger(__name__)

_WARN_FLAGS = ChainFlag.PP_UNDERFLOW | ChainFlag.INT_OVERFLOW | ChainFlag.ADC_SATURATED


class EngineError(SimulatorError):
    pass


@dataclass(frozen=True)
class AdcConfig:
    bits: int = 8
    v_lo: float = 0.0
    v_hi: float = 1.0

    def __post_init__(self):
        if self.bits < 1:
            raise InvariantError("bits", f"must be >= 1, got {self.bits}")
        if not self.v_lo < self.v_hi:
            raise InvariantError("v_lo", f"must be below v_hi, got {self.v_lo} >= {self.v_hi}")

    @property
    def levels(self):
        return 2 ** self.bits

    @property
    def step(self):
        return (self.v_hi - self.v_lo) / self.levels


@dataclass(frozen=True)
class EngineConfig:
    codec: CodecConfig = field(default_factory=CodecConfig)
    adc: AdcConfig = field(default_factory=AdcConfig)
    feature_map_count: int = 6
    taps: int = 26
    bias_activation: int = 11
    workers: int = 1
    renorm_enabled: bool = False
    renorm_scale: float | None = None
    renorm_offset: float = 0.0

    def __post_init__(self):
        for name in ("feature_map_count", "taps", "workers"):
            if getattr(self, name) < 1:
                raise InvariantError(name, f"must be >= 1, got {getattr(self, name)}")
        if abs(self.bias_activation) > self.codec.activation_levels:
            raise InvariantError(
                "bias_activation",
                f"|{self.bias_activation}| exceeds activation_levels {self.codec.activation_levels}",
            )
        if self.renorm_scale is not None and self.renorm_scale <= 0:
            raise InvariantError("renorm_scale", f"must be > 0, got {self.renorm_scale}")

    @property
    def count_max_per_map(self):
        return self.taps * self.codec.extended_length

    @property
    def max_abs_sum(self):
        return self.feature_map_count * self.count_max_per_map


def check_compatible(cal, cfg):
    if cfg.count_max_per_map > cal.sac_count_max:
        raise EngineError(
            f"{cfg.taps} taps x {cfg.codec.extended_length} bits = {cfg.count_max_per_map} ones "
            f"exceeds sac_count_max {cal.sac_count_max}"
        )


class Phase(enum.Enum):
    DECODE = "decode"
    AND_ARRAY = "and_array"
    POS_RESET = "pos_reset"
    POS_CHARGE = "pos_charge"
    POS_SHARE = "pos_share"
    VTC_POS = "vtc_pos"
    NEG_RESET = "neg_reset"
    NEG_CHARGE = "neg_charge"
    NEG_SHARE = "neg_share"
    VTC_NEG = "vtc_neg"
    PP = "pp"
    INT = "int"
    ADC = "adc"


DIGITAL_PHASES = (Phase.DECODE, Phase.AND_ARRAY)
ANALOG_PHASES = (
    Phase.POS_RESET, Phase.POS_CHARGE, Phase.POS_SHARE, Phase.VTC_POS,
    Phase.NEG_RESET, Phase.NEG_CHARGE, Phase.NEG_SHARE, Phase.VTC_NEG,
    Phase.PP,
)
MAP_PHASES = DIGITAL_PHASES + ANALOG_PHASES + (Phase.INT,)

# RESET and CHARGE are folded into the SHARE event of their stage
_PHASE_COMPONENT = {
    Phase.DECODE: Component.DECODER,
    Phase.AND_ARRAY: Component.AND_ARRAY,
    Phase.POS_SHARE: Component.SAC,
    Phase.NEG_SHARE: Component.SAC,
    Phase.VTC_POS: Component.VTC,
    Phase.VTC_NEG: Component.VTC,
    Phase.PP: Component.PP,
    Phase.INT: Component.INT,
    Phase.ADC: Component.ADC,
}


def phase_events(phase, cfg):
    component = _PHASE_COMPONENT.get(phase)
    if component is None:
        return None, 0
    # one decoder per activation and per weight input
    return component, 2 * cfg.taps if phase is Phase.DECODE else 1


def _record(ledger, phases, cfg):
    if ledger is None:
        return
    for phase in phases:
        component, count = phase_events(phase, cfg)
        if component is not None:
            ledger.record(component, count)


def mac_events(cfg):
    """Energy events of one MAC job (all feature maps plus one conversion)."""
    events = Counter()
    for phase in MAP_PHASES:
        component, count = phase_events(phase, cfg)
        if component is not None:
            events[component] += count * cfg.feature_map_count
    events[Component.ADC] += 1
    return events


def nominal_ledger(energy, cfg, jobs=1):
    ledger = EnergyLedger(energy)
    for component, count in mac_events(cfg).items():
        ledger.record(component, count * jobs)
    return ledger


@dataclass(frozen=True)
class KernelInput:
    activations: tuple
    weights: tuple

    def __post_init__(self):
        object.__setattr__(self, "activations", tuple(self.activations))
        object.__setattr__(self, "weights", tuple(self.weights))
        if len(self.activations) != len(self.weights):
            raise EngineError(
                f"{len(self.activations)} activations but {len(self.weights)} weights"
            )

    @classmethod
    def from_signed(cls, activations, weights, codec):
        return cls(
            tuple(SignedMagnitude.from_signed(a, codec.activation_levels) for a in activations),
            tuple(SignedMagnitude.from_signed(w, codec.weight_levels) for w in weights),
        )

    @classmethod
    def zeros(cls, cfg):
        return cls.from_signed([0] * cfg.taps, [0] * cfg.taps, cfg.codec)


@dataclass(frozen=True)
class MacJob:
    maps: tuple

    def __post_init__(self):
        object.__setattr__(self, "maps", tuple(self.maps))

    @classmethod
    def zeros(cls, cfg):
        return cls(tuple(KernelInput.zeros(cfg) for _ in range(cfg.feature_map_count)))


def _check_kernel(k, cfg):
    if len(k.activations) != cfg.taps:
        raise EngineError(f"kernel has {len(k.activations)} taps, expected {cfg.taps}")
    for a in k.activations:
        if a.levels != cfg.codec.activation_levels:
            raise EngineError(f"activation levels {a.levels} != {cfg.codec.activation_levels}")
    for w in k.weights:
        if w.levels != cfg.codec.weight_levels:
            raise EngineError(f"weight levels {w.levels} != {cfg.codec.weight_levels}")


def _check_job(job, cfg):
    if len(job.maps) != cfg.feature_map_count:
        raise EngineError(f"job has {len(job.maps)} feature maps, expected {cfg.feature_map_count}")
    for k in job.maps:
        _check_kernel(k, cfg)


class FeatureMapOutput(NamedTuple):
    pulse: object
    counts: tuple
    flags: ChainFlag


@dataclass(frozen=True)
class MacResult:
    analog_volts: float
    adc_code: int
    decoded_sum: int
    adc_decoded_sum: int
    oracle_sum: int
    abs_error_volts: float
    flags: ChainFlag
    ideal_volts: float
    ideal_code: int
    counts: tuple = ()

    @property
    def int_error(self):
        return abs(self.decoded_sum - self.oracle_sum)

    @property
    def adc_int_error(self):
        return abs(self.adc_decoded_sum - self.oracle_sum)

    @property
    def code_error(self):
        return abs(self.adc_code - self.ideal_code)


def feature_map_pulse(pos, neg, cal, rng=None):
    """POS stage, NEG stage, then PP against the zero reference."""
    t_pos = vtc_transfer(sac_transfer(pos, cal, rng), cal, rng)
    t_neg = vtc_transfer(sac_transfer(neg, cal, rng), cal, rng)
    return pp_combine(t_pos, t_neg, zero_reference(cal))


def run_feature_map(k, cal, cfg, rng=None, ledger=None):
    _check_kernel(k, cfg)
    pos = neg = 0
    for a, w in zip(k.activations, k.weights):
        product = sc_multiply(encode(a, cfg.codec), encode(w, cfg.codec))
        if product.sign > 0:
            pos += product.ones
        else:
            neg += product.ones
    pulse = feature_map_pulse(pos, neg, cal, rng)
    _record(ledger, DIGITAL_PHASES + ANALOG_PHASES, cfg)
    return FeatureMapOutput(pulse, (pos, neg), pulse.flags)


def run_chain_counts(counts, cal, cfg, rng=None, ledger=None):
    """INT output for per-map (pos, neg) ones-counts, bypassing the codec."""
    if len(counts) != cfg.feature_map_count:
        raise EngineError(f"{len(counts)} count pairs, expected {cfg.feature_map_count}")
    state = AnalogLevel(0.0)
    for pos, neg in counts:
        pulse = feature_map_pulse(pos, neg, cal, rng)
        state = int_accumulate(state, pulse, cal, rng)
        _record(ledger, ANALOG_PHASES + (Phase.INT,), cfg)
    return int_readout(state, cal, rng)


def adc_quantize(v, adc):
    code = math.floor((v.volts - adc.v_lo) / adc.step)
    return min(max(code, 0), adc.levels - 1)


def adc_saturated(v, adc):
    return v.volts < adc.v_lo or v.volts > adc.v_hi


def baseline_volts(cal, cfg):
    """INT voltage of an all-zero job: one zero-reference pulse per map."""
    return cfg.feature_map_count * cal.int_gain * zero_reference(cal).width


def codes_per_count(cal, cfg):
    return cal.volts_per_count / cfg.adc.step


def adc_decode_bound(cal, cfg):
    """Worst-case |adc_decoded_sum - oracle_sum| from quantization alone."""
    return math.ceil(0.5 / codes_per_count(cal, cfg))


def _clamp_sum(value, cfg):
    return max(-cfg.max_abs_sum, min(cfg.max_abs_sum, value))


def decode_volts(volts, cal, cfg):
    """Signed ones-count sum from an unquantized INT voltage."""
    return _clamp_sum(round((volts - baseline_volts(cal, cfg)) / cal.volts_per_count), cfg)


def digital_decode(adc_code, cal, cfg):
    """Signed ones-count sum from an ADC code, read at the bin midpoint."""
    step = cfg.adc.step
    baseline_codes = (baseline_volts(cal, cfg) - cfg.adc.v_lo) / step
    return _clamp_sum(round((adc_code + 0.5 - baseline_codes) / codes_per_count(cal, cfg)), cfg)


def exact_oracle(job):
    total = 0
    for k in job.maps:
        for a, w in zip(k.activations, k.weights):
            total += a.sign * w.sign * a.magnitude * w.magnitude
    return total


def exact_oracle_reference(job):
    activations = np.array([[a.signed for a in k.activations] for k in job.maps], dtype=np.int64)
    weights = np.array([[w.signed for w in k.weights] for k in job.maps], dtype=np.int64)
    return int(np.einsum("mi,mi->", activations, weights))


def run_mac(job, cal, cfg, rng=None, ledger=None):
    _check_job(job, cfg)
    state = AnalogLevel(0.0)
    counts = []
    for kernel in job.maps:
        out = run_feature_map(kernel, cal, cfg, rng, ledger)
        state = int_accumulate(state, out.pulse, cal, rng)
        _record(ledger, (Phase.INT,), cfg)
        counts.append(out.counts)
    state = int_readout(state, cal, rng)

    flags = state.flags
    if adc_saturated(state, cfg.adc):
        flags |= ChainFlag.ADC_SATURATED
    code = adc_quantize(state, cfg.adc)
    _record(ledger, (Phase.ADC,), cfg)

    if cal.is_ideal:
        ideal_volts = state.volts
    else:
        ideal_volts = run_chain_counts(counts, cal.ideal(), cfg).volts
    result = MacResult(
        analog_volts=state.volts,
        adc_code=code,
        decoded_sum=decode_volts(state.volts, cal, cfg),
        adc_decoded_sum=digital_decode(code, cal, cfg),
        oracle_sum=exact_oracle(job),
        abs_error_volts=abs(state.volts - ideal_volts),
        flags=flags,
        ideal_volts=ideal_volts,
        ideal_code=adc_quantize(AnalogLevel(ideal_volts), cfg.adc),
        counts=tuple(counts),
    )
    if flags & _WARN_FLAGS:
        logger.warning(f"MAC flags {flag_names(flags)} at {state.volts:.6f} V, counts {counts}")
    return result


def renormalize(decoded_sum, cfg):
    """Affine map of a decoded sum onto the next layer's activation range, saturating."""
    levels = cfg.codec.activation_levels
    scale = cfg.renorm_scale
    if scale is None:
        scale = levels / cfg.count_max_per_map
    value = round(decoded_sum * scale + cfg.renorm_offset)
    return SignedMagnitude.from_signed(max(-levels, min(levels, value)), levels)


@dataclass(frozen=True)
class ErrorSummary:
    trials: int
    max_abs_error_volts: float
    rms_error_volts: float
    max_int_error: int
    rms_int_error: float
    max_adc_int_error: int
    max_code_error: int
    code_mismatches: int
    flag_counts: dict


def error_metrics(results):
    if not results:
        raise EngineError("error_metrics needs at least one result")
    volts = np.array([r.abs_error_volts for r in results])
    int_errors = np.array([r.int_error for r in results])
    flag_counts = Counter()
    for r in results:
        flag_counts.update(flag_names(r.flags))
    return ErrorSummary(
        trials=len(results),
        max_abs_error_volts=float(volts.max()),
        rms_error_volts=float(np.sqrt(np.mean(volts ** 2))),
        max_int_error=int(int_errors.max()),
        rms_int_error=float(np.sqrt(np.mean(int_errors.astype(float) ** 2))),
        max_adc_int_error=max(r.adc_int_error for r in results),
        max_code_error=max(r.code_error for r in results),
        code_mismatches=sum(1 for r in results if r.code_error),
        flag_counts=dict(flag_counts),
    )


def random_job(rng, cfg):
    a_levels, w_levels = cfg.codec.activation_levels, cfg.codec.weight_levels
    shape = (cfg.feature_map_count, cfg.taps)
    activations = rng.integers(-a_levels, a_levels + 1, size=shape)
    weights = rng.integers(-w_levels, w_levels + 1, size=shape)
    return MacJob(tuple(
        KernelInput.from_signed(activations[m].tolist(), weights[m].tolist(), cfg.codec)
        for m in range(cfg.feature_map_count)
    ))


class CampaignResult(NamedTuple):
    results: list
    ledger: EnergyLedger


def run_trials(count, make_job, cal, cfg, seed, energy=None, workers=None):
    """Run ``make_job(index, rng)`` for every index, each trial on default_rng([seed, index]).

    Results come back in index order whatever the worker count.
    """
    energy = energy or EnergyConfig()
    workers = workers or cfg.workers

    def trial(index):
        rng = np.random.default_rng([seed, index])
        ledger = EnergyLedger(energy)
        return run_mac(make_job(index, rng), cal, cfg, rng, ledger), ledger

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(trial, range(count)))
    else:
        outcomes = [trial(i) for i in range(count)]
    ledger = functools.reduce(merge, (o[1] for o in outcomes), EnergyLedger(energy))
    logger.info(f"ran {count} MAC jobs, seed {seed}, {workers} worker(s)")
    return CampaignResult([o[0] for o in outcomes], ledger)


def run_campaign(cal, cfg, trials, seed, energy=None, workers=None):
    """Seeded randomized run_mac campaign over random_job inputs."""
    return run_trials(trials, lambda _, rng: random_job(rng, cfg), cal, cfg, seed, energy, workers)


def sweep_engine(cal, cfg, rng=None):
    """A single signed count on the first map through the full chain."""
    ideal = cal.ideal()
    rows = []
    idle = [(0, 0)] * (cfg.feature_map_count - 1)
    for signed_count in range(-cfg.count_max_per_map, cfg.count_max_per_map + 1):
        first = (signed_count, 0) if signed_count >= 0 else (0, -signed_count)
        level = run_chain_counts([first] + idle, cal, cfg, rng)
        ideal_volts = run_chain_counts([first] + idle, ideal, cfg).volts
        rows.append((
            signed_count,
            level.volts,
            ideal_volts,
            level.volts - ideal_volts,
            " ".join(flag_names(level.flags)),
        ))
    return pd.DataFrame(rows, columns=["signed_count", "int_volts", "ideal_volts", "error_volts", "flags"])
