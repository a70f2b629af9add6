"""
Behavioral models of the analog accumulate chain.

SAC (charge-sharing summation) -> VTC (voltage to pulse width) -> PP (signed
pulse combination) -> INT (integrating accumulation). Each stage is a transfer
function; the RESET/CHARGE/SHARE phases of the SAC collapse into one affine
map and only matter for energy accounting.
"""
from __future__ import annotations

import dataclasses
import enum
import logging
from dataclasses import dataclass

import numpy as np
import pandas as pd
from numpy.polynomial import polynomial

from errors import InvariantError, SimulatorError

logger = logging.getLogger(__name__)

# INT overflow is judged against vdd with this slack so an exact full-scale
# accumulation does not trip on the last ulp
VDD_TOLERANCE_V = 1e-12


class ChainError(SimulatorError):
    """Input outside what an analog stage accepts."""


class ChainFlag(enum.Flag):
    NONE = 0
    OUT_OF_LINEAR_RANGE = enum.auto()
    PP_UNDERFLOW = enum.auto()
    INT_OVERFLOW = enum.auto()
    ADC_SATURATED = enum.auto()
    OUT_OF_RANGE = enum.auto()


def flag_names(flags):
    return [member.name.lower() for member in ChainFlag if member.value and member in flags]


@dataclass(frozen=True)
class AnalogLevel:
    volts: float
    flags: ChainFlag = ChainFlag.NONE


@dataclass(frozen=True)
class Pulse:
    width: float
    flags: ChainFlag = ChainFlag.NONE

    @property
    def ns(self):
        return self.width * 1e9


@dataclass(frozen=True)
class AnalogCalibration:
    vdd: float = 1.0
    sac_v_min: float = 0.41
    sac_v_max: float = 1.0
    sac_count_max: int = 1144
    vtc_gain: float = 20e-9
    vtc_linear_lo: float = 0.35
    vtc_linear_hi: float = 1.0
    int_gain: float = 1.0 / (6 * 20e-9)
    noise_sigma_v: float = 0.0
    vtc_nonlin: tuple[float, ...] = ()
    int_error_bound_v: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "vtc_nonlin", tuple(float(c) for c in self.vtc_nonlin))
        if self.vdd <= 0:
            raise InvariantError("vdd", f"must be > 0, got {self.vdd}")
        if not 0 < self.sac_v_min < self.sac_v_max <= self.vdd:
            raise InvariantError(
                "sac_v_min",
                f"need 0 < sac_v_min < sac_v_max <= vdd, got {self.sac_v_min}, {self.sac_v_max}, {self.vdd}",
            )
        if self.sac_count_max < 1:
            raise InvariantError("sac_count_max", f"must be >= 1, got {self.sac_count_max}")
        if not self.vtc_linear_lo < self.vtc_linear_hi:
            raise InvariantError("vtc_linear_lo", "must be below vtc_linear_hi")
        if self.vtc_linear_lo > self.sac_v_min:
            raise InvariantError(
                "vtc_linear_lo",
                f"SAC outputs from {self.sac_v_min} V must sit in the VTC linear window starting at {self.vtc_linear_lo} V",
            )
        if self.sac_v_max > self.vtc_linear_hi:
            raise InvariantError(
                "vtc_linear_hi",
                f"SAC outputs up to {self.sac_v_max} V must sit in the VTC linear window ending at {self.vtc_linear_hi} V",
            )
        for name in ("vtc_gain", "int_gain"):
            if getattr(self, name) <= 0:
                raise InvariantError(name, f"must be > 0, got {getattr(self, name)}")
        for name in ("noise_sigma_v", "int_error_bound_v"):
            if getattr(self, name) < 0:
                raise InvariantError(name, f"must be >= 0, got {getattr(self, name)}")

    @property
    def sac_slope(self):
        """Volts per ones-count at the SAC output."""
        return (self.sac_v_max - self.sac_v_min) / self.sac_count_max

    @property
    def pulse_per_count(self):
        """Pulse seconds per ones-count (the PP scale factor)."""
        return self.vtc_gain * self.sac_slope

    @property
    def volts_per_count(self):
        """End-to-end INT volts per unit of signed ones-count."""
        return self.int_gain * self.pulse_per_count

    @property
    def is_ideal(self):
        return (
            self.noise_sigma_v == 0
            and self.int_error_bound_v == 0
            and not any(self.vtc_nonlin)
        )

    def ideal(self):
        """The same calibration with every non-ideality switched off."""
        if self.is_ideal:
            return self
        return dataclasses.replace(self, noise_sigma_v=0.0, vtc_nonlin=(), int_error_bound_v=0.0)


def _noise(cal, rng):
    if rng is None or cal.noise_sigma_v == 0:
        return 0.0
    return float(rng.normal(0.0, cal.noise_sigma_v))


def _range_flags(volts, cal):
    if volts < 0 or volts > cal.vdd + VDD_TOLERANCE_V:
        return ChainFlag.OUT_OF_RANGE
    return ChainFlag.NONE


def sac_transfer(ones_count, cal, rng=None):
    """Charge-sharing output for one POS or NEG stage."""
    if not 0 <= ones_count <= cal.sac_count_max:
        raise ChainError(f"ones_count {ones_count} outside [0, {cal.sac_count_max}]")
    fraction = ones_count / cal.sac_count_max
    span = cal.sac_v_max - cal.sac_v_min
    # evaluated from the nearer endpoint so both endpoints come out exact
    if fraction < 0.5:
        volts = cal.sac_v_min + fraction * span
    else:
        volts = cal.sac_v_max - (1.0 - fraction) * span
    volts += _noise(cal, rng)
    flags = _range_flags(volts, cal)
    return AnalogLevel(max(volts, 0.0), flags)


def vtc_transfer(v, cal, rng=None):
    if v.volts < 0:
        raise ChainError(f"negative VTC input {v.volts} V")
    volts = v.volts + _noise(cal, rng)
    width = cal.vtc_gain * volts
    if cal.vtc_nonlin:
        width += float(polynomial.polyval(volts, cal.vtc_nonlin))
    flags = v.flags
    if not cal.vtc_linear_lo <= v.volts <= cal.vtc_linear_hi:
        flags |= ChainFlag.OUT_OF_LINEAR_RANGE
    if width < 0:
        width = 0.0
        flags |= ChainFlag.OUT_OF_RANGE
    return Pulse(width, flags)


def pp_combine(t_pos, t_neg, t_ref):
    """``t_pos + t_ref - t_neg``, saturating at zero width."""
    for pulse in (t_pos, t_neg, t_ref):
        if pulse.width < 0:
            raise ChainError(f"negative pulse width {pulse.width}")
    flags = t_pos.flags | t_neg.flags | t_ref.flags
    width = t_ref.width + (t_pos.width - t_neg.width)
    if width < 0:
        width = 0.0
        flags |= ChainFlag.PP_UNDERFLOW
    return Pulse(width, flags)


def int_accumulate(state, t, cal, rng=None):
    if state.volts < 0:
        raise ChainError(f"negative INT state {state.volts} V")
    volts = state.volts + cal.int_gain * t.width + _noise(cal, rng)
    flags = state.flags | t.flags
    if volts < 0:
        # the integrator cannot discharge below ground
        volts = 0.0
        flags |= ChainFlag.OUT_OF_RANGE
    if volts > cal.vdd + VDD_TOLERANCE_V:
        flags |= ChainFlag.INT_OVERFLOW
    return AnalogLevel(volts, flags)


def int_readout(state, cal, rng=None):
    """Apply the bounded INT readout error, uniform in +/- int_error_bound_v."""
    if rng is None or cal.int_error_bound_v == 0:
        return state
    bound = cal.int_error_bound_v
    return AnalogLevel(state.volts + float(rng.uniform(-bound, bound)), state.flags)


def zero_reference(cal):
    """Reference pulse: what the chain produces for a zero sum."""
    return vtc_transfer(sac_transfer(0, cal), cal)


def sweep_sac(cal, rng=None):
    rows = []
    for count in range(cal.sac_count_max + 1):
        level = sac_transfer(count, cal, rng)
        rows.append((count, level.volts, " ".join(flag_names(level.flags))))
    return pd.DataFrame(rows, columns=["ones_count", "sac_volts", "flags"])


def sweep_vtc(cal, millivolts=1000, rng=None):
    rows = []
    for mv in range(millivolts + 1):
        volts = mv / 1000
        pulse = vtc_transfer(AnalogLevel(volts), cal, rng)
        rows.append((volts, pulse.ns, " ".join(flag_names(pulse.flags))))
    return pd.DataFrame(rows, columns=["input_volts", "pulse_ns", "flags"])


def sweep_int(cal, max_ns=None, step_ns=0.1, rng=None):
    """One accumulation from 0 V for pulse widths 0..max_ns."""
    if max_ns is None:
        max_ns = cal.vtc_gain * cal.vtc_linear_hi * 1e9
    steps = int(round(max_ns / step_ns))
    rows = []
    for i in range(steps + 1):
        width_ns = i * step_ns
        level = int_accumulate(AnalogLevel(0.0), Pulse(width_ns * 1e-9), cal, rng)
        rows.append((width_ns, level.volts, " ".join(flag_names(level.flags))))
    frame = pd.DataFrame(rows, columns=["pulse_ns", "int_volts", "flags"])
    logger.debug(f"INT sweep: {len(frame)} rows up to {max_ns} ns")
    return frame


def linearity_error(x, y):
    """Max residual of ``y`` against its least-squares line through ``x``."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    slope, intercept = np.polyfit(x, y, 1)
    return float(np.max(np.abs(y - (slope * x + intercept))))
