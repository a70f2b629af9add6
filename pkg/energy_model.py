"""
Per-component energy ledger for the MAC engine.

Per-event energies are integer femtojoules so ledger totals are exact sums.
The default split is a set of free parameters calibrated to 5.03 pJ per
26-input MAC; only the total is meaningful.
"""
from __future__ import annotations

import dataclasses
import enum
import logging
from collections import Counter
from dataclasses import dataclass, field

import pandas as pd

from errors import InvariantError, SimulatorError

logger = logging.getLogger(__name__)

FEMTO = 1e-15

REFERENCE_ENERGY_PER_MAC_J = 5.03e-12
REFERENCE_POWER_W = 20.12e-6
REFERENCE_TOPS_PER_W = 10.14


class EnergyError(SimulatorError):
    pass


class Component(enum.Enum):
    DECODER = "decoder_per_input"
    AND_ARRAY = "and_array_per_map"
    SAC = "sac_per_stage"
    VTC = "vtc_per_conversion"
    PP = "pp_per_map"
    INT = "int_per_map"
    ADC = "adc_per_conversion"

    @classmethod
    def lookup(cls, component):
        if isinstance(component, cls):
            return component
        try:
            return cls(component)
        except ValueError:
            try:
                return cls[str(component).upper()]
            except KeyError:
                raise EnergyError(f"unknown energy component {component!r}") from None


@dataclass(frozen=True)
class EnergyConfig:
    decoder_per_input_fj: int = 20
    and_array_per_map_fj: int = 300
    sac_per_stage_fj: int = 900
    vtc_per_conversion_fj: int = 375
    pp_per_map_fj: int = 120
    int_per_map_fj: int = 420
    adc_per_conversion_fj: int = 3600
    clock_hz: float = 25e6
    cycles_per_mac: float = 6.25
    ops_per_mac: int = 51

    def __post_init__(self):
        for component in Component:
            name = f"{component.value}_fj"
            if getattr(self, name) < 0:
                raise InvariantError(name, f"must be >= 0, got {getattr(self, name)}")
        if self.clock_hz <= 0:
            raise InvariantError("clock_hz", f"must be > 0, got {self.clock_hz}")
        if self.cycles_per_mac <= 0:
            raise InvariantError("cycles_per_mac", f"must be > 0, got {self.cycles_per_mac}")
        if self.ops_per_mac < 1:
            raise InvariantError("ops_per_mac", f"must be >= 1, got {self.ops_per_mac}")

    def femtojoules(self, component):
        return getattr(self, f"{Component.lookup(component).value}_fj")

    def joules(self, component):
        return self.femtojoules(component) * FEMTO

    @property
    def mac_rate_hz(self):
        return self.clock_hz / self.cycles_per_mac

    def scaled(self, factor):
        """Every per-event energy multiplied by the integer ``factor``."""
        return dataclasses.replace(
            self, **{f"{c.value}_fj": self.femtojoules(c) * factor for c in Component}
        )


@dataclass
class EnergyLedger:
    config: EnergyConfig = field(default_factory=EnergyConfig)
    tallies: Counter = field(default_factory=Counter)

    def record(self, component, count=1):
        component = Component.lookup(component)
        if count < 0:
            raise EnergyError(f"negative event count {count} for {component.value}")
        self.tallies[component] += int(count)
        return self

    def tally(self, component):
        return self.tallies[Component.lookup(component)]

    @property
    def total_femtojoules(self):
        return sum(count * self.config.femtojoules(c) for c, count in self.tallies.items())

    @property
    def total_joules(self):
        return self.total_femtojoules * FEMTO


def merge(first, second):
    if first.config != second.config:
        raise EnergyError("cannot merge ledgers priced with different energy configs")
    return EnergyLedger(first.config, first.tallies + second.tallies)


def energy_per_mac(ledger, mac_count):
    if mac_count < 1:
        raise EnergyError(f"mac_count must be >= 1, got {mac_count}")
    return ledger.total_femtojoules / mac_count * FEMTO


def power_at_rate(e_per_mac, mac_rate_hz):
    if e_per_mac < 0 or mac_rate_hz < 0:
        raise EnergyError("energy and rate must be non-negative")
    return e_per_mac * mac_rate_hz


def tops_per_watt(e_per_mac, ops_per_mac):
    if e_per_mac <= 0:
        raise EnergyError(f"energy per MAC must be > 0, got {e_per_mac}")
    return ops_per_mac / e_per_mac / 1e12


@dataclass(frozen=True)
class HeadlineFigures:
    energy_per_mac_j: float
    mac_rate_hz: float
    power_w: float
    tops_per_w: float

    def deviations(self):
        """Relative deviation of each figure from the reference design point."""
        return {
            "energy_per_mac": self.energy_per_mac_j / REFERENCE_ENERGY_PER_MAC_J - 1,
            "power": self.power_w / REFERENCE_POWER_W - 1,
            "tops_per_w": self.tops_per_w / REFERENCE_TOPS_PER_W - 1,
        }


def headline_figures(ledger, mac_count):
    e = energy_per_mac(ledger, mac_count)
    rate = ledger.config.mac_rate_hz
    return HeadlineFigures(
        energy_per_mac_j=e,
        mac_rate_hz=rate,
        power_w=power_at_rate(e, rate),
        tops_per_w=tops_per_watt(e, ledger.config.ops_per_mac) if e > 0 else float("inf"),
    )


def breakdown_frame(ledger, mac_count):
    rows = []
    total = ledger.total_femtojoules
    for component in Component:
        events = ledger.tally(component)
        fj = events * ledger.config.femtojoules(component)
        rows.append({
            "component": component.value,
            "events": events,
            "fj_per_event": ledger.config.femtojoules(component),
            "total_fj": fj,
            "fj_per_mac": fj / mac_count,
            "share_pct": 100.0 * fj / total if total else 0.0,
        })
    return pd.DataFrame(rows)


def headline_frame(figures):
    deviations = figures.deviations()
    return pd.DataFrame([
        {"figure": "energy_per_mac_pj", "value": figures.energy_per_mac_j * 1e12,
         "reference": REFERENCE_ENERGY_PER_MAC_J * 1e12, "deviation_pct": 100 * deviations["energy_per_mac"]},
        {"figure": "power_uw", "value": figures.power_w * 1e6,
         "reference": REFERENCE_POWER_W * 1e6, "deviation_pct": 100 * deviations["power"]},
        {"figure": "tops_per_w", "value": figures.tops_per_w,
         "reference": REFERENCE_TOPS_PER_W, "deviation_pct": 100 * deviations["tops_per_w"]},
    ])


def report_text(ledger, mac_count):
    figures = headline_figures(ledger, mac_count)
    lines = [
        f"MACs: {mac_count}   MAC rate: {figures.mac_rate_hz / 1e6:.3f} MHz "
        f"({ledger.config.cycles_per_mac:g} cycles/MAC at {ledger.config.clock_hz / 1e6:g} MHz)",
    ]
    if not float(ledger.config.cycles_per_mac).is_integer():
        logger.warning(f"non-integer cycles per MAC: {ledger.config.cycles_per_mac}")
        lines.append("note: cycles per MAC is not an integer")
    lines += [
        "",
        breakdown_frame(ledger, mac_count).to_string(index=False, float_format=lambda x: f"{x:.2f}"),
        "",
        headline_frame(figures).to_string(index=False, float_format=lambda x: f"{x:.4f}"),
    ]
    return "\n".join(lines) + "\n"
