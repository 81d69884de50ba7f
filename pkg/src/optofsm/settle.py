"""Steady-state light propagation and longest-path timing over a netlist."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

from .errors import IndeterminateLogic, MissingAssignment
from .netlist import EXT, OpticalNetlist
from .photonics import (DARK, DetectionResult, Logic, PhysicsConfig, combine, element_delay,
                        photodiode_detect, resonator_route, waveguide_attenuate)


def _plan(netlist: OpticalNetlist):
    return netlist.plan


@dataclass(frozen=True)
class SettleResult:
    port_power: dict[str, float]
    detections: dict[str, DetectionResult]
    laser_on: dict[str, int]
    pumps: dict[str, int]  # resonator id -> pump bit

    def min_margin(self) -> float:
        return min((d.margin_db for d in self.detections.values()), default=float("inf"))


def settle(netlist: OpticalNetlist, signals: Mapping[str, int],
           config: PhysicsConfig | None = None, strict: bool = True) -> SettleResult:
    """Propagate probe light through the netlist for one combination of drive signals.

    ``signals`` maps laser drivers (``q:FF0``, ``input:x``) and external pump
    lines (``ext:A``) to bits.  With ``strict`` a repeater photodiode reading
    inside the guard band raises ``IndeterminateLogic``; otherwise its laser
    is treated as off.
    """
    config = config or PhysicsConfig()
    order, preds = _plan(netlist)
    res_by_id = netlist.resonator_by_id
    wg_by_id = {w.id: w for w in netlist.waveguides}
    sources = set(netlist.sources)

    port_power: dict[str, float] = {}
    outputs: dict[tuple[str, str], float] = {}  # (resonator id, port) -> level
    wg_out: dict[str, float] = {}
    laser_on: dict[str, int] = {}
    pumps: dict[str, int] = {}
    detections: dict[str, DetectionResult] = {}

    for kind, ident in order:
        if kind == "port":
            levels = []
            if ident in sources:
                levels.append(config.source_power_dbm)
            for pk, pid in preds[(kind, ident)]:
                levels.append(wg_out[pid] if pk == "wg" else outputs[(pid, ident)])
            port_power[ident] = combine(levels, config.merge_loss_db)
        elif kind == "wg":
            w = wg_by_id[ident]
            wg_out[ident] = waveguide_attenuate(port_power[w.from_port], w)
        elif kind == "laser":
            laser = netlist.laser_by_id[ident]
            pd = laser.repeater_photodiode
            if pd is not None:
                det = detections[pd]
                if det.logic is Logic.INDETERMINATE and strict:
                    p = netlist.photodiode_by_id[pd]
                    raise IndeterminateLogic(pd, det.power_dbm, p.drives)
                laser_on[ident] = int(det.logic is Logic.ONE)
            else:
                if laser.driven_by not in signals:
                    raise MissingAssignment(laser.driven_by)
                laser_on[ident] = int(signals[laser.driven_by])
        elif kind == "res":
            r = res_by_id[ident]
            if r.pump.startswith(EXT):
                if r.pump not in signals:
                    raise MissingAssignment(r.pump[len(EXT):])
                pump = int(signals[r.pump])
            else:
                pump = laser_on[r.pump]
            pumps[ident] = pump
            through, drop = resonator_route(pump, port_power[r.in_port], r)
            outputs[(ident, r.through_port)] = through
            outputs[(ident, r.drop_port)] = drop
        elif kind == "pd":
            p = netlist.photodiode_by_id[ident]
            detections[ident] = photodiode_detect(port_power.get(p.port, DARK), p,
                                                  config.probe_wavelength_nm)
    return SettleResult(port_power, detections, laser_on, pumps)


@dataclass(frozen=True)
class PathStep:
    kind: str  # waveguide | resonator | laser | photodiode
    id: str
    delay_ps: float


@dataclass(frozen=True)
class TimingReport:
    delay_ps: float
    path: tuple[PathStep, ...]
    endpoint: str


_KIND_NAMES = {"wg": "waveguide", "res": "resonator", "laser": "laser", "pd": "photodiode"}


def arrival_times(netlist: OpticalNetlist, config: PhysicsConfig | None = None):
    """Latest arrival time (ps) and critical predecessor of every graph node.

    Probe sources are lit before the clock edge; every laser pays its turn-on
    delay from the edge (or from its repeater photodiode's arrival).
    """
    config = config or PhysicsConfig()
    order, preds = _plan(netlist)
    elements = {("wg", w.id): w for w in netlist.waveguides}
    elements.update({("res", r.id): r for r in netlist.resonators})
    elements.update({("laser", l.id): l for l in netlist.lasers})
    elements.update({("pd", p.id): p for p in netlist.photodiodes})

    arrival: dict = {}
    via: dict = {}
    for node in order:
        best, best_pred = 0.0, None
        for pred in preds.get(node, ()):
            if best_pred is None or arrival[pred] > best:
                best, best_pred = arrival[pred], pred
        own = element_delay(elements[node], config) if node in elements else 0.0
        arrival[node] = best + own
        via[node] = best_pred
    return arrival, via, elements


def timing_report(netlist: OpticalNetlist, config: PhysicsConfig | None = None) -> TimingReport:
    """Longest path to any photodiode or undetected named output."""
    config = config or PhysicsConfig()
    if not netlist.resonators and not netlist.photodiodes:
        return TimingReport(0.0, (), "")
    arrival, via, elements = arrival_times(netlist, config)
    detected = netlist.photodiode_at
    ends = [("pd", p.id) for p in netlist.photodiodes] + \
           [("port", p) for _, p in netlist.output_ports if p not in detected]
    if not ends:
        ends = [("port", p) for p in netlist.dangling_ports()] or \
               [("port", p) for p in netlist.terminators]
    end = max(ends, key=lambda n: (arrival[n], n))
    steps = []
    node = end
    while node is not None:
        if node in elements:
            steps.append(PathStep(_KIND_NAMES[node[0]], node[1],
                                  element_delay(elements[node], config)))
        node = via[node]
    return TimingReport(arrival[end], tuple(reversed(steps)), f"{end[0]}:{end[1]}")
