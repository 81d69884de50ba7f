"""BDD to ring-resonator network compilation.

Every decision node becomes one resonator pumped by its variable's line.
The low branch leaves on the through port and the high branch on the drop
port.  A waveguide runs from the probe source to the root, and one more for
every edge that reaches a decision node or the ONE terminal.  All ONE edges
meet in a single output junction ``f(x)``.  Edges into ZERO end at the
resonator port itself, which is then terminated (or, on request, merged into
a complement output ``C0``).
"""

from __future__ import annotations

import enum
import itertools
from dataclasses import replace
from typing import Iterable, Sequence

from .bdd import ONE, ZERO, Bdd, assignment_bits, build_bdd, evaluate
from .errors import (ConstantFunction, MarginExhausted, PortNotFound, ResonatorNotFound)
from .netlist import EXT, OpticalNetlist, topological_order
from .photonics import (DARK, LaserDiode, PhysicsConfig, RingResonatorSwitch, Waveguide,
                        default_photodiode, margin)
from .settle import settle

OUTPUT = "f(x)"
COMPLEMENT = "C0"


class GateKind(enum.Enum):
    INVERTER = "inverter"
    AND2 = "and2"
    XOR2 = "xor2"


def _layout(bdd: Bdd, config: PhysicsConfig, prefix: str,
            expose_complement: bool) -> OpticalNetlist:
    if bdd.is_constant:
        raise ConstantFunction(bdd.root)
    refs = list(bdd.refs())
    rid = {ref: f"{prefix}R{i}" for i, ref in enumerate(refs)}
    src, out, comp = f"{prefix}src", f"{prefix}out", f"{prefix}c0"

    resonators = []
    for ref in refs:
        node = bdd.node(ref)
        name = rid[ref]
        resonators.append(RingResonatorSwitch(
            name, EXT + bdd.variables[node.var].name,
            f"{name}.in", f"{name}.through", f"{name}.drop",
            modulation_depth_db=config.modulation_depth_db,
            insertion_loss_db=config.insertion_loss_db))

    waveguides = []

    def guide(a: str, b: str) -> None:
        waveguides.append(Waveguide(f"{prefix}W{len(waveguides)}", a, b,
                                    config.segment_length_um,
                                    config.waveguide_loss_db_per_um, config.group_index))

    guide(src, f"{rid[bdd.root]}.in")
    has_complement = False
    for ref in refs:
        node = bdd.node(ref)
        for child, port in ((node.low, f"{rid[ref]}.through"), (node.high, f"{rid[ref]}.drop")):
            if child == ONE:
                guide(port, out)
            elif child == ZERO:
                if expose_complement:
                    guide(port, comp)
                    has_complement = True
            else:
                guide(port, f"{rid[child]}.in")

    outputs = [(prefix + OUTPUT, out)]
    if has_complement:
        outputs.append((prefix + COMPLEMENT, comp))
    return OpticalNetlist(resonators=tuple(resonators), waveguides=tuple(waveguides),
                          sources=(src,), output_ports=tuple(outputs))


def compile_bdd_to_network(bdd: Bdd, config: PhysicsConfig | None = None, *,
                           expose_complement: bool = False, prefix: str = "",
                           check_margin: bool = True) -> OpticalNetlist:
    """Compile a non-constant ROBDD into a terminated resonator network.

    Raises ``ConstantFunction`` for constants and ``MarginExhausted`` when some
    pump assignment leaves ``f(x)`` inside the photodiode guard band.
    """
    config = config or PhysicsConfig()
    netlist = insert_terminators(_layout(bdd, config, prefix, expose_complement))
    if check_margin:
        checks = [(prefix + OUTPUT, lambda a: evaluate(bdd, a))]
        if expose_complement and prefix + COMPLEMENT in netlist.outputs:
            checks.append((prefix + COMPLEMENT, lambda a: 1 - evaluate(bdd, a)))
        check_margins(netlist, checks, config)
    return netlist


def pump_assignments(lines: Sequence[str]) -> Iterable[dict[str, int]]:
    for row in range(1 << len(lines)):
        yield dict(zip(lines, assignment_bits(row, len(lines))))


def output_levels(netlist: OpticalNetlist, assignment: dict[str, int],
                  config: PhysicsConfig | None = None) -> dict[str, float]:
    """Power (dBm) at each named output for one assignment of external pump lines."""
    config = config or PhysicsConfig()
    signals = {EXT + k: v for k, v in assignment.items()}
    result = settle(netlist, signals, config)
    return {name: result.port_power[port] for name, port in netlist.output_ports}


def detect_outputs(netlist: OpticalNetlist, assignment: dict[str, int],
                   config: PhysicsConfig | None = None):
    """Read every named output through a default photodiode."""
    from .photonics import photodiode_detect

    config = config or PhysicsConfig()
    levels = output_levels(netlist, assignment, config)
    return {name: photodiode_detect(level, default_photodiode(name, name, (), config),
                                    config.probe_wavelength_nm)
            for name, level in levels.items()}


def check_margins(netlist: OpticalNetlist, checks, config: PhysicsConfig) -> float:
    """Worst intended-logic margin over all pump assignments; raise if any is <= 0.

    ``checks`` pairs an output name with the Boolean function it should carry.
    """
    lines = netlist.pump_lines()
    worst = float("inf")
    th1, th0 = config.logic1_threshold_dbm, config.logic0_ceiling_dbm
    for assignment in pump_assignments(lines):
        levels = output_levels(netlist, assignment, config)
        for name, fn in checks:
            level = levels[name]
            if fn(assignment):
                m = level - th1 if level != DARK else float("-inf")
                if m < 0:
                    raise MarginExhausted(
                        f"{name}: logic-1 reaches only {level:.2f} dBm for {assignment}, "
                        f"below the {th1:.2f} dBm threshold")
            else:
                m = th0 - level
                if m < 0:
                    raise MarginExhausted(
                        f"{name}: logic-0 leaks {level:.2f} dBm for {assignment}, "
                        f"above the {th0:.2f} dBm ceiling")
            worst = min(worst, m)
    return worst


def worst_margin(netlist: OpticalNetlist, config: PhysicsConfig | None = None) -> float:
    """Smallest detection margin at any named output over all pump assignments."""
    config = config or PhysicsConfig()
    worst = float("inf")
    for assignment in pump_assignments(netlist.pump_lines()):
        for level in output_levels(netlist, assignment, config).values():
            worst = min(worst, margin(level, config.logic1_threshold_dbm,
                                      config.logic0_ceiling_dbm))
    return worst


# -- gate library --------------------------------------------------------------

GATE_FUNCTIONS = {
    GateKind.INVERTER: ("10", ("A",)),
    GateKind.AND2: ("0001", ("A", "B")),
    GateKind.XOR2: ("0110", ("A", "B")),
}


def gate_bdd(kind: GateKind) -> Bdd:
    table, order = GATE_FUNCTIONS[kind]
    return build_bdd(table, order)


def build_gate(kind: GateKind | str, config: PhysicsConfig | None = None) -> OpticalNetlist:
    """Library gate generated from its BDD.

    The XOR keeps the historical port names of its two-output form: ``C0``
    carries A xor B and ``f(x)`` lights only when both pumps are on.  The
    ``f(x)`` port is the drop port of the second B ring, so the graph is the
    same as the compiled XOR with that one port exposed instead of terminated.
    """
    config = config or PhysicsConfig()
    kind = GateKind(kind) if isinstance(kind, str) else kind
    bdd = gate_bdd(kind)
    if kind is not GateKind.XOR2:
        return compile_bdd_to_network(bdd, config)

    net = _layout(bdd, config, "", expose_complement=False)
    ref = bdd.root
    rid = {r: f"R{i}" for i, r in enumerate(bdd.refs())}
    while bdd.node(ref).high >= 2:
        ref = bdd.node(ref).high
    both_port = f"{rid[ref]}.drop"
    net = replace(net, output_ports=((COMPLEMENT, "out"), (OUTPUT, both_port)))
    net = insert_terminators(net)
    check_margins(net, [(COMPLEMENT, lambda a: a["A"] ^ a["B"]),
                        (OUTPUT, lambda a: a["A"] & a["B"])], config)
    return net


# -- structural passes ---------------------------------------------------------

def insert_terminators(netlist: OpticalNetlist) -> OpticalNetlist:
    existing = set(netlist.terminators)
    extra = tuple(p for p in netlist.dangling_ports() if p not in existing)
    if not extra:
        return netlist
    return replace(netlist, terminators=netlist.terminators + extra)


def _fresh(prefix: str, taken: set[str]) -> str:
    for i in itertools.count():
        name = f"{prefix}{i}"
        if name not in taken:
            taken.add(name)
            return name
    raise AssertionError("unreachable")


def insert_repeaters(netlist: OpticalNetlist, pump_demands: Sequence[tuple[str, str]],
                     config: PhysicsConfig | None = None) -> OpticalNetlist:
    """Regenerate optical outputs as 532 nm pump light.

    Each distinct output port in ``pump_demands`` gets one photodiode (reusing
    one already on the port) driving one new pump laser, which then pumps
    every resonator demanding that port.  ``pump_demands`` entries name either
    a port or an output.
    """
    if not pump_demands:
        return netlist
    config = config or PhysicsConfig()
    ports = set(netlist.ports())
    named = netlist.outputs
    resonators = netlist.resonator_by_id

    grouped: dict[str, list[str]] = {}
    for port, target in pump_demands:
        port = named.get(port, port)
        if port not in ports:
            raise PortNotFound(port)
        if target not in resonators:
            raise ResonatorNotFound(target)
        grouped.setdefault(port, []).append(target)

    taken = {el.id for group in (netlist.resonators, netlist.waveguides, netlist.lasers,
                                 netlist.photodiodes) for el in group}
    photodiodes = list(netlist.photodiodes)
    lasers = list(netlist.lasers)
    rebind: dict[str, str] = {}
    for port, targets in grouped.items():
        laser_id = _fresh("LR", taken)
        idx = next((i for i, p in enumerate(photodiodes) if p.port == port), None)
        if idx is None:
            pd = default_photodiode(_fresh("PD", taken), port, (f"laser:{laser_id}",), config)
            photodiodes.append(pd)
        else:
            pd = photodiodes[idx]
            pd = replace(pd, drives=pd.drives + (f"laser:{laser_id}",))
            photodiodes[idx] = pd
        lasers.append(LaserDiode(laser_id, config.pump_wavelength_nm, config.pump_power_dbm,
                                 f"pd:{pd.id}"))
        for t in targets:
            rebind[t] = laser_id

    used = set(grouped)
    result = replace(
        netlist,
        resonators=tuple(replace(r, pump=rebind[r.id]) if r.id in rebind else r
                         for r in netlist.resonators),
        lasers=tuple(lasers), photodiodes=tuple(photodiodes),
        terminators=tuple(t for t in netlist.terminators if t not in used))
    topological_order(result)
    return result


def attach_photodiode(netlist: OpticalNetlist, port: str, drives: Sequence[str],
                      config: PhysicsConfig | None = None) -> tuple[OpticalNetlist, str]:
    """Put a detector on ``port`` (or extend the one already there); return its id."""
    config = config or PhysicsConfig()
    for i, pd in enumerate(netlist.photodiodes):
        if pd.port == port:
            merged = pd.drives + tuple(d for d in drives if d not in pd.drives)
            pds = list(netlist.photodiodes)
            pds[i] = replace(pd, drives=merged)
            return replace(netlist, photodiodes=tuple(pds)), pd.id
    taken = {el.id for group in (netlist.resonators, netlist.waveguides, netlist.lasers,
                                 netlist.photodiodes) for el in group}
    pd = default_photodiode(_fresh("PD", taken), port, tuple(drives), config)
    return replace(netlist, photodiodes=netlist.photodiodes + (pd,),
                   terminators=tuple(t for t in netlist.terminators if t != port)), pd.id


def summary(netlist: OpticalNetlist) -> str:
    return (f"resonators: {len(netlist.resonators)}, waveguides: {len(netlist.waveguides)}, "
            f"repeaters: {len(netlist.repeaters)}")
