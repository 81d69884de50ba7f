"""Optical netlists and their line-oriented text form.

One element per line, ``kind id key=value ...``::

    source src
    laser LQ0 wavelength_nm=532 power_dbm=10 driven_by=q:FF0
    resonator R0 pump=ext:A in=R0.in through=R0.through drop=R0.drop radius_um=5 ...
    waveguide W0 from=src to=R0.in length_um=50 loss_db_per_um=0.001 n_g=4.2
    photodiode PD0 port=out qe=0.7 bw_ghz=40 drives=j:FF1,k:FF1 logic1_dbm=-5 logic0_dbm=-8
    output f(x) out
    terminator R0.drop

Ports are plain names.  A port with several incoming waveguides is a passive
junction.  ``emit_netlist`` always writes every key so that text round-trips
exactly.
"""

from __future__ import annotations

import graphlib
from collections import defaultdict
from dataclasses import dataclass, replace
from functools import cached_property

from .errors import CombinationalCycle, DomainError, ParseError, ValidationError
from .photonics import (LaserDiode, Photodiode, PhysicsConfig, RingResonatorSwitch,
                        Waveguide, _fmt)

EXT = "ext:"


@dataclass(frozen=True)
class OpticalNetlist:
    resonators: tuple[RingResonatorSwitch, ...] = ()
    waveguides: tuple[Waveguide, ...] = ()
    lasers: tuple[LaserDiode, ...] = ()
    photodiodes: tuple[Photodiode, ...] = ()
    terminators: tuple[str, ...] = ()
    sources: tuple[str, ...] = ()
    output_ports: tuple[tuple[str, str], ...] = ()

    @property
    def source_port(self) -> str:
        if len(self.sources) != 1:
            raise ValidationError(f"netlist has {len(self.sources)} source ports, expected exactly one")
        return self.sources[0]

    @property
    def outputs(self) -> dict[str, str]:
        return dict(self.output_ports)

    @property
    def repeaters(self) -> tuple[tuple[str, str], ...]:
        """``(photodiode id, laser id)`` pairs."""
        return tuple((l.repeater_photodiode, l.id) for l in self.lasers if l.repeater_photodiode)

    @cached_property
    def resonator_by_id(self) -> dict[str, RingResonatorSwitch]:
        return {r.id: r for r in self.resonators}

    @cached_property
    def laser_by_id(self) -> dict[str, LaserDiode]:
        return {l.id: l for l in self.lasers}

    @cached_property
    def photodiode_by_id(self) -> dict[str, Photodiode]:
        return {p.id: p for p in self.photodiodes}

    @cached_property
    def photodiode_at(self) -> dict[str, Photodiode]:
        return {p.port: p for p in self.photodiodes}

    @cached_property
    def plan(self) -> tuple[list, dict]:
        """Topological order and predecessor map of the settle graph (raises on cycles)."""
        return topological_order(self), settle_graph(self)

    def ports(self) -> list[str]:
        """Every port name, in first-mention order."""
        seen: dict[str, None] = {}
        for s in self.sources:
            seen[s] = None
        for r in self.resonators:
            for p in (r.in_port, r.through_port, r.drop_port):
                seen[p] = None
        for w in self.waveguides:
            seen[w.from_port] = None
            seen[w.to_port] = None
        return list(seen)

    def consumers(self) -> dict[str, list[tuple[str, str]]]:
        """Optical consumers per port as ``(kind, id)``."""
        out: dict[str, list[tuple[str, str]]] = defaultdict(list)
        for w in self.waveguides:
            out[w.from_port].append(("waveguide", w.id))
        for r in self.resonators:
            out[r.in_port].append(("resonator", r.id))
        for p in self.photodiodes:
            out[p.port].append(("photodiode", p.id))
        return out

    def producers(self) -> dict[str, list[tuple[str, str]]]:
        out: dict[str, list[tuple[str, str]]] = defaultdict(list)
        for s in self.sources:
            out[s].append(("source", s))
        for r in self.resonators:
            out[r.through_port].append(("resonator", r.id))
            out[r.drop_port].append(("resonator", r.id))
        for w in self.waveguides:
            out[w.to_port].append(("waveguide", w.id))
        return out

    def dangling_ports(self) -> list[str]:
        """Ports that nothing consumes and no output names."""
        consumed = self.consumers()
        named = {p for _, p in self.output_ports}
        return [p for p in self.ports() if not consumed.get(p) and p not in named]

    def pump_lines(self) -> list[str]:
        """External pump line names in first-use order."""
        out: list[str] = []
        for r in self.resonators:
            if r.pump.startswith(EXT) and r.pump[len(EXT):] not in out:
                out.append(r.pump[len(EXT):])
        return out


def merge_netlists(*nets: OpticalNetlist) -> OpticalNetlist:
    return OpticalNetlist(
        resonators=sum((n.resonators for n in nets), ()),
        waveguides=sum((n.waveguides for n in nets), ()),
        lasers=sum((n.lasers for n in nets), ()),
        photodiodes=sum((n.photodiodes for n in nets), ()),
        terminators=sum((n.terminators for n in nets), ()),
        sources=sum((n.sources for n in nets), ()),
        output_ports=sum((n.output_ports for n in nets), ()),
    )


# -- graph -------------------------------------------------------------------

Node = tuple[str, str]


def settle_graph(netlist: OpticalNetlist) -> dict[Node, list[Node]]:
    """Predecessor map over ports and elements for one clock phase.

    Edges follow light (port -> waveguide -> port, port -> resonator -> port),
    pumping (laser -> resonator) and repeaters (photodiode -> laser).
    """
    preds: dict[Node, list[Node]] = {}
    for p in netlist.ports():
        preds.setdefault(("port", p), [])
    for l in netlist.lasers:
        pd = l.repeater_photodiode
        preds[("laser", l.id)] = [("pd", pd)] if pd else []
    for w in netlist.waveguides:
        preds[("wg", w.id)] = [("port", w.from_port)]
        preds[("port", w.to_port)].append(("wg", w.id))
    for r in netlist.resonators:
        deps = [("port", r.in_port)]
        if not r.pump.startswith(EXT):
            deps.append(("laser", r.pump))
        preds[("res", r.id)] = deps
        preds[("port", r.through_port)].append(("res", r.id))
        preds[("port", r.drop_port)].append(("res", r.id))
    for p in netlist.photodiodes:
        preds[("pd", p.id)] = [("port", p.port)]
    return preds


def topological_order(netlist: OpticalNetlist) -> list[Node]:
    sorter = graphlib.TopologicalSorter(settle_graph(netlist))
    try:
        return list(sorter.static_order())
    except graphlib.CycleError as exc:
        loop = " -> ".join(f"{k}:{i}" for k, i in exc.args[1])
        raise CombinationalCycle(f"cycle in optical/pump graph: {loop}") from None


# -- validation --------------------------------------------------------------

_DRIVER_PREFIXES = ("q:", "qbar:", "input:", "pd:")
_DRIVE_PREFIXES = ("j:", "k:", "output:", "laser:")


def validate(netlist: OpticalNetlist, config: PhysicsConfig | None = None) -> OpticalNetlist:
    """Check every structural invariant; return the netlist unchanged."""
    config = config or PhysicsConfig()
    ids: set[str] = set()
    for group in (netlist.resonators, netlist.waveguides, netlist.lasers, netlist.photodiodes):
        for el in group:
            if el.id in ids:
                raise ValidationError(f"duplicate id {el.id!r}")
            ids.add(el.id)

    if not netlist.sources:
        raise ValidationError("netlist has no source port")
    if len(set(netlist.sources)) != len(netlist.sources):
        raise ValidationError("duplicate source port")

    lasers = netlist.laser_by_id
    pds = netlist.photodiode_by_id
    for r in netlist.resonators:
        if r.pump.startswith(EXT):
            if not r.pump[len(EXT):]:
                raise ValidationError(f"resonator {r.id}: empty external pump name")
        elif r.pump not in lasers:
            raise ValidationError(f"resonator {r.id}: dangling pump {r.pump!r}")
        elif lasers[r.pump].wavelength_nm != config.pump_wavelength_nm:
            raise ValidationError(
                f"laser {r.pump} pumps {r.id} at {lasers[r.pump].wavelength_nm} nm, "
                f"expected {config.pump_wavelength_nm} nm")
        if len({r.in_port, r.through_port, r.drop_port}) != 3:
            raise ValidationError(f"resonator {r.id}: ports must be distinct")

    for l in netlist.lasers:
        if not l.driven_by.startswith(_DRIVER_PREFIXES):
            raise ValidationError(f"laser {l.id}: unknown driver {l.driven_by!r}")
        pd = l.repeater_photodiode
        if pd is not None and pd not in pds:
            raise ValidationError(f"laser {l.id}: driven by unknown photodiode {pd!r}")

    for p in netlist.photodiodes:
        for target in p.drives:
            if not target.startswith(_DRIVE_PREFIXES):
                raise ValidationError(f"photodiode {p.id}: unknown drive target {target!r}")
            if target.startswith("laser:"):
                lid = target[len("laser:"):]
                if lid not in lasers or lasers[lid].driven_by != f"pd:{p.id}":
                    raise ValidationError(f"photodiode {p.id}: laser {lid} is not driven by it")

    producers = netlist.producers()
    consumers = netlist.consumers()
    ports = set(netlist.ports())
    for port, prods in producers.items():
        if len(prods) > 1 and any(k != "waveguide" for k, _ in prods):
            raise ValidationError(f"port {port!r} is driven by more than one device output")
    for port, cons in consumers.items():
        if port not in ports:
            raise ValidationError(f"{cons[0][0]} {cons[0][1]} attached to unknown port {port!r}")
        if len(cons) > 1:
            raise ValidationError(f"port {port!r} feeds more than one consumer")
    for r in netlist.resonators:
        if not producers.get(r.in_port):
            raise ValidationError(f"resonator {r.id}: input port {r.in_port!r} receives no light")
    for name, port in netlist.output_ports:
        if port not in ports:
            raise ValidationError(f"output {name!r} names unknown port {port!r}")
    if len({n for n, _ in netlist.output_ports}) != len(netlist.output_ports):
        raise ValidationError("duplicate output name")
    for t in netlist.terminators:
        if t not in ports:
            raise ValidationError(f"terminator on unknown port {t!r}")
        if consumers.get(t):
            raise ValidationError(f"terminator on consumed port {t!r}")
    if len(set(netlist.terminators)) != len(netlist.terminators):
        raise ValidationError("duplicate terminator")
    unterminated = [p for p in netlist.dangling_ports() if p not in set(netlist.terminators)]
    if unterminated:
        raise ValidationError(f"unterminated dangling port {unterminated[0]!r}")

    topological_order(netlist)
    return netlist


# -- text format -------------------------------------------------------------

def emit_lines(netlist: OpticalNetlist) -> list[str]:
    lines = [f"source {s}" for s in netlist.sources]
    for l in netlist.lasers:
        lines.append(f"laser {l.id} wavelength_nm={_fmt(l.wavelength_nm)} "
                     f"power_dbm={_fmt(l.power_dbm)} driven_by={l.driven_by}")
    for r in netlist.resonators:
        lines.append(
            f"resonator {r.id} pump={r.pump} in={r.in_port} through={r.through_port} "
            f"drop={r.drop_port} radius_um={_fmt(r.radius_um)} width_um={_fmt(r.width_um)} "
            f"gap_um={_fmt(r.gap_um)} md_db={_fmt(r.modulation_depth_db)} "
            f"il_db={_fmt(r.insertion_loss_db)}")
    for w in netlist.waveguides:
        lines.append(f"waveguide {w.id} from={w.from_port} to={w.to_port} "
                     f"length_um={_fmt(w.length_um)} loss_db_per_um={_fmt(w.loss_db_per_um)} "
                     f"n_g={_fmt(w.group_index)}")
    for p in netlist.photodiodes:
        drives = f" drives={','.join(p.drives)}" if p.drives else ""
        lines.append(f"photodiode {p.id} port={p.port} qe={_fmt(p.quantum_efficiency)} "
                     f"bw_ghz={_fmt(p.bandwidth_ghz)}{drives} "
                     f"logic1_dbm={_fmt(p.logic1_threshold_dbm)} "
                     f"logic0_dbm={_fmt(p.logic0_ceiling_dbm)}")
    lines.extend(f"output {name} {port}" for name, port in netlist.output_ports)
    lines.extend(f"terminator {t}" for t in netlist.terminators)
    return lines


def emit_netlist(netlist: OpticalNetlist) -> str:
    return "\n".join(emit_lines(netlist)) + "\n"


class _Line:
    """Tokenized ``kind args... key=value...`` line with bookkeeping for errors."""

    def __init__(self, lineno: int, tokens: list[str]):
        self.lineno = lineno
        self.kind = tokens[0]
        self.args: list[str] = []
        self.keys: dict[str, str] = {}
        for tok in tokens[1:]:
            if "=" in tok:
                key, value = tok.split("=", 1)
                if key in self.keys:
                    raise ParseError("duplicate key", lineno, tok)
                self.keys[key] = value
            else:
                if self.keys:
                    raise ParseError("positional argument after key=value", lineno, tok)
                self.args.append(tok)

    def expect_args(self, n: int) -> list[str]:
        if len(self.args) != n:
            raise ParseError(f"{self.kind} takes {n} positional argument(s), got {len(self.args)}",
                             self.lineno, " ".join(self.args) or self.kind)
        return self.args

    def check_keys(self, allowed: set[str], required: set[str]) -> None:
        for key in self.keys:
            if key not in allowed:
                raise ParseError(f"unknown key for {self.kind}", self.lineno, key)
        for key in required:
            if key not in self.keys:
                raise ParseError(f"{self.kind} requires {key}=", self.lineno, self.kind)

    def num(self, key: str, default: float | None = None) -> float:
        if key not in self.keys:
            assert default is not None
            return default
        try:
            return float(self.keys[key])
        except ValueError:
            raise ParseError(f"{key} is not a number", self.lineno, self.keys[key]) from None


def tokenize(text: str):
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if line:
            yield _Line(lineno, line.split())


def parse_element(line: _Line, acc: dict[str, list], config: PhysicsConfig) -> bool:
    """Consume one netlist line into ``acc``; False if the kind is not a netlist kind."""
    kind = line.kind
    try:
        if kind == "source":
            acc["sources"].append(line.expect_args(1)[0])
        elif kind == "terminator":
            acc["terminators"].append(line.expect_args(1)[0])
        elif kind == "output":
            name, port = line.expect_args(2)
            acc["output_ports"].append((name, port))
        elif kind == "laser":
            (id,) = line.expect_args(1)
            line.check_keys({"wavelength_nm", "power_dbm", "driven_by"},
                            {"wavelength_nm", "driven_by"})
            acc["lasers"].append(LaserDiode(id, line.num("wavelength_nm"),
                                            line.num("power_dbm", config.pump_power_dbm),
                                            line.keys["driven_by"]))
        elif kind == "resonator":
            (id,) = line.expect_args(1)
            line.check_keys({"pump", "in", "through", "drop", "radius_um", "width_um",
                             "gap_um", "md_db", "il_db"}, {"pump", "in", "through", "drop"})
            k = line.keys
            acc["resonators"].append(RingResonatorSwitch(
                id, k["pump"], k["in"], k["through"], k["drop"],
                radius_um=line.num("radius_um", 5.0), width_um=line.num("width_um", 0.4),
                gap_um=line.num("gap_um", 0.2),
                modulation_depth_db=line.num("md_db", config.modulation_depth_db),
                insertion_loss_db=line.num("il_db", config.insertion_loss_db)))
        elif kind == "waveguide":
            (id,) = line.expect_args(1)
            line.check_keys({"from", "to", "length_um", "loss_db_per_um", "n_g"},
                            {"from", "to", "length_um"})
            acc["waveguides"].append(Waveguide(
                id, line.keys["from"], line.keys["to"], line.num("length_um"),
                line.num("loss_db_per_um", config.waveguide_loss_db_per_um),
                line.num("n_g", config.group_index)))
        elif kind == "photodiode":
            (id,) = line.expect_args(1)
            line.check_keys({"port", "qe", "bw_ghz", "drives", "logic1_dbm", "logic0_dbm"},
                            {"port"})
            drives = tuple(d for d in line.keys.get("drives", "").split(",") if d)
            acc["photodiodes"].append(Photodiode(
                id, line.keys["port"], drives,
                line.num("qe", config.quantum_efficiency),
                line.num("bw_ghz", config.bandwidth_ghz),
                line.num("logic1_dbm", config.logic1_threshold_dbm),
                line.num("logic0_dbm", config.logic0_ceiling_dbm)))
        else:
            return False
    except DomainError as exc:
        raise ParseError(str(exc), line.lineno, kind) from None
    return True


def build_netlist(acc: dict[str, list]) -> OpticalNetlist:
    return OpticalNetlist(**{k: tuple(v) for k, v in acc.items()})


def new_accumulator() -> dict[str, list]:
    return {k: [] for k in ("resonators", "waveguides", "lasers", "photodiodes",
                            "terminators", "sources", "output_ports")}


def parse_netlist(text: str, config: PhysicsConfig | None = None,
                  check: bool = True) -> OpticalNetlist:
    config = config or PhysicsConfig()
    acc = new_accumulator()
    for line in tokenize(text):
        if not parse_element(line, acc, config):
            raise ParseError("unknown element kind", line.lineno, line.kind)
    netlist = build_netlist(acc)
    if check:
        validate(netlist, config)
    return netlist


def with_pump(netlist: OpticalNetlist, resonator_id: str, pump: str) -> OpticalNetlist:
    return replace(netlist, resonators=tuple(
        replace(r, pump=pump) if r.id == resonator_id else r for r in netlist.resonators))
