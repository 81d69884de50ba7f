"""Clocked electro-optical state machines.

Per clock edge: flip-flop pins and external inputs switch the pump lasers,
probe light settles through the resonator networks (repeaters regenerate
intermediate results as pump light), photodiodes read the J/K and output
levels, and every flip-flop latches at once.

Signal references used by flip-flop pins and machine outputs are ``0``,
``1``, ``q:<ff>``, ``qbar:<ff>``, ``input:<name>`` or a photodiode id.
"""

from __future__ import annotations

import csv
import enum
import io
import itertools
import math
from dataclasses import dataclass, field, replace
from typing import Mapping, Sequence

from .errors import (CombinationalCycle, IndeterminateLogic, MissingAssignment, ParseError,
                     ValidationError)
from .netlist import (EXT, OpticalNetlist, build_netlist, emit_lines, new_accumulator,
                      parse_element, tokenize, topological_order, validate)
from .photonics import DARK, Logic, PhysicsConfig, margin, photodiode_detect
from .settle import PathStep, settle, timing_report


class MachineKind(enum.Enum):
    MEALY = "mealy"
    MOORE = "moore"


def jk_step(q: int, j: int, k: int) -> int:
    if j and k:
        return 1 - q
    if j:
        return 1
    if k:
        return 0
    return q


@dataclass
class JkFlipFlop:
    id: str
    j: str
    k: str
    qdrives: tuple[str, ...] = ()
    qbardrives: tuple[str, ...] = ()
    q: int = 0

    @property
    def qbar(self) -> int:
        return 1 - self.q


@dataclass
class MachineDescription:
    kind: MachineKind
    flipflops: list[JkFlipFlop]
    inputs: tuple[str, ...]
    logic: OpticalNetlist
    outputs: tuple[tuple[str, str], ...] = ()

    @property
    def laser_array(self):
        return tuple(l for l in self.logic.lasers if not l.repeater_photodiode)

    @property
    def photodiode_array(self):
        return self.logic.photodiodes

    @property
    def state(self) -> tuple[int, ...]:
        """Flip-flop bits, index 0 first."""
        return tuple(ff.q for ff in self.flipflops)

    def load_state(self, bits: Sequence[int]) -> None:
        if len(bits) != len(self.flipflops):
            raise ValueError(f"state has {len(bits)} bits, machine has {len(self.flipflops)} flip-flops")
        for ff, b in zip(self.flipflops, bits):
            ff.q = int(b)

    def copy(self) -> "MachineDescription":
        return replace(self, flipflops=[replace(ff) for ff in self.flipflops])


def bits_msb(bits: Sequence[int]) -> str:
    """Render flip-flop bits with the highest index first."""
    return "".join(str(b) for b in reversed(bits))


def parse_bits_msb(text: str) -> tuple[int, ...]:
    return tuple(int(c) for c in reversed(text))


# -- validation --------------------------------------------------------------

def _check_ref(ref: str, m: MachineDescription, where: str) -> None:
    ffs = {ff.id for ff in m.flipflops}
    if ref in ("0", "1"):
        return
    for prefix in ("q:", "qbar:"):
        if ref.startswith(prefix):
            if ref[len(prefix):] not in ffs:
                raise ValidationError(f"{where}: unknown flip-flop in {ref!r}")
            return
    if ref.startswith("input:"):
        if ref[len("input:"):] not in m.inputs:
            raise ValidationError(f"{where}: unknown input in {ref!r}")
        return
    if ref not in m.logic.photodiode_by_id:
        raise ValidationError(f"{where}: {ref!r} is not a photodiode")


def _depends_on_input(m: MachineDescription, ref: str) -> bool:
    """Whether a signal's combinational cone reaches an external input."""
    if ref.startswith("input:"):
        return True
    pd = m.logic.photodiode_by_id.get(ref)
    if pd is None:
        return False
    net = m.logic
    feeding: dict[str, list] = {}
    for w in net.waveguides:
        feeding.setdefault(w.to_port, []).append(("port", w.from_port))
    for r in net.resonators:
        for p in (r.through_port, r.drop_port):
            feeding.setdefault(p, []).append(("res", r.id))
    seen = set()
    stack = [("port", pd.port)]
    while stack:
        node = stack.pop()
        if node in seen:
            continue
        seen.add(node)
        kind, ident = node
        if kind == "port":
            stack.extend(feeding.get(ident, ()))
        elif kind == "res":
            r = net.resonator_by_id[ident]
            stack.append(("port", r.in_port))
            if r.pump.startswith(EXT):
                continue
            laser = net.laser_by_id[r.pump]
            if laser.driven_by.startswith("input:"):
                return True
            if laser.repeater_photodiode:
                stack.append(("pd", laser.repeater_photodiode))
        elif kind == "pd":
            stack.append(("port", net.photodiode_by_id[ident].port))
    return False


def validate_machine(m: MachineDescription, config: PhysicsConfig | None = None) -> MachineDescription:
    config = config or PhysicsConfig()
    net = m.logic
    if net.resonators or net.waveguides or net.sources or net.photodiodes or net.lasers:
        validate(net, config)
    ids = [ff.id for ff in m.flipflops]
    if len(set(ids)) != len(ids):
        raise ValidationError("duplicate flip-flop id")
    if len(set(m.inputs)) != len(m.inputs):
        raise ValidationError("duplicate input name")
    for ff in m.flipflops:
        if ff.q not in (0, 1):
            raise ValidationError(f"flip-flop {ff.id}: q must be a bit")
        _check_ref(ff.j, m, f"flip-flop {ff.id} J")
        _check_ref(ff.k, m, f"flip-flop {ff.id} K")
        for pin, ref in (("j", ff.j), ("k", ff.k)):
            pd = net.photodiode_by_id.get(ref)
            if pd is not None and f"{pin}:{ff.id}" not in pd.drives:
                raise ValidationError(f"photodiode {ref} does not list {pin}:{ff.id} in drives")
        for attr, prefix in (("qdrives", "q:"), ("qbardrives", "qbar:")):
            declared = set(getattr(ff, attr))
            actual = {l.id for l in net.lasers if l.driven_by == prefix + ff.id}
            if declared != actual:
                raise ValidationError(f"flip-flop {ff.id}: {attr} {sorted(declared)} "
                                      f"disagrees with lasers {sorted(actual)}")
    names = [n for n, _ in m.outputs]
    if len(set(names)) != len(names):
        raise ValidationError("duplicate machine output")
    for name, ref in m.outputs:
        _check_ref(ref, m, f"output {name}")
    for l in net.lasers:
        d = l.driven_by
        if d.startswith(("q:", "qbar:", "input:")):
            _check_ref(d, m, f"laser {l.id}")
    ffs = {ff.id: ff for ff in m.flipflops}
    outs = dict(m.outputs)
    for pd in net.photodiodes:
        for target in pd.drives:
            pin, _, ident = target.partition(":")
            if pin in ("j", "k"):
                if ident not in ffs or getattr(ffs[ident], pin) != pd.id:
                    raise ValidationError(f"photodiode {pd.id} claims {target} but the pin disagrees")
            elif pin == "output":
                if outs.get(ident) != pd.id:
                    raise ValidationError(f"photodiode {pd.id} claims {target} but the output disagrees")
    if m.kind is MachineKind.MOORE:
        for name, ref in m.outputs:
            if _depends_on_input(m, ref):
                raise ValidationError(f"Moore output {name} depends on an external input")
    return m


# -- simulation --------------------------------------------------------------

@dataclass(frozen=True)
class TraceEntry:
    cycle: int
    state_before: str
    inputs: str
    pumps: str
    jk_levels: str
    outputs: str
    state_after: str
    settle_ps: float
    margin_db: float


TRACE_HEADER = ("cycle", "state_before", "inputs", "pumps", "jk_levels", "outputs",
                "state_after", "settle_ps", "margin_db")


@dataclass
class Trace:
    entries: list[TraceEntry] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def __getitem__(self, i):
        return self.entries[i]

    def states(self) -> list[str]:
        return [e.state_after for e in self.entries]

    def output_bits(self, index: int = 0) -> list[int]:
        return [int(e.outputs[index]) for e in self.entries]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(TRACE_HEADER)
        for e in self.entries:
            w.writerow([e.cycle, e.state_before, e.inputs, e.pumps, e.jk_levels, e.outputs,
                        e.state_after, f"{e.settle_ps:.3f}", _fmt_margin(e.margin_db)])
        return buf.getvalue()


def _fmt_margin(x: float) -> str:
    return "inf" if math.isinf(x) else f"{x:.3f}"


def read_trace_csv(text: str) -> Trace:
    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    if tuple(header or ()) != TRACE_HEADER:
        raise ParseError("trace CSV header mismatch", 1, ",".join(header or ()))
    entries = []
    for lineno, row in enumerate(reader, 2):
        if len(row) != len(TRACE_HEADER):
            raise ParseError("wrong number of columns", lineno, ",".join(row))
        try:
            entries.append(TraceEntry(int(row[0]), *row[1:7], float(row[7]), float(row[8])))
        except ValueError as exc:
            raise ParseError(str(exc), lineno) from None
    return Trace(entries)


def _settle_delay(netlist: OpticalNetlist, config: PhysicsConfig) -> float:
    cache = netlist.__dict__.setdefault("_delay_cache", {})
    if config not in cache:
        cache[config] = timing_report(netlist, config).delay_ps
    return cache[config]


def _signals(m: MachineDescription, external: Mapping[str, int]) -> dict[str, int]:
    sig: dict[str, int] = {}
    for ff in m.flipflops:
        sig[f"q:{ff.id}"] = ff.q
        sig[f"qbar:{ff.id}"] = ff.qbar
    for name in m.inputs:
        if name not in external:
            raise MissingAssignment(name)
        sig[f"input:{name}"] = int(external[name]) & 1
    return sig


def _resolve(ref: str, signals: Mapping[str, int], detections, net: OpticalNetlist,
             pins: tuple[str, ...]) -> int:
    if ref in ("0", "1"):
        return int(ref)
    if ref in signals:
        return signals[ref]
    det = detections[ref]
    if det.logic is Logic.INDETERMINATE:
        raise IndeterminateLogic(ref, det.power_dbm, pins)
    return det.logic.value


def clock_cycle(m: MachineDescription, external: Mapping[str, int] | None = None,
                config: PhysicsConfig | None = None, cycle: int = 0):
    """Advance the machine by one clock edge.

    Returns ``(new_state, output_bits, trace_entry)`` and updates the
    flip-flops in place.  Mealy outputs are those seen before the edge.
    """
    config = config or PhysicsConfig()
    external = external or {}
    before = m.state
    signals = _signals(m, external)
    result = settle(m.logic, signals, config)

    jk = []
    for ff in m.flipflops:
        j = _resolve(ff.j, signals, result.detections, m.logic, (f"j:{ff.id}",))
        k = _resolve(ff.k, signals, result.detections, m.logic, (f"k:{ff.id}",))
        jk.append((j, k))
    outs = tuple(_resolve(ref, signals, result.detections, m.logic, (f"output:{name}",))
                 for name, ref in m.outputs)
    for ff, (j, k) in zip(m.flipflops, jk):
        ff.q = jk_step(ff.q, j, k)

    entry = TraceEntry(
        cycle=cycle,
        state_before=bits_msb(before),
        inputs="".join(str(signals[f"input:{n}"]) for n in m.inputs),
        pumps="".join(str(result.laser_on[l.id]) for l in m.logic.lasers),
        jk_levels=" ".join(f"{j}{k}" for j, k in reversed(jk)),
        outputs="".join(map(str, outs)),
        state_after=bits_msb(m.state),
        settle_ps=round(_settle_delay(m.logic, config), 3),
        margin_db=round(result.min_margin(), 3),
    )
    return m.state, outs, entry


def _input_map(m: MachineDescription, item) -> dict[str, int]:
    if isinstance(item, Mapping):
        return dict(item)
    if isinstance(item, str):
        item = [int(c) for c in item]
    elif isinstance(item, int):
        item = [item]
    bits = list(item)
    if len(bits) != len(m.inputs):
        raise ValueError(f"expected {len(m.inputs)} input bit(s), got {len(bits)}")
    return dict(zip(m.inputs, bits))


def run(m: MachineDescription, inputs: Sequence, reset_state: Sequence[int] | None = None,
        config: PhysicsConfig | None = None) -> Trace:
    """Clock the machine once per element of ``inputs`` from ``reset_state`` (all zero by default).

    Input elements may be maps, bit strings, bit sequences or single bits.
    """
    config = config or PhysicsConfig()
    m.load_state(reset_state if reset_state is not None else [0] * len(m.flipflops))
    trace = Trace()
    for t, item in enumerate(inputs):
        try:
            _, _, entry = clock_cycle(m, _input_map(m, item), config, cycle=t)
        except IndeterminateLogic as exc:
            raise exc.at_cycle(t) from None
        except CombinationalCycle as exc:
            raise CombinationalCycle(f"cycle {t}: {exc}") from None
        trace.entries.append(entry)
    return trace


# -- analysis ------------------------------------------------------------------

@dataclass(frozen=True)
class CriticalPath:
    delay_ps: float
    path: tuple[PathStep, ...]
    min_margin_db: float
    endpoint: str = ""

    def describe(self) -> str:
        return " -> ".join(f"{s.kind} {s.id}" for s in self.path) or "(no optical path)"


def _driver_assignments(netlist: OpticalNetlist):
    """Every combination of laser drivers and external pump lines; q/qbar kept complementary."""
    ffs, others = [], []
    for l in netlist.lasers:
        d = l.driven_by
        if d.startswith("q:") or d.startswith("qbar:"):
            ff = d.split(":", 1)[1]
            if ff not in ffs:
                ffs.append(ff)
        elif d.startswith("input:") and d not in others:
            others.append(d)
    others += [EXT + line for line in netlist.pump_lines()]
    for bits in itertools.product((0, 1), repeat=len(ffs) + len(others)):
        sig = {}
        for ff, b in zip(ffs, bits):
            sig[f"q:{ff}"] = b
            sig[f"qbar:{ff}"] = 1 - b
        sig.update(zip(others, bits[len(ffs):]))
        yield sig


def worst_case_margin(netlist: OpticalNetlist, config: PhysicsConfig | None = None) -> float:
    """Smallest margin at any photodiode (or, lacking any, any named output) over all drives."""
    config = config or PhysicsConfig()
    if not netlist.resonators:
        return math.inf
    worst = math.inf
    probe = [p for _, p in netlist.output_ports] if not netlist.photodiodes else []
    for sig in _driver_assignments(netlist):
        result = settle(netlist, sig, config, strict=False)
        worst = min(worst, result.min_margin())
        for port in probe:
            worst = min(worst, margin(result.port_power.get(port, DARK),
                                      config.logic1_threshold_dbm, config.logic0_ceiling_dbm))
    return worst


def critical_path(m: MachineDescription | OpticalNetlist,
                  config: PhysicsConfig | None = None) -> CriticalPath:
    """Longest settle path (ps) and the worst-case detection margin (dB)."""
    config = config or PhysicsConfig()
    net = m.logic if isinstance(m, MachineDescription) else m
    if not net.resonators and not net.photodiodes:
        return CriticalPath(0.0, (), math.inf)
    topological_order(net)
    report = timing_report(net, config)
    return CriticalPath(report.delay_ps, report.path, worst_case_margin(net, config),
                        report.endpoint)


@dataclass(frozen=True)
class Gate:
    source: str
    resonators: tuple[str, ...]
    pumps: tuple[str, ...]
    truth: tuple[int, ...]  # over pumps, first pump most significant
    output: str

    @property
    def kind(self) -> str:
        n = len(self.pumps)
        if n == 1 and self.truth == (1, 0):
            return "inverter"
        if n == 1 and self.truth == (0, 1):
            return "buffer"
        if n >= 2 and self.truth == tuple([0] * ((1 << n) - 1) + [1]):
            return "and"
        if n == 2 and self.truth == (0, 1, 1, 0):
            return "xor"
        return "logic"


def gate_inventory(netlist: OpticalNetlist) -> list[Gate]:
    """One entry per probe source: the block's pumps and the function at its detected output."""
    consumers = netlist.consumers()
    wg = {w.id: w for w in netlist.waveguides}
    res = netlist.resonator_by_id
    detected = set(netlist.photodiode_at) | {p for _, p in netlist.output_ports}

    def route(port: str, pump_of) -> str:
        while True:
            cons = [c for c in consumers.get(port, ()) if c[0] != "photodiode"]
            if not cons:
                return port
            kind, ident = cons[0]
            if kind == "waveguide":
                port = wg[ident].to_port
            else:
                r = res[ident]
                port = r.drop_port if pump_of(r) else r.through_port

    gates = []
    for src in netlist.sources:
        members: list[str] = []
        stack = [src]
        ends: list[str] = []
        while stack:
            port = stack.pop()
            cons = [c for c in consumers.get(port, ()) if c[0] != "photodiode"]
            if not cons and port in detected and port not in ends:
                ends.append(port)
            for kind, ident in cons:
                if kind == "waveguide":
                    stack.append(wg[ident].to_port)
                elif ident not in members:
                    members.append(ident)
                    stack.extend((res[ident].through_port, res[ident].drop_port))
        members.sort(key=lambda i: list(res).index(i))
        pumps = tuple(dict.fromkeys(res[i].pump for i in members))
        for end in sorted(ends):
            truth = []
            for bits in itertools.product((0, 1), repeat=len(pumps)):
                env = dict(zip(pumps, bits))
                truth.append(int(route(src, lambda r: env[r.pump]) == end))
            gates.append(Gate(src, tuple(members), pumps, tuple(truth), end))
    return gates


# -- persistence ---------------------------------------------------------------

def emit_machine(m: MachineDescription) -> str:
    lines = [f"machine kind={m.kind.value}"]
    lines.extend(f"input {name}" for name in m.inputs)
    for ff in m.flipflops:
        line = (f"flipflop {ff.id} j={ff.j} k={ff.k} qdrives={','.join(ff.qdrives)} "
                f"qbardrives={','.join(ff.qbardrives)}")
        if ff.q:
            line += " q=1"
        lines.append(line)
    lines.extend(f"machine_output {name} src={ref}" for name, ref in m.outputs)
    lines.extend(emit_lines(m.logic))
    return "\n".join(lines) + "\n"


def is_machine_text(text: str) -> bool:
    return any(line.kind == "machine" for line in tokenize(text))


def parse_machine(text: str, config: PhysicsConfig | None = None) -> MachineDescription:
    config = config or PhysicsConfig()
    acc = new_accumulator()
    kind = None
    inputs: list[str] = []
    flipflops: list[JkFlipFlop] = []
    outputs: list[tuple[str, str]] = []
    for line in tokenize(text):
        if parse_element(line, acc, config):
            continue
        if line.kind == "machine":
            line.expect_args(0)
            line.check_keys({"kind"}, {"kind"})
            if kind is not None:
                raise ParseError("duplicate machine line", line.lineno, "machine")
            try:
                kind = MachineKind(line.keys["kind"])
            except ValueError:
                raise ParseError("kind must be mealy or moore", line.lineno,
                                 line.keys["kind"]) from None
        elif line.kind == "input":
            inputs.append(line.expect_args(1)[0])
        elif line.kind == "flipflop":
            (ident,) = line.expect_args(1)
            line.check_keys({"j", "k", "qdrives", "qbardrives", "q"}, {"j", "k"})
            k = line.keys
            q = k.get("q", "0")
            if q not in ("0", "1"):
                raise ParseError("q must be 0 or 1", line.lineno, q)
            flipflops.append(JkFlipFlop(
                ident, k["j"], k["k"],
                tuple(x for x in k.get("qdrives", "").split(",") if x),
                tuple(x for x in k.get("qbardrives", "").split(",") if x), int(q)))
        elif line.kind == "machine_output":
            (name,) = line.expect_args(1)
            line.check_keys({"src"}, {"src"})
            outputs.append((name, line.keys["src"]))
        else:
            raise ParseError("unknown element kind", line.lineno, line.kind)
    if kind is None:
        raise ParseError("missing 'machine kind=...' line")
    m = MachineDescription(kind, flipflops, tuple(inputs), build_netlist(acc), tuple(outputs))
    return validate_machine(m, config)
