"""Transition tables to optical JK machines, plus the two built-in designs.

States are binary-encoded by their position in the table (the first state is
the reset state, code 0).  J/K excitations come from the usual excitation
table; unused codes and the "either" cases are don't-cares, filled so the
BDDs stay small.  Functions that are constants or a bare flip-flop/input
wire need no optics.  The rest are compiled one probe source per function,
and a function that is cheaper to build from an earlier one plus a few
variables reuses it through a photodiode-to-laser repeater.
"""

from __future__ import annotations

import itertools
import warnings
from dataclasses import dataclass, field, replace
from typing import Mapping, Sequence

from .bdd import Bdd, assignment_bits, build_bdd, node_count, resolve_dont_cares, truth_table
from .compiler import OUTPUT, attach_photodiode, compile_bdd_to_network, insert_repeaters, \
    insert_terminators
from .errors import NonTotalTable, UnreachableStateWarning
from .machine import JkFlipFlop, MachineDescription, MachineKind, validate_machine
from .netlist import EXT, OpticalNetlist, merge_netlists
from .photonics import LaserDiode, PhysicsConfig

Bits = tuple[int, ...]


@dataclass(frozen=True)
class TransitionTable:
    states: tuple[str, ...]
    inputs: tuple[str, ...]
    outputs: tuple[str, ...]
    transitions: Mapping[tuple[str, Bits], tuple[str, Bits]] = field(hash=False)

    @property
    def reset_state(self) -> str:
        return self.states[0]

    def input_space(self) -> list[Bits]:
        return list(itertools.product((0, 1), repeat=len(self.inputs)))

    def step(self, state: str, inputs: Bits) -> tuple[str, Bits]:
        return self.transitions[(state, tuple(inputs))]

    def check_total(self) -> None:
        if not self.states:
            raise NonTotalTable("table declares no states")
        known = set(self.states)
        for (state, bits), (nxt, out) in self.transitions.items():
            if state not in known or nxt not in known:
                raise NonTotalTable(f"transition {state!r}/{bits} -> {nxt!r} uses an undeclared state")
            if len(bits) != len(self.inputs) or len(out) != len(self.outputs):
                raise NonTotalTable(f"transition {state!r}/{bits} has the wrong arity")
        for state in self.states:
            for bits in self.input_space():
                if (state, bits) not in self.transitions:
                    raise NonTotalTable(f"no transition for state {state!r} on input {bits}")

    def reachable(self) -> list[str]:
        seen = [self.reset_state]
        for s in seen:
            for bits in self.input_space():
                nxt = self.step(s, bits)[0]
                if nxt not in seen:
                    seen.append(nxt)
        return seen


def reference_run(table: TransitionTable, inputs: Sequence[Bits],
                  reset: str | None = None) -> list[tuple[str, Bits, str, Bits]]:
    """Interpret the table directly: ``(state, inputs, next_state, outputs)`` per cycle."""
    state = reset if reset is not None else table.reset_state
    rows = []
    for bits in inputs:
        bits = tuple(bits)
        nxt, out = table.step(state, bits)
        rows.append((state, bits, nxt, out))
        state = nxt
    return rows


# -- built-in tables -----------------------------------------------------------

def sequence_detector_table(pattern: str = "11011") -> TransitionTable:
    """Overlapping Mealy detector; state k means the last k bits match the pattern's prefix."""
    n = len(pattern)
    states = tuple(f"S{k}" for k in range(n))
    transitions = {}
    for k in range(n):
        for bit in (0, 1):
            seen = pattern[:k] + str(bit)
            hit = seen == pattern
            # longest suffix of what was seen that is a proper prefix of the pattern
            nxt = max(j for j in range(n) if seen.endswith(pattern[:j]))
            transitions[(f"S{k}", (bit,))] = (f"S{nxt}", (int(hit),))
    return TransitionTable(states, ("x",), ("z",), transitions)


def counter_table(width: int = 4) -> TransitionTable:
    size = 1 << width
    states = tuple(f"C{i}" for i in range(size))
    transitions = {(f"C{i}", ()): (f"C{(i + 1) % size}", ()) for i in range(size)}
    return TransitionTable(states, (), (), transitions)


# -- synthesis -----------------------------------------------------------------

@dataclass
class _Function:
    name: str  # e.g. "J2", "K0", "out:z"
    table: tuple[int, ...]
    bdd: Bdd
    ref: str = ""


def _excitation(q: int, q_next: int) -> tuple[int | None, int | None]:
    if q == 0:
        return q_next, None
    return None, 1 - q_next


def _state_var(i: int) -> str:
    return f"Q{i}"


def synthesize_fsm(table: TransitionTable, kind: MachineKind | str = MachineKind.MEALY,
                   config: PhysicsConfig | None = None) -> MachineDescription:
    config = config or PhysicsConfig()
    kind = MachineKind(kind) if isinstance(kind, str) else kind
    table.check_total()
    unreachable = [s for s in table.states if s not in table.reachable()]
    if unreachable:
        warnings.warn(f"unreachable states: {', '.join(unreachable)}", UnreachableStateWarning,
                      stacklevel=2)

    nbits = (len(table.states) - 1).bit_length()
    state_vars = [_state_var(i) for i in reversed(range(nbits))]
    clash = set(state_vars) & set(table.inputs)
    if clash:
        raise NonTotalTable(f"input name {sorted(clash)[0]!r} clashes with a state variable")
    order = state_vars + list(table.inputs)
    nvars = len(order)
    code = {s: i for i, s in enumerate(table.states)}

    def rows():
        for row in range(1 << nvars):
            bits = assignment_bits(row, nvars)
            state_code = 0
            for b in bits[:nbits]:
                state_code = (state_code << 1) | b
            yield state_code, tuple(bits[nbits:])

    specs: list[tuple[str, list[int | None]]] = []
    for i in range(nbits):
        jt: list[int | None] = []
        kt: list[int | None] = []
        for state_code, bits in rows():
            if state_code >= len(table.states):
                jt.append(None)
                kt.append(None)
                continue
            nxt = code[table.step(table.states[state_code], bits)[0]]
            j, k = _excitation((state_code >> i) & 1, (nxt >> i) & 1)
            jt.append(j)
            kt.append(k)
        specs += [(f"J{i}", jt), (f"K{i}", kt)]
    for o, name in enumerate(table.outputs):
        ot: list[int | None] = []
        for state_code, bits in rows():
            if state_code >= len(table.states):
                ot.append(None)
                continue
            state = table.states[state_code]
            value = table.step(state, bits)[1][o]
            if kind is MachineKind.MOORE and any(
                    table.step(state, other)[1][o] != value for other in table.input_space()):
                raise NonTotalTable(f"Moore output {name} depends on the input in state {state}")
            ot.append(value)
        specs.append((f"out:{name}", ot))

    functions = []
    for name, partial in specs:
        full = tuple(resolve_dont_cares(partial))
        functions.append(_Function(name, full, build_bdd(full, order)))

    # wires and constants
    wires = {}
    for v in order:
        single = tuple(truth_table(build_bdd(v, order)))
        inverted = tuple(1 - b for b in single)
        if v in state_vars:
            ff = f"FF{v[1:]}"
            wires[single] = f"q:{ff}"
            wires[inverted] = f"qbar:{ff}"
        else:
            wires.setdefault(single, f"input:{v}")
    optical: dict[tuple[int, ...], list[_Function]] = {}
    for f in functions:
        if f.bdd.is_constant:
            f.ref = str(f.bdd.root)
        elif f.table in wires:
            f.ref = wires[f.table]
        else:
            optical.setdefault(f.table, []).append(f)

    logic, block_port = _build_blocks(list(optical.values()), order, config)

    # detectors on every block output, named by what they drive
    pd_of_block: dict[int, str] = {}
    for k, group in enumerate(optical.values()):
        drives = []
        for f in group:
            if f.name.startswith("out:"):
                drives.append(f"output:{f.name[4:]}")
            else:
                drives.append(f"{f.name[0].lower()}:FF{f.name[1:]}")
        logic, pd_id = attach_photodiode(logic, block_port[k], drives, config)
        pd_of_block[k] = pd_id
        for f in group:
            f.ref = pd_id
    logic = insert_terminators(logic)

    by_name = {f.name: f for f in functions}
    flipflops = []
    for i in range(nbits):
        ff = f"FF{i}"
        flipflops.append(JkFlipFlop(
            ff, by_name[f"J{i}"].ref, by_name[f"K{i}"].ref,
            tuple(l.id for l in logic.lasers if l.driven_by == f"q:{ff}"),
            tuple(l.id for l in logic.lasers if l.driven_by == f"qbar:{ff}")))
    outputs = tuple((name, by_name[f"out:{name}"].ref) for name in table.outputs)
    m = MachineDescription(kind, flipflops, tuple(table.inputs), logic, outputs)
    return validate_machine(m, config)


def _decompose(f: Bdd, table: tuple[int, ...], order: list[str], g_name: str,
               g_table: tuple[int, ...], g_support: tuple[str, ...]) -> Bdd | None:
    """Express ``f`` as a function of signal ``g`` and the variables ``g`` does not see."""
    support = f.support()
    if not set(g_support) <= set(support):
        return None
    rest = [v for v in order if v in support and v not in g_support]
    nvars = len(order)
    sub_order = [g_name] + rest
    sub: list[int | None] = [None] * (1 << len(sub_order))
    for row in range(1 << nvars):
        env = dict(zip(order, assignment_bits(row, nvars)))
        idx = 0
        for b in [g_table[row]] + [env[v] for v in rest]:
            idx = (idx << 1) | b
        if sub[idx] is None:
            sub[idx] = table[row]
        elif sub[idx] != table[row]:
            return None
    return build_bdd(resolve_dont_cares(sub), sub_order)


def _build_blocks(groups: list[list[_Function]], order: list[str],
                  config: PhysicsConfig) -> tuple[OpticalNetlist, dict[int, str]]:
    blocks: list[OpticalNetlist] = []
    block_port: dict[int, str] = {}
    realized: list[tuple[str, tuple[int, ...], tuple[str, ...]]] = []  # name, table, support
    demands: list[tuple[str, str]] = []

    sequence = sorted(range(len(groups)),
                      key=lambda k: (len(groups[k][0].bdd.support()), node_count(groups[k][0].bdd), k))
    placed: dict[int, int] = {}
    for k in sequence:
        f = groups[k][0]
        best, best_g = f.bdd, None
        for g_idx, (g_name, g_table, g_support) in enumerate(realized):
            cand = _decompose(f.bdd, f.table, order, g_name, g_table, g_support)
            if cand is not None and node_count(cand) < node_count(best):
                best, best_g = cand, g_idx
        prefix = f"g{len(blocks)}."
        net = compile_bdd_to_network(best, config, prefix=prefix)
        if best_g is not None:
            g_name = realized[best_g][0]
            demands += [(g_name, r.id) for r in net.resonators if r.pump == EXT + g_name]
        block_port[k] = net.outputs[prefix + OUTPUT]
        placed[k] = len(blocks)
        blocks.append(net)
        realized.append((f"g{placed[k]}", f.table, f.bdd.support()))

    logic = merge_netlists(*blocks) if blocks else OpticalNetlist()

    # one pump laser per state/input variable, shared by every ring it drives
    lasers = []
    rebind = {}
    for v in order:
        if not any(r.pump == EXT + v for r in logic.resonators):
            continue
        if v.startswith("Q") and v[1:].isdigit():
            laser = LaserDiode(f"L{v}", config.pump_wavelength_nm, config.pump_power_dbm,
                               f"q:FF{v[1:]}")
        else:
            laser = LaserDiode(f"L_{v}", config.pump_wavelength_nm, config.pump_power_dbm,
                               f"input:{v}")
        lasers.append(laser)
        rebind[EXT + v] = laser.id
    if lasers:
        logic = replace(logic, lasers=tuple(lasers), resonators=tuple(
            replace(r, pump=rebind.get(r.pump, r.pump)) for r in logic.resonators))
    ports = {f"g{placed[k]}": block_port[k] for k in placed}
    logic = insert_repeaters(logic, [(ports[g], r) for g, r in demands], config)
    return logic, block_port


# -- built-in machines -----------------------------------------------------------

def build_counter(config: PhysicsConfig | None = None, width: int = 4) -> MachineDescription:
    return synthesize_fsm(counter_table(width), MachineKind.MOORE, config)


def build_detector(config: PhysicsConfig | None = None, pattern: str = "11011") -> MachineDescription:
    return synthesize_fsm(sequence_detector_table(pattern), MachineKind.MEALY, config)


EXAMPLES = {
    "counter": build_counter,
    "detector": build_detector,
}
