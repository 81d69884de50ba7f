import random
import warnings

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from optofsm import (MachineKind, PhysicsConfig, TransitionTable, build_counter, build_detector,
                     clock_cycle, critical_path, emit_machine, jk_step, parse_machine,
                     read_trace_csv, run, synthesize_fsm)
from optofsm.errors import (IndeterminateLogic, MissingAssignment, NonTotalTable, ParseError,
                            UnreachableStateWarning, ValidationError)
from optofsm.machine import TRACE_HEADER, bits_msb, gate_inventory, parse_bits_msb
from optofsm.synthesis import counter_table, reference_run, sequence_detector_table


@pytest.mark.parametrize("q,j,k,expected", [
    (0, 0, 0, 0), (1, 0, 0, 1),
    (0, 1, 0, 1), (1, 1, 0, 1),
    (0, 0, 1, 0), (1, 0, 1, 0),
    (0, 1, 1, 1), (1, 1, 1, 0),
])
def test_jk_truth_table(q, j, k, expected):
    assert jk_step(q, j, k) == expected


def test_bits_msb_round_trip():
    assert bits_msb((1, 0, 0)) == "001"
    assert parse_bits_msb("001") == (1, 0, 0)


# -- hand-written machine: FF0 toggles whenever both inputs are high ------------------------

TOGGLE = """\
machine kind=mealy
input x
input y
flipflop FF0 j=PD0 k=PD0 qdrives= qbardrives=
machine_output z src=PD0
source src
laser LX wavelength_nm=532 power_dbm=10 driven_by=input:x
laser LY wavelength_nm=532 power_dbm=10 driven_by=input:y
resonator R0 pump=LX in=R0.in through=R0.through drop=R0.drop
resonator R1 pump=LY in=R1.in through=R1.through drop=R1.drop
waveguide W0 from=src to=R0.in length_um=50
waveguide W1 from=R0.drop to=R1.in length_um=50
waveguide W2 from=R1.drop to=out length_um=50
photodiode PD0 port=out drives=j:FF0,k:FF0,output:z
terminator R0.through
terminator R1.through
"""


def test_hand_written_machine():
    m = parse_machine(TOGGLE)
    assert m.kind is MachineKind.MEALY
    trace = run(m, ["11", "10", "11", "01", "11"])
    assert [e.state_after for e in trace] == ["1", "1", "0", "0", "1"]
    assert trace.output_bits() == [1, 0, 1, 0, 1]
    assert trace[0].pumps == "11"
    assert trace[0].jk_levels == "11"


def test_machine_text_is_canonical_after_one_pass():
    m = parse_machine(TOGGLE)
    text = emit_machine(m)
    assert parse_machine(text) == m
    assert emit_machine(parse_machine(text)) == text


def test_stored_flipflop_state_round_trips():
    m = parse_machine(TOGGLE.replace("qbardrives=\n", "qbardrives= q=1\n", 1))
    assert m.state == (1,)
    assert "q=1" in emit_machine(m)


@pytest.mark.parametrize("old,new", [
    ("machine kind=mealy", "machine kind=moore"),  # output depends on inputs
    ("j=PD0", "j=PD9"),
    ("j=PD0", "j=q:FF7"),
    ("driven_by=input:x", "driven_by=input:w"),
    ("drives=j:FF0,k:FF0,output:z", "drives=k:FF0,output:z"),
    ("qdrives=", "qdrives=LX"),
])
def test_machine_validation(old, new):
    with pytest.raises(ValidationError):
        parse_machine(TOGGLE.replace(old, new, 1))


@pytest.mark.parametrize("text", [
    TOGGLE.replace("machine kind=mealy\n", ""),
    TOGGLE.replace("kind=mealy", "kind=medvedev"),
    TOGGLE + "machine kind=mealy\n",
    TOGGLE.replace("qbardrives=\n", "qbardrives= q=2\n", 1),
    TOGGLE + "gizmo G0\n",
])
def test_machine_parse_errors(text):
    with pytest.raises(ParseError):
        parse_machine(text)


def test_missing_input_is_reported():
    m = parse_machine(TOGGLE)
    with pytest.raises(MissingAssignment):
        clock_cycle(m, {"x": 1})


def test_indeterminate_level_stops_the_clock():
    m = parse_machine(TOGGLE)
    weak = PhysicsConfig(source_power_dbm=-5.0)  # lit path lands at -6.15 dBm
    with pytest.raises(IndeterminateLogic) as info:
        run(m, ["00", "11"], config=weak)
    assert info.value.cycle == 1
    assert info.value.photodiode == "PD0"
    assert "j:FF0" in info.value.pins


def test_gate_inventory_of_hand_machine():
    (gate,) = gate_inventory(parse_machine(TOGGLE).logic)
    assert gate.kind == "and"
    assert gate.pumps == ("LX", "LY")


# -- synthesis ------------------------------------------------------------------------------

def test_counter_wraps_from_any_state():
    m = build_counter()
    for start in range(16):
        trace = run(m, [()] * 16, reset_state=parse_bits_msb(format(start, "04b")))
        states = [int(s, 2) for s in trace.states()]
        assert states == [(start + t + 1) % 16 for t in range(16)]


def test_counter_wiring():
    m = build_counter()
    pins = {ff.id: (ff.j, ff.k) for ff in m.flipflops}
    assert pins["FF0"] == ("1", "1")
    assert pins["FF1"] == ("q:FF0", "q:FF0")
    assert m.kind is MachineKind.MOORE
    ((pd, laser),) = m.logic.repeaters
    assert laser == "LR0" and pd == pins["FF2"][0]


def test_detector_overlapping_matches():
    trace = run(build_detector(), [int(c) for c in "11011011"])
    assert trace.output_bits() == [0, 0, 0, 0, 1, 0, 0, 1]


def test_detector_table_shape():
    table = sequence_detector_table("11011")
    table.check_total()
    assert len(table.states) == 5
    assert table.step("S4", (1,)) == ("S2", (1,))
    assert table.reachable() == list(table.states)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.integers(0, 1), max_size=40))
def test_detector_matches_reference(bits):
    table = sequence_detector_table()
    ref = reference_run(table, [(b,) for b in bits])
    trace = run(build_detector(), bits)
    code = {s: format(i, "03b") for i, s in enumerate(table.states)}
    assert [e.state_after for e in trace] == [code[r[2]] for r in ref]
    assert trace.output_bits() == [r[3][0] for r in ref]


@pytest.mark.parametrize("pattern", ["101", "0110", "111"])
def test_other_detectors(pattern):
    table = sequence_detector_table(pattern)
    m = synthesize_fsm(table, MachineKind.MEALY)
    rng = random.Random(pattern)
    bits = [rng.randint(0, 1) for _ in range(300)]
    text = "".join(map(str, bits))
    expected = [int(text[:t + 1].endswith(pattern)) for t in range(len(bits))]
    assert run(m, bits).output_bits() == expected


def test_single_state_machine_needs_no_flipflops():
    table = TransitionTable(("S",), ("x",), ("z",),
                            {("S", (0,)): ("S", (0,)), ("S", (1,)): ("S", (1,))})
    m = synthesize_fsm(table)
    assert m.flipflops == []
    assert m.outputs == (("z", "input:x"),)
    assert run(m, [1, 0, 1]).output_bits() == [1, 0, 1]
    assert critical_path(m).delay_ps == 0.0


def test_non_total_table():
    table = TransitionTable(("A", "B"), ("x",), (), {("A", (0,)): ("B", ()),
                                                     ("A", (1,)): ("A", ()),
                                                     ("B", (0,)): ("A", ())})
    with pytest.raises(NonTotalTable):
        synthesize_fsm(table)


def test_moore_output_must_not_depend_on_input():
    with pytest.raises(NonTotalTable):
        synthesize_fsm(sequence_detector_table(), MachineKind.MOORE)


def test_unreachable_state_warns():
    table = TransitionTable(("A", "B", "Z"), (), (), {("A", ()): ("B", ()),
                                                      ("B", ()): ("A", ()),
                                                      ("Z", ()): ("A", ())})
    with pytest.warns(UnreachableStateWarning):
        m = synthesize_fsm(table, MachineKind.MOORE)
    assert [s for s in run(m, [()] * 4).states()] == ["01", "00", "01", "00"]


def test_synthesis_is_deterministic():
    assert emit_machine(build_detector()) == emit_machine(build_detector())
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        build_counter()


@pytest.mark.parametrize("width", [1, 2, 3])
def test_smaller_counters(width):
    m = synthesize_fsm(counter_table(width), MachineKind.MOORE)
    size = 1 << width
    states = [int(s, 2) for s in run(m, [()] * (2 * size)).states()]
    assert states == [(t + 1) % size for t in range(2 * size)]


# -- traces ---------------------------------------------------------------------------------

def test_trace_csv_layout():
    trace = run(build_counter(), [()] * 3)
    lines = trace.to_csv().splitlines()
    assert lines[0] == ",".join(TRACE_HEADER)
    cycle, before, inputs, pumps, jk, outs, after, settle_ps, margin = lines[1].split(",")
    assert (cycle, before, after) == ("0", "0000", "0001")
    assert jk.split() == ["00", "00", "00", "11"]
    assert float(settle_ps) == pytest.approx(critical_path(build_counter()).delay_ps, abs=1e-3)


def test_trace_reader_rejects_garbage():
    with pytest.raises(ParseError):
        read_trace_csv("a,b\n1,2\n")
    good = run(build_counter(), [()] * 2).to_csv()
    with pytest.raises(ParseError):
        read_trace_csv(good + "1,2\n")


def test_run_rejects_wrong_input_width():
    with pytest.raises(ValueError):
        run(build_detector(), ["11"])
