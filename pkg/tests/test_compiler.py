import itertools

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from optofsm import (GateKind, PhysicsConfig, build_bdd, build_gate, compile_bdd_to_network,
                     emit_netlist, evaluate, insert_repeaters, insert_terminators, parse_netlist)
from optofsm.bdd import assignment_bits
from optofsm.compiler import (COMPLEMENT, OUTPUT, attach_photodiode, detect_outputs,
                              output_levels, summary, worst_margin)
from optofsm.errors import (CombinationalCycle, ConstantFunction, MarginExhausted, ParseError,
                            PortNotFound, ResonatorNotFound, ValidationError)
from optofsm.netlist import merge_netlists, topological_order, validate
from optofsm.photonics import Logic
from optofsm.settle import settle, timing_report


def test_inverter_layout():
    net = build_gate(GateKind.INVERTER)
    (r,) = net.resonators
    assert r.pump == "ext:A"
    assert [(w.from_port, w.to_port) for w in net.waveguides] == [("src", "R0.in"),
                                                                   ("R0.through", "out")]
    assert net.terminators == ("R0.drop",)
    assert net.outputs == {OUTPUT: "out"}


def test_and_levels():
    net = build_gate("and2")
    levels = output_levels(net, {"A": 1, "B": 1})
    # source -> W -> R0 drop -> W -> R1 drop -> W -> out
    assert levels[OUTPUT] == pytest.approx(-3 * 0.05 - 2 * 0.5)
    for a, b in ((0, 1), (1, 0)):
        leak = output_levels(net, {"A": a, "B": b})[OUTPUT]
        assert leak == pytest.approx(-3 * 0.05 - 2 * 0.5 - 10)
    assert output_levels(net, {"A": 0, "B": 0})[OUTPUT] == pytest.approx(-3 * 0.05 - 2 * 0.5 - 20)


def test_xor_ports():
    net = build_gate(GateKind.XOR2)
    assert set(net.outputs) == {COMPLEMENT, OUTPUT}
    for a, b in itertools.product((0, 1), repeat=2):
        det = detect_outputs(net, {"A": a, "B": b})
        assert det[COMPLEMENT].logic is Logic(a ^ b)
        assert det[OUTPUT].logic is Logic(a & b)
    assert "R1.through" in net.terminators


def test_constant_function_rejected():
    with pytest.raises(ConstantFunction) as info:
        compile_bdd_to_network(build_bdd("a | !a", "a"))
    assert info.value.value == 1


def test_margin_exhausted_under_heavy_loss():
    config = PhysicsConfig(insertion_loss_db=4.0)
    with pytest.raises(MarginExhausted):
        compile_bdd_to_network(build_bdd("a & b", "ab"), config)


def test_wide_or_runs_out_of_margin():
    # three merged ONE edges pay the combiner loss on the single lit path
    with pytest.raises(MarginExhausted):
        compile_bdd_to_network(build_bdd("a | b | c", "abc"))


def test_complement_output():
    net = compile_bdd_to_network(build_bdd("a & b", "ab"), expose_complement=True)
    assert set(net.outputs) == {OUTPUT, COMPLEMENT}
    for a, b in itertools.product((0, 1), repeat=2):
        det = detect_outputs(net, {"a": a, "b": b})
        assert det[OUTPUT].logic is Logic(a & b)
        assert det[COMPLEMENT].logic is Logic(1 - (a & b))


compilable = st.integers(1, 4).flatmap(
    lambda n: st.lists(st.integers(0, 1), min_size=1 << n, max_size=1 << n))


@settings(max_examples=150, deadline=None)
@given(compilable)
def test_compiled_network_matches_bdd(table):
    order = "abcd"[:len(table).bit_length() - 1]
    bdd = build_bdd(table, order)
    if bdd.is_constant:
        return
    try:
        net = compile_bdd_to_network(bdd)
    except MarginExhausted:
        return
    validate(net)
    assert len(net.resonators) == len(bdd)
    for row in range(len(table)):
        env = dict(zip(order, assignment_bits(row, len(order))))
        det = detect_outputs(net, env)[OUTPUT]
        assert det.logic is Logic(evaluate(bdd, env))
        assert det.margin_db > 0
    assert parse_netlist(emit_netlist(net)) == net


def test_every_dangling_port_terminated():
    net = compile_bdd_to_network(build_bdd("a & !b", "ab"))
    assert not [p for p in net.dangling_ports() if p not in net.terminators]
    assert insert_terminators(net) is net


def _and_chain(k):
    blocks = [compile_bdd_to_network(build_bdd(f"x{i} & y{i}", [f"x{i}", f"y{i}"]),
                                     prefix=f"g{i}.") for i in range(k)]
    net = merge_netlists(*blocks)
    demands = [(f"g{i}.{OUTPUT}", f"g{i + 1}.R0") for i in range(k - 1)]
    return insert_repeaters(net, demands)


@pytest.mark.parametrize("k", [1, 2, 3, 4])
def test_chain_of_k_gates_needs_k_minus_one_repeaters(k):
    net = _and_chain(k)
    assert len(net.repeaters) == k - 1
    validate(net)
    lines = net.pump_lines()
    assert lines == ["x0", "y0"] + [f"y{i}" for i in range(1, k)]
    last = f"g{k - 1}.{OUTPUT}"
    for bits in itertools.product((0, 1), repeat=len(lines)):
        det = detect_outputs(net, dict(zip(lines, bits)))
        assert det[last].logic is Logic(int(all(bits)))


def test_repeater_reuses_photodiode_and_fans_out():
    net = _and_chain(2)
    net, pd_id = attach_photodiode(net, "g1.out", ["output:z"])
    extra = compile_bdd_to_network(build_bdd("u & v", "uv"), prefix="h.")
    net = merge_netlists(net, extra)
    net = insert_repeaters(net, [("g1.out", "h.R0"), ("g1.out", "h.R1")])
    validate(net)
    pd = net.photodiode_by_id[pd_id]
    assert len(net.repeaters) == 2
    assert pd.drives == ("output:z", "laser:LR1")
    assert {r.pump for r in net.resonators if r.id.startswith("h.")} == {"LR1"}


def test_repeater_errors():
    net = build_gate("and2")
    with pytest.raises(PortNotFound):
        insert_repeaters(net, [("nowhere", "R0")])
    with pytest.raises(ResonatorNotFound):
        insert_repeaters(net, [("out", "R9")])


def test_repeater_loop_is_a_combinational_cycle():
    net = build_gate("and2")
    with pytest.raises(CombinationalCycle):
        insert_repeaters(net, [(OUTPUT, "R0")])


def test_repeater_timing_includes_laser_and_detector():
    net = _and_chain(2)
    report = timing_report(net)
    kinds = [s.kind for s in report.path]
    assert kinds.count("laser") == 1 and "photodiode" in kinds
    assert report.endpoint == "port:g1.out"
    assert report.delay_ps == pytest.approx(sum(s.delay_ps for s in report.path))


def test_summary_line():
    assert summary(build_gate("and2")) == "resonators: 2, waveguides: 3, repeaters: 0"


def test_worst_margin_positive_for_library():
    for kind in GateKind:
        assert worst_margin(build_gate(kind)) > 0


# -- netlist text and validation ------------------------------------------------------

AND_TEXT = emit_netlist(build_gate("and2"))


def test_emit_is_stable():
    assert emit_netlist(parse_netlist(AND_TEXT)) == AND_TEXT
    assert AND_TEXT.splitlines()[0] == "source src"


def test_comments_and_blank_lines_ignored():
    text = "# header\n\n" + AND_TEXT.replace("\n", "  # note\n", 1)
    assert parse_netlist(text) == parse_netlist(AND_TEXT)


@pytest.mark.parametrize("text,line", [
    ("bogus X\n", 1),
    ("source src\nresonator R0 pump=ext:A in=a\n", 2),
    ("source src\nwaveguide W0 from=src to=x length_um=abc\n", 2),
    ("source src\nwaveguide W0 from=src to=x length_um=-1\n", 2),
    ("source src\noutput f(x)\n", 2),
    ("source src\nlaser L wavelength_nm=532 driven_by=q:F color=red\n", 2),
])
def test_parse_errors_carry_line(text, line):
    with pytest.raises(ParseError) as info:
        parse_netlist(text)
    assert info.value.line == line


def _edit(old, new):
    assert old in AND_TEXT
    return AND_TEXT.replace(old, new)


@pytest.mark.parametrize("text", [
    _edit("terminator R0.through\n", ""),
    _edit("source src\n", ""),
    _edit("pump=ext:B", "pump=LX"),
    _edit("output f(x) out", "output f(x) nowhere"),
    _edit("from=src to=R0.in", "from=src to=R1.in"),
    AND_TEXT + "terminator out\nterminator out\n",
])
def test_validation_errors(text):
    with pytest.raises(ValidationError):
        parse_netlist(text)


def test_wrong_pump_wavelength():
    text = AND_TEXT.replace("pump=ext:A", "pump=L0") + \
        "laser L0 wavelength_nm=1550 power_dbm=10 driven_by=input:a\n"
    with pytest.raises(ValidationError):
        parse_netlist(text)


def test_source_port_requires_exactly_one():
    net = build_gate("and2")
    assert net.source_port == "src"
    two = merge_netlists(net, compile_bdd_to_network(build_bdd("a", "a"), prefix="h."))
    with pytest.raises(ValidationError):
        two.source_port


def test_optical_loop_detected():
    text = ("source src\n"
            "resonator R0 pump=ext:A in=R0.in through=R0.through drop=R0.drop\n"
            "waveguide W0 from=src to=R0.in length_um=50\n"
            "waveguide W1 from=R0.through to=R0.in length_um=50\n"
            "terminator R0.drop\n")
    with pytest.raises(CombinationalCycle):
        parse_netlist(text)
    net = parse_netlist(text, check=False)
    with pytest.raises(CombinationalCycle):
        topological_order(net)


def test_settle_reports_pumps_and_missing_lines():
    net = build_gate("and2")
    result = settle(net, {"ext:A": 1, "ext:B": 0})
    assert result.pumps == {"R0": 1, "R1": 0}
    with pytest.raises(KeyError):
        settle(net, {"ext:A": 1})
