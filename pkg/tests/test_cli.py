import subprocess
import sys

import pytest

from optofsm.cli import EXIT_INPUT, EXIT_LOGIC, EXIT_MARGIN, main
from optofsm.machine import read_trace_csv
from optofsm.netlist import parse_netlist


def test_compile_expression_to_stdout(capsys):
    assert main(["compile", "--expr", "A & B"]) == 0
    out = capsys.readouterr().out
    first, rest = out.split("\n", 1)
    assert first == "# resonators: 2, waveguides: 3, repeaters: 0"
    assert len(parse_netlist(rest).resonators) == 2


def test_compile_table_to_file(tmp_path, capsys):
    path = tmp_path / "xor.net"
    assert main(["compile", "--table", "0110", "--out", str(path)]) == 0
    assert capsys.readouterr().out.strip() == "resonators: 3, waveguides: 5, repeaters: 0"
    net = parse_netlist(path.read_text())
    assert net.pump_lines() == ["A", "B"]


def test_compile_with_order_and_complement(capsys):
    assert main(["compile", "--expr", "a & !b", "--order", "b,a", "--complement"]) == 0
    net = parse_netlist(capsys.readouterr().out.split("\n", 1)[1])
    assert net.pump_lines() == ["b", "a"]
    assert "C0" in net.outputs


def test_constant_function_is_not_an_error(capsys):
    assert main(["compile", "--expr", "a | !a"]) == 0
    captured = capsys.readouterr()
    assert captured.out == ""
    assert "constant" in captured.err


def test_margin_exhausted_exit_code(capsys):
    code = main(["compile", "--expr", "a & b", "--set", "insertion_loss_db=4"])
    assert code == EXIT_MARGIN
    assert "error" in capsys.readouterr().err


@pytest.mark.parametrize("argv", [
    ["compile", "--expr", "a &"],
    ["compile", "--table", "011"],
    ["compile", "--expr", "a", "--set", "warp=9"],
    ["compile", "--expr", "a", "--set", "oops"],
    ["simulate", "missing-file.txt", "--cycles", "2"],
    ["simulate", "--example", "nosuch", "--cycles", "2"],
    ["example", "detector", "simulate", "--bits", "10x1"],
    ["example", "counter", "simulate", "--bits", "101"],
    ["example", "counter", "simulate"],
])
def test_input_errors_exit_2(argv, capsys):
    assert main(argv) == EXIT_INPUT
    assert capsys.readouterr().err.startswith("error:")


def test_example_simulate_detector(capsys):
    assert main(["example", "detector", "simulate", "--bits", "11011011"]) == 0
    trace = read_trace_csv(capsys.readouterr().out)
    assert trace.output_bits() == [0, 0, 0, 0, 1, 0, 0, 1]


def test_counter_cycles_and_reset(capsys):
    assert main(["simulate", "--example", "counter", "--cycles", "3", "--reset", "1110"]) == 0
    trace = read_trace_csv(capsys.readouterr().out)
    assert trace.states() == ["1111", "0000", "0001"]


def test_emit_then_simulate_is_byte_identical(tmp_path, capsys):
    machine = tmp_path / "detector.fsm"
    assert main(["example", "detector", "emit", "--out", str(machine)]) == 0
    direct, from_file = tmp_path / "a.csv", tmp_path / "b.csv"
    bits = "0110110111011011"
    assert main(["example", "detector", "simulate", "--bits", bits, "--out", str(direct)]) == 0
    assert main(["simulate", str(machine), "--bits", bits, "--out", str(from_file)]) == 0
    assert direct.read_bytes() == from_file.read_bytes()


def test_input_file(tmp_path, capsys):
    bits = tmp_path / "bits.txt"
    bits.write_text("1101\n1011\n")
    assert main(["example", "detector", "simulate", "--input-file", str(bits)]) == 0
    assert read_trace_csv(capsys.readouterr().out).output_bits()[4] == 1


def test_indeterminate_exit_code(tmp_path, capsys):
    from test_machine import TOGGLE
    from optofsm import emit_machine, parse_machine
    path = tmp_path / "toggle.fsm"
    # emitted text pins the detector thresholds, so only the source level moves
    path.write_text(emit_machine(parse_machine(TOGGLE)))
    code = main(["simulate", str(path), "--bits", "00,11", "--set", "source_power_dbm=-5"])
    assert code == EXIT_LOGIC
    assert "cycle 1" in capsys.readouterr().err


def test_analyze_example(capsys):
    assert main(["analyze", "--example", "counter"]) == 0
    report = dict(line.split(": ", 1) for line in capsys.readouterr().out.splitlines()
                  if ": " in line and not line.startswith("  "))
    assert float(report["critical_path_ps"]) < 1000
    assert report["flipflops"] == "4"
    assert report["repeaters"] == "1"
    assert report["gates"] == "2 (and: 2)"


def test_analyze_netlist_file(tmp_path, capsys):
    path = tmp_path / "and.net"
    main(["compile", "--expr", "A & B", "--out", str(path)])
    capsys.readouterr()
    assert main(["analyze", str(path)]) == 0
    out = capsys.readouterr().out
    assert "gates: 1 (and: 1)" in out
    assert "endpoint: port:out" in out


def test_config_file(tmp_path, capsys):
    cfg = tmp_path / "physics.cfg"
    cfg.write_text("# heavier rings\ninsertion_loss_db=4\n")
    assert main(["compile", "--expr", "a & b", "--config", str(cfg)]) == EXIT_MARGIN


def test_module_entry_point():
    result = subprocess.run([sys.executable, "-m", "optofsm", "example", "counter", "analyze"],
                            capture_output=True, text=True, check=True)
    assert result.stdout.startswith("critical_path_ps:")
