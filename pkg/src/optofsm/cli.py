"""Command-line front end.

Exit codes: 0 success, 2 bad input or validation failure, 3 margin exhausted
during compilation, 4 indeterminate logic level during simulation.
"""

from __future__ import annotations

import argparse
import math
import sys
from pathlib import Path

from .bdd import build_bdd, expr_variables, parse_expr
from .compiler import compile_bdd_to_network, summary
from .errors import (ConstantFunction, IndeterminateLogic, MalformedSpec, MarginExhausted,
                     OptoFsmError, ParseError, ValidationError)
from .machine import (MachineDescription, critical_path, emit_machine, gate_inventory,
                      is_machine_text, parse_bits_msb, parse_machine, run)
from .netlist import emit_netlist, parse_netlist
from .photonics import PhysicsConfig
from .synthesis import EXAMPLES

EXIT_INPUT = 2
EXIT_MARGIN = 3
EXIT_LOGIC = 4


class UsageError(OptoFsmError):
    pass


def _config(args) -> PhysicsConfig:
    config = PhysicsConfig()
    if getattr(args, "config", None):
        config = PhysicsConfig.from_text(Path(args.config).read_text())
    overrides = {}
    for item in args.set or ():
        key, sep, value = item.partition("=")
        if not sep:
            raise UsageError(f"--set expects key=value, got {item!r}")
        overrides[key.strip()] = value.strip()
    return config.with_overrides(overrides) if overrides else config


def _write(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _default_names(n: int) -> list[str]:
    return [chr(ord("A") + i) if i < 26 else f"X{i}" for i in range(n)]


def cmd_compile(args) -> int:
    config = _config(args)
    if args.table is not None:
        table = args.table.strip()
        n = max(len(table).bit_length() - 1, 0)
        order = args.order.split(",") if args.order else _default_names(n)
        spec = table
    else:
        spec = parse_expr(args.expr)
        order = args.order.split(",") if args.order else expr_variables(spec)
    bdd = build_bdd(spec, order)
    try:
        netlist = compile_bdd_to_network(bdd, config, expose_complement=args.complement)
    except ConstantFunction as exc:
        print(f"constant function {exc.value}: wire it directly, no netlist written",
              file=sys.stderr)
        return 0
    if args.out:
        Path(args.out).write_text(emit_netlist(netlist))
        print(summary(netlist))
    else:
        sys.stdout.write(f"# {summary(netlist)}\n" + emit_netlist(netlist))
    return 0


def _load_machine(args, config) -> MachineDescription:
    if getattr(args, "example", None):
        return _example(args.example, config)
    if not args.file:
        raise UsageError("give a machine file or --example")
    return parse_machine(Path(args.file).read_text(), config)


def _example(name: str, config: PhysicsConfig) -> MachineDescription:
    try:
        return EXAMPLES[name](config)
    except KeyError:
        raise UsageError(f"unknown example {name!r}; choose from {', '.join(EXAMPLES)}") from None


def _input_stream(m: MachineDescription, args) -> list[tuple[int, ...]]:
    bits = args.bits
    if getattr(args, "input_file", None):
        bits = "".join(Path(args.input_file).read_text().split())
    if bits is None:
        if args.cycles is None:
            raise UsageError("give --bits, --input-file or --cycles")
        return [(0,) * len(m.inputs)] * args.cycles
    width = len(m.inputs)
    if width == 0:
        raise UsageError("machine has no inputs; use --cycles")
    groups = bits.split(",") if "," in bits else ([bits] if width > 1 else list(bits))
    stream = []
    for g in groups:
        if len(g) != width or set(g) - {"0", "1"}:
            raise UsageError(f"input group {g!r} is not {width} bit(s)")
        stream.append(tuple(int(c) for c in g))
    if args.cycles is not None:
        stream = stream[:args.cycles]
    return stream


def _simulate(m: MachineDescription, args, config) -> int:
    stream = _input_stream(m, args)
    if getattr(args, "no_reset", False):
        reset = m.state
    elif getattr(args, "reset", None):
        reset = parse_bits_msb(args.reset)
    else:
        reset = None
    trace = run(m, stream, reset, config)
    _write(trace.to_csv(), args.out)
    return 0


def cmd_simulate(args) -> int:
    config = _config(args)
    return _simulate(_load_machine(args, config), args, config)


def _fmt_db(x: float) -> str:
    return "inf" if math.isinf(x) else f"{x:.3f}"


def analysis_report(target, config: PhysicsConfig) -> str:
    cp = critical_path(target, config)
    net = target.logic if isinstance(target, MachineDescription) else target
    gates = gate_inventory(net) if net.sources else []
    kinds: dict[str, int] = {}
    for g in gates:
        kinds[g.kind] = kinds.get(g.kind, 0) + 1
    lines = [
        f"critical_path_ps: {cp.delay_ps:.3f}",
        f"clock_period_ps: {2 * cp.delay_ps:.3f}",
        f"worst_margin_db: {_fmt_db(cp.min_margin_db)}",
        f"repeaters: {len(net.repeaters)}",
        f"resonators: {len(net.resonators)}",
        f"waveguides: {len(net.waveguides)}",
    ]
    if isinstance(target, MachineDescription):
        lines.append(f"flipflops: {len(target.flipflops)}")
    lines.append(f"gates: {len(gates)}" +
                 (f" ({', '.join(f'{k}: {v}' for k, v in sorted(kinds.items()))})" if kinds else ""))
    lines.append(f"endpoint: {cp.endpoint or '-'}")
    lines.append("path:")
    lines.extend(f"  {s.kind} {s.id} {s.delay_ps:.3f}" for s in cp.path)
    return "\n".join(lines) + "\n"


def cmd_analyze(args) -> int:
    config = _config(args)
    if args.example:
        target = _example(args.example, config)
    else:
        if not args.file:
            raise UsageError("give a machine or netlist file, or --example")
        text = Path(args.file).read_text()
        target = parse_machine(text, config) if is_machine_text(text) else \
            parse_netlist(text, config)
    _write(analysis_report(target, config), args.out)
    return 0


def cmd_example(args) -> int:
    config = _config(args)
    m = _example(args.name, config)
    if args.action == "emit":
        _write(emit_machine(m), args.out)
        return 0
    if args.action == "simulate":
        return _simulate(m, args, config)
    _write(analysis_report(m, config), args.out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--set", action="append", metavar="KEY=VALUE",
                        help="override a physics constant (repeatable)")
    common.add_argument("--config", help="key=value physics configuration file")
    common.add_argument("--out", help="write results here instead of stdout")

    sim = argparse.ArgumentParser(add_help=False)
    sim.add_argument("--bits", help="input bits, one character per cycle (comma-separate "
                                    "groups for multi-input machines)")
    sim.add_argument("--input-file", help="file holding the input bits")
    sim.add_argument("--cycles", type=int, help="number of cycles (inputs held at 0)")
    sim.add_argument("--reset", help="reset state, highest flip-flop first (default all zero)")
    sim.add_argument("--no-reset", action="store_true",
                     help="start from the flip-flop values stored in the file")

    parser = argparse.ArgumentParser(prog="optofsm",
                                     description="Compile and simulate optoelectronic state machines.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("compile", parents=[common], help="compile a Boolean function to a netlist")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--expr", help="expression over identifiers with & | ^ ! ( )")
    src.add_argument("--table", help="truth table bits, all-zero row first")
    p.add_argument("--order", help="comma-separated variable order")
    p.add_argument("--complement", action="store_true", help="also expose the ZERO paths as C0")
    p.set_defaults(func=cmd_compile)

    p = sub.add_parser("simulate", parents=[common, sim], help="clock a machine and print its trace")
    p.add_argument("file", nargs="?")
    p.add_argument("--example", help="use a built-in machine")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("analyze", parents=[common], help="timing and margin report")
    p.add_argument("file", nargs="?")
    p.add_argument("--example", help="use a built-in machine")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("example", parents=[common, sim], help="built-in counter and detector")
    p.add_argument("name")
    p.add_argument("action", choices=("emit", "simulate", "analyze"))
    p.set_defaults(func=cmd_example)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except MarginExhausted as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_MARGIN
    except IndeterminateLogic as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_LOGIC
    except (ParseError, ValidationError, MalformedSpec, UsageError, OptoFsmError,
            OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
