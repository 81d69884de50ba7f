"""Compiler and simulator for optoelectronic finite state machines.

Boolean next-state and output logic is built as reduced ordered BDDs, laid
out as ring-resonator switch networks, and simulated together with JK
flip-flops, pump lasers and photodiodes under a dB-level power model.
"""

from .bdd import Bdd, BddVariable, build_bdd, evaluate, node_count, parse_expr
from .compiler import (GateKind, build_gate, compile_bdd_to_network, insert_repeaters,
                       insert_terminators)
from .machine import (MachineDescription, MachineKind, Trace, clock_cycle, critical_path,
                      emit_machine, jk_step, parse_machine, read_trace_csv, run)
from .netlist import OpticalNetlist, emit_netlist, parse_netlist
from .photonics import (DARK, PhysicsConfig, element_delay, photodiode_detect, resonator_route,
                        responsivity, waveguide_attenuate)
from .synthesis import (TransitionTable, build_counter, build_detector, counter_table,
                        sequence_detector_table, synthesize_fsm)

__version__ = "0.1.0"
