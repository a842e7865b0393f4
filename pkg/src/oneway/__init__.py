"""Compile quantum circuits into one-way measurement patterns and simulate them."""

from .circuit_ir import LogicalCircuit, expand_macros, format_circuit, parse_circuit
from .compiler import CompiledProgram, compile_circuit, depth_report
from .pattern_layout import MeasurementPattern, stitch
from .runtime import RunResult, full_run

__all__ = [
    "LogicalCircuit",
    "parse_circuit",
    "format_circuit",
    "expand_macros",
    "MeasurementPattern",
    "stitch",
    "CompiledProgram",
    "compile_circuit",
    "depth_report",
    "RunResult",
    "full_run",
]

__version__ = "0.1.0"
