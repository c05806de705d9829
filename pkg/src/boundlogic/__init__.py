"""Weighted real-valued logic with bidirectional bounds propagation and learning."""

from .formula import KnowledgeBase, ParseError, format_formula, format_kb, parse_formula, parse_kb
from .graph import NeuronGraph, TruthState, aggregate, classify, compile
from .inference import ConvergenceReport, InferenceConfig, infer
from .semantics import Bounds, ConnectiveParams

__all__ = [
    "Bounds", "ConnectiveParams", "ConvergenceReport", "InferenceConfig", "KnowledgeBase", "NeuronGraph",
    "ParseError", "TruthState", "aggregate", "classify", "compile", "format_formula", "format_kb", "infer",
    "parse_formula", "parse_kb",
]
