"""Complex event processing: rule DSL and windowed evaluation engine."""

from .engine import (
    DegenerateSlopeError,
    EmptyWindowError,
    Engine,
    Event,
    Firing,
    OutOfOrderError,
    slope,
    window_aggregate,
)
from .rules import (
    Absent,
    Aggregate,
    And,
    CepRule,
    Not,
    Or,
    RuleSemanticError,
    RuleSyntaxError,
    Seq,
    Threshold,
    Trend,
    WindowSpec,
    parse_rule,
    parse_ruleset,
    rule_to_text,
)

__all__ = [
    "Absent", "Aggregate", "And", "CepRule", "DegenerateSlopeError",
    "EmptyWindowError", "Engine", "Event", "Firing", "Not", "Or",
    "OutOfOrderError", "RuleSemanticError", "RuleSyntaxError", "Seq",
    "Threshold", "Trend", "WindowSpec", "parse_rule", "parse_ruleset",
    "rule_to_text", "slope", "window_aggregate",
]
