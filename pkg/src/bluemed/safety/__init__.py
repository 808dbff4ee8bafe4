"""Rule-based post-hoc validation cascade with audit trail."""

from bluemed.safety.terms import (
    DEFAULT_HIERARCHY_MARKERS,
    DEFAULT_LAB_CONFIRMATION_PATTERNS,
    DEFAULT_PROCESS_GAP_INDICATORS,
    DEFAULT_SIDE_EFFECT_PATTERNS,
    DEFAULT_UNCERTAINTY_PHRASES,
    TermPair,
    count_uncertainty,
    extract_term_pair,
    find_phrase_snippets,
)
from bluemed.safety.cascade import (
    DOMAIN_RULE_ORDER,
    FiredRule,
    HeuristicConfig,
    OverrideStep,
    RULE_CONFIDENCE,
    RULE_CONSENSUS,
    RULE_HIERARCHY,
    RULE_LAB_CONFIRMATION,
    RULE_PROCESS_GAP,
    RULE_SIDE_EFFECT,
    RULE_TWO_TERM,
    RULE_UNCERTAINTY,
    SafetyAudit,
    apply_safety,
    load_heuristic_config,
)

__all__ = [
    "DEFAULT_HIERARCHY_MARKERS",
    "DEFAULT_LAB_CONFIRMATION_PATTERNS",
    "DEFAULT_PROCESS_GAP_INDICATORS",
    "DEFAULT_SIDE_EFFECT_PATTERNS",
    "DEFAULT_UNCERTAINTY_PHRASES",
    "DOMAIN_RULE_ORDER",
    "FiredRule",
    "HeuristicConfig",
    "OverrideStep",
    "RULE_CONFIDENCE",
    "RULE_CONSENSUS",
    "RULE_HIERARCHY",
    "RULE_LAB_CONFIRMATION",
    "RULE_PROCESS_GAP",
    "RULE_SIDE_EFFECT",
    "RULE_TWO_TERM",
    "RULE_UNCERTAINTY",
    "SafetyAudit",
    "TermPair",
    "apply_safety",
    "count_uncertainty",
    "extract_term_pair",
    "find_phrase_snippets",
    "load_heuristic_config",
]
