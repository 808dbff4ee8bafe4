"""Fixed-order post-hoc validation cascade over the judge's verdict.

The cascade can only relax INCORRECT to CORRECT, with one exception: when
both experts independently flagged the note INCORRECT and each supplied a
valid term pair, their consensus forces the final label to INCORRECT
regardless of the judge and of every later rule.

Rule evaluation for an INCORRECT label with no term pair from either
expert: the five domain heuristics are consulted in their fixed order and
the first match takes the override attribution; when none matches, the
generic two-term rule performs the same INCORRECT-to-CORRECT override.
Either way a pairless INCORRECT never survives.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import TYPE_CHECKING, Sequence

from bluemed.common import Label
from bluemed.errors import ConfigError
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

if TYPE_CHECKING:
    from bluemed.debate.arguments import ExpertArgument
    from bluemed.debate.judge import JudgeVerdict

RULE_TWO_TERM = "two_term_rule"
RULE_CONSENSUS = "consensus_override"
RULE_LAB_CONFIRMATION = "lab_confirmation"
RULE_PROCESS_GAP = "process_gap"
RULE_SIDE_EFFECT = "side_effect"
RULE_HIERARCHY = "hierarchical_variant"
RULE_UNCERTAINTY = "aggregate_uncertainty"
RULE_CONFIDENCE = "confidence_filter"

DOMAIN_RULE_ORDER = (
    RULE_LAB_CONFIRMATION,
    RULE_PROCESS_GAP,
    RULE_SIDE_EFFECT,
    RULE_HIERARCHY,
    RULE_UNCERTAINTY,
)

DEFAULT_CONFIG_VERSION = "defaults-v1"


@dataclass(frozen=True)
class HeuristicConfig:
    uncertainty_lexicon: tuple[str, ...] = DEFAULT_UNCERTAINTY_PHRASES
    process_gap_indicators: tuple[str, ...] = DEFAULT_PROCESS_GAP_INDICATORS
    lab_confirmation_patterns: tuple[str, ...] = DEFAULT_LAB_CONFIRMATION_PATTERNS
    side_effect_patterns: tuple[str, ...] = DEFAULT_SIDE_EFFECT_PATTERNS
    hierarchy_markers: tuple[str, ...] = DEFAULT_HIERARCHY_MARKERS
    min_process_gap_indicators: int = 2
    uncertainty_threshold: int = 3
    version: str = DEFAULT_CONFIG_VERSION

    def __post_init__(self) -> None:
        for name in (
            "uncertainty_lexicon",
            "process_gap_indicators",
            "lab_confirmation_patterns",
            "side_effect_patterns",
            "hierarchy_markers",
        ):
            phrases = getattr(self, name)
            if not phrases:
                raise ConfigError(f"{name} must be non-empty")
            if any(not p.strip() for p in phrases):
                raise ConfigError(f"{name} contains a blank phrase")
        if self.min_process_gap_indicators < 1:
            raise ConfigError("min_process_gap_indicators must be >= 1")
        if self.uncertainty_threshold < 1:
            raise ConfigError("uncertainty_threshold must be >= 1")


_SECTION_FIELDS = {
    "uncertainty": "uncertainty_lexicon",
    "process_gap": "process_gap_indicators",
    "lab_confirmation": "lab_confirmation_patterns",
    "side_effect": "side_effect_patterns",
    "hierarchy": "hierarchy_markers",
}
_THRESHOLD_FIELDS = ("min_process_gap_indicators", "uncertainty_threshold")


def load_heuristic_config(path: str | Path) -> HeuristicConfig:
    """Parse a line-delimited lexicon file, overriding defaults per section.

    Format: an optional leading ``version: <tag>`` line, then ``[section]``
    headers each followed by one phrase per line. ``[thresholds]`` takes
    ``name = integer`` lines. ``#`` starts a comment.
    """
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"heuristic config not found: {path}")
    overrides: dict[str, object] = {"version": path.stem}
    lists: dict[str, list[str]] = {}
    section: str | None = None
    for lineno, raw_line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        line = raw_line.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip().lower()
            if section not in _SECTION_FIELDS and section != "thresholds":
                raise ConfigError(f"{path}:{lineno}: unknown section [{section}]")
            if section in _SECTION_FIELDS:
                lists.setdefault(section, [])
            continue
        if section is None:
            if line.lower().startswith("version:"):
                overrides["version"] = line.split(":", 1)[1].strip()
                continue
            raise ConfigError(f"{path}:{lineno}: content before any [section] header")
        if section == "thresholds":
            key, sep, value = (part.strip() for part in line.replace(":", "=", 1).partition("="))
            if not sep or key not in _THRESHOLD_FIELDS:
                raise ConfigError(f"{path}:{lineno}: unknown threshold line {line!r}")
            try:
                overrides[key] = int(value)
            except ValueError as exc:
                raise ConfigError(f"{path}:{lineno}: threshold must be an integer") from exc
            continue
        lists[section].append(line)
    for section_name, phrases in lists.items():
        overrides[_SECTION_FIELDS[section_name]] = tuple(phrases)
    return HeuristicConfig(**overrides)  # type: ignore[arg-type]


@dataclass(frozen=True)
class FiredRule:
    rule: str
    evidence: tuple[str, ...]

    def to_record(self) -> dict:
        return {"rule": self.rule, "evidence": list(self.evidence)}


@dataclass(frozen=True)
class OverrideStep:
    rule: str
    from_label: Label
    to_label: Label

    def to_record(self) -> dict:
        return {"rule": self.rule, "from": self.from_label.value, "to": self.to_label.value}


@dataclass(frozen=True)
class SafetyAudit:
    input_label: Label
    final_label: Label
    fired_rules: tuple[FiredRule, ...] = ()
    override_chain: tuple[OverrideStep, ...] = ()
    config_version: str = DEFAULT_CONFIG_VERSION

    def replay(self) -> Label:
        """Re-derive the final label from the chain; audits must round-trip."""
        label = self.input_label
        for step in self.override_chain:
            if step.from_label is not label:
                raise ValueError(
                    f"override chain broken at {step.rule}: expected {label.value}, "
                    f"recorded {step.from_label.value}"
                )
            label = step.to_label
        return label

    def __post_init__(self) -> None:
        if self.replay() is not self.final_label:
            raise ValueError("final_label does not match override chain replay")

    def to_record(self) -> dict:
        return {
            "input_label": self.input_label.value,
            "final_label": self.final_label.value,
            "fired_rules": [f.to_record() for f in self.fired_rules],
            "override_chain": [s.to_record() for s in self.override_chain],
            "config_version": self.config_version,
        }


def _prefixed(expert: str, snippets: Sequence[str]) -> list[str]:
    return [f"{expert}: {s}" for s in snippets]


def _match_domain_rule(
    note: str,
    arg_a: "ExpertArgument",
    arg_b: "ExpertArgument",
    config: HeuristicConfig,
) -> FiredRule | None:
    """First matching domain heuristic, in the fixed rule order.

    Lab confirmation scans the NOTE; the other four scan the experts'
    latest argument texts.
    """
    note_hits = find_phrase_snippets(note, config.lab_confirmation_patterns)
    if note_hits:
        return FiredRule(RULE_LAB_CONFIRMATION, tuple(_prefixed("note", note_hits)))

    gap_a = find_phrase_snippets(arg_a.raw_text, config.process_gap_indicators)
    gap_b = find_phrase_snippets(arg_b.raw_text, config.process_gap_indicators)
    if len(gap_a) + len(gap_b) >= config.min_process_gap_indicators:
        return FiredRule(RULE_PROCESS_GAP, tuple(_prefixed("A", gap_a) + _prefixed("B", gap_b)))

    side_a = find_phrase_snippets(arg_a.raw_text, config.side_effect_patterns)
    side_b = find_phrase_snippets(arg_b.raw_text, config.side_effect_patterns)
    if side_a or side_b:
        return FiredRule(RULE_SIDE_EFFECT, tuple(_prefixed("A", side_a) + _prefixed("B", side_b)))

    hier_a = find_phrase_snippets(arg_a.raw_text, config.hierarchy_markers)
    hier_b = find_phrase_snippets(arg_b.raw_text, config.hierarchy_markers)
    if hier_a or hier_b:
        return FiredRule(RULE_HIERARCHY, tuple(_prefixed("A", hier_a) + _prefixed("B", hier_b)))

    count_a = count_uncertainty(arg_a.raw_text, config.uncertainty_lexicon)
    count_b = count_uncertainty(arg_b.raw_text, config.uncertainty_lexicon)
    if count_a + count_b >= config.uncertainty_threshold:
        return FiredRule(
            RULE_UNCERTAINTY,
            (
                f"A uncertainty count {count_a}",
                f"B uncertainty count {count_b}",
                f"total {count_a + count_b} >= threshold {config.uncertainty_threshold}",
            ),
        )
    return None


def apply_safety(
    verdict: "JudgeVerdict",
    arg_a: "ExpertArgument",
    arg_b: "ExpertArgument",
    note: str,
    config: HeuristicConfig | None = None,
) -> tuple[Label, SafetyAudit]:
    """Run the cascade over the judge's provisional answer.

    Total function: every input yields a final label plus an audit whose
    override chain replays input to final.
    """
    config = config or HeuristicConfig()
    pair_a: TermPair | None = extract_term_pair(arg_a)
    pair_b: TermPair | None = extract_term_pair(arg_b)

    fired: list[FiredRule] = []
    chain: list[OverrideStep] = []
    current = verdict.answer

    both_incorrect = arg_a.label is Label.INCORRECT and arg_b.label is Label.INCORRECT
    if both_incorrect and pair_a is not None and pair_b is not None:
        fired.append(
            FiredRule(
                RULE_CONSENSUS,
                (
                    f"A: {pair_a.wrong} -> {pair_a.correct}",
                    f"B: {pair_b.wrong} -> {pair_b.correct}",
                ),
            )
        )
        if current is not Label.INCORRECT:
            chain.append(OverrideStep(RULE_CONSENSUS, current, Label.INCORRECT))
            current = Label.INCORRECT
        # Terminal: nothing later may undo the dual-expert consensus.
        return current, SafetyAudit(
            input_label=verdict.answer,
            final_label=current,
            fired_rules=tuple(fired),
            override_chain=tuple(chain),
            config_version=config.version,
        )

    if current is Label.INCORRECT and pair_a is None and pair_b is None:
        matched = _match_domain_rule(note, arg_a, arg_b, config)
        if matched is None:
            matched = FiredRule(RULE_TWO_TERM, ("no valid term pair from either expert",))
        fired.append(matched)
        chain.append(OverrideStep(matched.rule, current, Label.CORRECT))
        current = Label.CORRECT

    if current is Label.INCORRECT and arg_a.confidence is None and arg_b.confidence is None:
        fired.append(FiredRule(RULE_CONFIDENCE, ("both experts lack a confidence score",)))
        chain.append(OverrideStep(RULE_CONFIDENCE, current, Label.CORRECT))
        current = Label.CORRECT

    return current, SafetyAudit(
        input_label=verdict.answer,
        final_label=current,
        fired_rules=tuple(fired),
        override_chain=tuple(chain),
        config_version=config.version,
    )
