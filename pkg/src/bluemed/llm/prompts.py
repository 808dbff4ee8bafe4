"""Prompt template loading and rendering.

Templates live as plain text files under ``bluemed/prompts``. Expert prompts
are a role preamble concatenated with the shared rule block; the judge
prompt stands alone. Few-shot mode appends a worked example block: the
shipped example plus a caller-supplied exemplar file, which is mandatory in
that mode so runs never silently fall back to zero-shot.
"""

from __future__ import annotations

import hashlib
import re
from enum import Enum
from importlib import resources
from pathlib import Path

from bluemed.errors import PromptError


class TemplateId(str, Enum):
    EXPERT_A = "expert_a"
    EXPERT_B = "expert_b"
    JUDGE = "judge"
    DECOMPOSE = "decompose"


class Mode(str, Enum):
    ZERO_SHOT = "zero-shot"
    FEW_SHOT = "few-shot"


_PLACEHOLDER_RE = re.compile(r"\$\{([A-Za-z_][A-Za-z0-9_]*)\}")

_FEW_SHOT_INTRO = "Here are worked examples of the classification task:"

# Only expert prompts take the few-shot example block.
_FEW_SHOT_ELIGIBLE = {TemplateId.EXPERT_A, TemplateId.EXPERT_B}


def _read_builtin(name: str) -> str:
    return resources.files("bluemed").joinpath("prompts").joinpath(name).read_text(encoding="utf-8")


def load_template_text(template_id: TemplateId, prompts_dir: str | Path | None = None) -> str:
    """Return the assembled template text, before variable substitution."""
    def read(name: str) -> str:
        if prompts_dir is not None:
            path = Path(prompts_dir) / name
            if not path.is_file():
                raise PromptError(f"prompt file not found: {path}", missing=[name])
            return path.read_text(encoding="utf-8")
        return _read_builtin(name)

    if template_id in (TemplateId.EXPERT_A, TemplateId.EXPERT_B):
        preamble = read(f"{template_id.value}.txt")
        rules = read("base_rules.txt")
        return preamble.rstrip("\n") + "\n\n" + rules.rstrip("\n") + "\n"
    return read(f"{template_id.value}.txt")


def placeholders(text: str) -> list[str]:
    """Placeholder names in first-appearance order, deduplicated."""
    seen: list[str] = []
    for m in _PLACEHOLDER_RE.finditer(text):
        if m.group(1) not in seen:
            seen.append(m.group(1))
    return seen


def render_prompt(
    template_id: TemplateId,
    variables: dict[str, str] | None = None,
    mode: Mode = Mode.ZERO_SHOT,
    prompts_dir: str | Path | None = None,
    exemplar_path: str | Path | None = None,
) -> str:
    """Render a template to its final prompt string.

    Raises :class:`PromptError` when the template references variables the
    caller did not supply (all missing names are listed), or when few-shot
    mode is requested without a readable exemplar file.
    """
    variables = variables or {}
    text = load_template_text(template_id, prompts_dir)

    if mode is Mode.FEW_SHOT and template_id in _FEW_SHOT_ELIGIBLE:
        if exemplar_path is None:
            raise PromptError(
                "few-shot mode requires an exemplar file path", missing=["exemplar_path"]
            )
        path = Path(exemplar_path)
        if not path.is_file():
            raise PromptError(f"exemplar file not found: {path}", missing=[str(path)])
        shipped = (
            _read_builtin("exemplar_1.txt")
            if prompts_dir is None
            else (Path(prompts_dir) / "exemplar_1.txt").read_text(encoding="utf-8")
        )
        user_examples = path.read_text(encoding="utf-8")
        block = "\n\n".join(
            [_FEW_SHOT_INTRO, shipped.rstrip("\n"), user_examples.rstrip("\n")]
        )
        text = text.rstrip("\n") + "\n\n" + block + "\n"

    needed = placeholders(text)
    missing = [name for name in needed if name not in variables]
    if missing:
        raise PromptError(
            f"template {template_id.value} is missing variables: {', '.join(missing)}",
            missing=missing,
        )

    def fill(match: re.Match[str]) -> str:
        return variables[match.group(1)]

    return _PLACEHOLDER_RE.sub(fill, text)


def prompt_digest(rendered: str) -> str:
    """Stable digest used by golden tests pinning rendered prompt content."""
    return hashlib.sha256(rendered.encode("utf-8")).hexdigest()
