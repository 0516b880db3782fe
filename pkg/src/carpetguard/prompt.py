"""Few-shot prompt assembly from a retrieved context."""

from __future__ import annotations

from dataclasses import dataclass

from .exceptions import PromptError
from .representation import RepresentationKind, has_label_token
from .retrieval import RetrievedContext

TASK_HEADER = (
    "Task: Detect whether the interface status observed during the last ten seconds "
    "indicates an attack or normal behavior. Analyze the provided examples labeled "
    "interface status, then classify the target interface status accordingly."
)
INSTRUCTION = (
    "Only answer with one number, the label of the target interface status: "
    "0 for Benign, 1 for Attack. Do not explain."
)
INSTRUCTION_LINE = "Instructions: " + INSTRUCTION
EXAMPLES_HEADING = "Labeled interface status:"
TARGET_HEADING = "Target interface status:"


@dataclass(frozen=True)
class Prompt:
    text: str
    kind: RepresentationKind
    example_count: int


def _kind_of(text: str) -> RepresentationKind:
    if text.startswith('{"interface_status"'):
        return RepresentationKind.STRUCTURED_JSON
    if text.startswith("The interface received"):
        return RepresentationKind.NATURAL_LANGUAGE
    raise PromptError(f"unrecognised rendering: {text[:40]!r}")


def build_prompt(ctx: RetrievedContext, kind, k: int = 3) -> Prompt:
    """Lay out header, benign then attack examples, the target, and the instruction.

    Blocks are separated by one blank line. Examples keep the context's
    ascending-distance order within each class.
    """
    kind = RepresentationKind.parse(kind)
    if len(ctx.benign) != k or len(ctx.attack) != k:
        raise PromptError(
            f"need {k} benign and {k} attack examples, got {len(ctx.benign)} and {len(ctx.attack)}"
        )
    if has_label_token(ctx.query_text):
        raise PromptError("target rendering must not carry a label")
    examples = [n.record.rendered_text for n in ctx.benign + ctx.attack]
    for text in examples + [ctx.query_text]:
        if _kind_of(text) is not kind:
            raise PromptError(f"rendering kind mismatch: expected {kind.value}")
    for text in examples:
        if not has_label_token(text):
            raise PromptError("example rendering is missing its label")
    blocks = [TASK_HEADER, EXAMPLES_HEADING, *examples, TARGET_HEADING, ctx.query_text,
              INSTRUCTION_LINE]
    return Prompt("\n\n".join(blocks), kind, len(examples))
