"""Model gateway: providers, prompts, embeddings, decomposition."""

from bluemed.llm.decompose import decompose_note, parse_subqueries
from bluemed.llm.embeddings import EmbeddingClient, HttpEmbedder, MockEmbedder
from bluemed.llm.prompts import Mode, TemplateId, prompt_digest, render_prompt
from bluemed.llm.provider import (
    ChatRequest,
    ChatResponse,
    Gateway,
    HttpChatProvider,
    MockProvider,
    Provider,
    UsageLedger,
    complete,
)

__all__ = [
    "ChatRequest",
    "ChatResponse",
    "EmbeddingClient",
    "Gateway",
    "HttpChatProvider",
    "HttpEmbedder",
    "MockEmbedder",
    "MockProvider",
    "Mode",
    "Provider",
    "TemplateId",
    "UsageLedger",
    "complete",
    "decompose_note",
    "parse_subqueries",
    "prompt_digest",
    "render_prompt",
]
