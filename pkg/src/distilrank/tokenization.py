"""Unicode-alphanumeric-run tokenizer used by indexing, cropping, and featurization."""

from __future__ import annotations

import re
from dataclasses import dataclass

# Maximal runs of Unicode alphanumerics (\w minus underscore).
_TOKEN_RE = re.compile(r"[^\W_]+", re.UNICODE)


@dataclass(frozen=True)
class TokenizerConfig:
    lowercase: bool = True
    min_token_len: int = 1


def tokenize(text: str, config: TokenizerConfig = TokenizerConfig()) -> list[str]:
    """Split text into alphanumeric runs; idempotent under space-join of its output."""
    if config.lowercase:
        text = text.lower()
    tokens = _TOKEN_RE.findall(text)
    if config.min_token_len > 1:
        tokens = [t for t in tokens if len(t) >= config.min_token_len]
    return tokens
