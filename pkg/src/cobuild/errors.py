"""Exception types shared across the simulation, protocol, and services.

Every error carries a stable machine-readable ``code`` so that rejections can
travel over the wire and appear in HTTP responses without string matching on
human-oriented text.
"""

from __future__ import annotations


class CobuildError(Exception):
    default_code = "error"

    def __init__(self, code: str | None = None, detail: str = ""):
        self.code = code or self.default_code
        self.detail = detail
        super().__init__(f"{self.code}: {detail}" if detail else self.code)


class ConfigError(CobuildError):
    """Mission configuration violates an invariant (bad geometry, empty plan...)."""

    default_code = "invalid-config"


class WorldError(CobuildError):
    """A world operation was rejected; ``code`` names the rule that fired."""

    default_code = "rejected"


class ProtocolError(CobuildError):
    """Malformed or out-of-contract wire traffic."""

    default_code = "malformed-frame"


class TimelineError(CobuildError):
    """A mission timeline file failed schema validation."""

    default_code = "schema-invalid"


class LlmUnavailable(CobuildError):
    """The configured language model endpoint could not produce an answer."""

    default_code = "llm-unavailable"
