"""Language-model client abstraction: a remote endpoint and deterministic mocks.

The mock client is the test-time substitute for a hosted model.  Its
``phase-lookup`` mode answers "what phase at t" questions by parsing the
timeline JSON embedded in the prompt it receives — nothing else — which makes
it a genuine probe of the prompt-assembly path: if the right events were not
in the prompt, the mock cannot answer correctly.
"""

from __future__ import annotations

import json
import os
import re
from dataclasses import dataclass
from typing import Protocol

from .errors import LlmUnavailable


class LanguageModelClient(Protocol):
    def complete(self, prompt: str) -> str: ...


@dataclass
class RemoteLlmClient:
    """OpenAI-style chat completions endpoint; configured via environment."""

    endpoint: str
    api_key: str
    model: str = "gpt-4"
    timeout_s: float = 60.0

    @classmethod
    def from_env(cls) -> "RemoteLlmClient":
        endpoint = os.environ.get("LLM_ENDPOINT", "")
        api_key = os.environ.get("LLM_API_KEY", "")
        if not endpoint or not api_key:
            raise LlmUnavailable(detail="LLM_ENDPOINT / LLM_API_KEY not set")
        return cls(endpoint=endpoint, api_key=api_key)

    def complete(self, prompt: str) -> str:
        import httpx

        try:
            response = httpx.post(
                self.endpoint.rstrip("/") + "/chat/completions",
                headers={"Authorization": f"Bearer {self.api_key}"},
                json={
                    "model": self.model,
                    "messages": [{"role": "user", "content": prompt}],
                },
                timeout=self.timeout_s,
            )
            response.raise_for_status()
            return response.json()["choices"][0]["message"]["content"]
        except Exception as exc:  # network, HTTP, schema — all opaque to callers
            raise LlmUnavailable(detail=str(exc)) from exc


_TIMELINE_SECTION = re.compile(
    r"== MISSION TIMELINE \(JSON\) ==\n(.*?)(?:\n== |\Z)", re.DOTALL
)
_QUERY_SECTION = re.compile(r"== QUERY ==\n(.*)\Z", re.DOTALL)
_PLAYHEAD_TIME = re.compile(r"currently at t=([0-9]+(?:\.[0-9]+)?)")
_ASKED_TIME = re.compile(r"\bt\s*=\s*([0-9]+(?:\.[0-9]+)?)")


def _phases_from_events(events) -> list[tuple[float, int]]:
    changes = []
    for event in events:
        action = event.get("action", {})
        phase = action.get("world", {}).get("phase")
        traces = action.get("decision_trace")
        if traces is not None:
            for trace in traces if isinstance(traces, list) else [traces]:
                if "phase" in trace:
                    phase = trace["phase"]
        if phase is not None:
            changes.append((event["timestamp"], phase))
    return changes


class MockLlmClient:
    """Deterministic stand-in; behavior selected by a small script dict."""

    def __init__(self, script: dict | None = None):
        self.script = script or {"mode": "echo"}
        self.calls: list[str] = []
        self._cursor = 0

    def complete(self, prompt: str) -> str:
        self.calls.append(prompt)
        mode = self.script.get("mode", "echo")
        if mode == "phase-lookup":
            return self._phase_lookup(prompt)
        if mode == "sequence":
            answers = self.script.get("answers", [])
            if not answers:
                raise LlmUnavailable(detail="sequence script exhausted")
            answer = answers[min(self._cursor, len(answers) - 1)]
            self._cursor += 1
            return answer
        if mode == "scripted":
            query = _QUERY_SECTION.search(prompt)
            text = query.group(1) if query else prompt
            for rule in self.script.get("replies", []):
                if re.search(rule["match"], text, re.IGNORECASE):
                    return rule["answer"]
            return self.script.get("default", "I do not have an answer for that.")
        if mode == "unavailable":
            raise LlmUnavailable(detail="scripted outage")
        return prompt[-2000:]  # echo tail

    def _phase_lookup(self, prompt: str) -> str:
        section = _TIMELINE_SECTION.search(prompt)
        if not section:
            return "The prompt carried no mission timeline, so I cannot tell."
        try:
            data = json.loads(section.group(1))
        except json.JSONDecodeError:
            return "The timeline in the prompt was unreadable."
        events = data.get("events", data if isinstance(data, list) else [])
        query = _QUERY_SECTION.search(prompt)
        t = None
        if query:
            asked = _ASKED_TIME.search(query.group(1))
            if asked:
                t = float(asked.group(1))
        if t is None:
            playhead = _PLAYHEAD_TIME.search(prompt)
            t = float(playhead.group(1)) if playhead else 0.0
        phase, changed_at = 1, 0.0
        for ts, value in _phases_from_events(events):
            if ts <= t:
                phase, changed_at = value, ts
            else:
                break
        return (
            f"At t={t:g} s the decision-tree teammate was in phase {phase} "
            f"(in effect since t={changed_at:g} s per the mission timeline)."
        )


def load_mock_script(path) -> MockLlmClient:
    with open(path, "r", encoding="utf-8") as fh:
        return MockLlmClient(json.load(fh))
