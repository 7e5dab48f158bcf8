"""Review service: sessions, prompt assembly, truncation, queries, HTTP surface."""

import json
import re

import pytest
from fastapi.testclient import TestClient

from cobuild.aae.prompts import (
    SECTION_CONTEXT,
    SECTION_HISTORY,
    SECTION_INSTRUCTIONS,
    SECTION_PLAYHEAD,
    SECTION_QUERY,
    SECTION_TIMELINE,
    assemble_prompt,
    timeline_data_part,
)
from cobuild.aae.service import ReviewService, create_app
from cobuild.config import default_config
from cobuild.episode import run_episode
from cobuild.errors import CobuildError, LlmUnavailable
from cobuild.llm import MockLlmClient
from cobuild.replay import extract_markers


@pytest.fixture(scope="module")
def missions_dir(tmp_path_factory):
    root = tmp_path_factory.mktemp("missions")
    run_episode(default_config(seed=13), ai="dt", out_dir=root, mission_id="rev-1")
    return root


@pytest.fixture()
def service(missions_dir):
    return ReviewService(missions_dir, MockLlmClient({"mode": "phase-lookup"}))


def phase_oracle(timeline, t):
    """Latest logged phase at or before t (traces and world deltas agree)."""
    phase = 1
    for event in timeline.events:
        if event.timestamp > t:
            break
        traces = event.action.get("decision_trace")
        if traces is not None:
            for trace in traces if isinstance(traces, list) else [traces]:
                phase = trace.get("phase", phase)
        phase = event.action.get("world", {}).get("phase", phase)
    return phase


class TestSessions:
    def test_create_session_empty_history(self, service):
        session = service.create_session("rev-1")
        assert session.history == []
        assert session.mission_id == "rev-1"

    def test_unknown_mission(self, service):
        with pytest.raises(CobuildError) as err:
            service.create_session("no-such-mission")
        assert err.value.code == "mission-not-found"

    def test_two_sessions_distinct(self, service):
        a = service.create_session("rev-1")
        b = service.create_session("rev-1")
        assert a.session_id != b.session_id

    def test_missing_context_doc(self, tmp_path):
        run_episode(default_config(seed=2), ai="none", out_dir=tmp_path, mission_id="bare")
        (tmp_path / "bare" / "context.md").unlink()
        service = ReviewService(tmp_path, MockLlmClient())
        with pytest.raises(CobuildError) as err:
            service.create_session("bare")
        assert err.value.code == "context-missing"

    def test_persistence_across_restart(self, missions_dir, tmp_path):
        store = tmp_path / "sessions"
        first = ReviewService(
            missions_dir, MockLlmClient({"mode": "phase-lookup"}), persist_dir=store
        )
        session = first.create_session("rev-1")
        first.query(session.session_id, "what phase at t=10?", 10.0)
        reborn = ReviewService(
            missions_dir, MockLlmClient({"mode": "phase-lookup"}), persist_dir=store
        )
        assert len(reborn.get_session(session.session_id).history) == 2


class TestPromptAssembly:
    def test_bundle_has_all_parts_in_order(self, service):
        session = service.create_session("rev-1")
        session.history.extend([("user", "hello"), ("assistant", "hi")])
        bundle = service.assemble(session, "why did the helper keep mining wood?", 31.2)
        rendered = bundle.render()
        order = [
            rendered.index(SECTION_CONTEXT),
            rendered.index(SECTION_INSTRUCTIONS),
            rendered.index(SECTION_TIMELINE),
            rendered.index(SECTION_HISTORY),
            rendered.index(SECTION_PLAYHEAD),
            rendered.index(SECTION_QUERY),
        ]
        assert order == sorted(order)
        context_text = service.context_text("rev-1")
        assert context_text in rendered  # verbatim
        assert "t=31.2 s" in bundle.playhead_line
        assert rendered.index("user: hello") < rendered.index("assistant: hi")
        assert bundle.query in rendered

    def test_full_timeline_included_when_under_budget(self, service):
        session = service.create_session("rev-1")
        bundle = service.assemble(session, "anything", 5.0)
        data = json.loads(bundle.data)
        mission = service._load("rev-1")
        assert len(data["events"]) == len(mission.timeline.events)

    def test_truncation_keeps_window_and_phase_changes(self, missions_dir):
        service = ReviewService(
            missions_dir, MockLlmClient(), prompt_budget_chars=2_000
        )
        mission = service._load("rev-1")
        playhead = 0.0  # events beyond t=60 fall outside the window
        data = json.loads(timeline_data_part(mission.timeline, playhead, 2_000))
        assert data["elided_events"] > 0
        # Oracle: recount which events the policy must keep.
        expected = [
            e.to_dict()
            for e in mission.timeline.events
            if abs(e.timestamp - playhead) <= 60.0
            or "phase" in e.action.get("world", {})
        ]
        assert data["events"] == expected
        assert len(expected) + data["elided_events"] == len(mission.timeline.events)

    def test_playhead_line_always_present(self, service):
        session = service.create_session("rev-1")
        for playhead in (0.0, 12.25, 80.0):
            bundle = service.assemble(session, "q", playhead)
            assert f"t={playhead:g} s" in bundle.playhead_line
            assert SECTION_PLAYHEAD in bundle.render()


class TestQuery:
    def test_phase_answers_match_oracle(self, service):
        session = service.create_session("rev-1")
        timeline = service._load("rev-1").timeline
        end = timeline.end_time()
        for i in range(12):
            t = round(end * i / 11, 2)
            answer = service.query(
                session.session_id, f"what phase was the helper in at t={t}?", t
            )
            got = int(re.search(r"phase (\d)", answer).group(1))
            assert got == phase_oracle(timeline, t), f"t={t}"

    def test_outage_leaves_history_unchanged(self, missions_dir):
        service = ReviewService(missions_dir, MockLlmClient({"mode": "unavailable"}))
        session = service.create_session("rev-1")
        with pytest.raises(LlmUnavailable):
            service.query(session.session_id, "anything", 1.0)
        assert session.history == []

    def test_two_queries_four_entries_in_order(self, service):
        session = service.create_session("rev-1")
        service.query(session.session_id, "what phase at t=5?", 5.0)
        service.query(session.session_id, "and at t=50?", 50.0)
        roles = [role for role, _ in session.history]
        assert roles == ["user", "assistant", "user", "assistant"]

    def test_empty_query_rejected(self, service):
        session = service.create_session("rev-1")
        with pytest.raises(CobuildError) as err:
            service.query(session.session_id, "", 0.0)
        assert err.value.code == "empty-query"
        assert session.history == []


class TestHttpSurface:
    @pytest.fixture()
    def client(self, missions_dir):
        app = create_app(missions_dir, MockLlmClient({"mode": "phase-lookup"}))
        return TestClient(app)

    def test_list_missions(self, client):
        missions = client.get("/missions").json()
        assert [m["id"] for m in missions] == ["rev-1"]
        assert missions[0]["status"] == "success"

    def test_timeline_endpoint_is_valid_json(self, client):
        response = client.get("/missions/rev-1/timeline")
        assert response.status_code == 200
        assert response.json()["format"] == "cobuild-timeline"

    def test_context_endpoint(self, client):
        response = client.get("/missions/rev-1/context")
        assert response.status_code == 200
        assert "Mission context" in response.text

    def test_markers_match_library(self, client, missions_dir):
        from cobuild.mission_log import parse_timeline

        timeline = parse_timeline(missions_dir / "rev-1" / "timeline.json")
        expected = extract_markers(timeline, {"decision_point", "phase_change"})
        response = client.get(
            "/missions/rev-1/markers", params={"kinds": "decision_point,phase_change"}
        )
        got = response.json()
        assert len(got) == len(expected)
        assert [m["timestamp"] for m in got] == [m.timestamp for m in expected]

    def test_frame_endpoint_returns_png(self, client):
        response = client.get("/missions/rev-1/frame", params={"t": 10.0, "view": "topdown"})
        assert response.status_code == 200
        assert response.headers["content-type"] == "image/png"
        assert response.content[:8] == b"\x89PNG\r\n\x1a\n"

    def test_frame_bad_time(self, client):
        response = client.get("/missions/rev-1/frame", params={"t": 9999.0})
        assert response.status_code == 400

    def test_query_round_trip(self, client):
        session = client.post("/sessions", json={"mission_id": "rev-1"}).json()
        response = client.post(
            f"/sessions/{session['session_id']}/query",
            json={"text": "what phase at t=20?", "playhead_s": 20.0},
        )
        body = response.json()
        assert response.status_code == 200
        assert "phase" in body["answer"]
        assert body["history_length"] == 2

    def test_unknown_mission_404(self, client):
        assert client.get("/missions/ghost/timeline").status_code == 404
        assert client.post("/sessions", json={"mission_id": "ghost"}).status_code == 404

    def test_unavailable_llm_503(self, missions_dir):
        app = create_app(missions_dir, MockLlmClient({"mode": "unavailable"}))
        client = TestClient(app)
        session = client.post("/sessions", json={"mission_id": "rev-1"}).json()
        response = client.post(
            f"/sessions/{session['session_id']}/query",
            json={"text": "anything", "playhead_s": 0.0},
        )
        assert response.status_code == 503
