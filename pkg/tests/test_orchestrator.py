"""Episode harness determinism and the command-line surface."""

import json

import pytest
from click.testing import CliRunner

from cobuild.cli import main
from cobuild.config import default_config
from cobuild.episode import load_capture, run_episode
from cobuild.errors import ConfigError
from cobuild.mission_log import parse_timeline

from conftest import make_tiny_config


class TestRunEpisode:
    def test_default_mission_succeeds_with_helper(self):
        result = run_episode(default_config(seed=7), ai="dt")
        assert result.outcome["status"] == "success"
        assert result.outcome["ended_at"] < 90.0
        assert result.trace_count > 0

    def test_ablation_fails_at_exact_limit(self):
        result = run_episode(default_config(seed=7), ai="none")
        assert result.outcome["status"] == "failure"
        assert result.outcome["ended_at"] == 90.0
        assert result.outcome["final_completion"] < 1.0

    def test_same_inputs_byte_identical_files(self, tmp_path):
        a = run_episode(default_config(seed=4), ai="dt", out_dir=tmp_path / "a")
        b = run_episode(default_config(seed=4), ai="dt", out_dir=tmp_path / "b")
        assert a.timeline_path.read_bytes() == b.timeline_path.read_bytes()
        assert a.capture_path.read_bytes() == b.capture_path.read_bytes()

    def test_capture_matches_event_count(self, tmp_path):
        result = run_episode(
            default_config(seed=3), ai="dt", out_dir=tmp_path, mission_id="cap"
        )
        assert len(result.capture) == len(result.timeline.events)
        reloaded = load_capture(result.capture_path)
        assert [t for t, _ in reloaded] == [t for t, _ in result.capture]
        assert reloaded[-1][1] == result.capture[-1][1]

    def test_every_trace_lands_in_exactly_one_event(self):
        result = run_episode(default_config(seed=6), ai="dt")
        embedded = 0
        for event in result.timeline.events:
            trace = event.action.get("decision_trace")
            if trace is not None:
                embedded += len(trace) if isinstance(trace, list) else 1
        assert embedded == result.trace_count

    def test_collaboration_validator_blocks_easy_configs(self):
        config = default_config()
        config.mine_durations_s = {"wood": 0.5, "stone": 1.0, "brick": 1.0}
        with pytest.raises(ConfigError) as err:
            run_episode(config, ai="dt")
        assert "collaboration" in err.value.detail

    def test_unknown_ai_kind_rejected(self):
        with pytest.raises(ConfigError):
            run_episode(make_tiny_config(), ai="psychic")

    def test_context_doc_written_nonempty(self, tmp_path):
        result = run_episode(
            make_tiny_config(), ai="dt", out_dir=tmp_path, mission_id="ctx"
        )
        text = result.context_path.read_text()
        assert len(text) > 200
        assert "builder" in text and "helper" in text


class TestCli:
    def test_episode_writes_files_and_exits_zero(self, tmp_path):
        runner = CliRunner()
        result = runner.invoke(
            main, ["episode", "--seed", "7", "--out", str(tmp_path), "--mission-id", "m7"]
        )
        assert result.exit_code == 0, result.output
        assert "success" in result.output
        timeline = parse_timeline(tmp_path / "m7" / "timeline.json")
        assert timeline.footer["outcome"]["status"] == "success"

    def test_unknown_flag_exits_two(self):
        result = CliRunner().invoke(main, ["episode", "--frobnicate"])
        assert result.exit_code == 2
        assert "no such option" in result.output.lower()

    def test_bad_config_exits_one(self, tmp_path):
        bad = tmp_path / "bad.toml"
        bad.write_text("[world]\nwidth = -1\n")
        result = CliRunner().invoke(main, ["episode", "--config", str(bad)])
        assert result.exit_code == 1

    def test_export_bare_array(self, tmp_path):
        runner = CliRunner()
        runner.invoke(
            main, ["episode", "--seed", "2", "--out", str(tmp_path), "--mission-id", "m2"]
        )
        out = tmp_path / "bare.json"
        result = runner.invoke(
            main,
            [
                "export",
                "--timeline", str(tmp_path / "m2" / "timeline.json"),
                "--bare-array",
                "-o", str(out),
            ],
        )
        assert result.exit_code == 0, result.output
        data = json.loads(out.read_text())
        assert isinstance(data, list) and data
        assert all(set(event) == {"timestamp", "action"} for event in data)

    def test_export_full_round_trip_to_stdout(self, tmp_path):
        runner = CliRunner()
        runner.invoke(
            main, ["episode", "--seed", "2", "--out", str(tmp_path), "--mission-id", "m2"]
        )
        result = runner.invoke(
            main, ["export", "--timeline", str(tmp_path / "m2" / "timeline.json")]
        )
        assert result.exit_code == 0
        assert json.loads(result.output)["format"] == "cobuild-timeline"

    def test_cmd_episode_with_scripted_chat(self, tmp_path):
        result = CliRunner().invoke(
            main,
            [
                "episode", "--ai", "cmd", "--seed", "3",
                "--say", "1.0:get 2 wood and put it in the chest",
                "--out", str(tmp_path), "--mission-id", "chatty",
            ],
        )
        assert result.exit_code == 0, result.output
        conversation = json.loads((tmp_path / "chatty" / "conversation.json").read_text())
        assert len(conversation) == 2

    def test_help_lists_subcommands(self):
        result = CliRunner().invoke(main, ["--help"])
        assert result.exit_code == 0
        for name in ("serve", "episode", "aae", "agent", "export"):
            assert name in result.output
