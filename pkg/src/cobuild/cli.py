"""Command-line entry points.

The CLI is a thin client over the package: ``serve`` and ``aae`` start the two
FastAPI services, ``episode`` runs the headless harness, ``agent`` connects an
AI to a running server, ``export`` rewrites timeline files.

Exit codes: 0 on success, 1 on runtime failure, 2 on bad flags.
"""

from __future__ import annotations

import asyncio
import os
import sys
from pathlib import Path

import click

from .config import MissionConfig, default_config, load_config
from .errors import CobuildError


def _load_mission_config(config_path, seed) -> MissionConfig:
    if config_path is None:
        return default_config(seed=seed)
    return load_config(config_path, seed=seed)


def _fail(error: Exception) -> "click.exceptions.Exit":
    click.echo(f"error: {error}", err=True)
    return click.exceptions.Exit(1)


@click.group()
@click.version_option(package_name="cobuild")
def main():
    """Collaborative house-building testbed and after-action review tools."""


# ---------------------------------------------------------------------------
# serve
# ---------------------------------------------------------------------------


@main.command()
@click.option("--config", "config_path", type=click.Path(exists=True), default=None,
              help="Mission config TOML (packaged default if omitted).")
@click.option("--seed", type=int, default=None, help="Override the config seed.")
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8400, show_default=True)
@click.option("--missions-dir", default="missions", show_default=True,
              help="Where finished missions are written.")
@click.option("--mission-id", default=None)
@click.option("--ui-dir", type=click.Path(exists=True, file_okay=False), default=None,
              help="Static browser client to mount at /ui.")
def serve(config_path, seed, host, port, missions_dir, mission_id, ui_dir):
    """Run the real-time game server (WebSocket /play)."""
    import uvicorn

    from .server import create_server_app

    try:
        config = _load_mission_config(config_path, seed)
        app = create_server_app(
            config, mission_id=mission_id, missions_dir=missions_dir, ui_dir=ui_dir
        )
    except CobuildError as err:
        raise _fail(err)
    click.echo(f"game server on ws://{host}:{port}/play")
    uvicorn.run(app, host=host, port=port, log_level="warning")


# ---------------------------------------------------------------------------
# episode
# ---------------------------------------------------------------------------


@main.command()
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
@click.option("--seed", type=int, default=None)
@click.option("--ai", type=click.Choice(["dt", "cmd", "none"]), default="dt",
              show_default=True)
@click.option("--policy", "policy_path", type=click.Path(exists=True), default=None,
              help="Decision-tree policy file for --ai dt.")
@click.option("--context", "context_path", type=click.Path(exists=True), default=None,
              help="Context document for --ai cmd.")
@click.option("--say", "chat_lines", multiple=True, metavar="T:TEXT",
              help="Scripted chat at mission time T seconds (cmd episodes).")
@click.option("--out", "out_dir", default="missions", show_default=True)
@click.option("--mission-id", default=None)
def episode(config_path, seed, ai, policy_path, context_path, chat_lines, out_dir, mission_id):
    """Run one deterministic headless episode and write its mission files."""
    from .agents.command import load_context_file
    from .episode import ChatScript, run_episode
    from .policy import load_policy

    try:
        config = _load_mission_config(config_path, seed)
        policy = load_policy(policy_path) if policy_path else None
        context = load_context_file(context_path) if context_path else None
        script = None
        if chat_lines:
            lines = []
            for line in chat_lines:
                t, _, text = line.partition(":")
                lines.append((float(t), text))
            script = ChatScript(lines=lines)
        result = run_episode(
            config,
            ai=ai,
            policy=policy,
            context=context,
            chat_script=script,
            out_dir=out_dir,
            mission_id=mission_id,
        )
    except CobuildError as err:
        raise _fail(err)
    outcome = result.outcome
    click.echo(
        f"mission {result.mission_id}: {outcome['status']} "
        f"at t={outcome['ended_at']:.2f}s "
        f"(completion {outcome['final_completion']:.2f}, "
        f"{len(result.timeline.events)} events)"
    )
    click.echo(f"wrote {result.mission_dir}")


# ---------------------------------------------------------------------------
# aae
# ---------------------------------------------------------------------------


@main.command()
@click.option("--missions-dir", default="missions", show_default=True)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8500, show_default=True)
@click.option("--mock-llm", "mock_script", type=click.Path(exists=True), default=None,
              help="Deterministic mock model script (JSON).")
@click.option("--persist-dir", type=click.Path(), default=None,
              help="Directory for chat session persistence.")
def aae(missions_dir, host, port, mock_script, persist_dir):
    """Run the after-action review service (HTTP)."""
    import uvicorn

    from .aae.service import create_app
    from .llm import RemoteLlmClient, load_mock_script

    try:
        if mock_script:
            llm = load_mock_script(mock_script)
        else:
            llm = RemoteLlmClient.from_env()
        app = create_app(missions_dir, llm, persist_dir=persist_dir)
    except CobuildError as err:
        raise _fail(err)
    click.echo(f"review service on http://{host}:{port}")
    uvicorn.run(app, host=host, port=port, log_level="warning")


# ---------------------------------------------------------------------------
# agent
# ---------------------------------------------------------------------------


@main.group()
def agent():
    """Connect an AI agent to a running game server."""


@agent.command("dt")
@click.option("--server", "server_url", default="ws://127.0.0.1:8400/play",
              show_default=True)
@click.option("--policy", "policy_path", type=click.Path(exists=True), default=None)
@click.option("--id", "agent_id", default="helper", show_default=True)
def agent_dt(server_url, policy_path, agent_id):
    """Decision-tree agent (cannot place blocks)."""
    from .agents.wire import ConnectionLost, run_dt_agent
    from .policy import default_policy, load_policy

    try:
        policy = load_policy(policy_path) if policy_path else default_policy()
        outcome = asyncio.run(run_dt_agent(server_url, policy, agent_id))
    except (CobuildError, ConnectionLost) as err:
        raise _fail(err)
    click.echo(f"mission ended: {outcome['status']}")


@agent.command("cmd")
@click.option("--server", "server_url", default="ws://127.0.0.1:8400/play",
              show_default=True)
@click.option("--context", "context_path", type=click.Path(exists=True), default=None)
@click.option("--llm", "llm_endpoint", default=None,
              help="Chat-completions endpoint; key from LLM_API_KEY.")
@click.option("--rules-only", is_flag=True, help="Skip the model, use the rule grammar.")
@click.option("--id", "agent_id", default="helper", show_default=True)
@click.option("--transcript-out", default="conversation.json", show_default=True)
def agent_cmd(server_url, context_path, llm_endpoint, rules_only, agent_id, transcript_out):
    """Chat-commanded agent (full capabilities, including placing)."""
    from .agents.command import load_context_file
    from .agents.wire import ConnectionLost, run_cmd_agent
    from .llm import RemoteLlmClient

    try:
        context = load_context_file(context_path) if context_path else None
        llm = None
        if llm_endpoint and not rules_only:
            llm = RemoteLlmClient(
                endpoint=llm_endpoint, api_key=os.environ.get("LLM_API_KEY", "")
            )
        outcome = asyncio.run(
            run_cmd_agent(
                server_url, agent_id, context=context, llm=llm,
                transcript_path=transcript_out,
            )
        )
    except (CobuildError, ConnectionLost) as err:
        raise _fail(err)
    click.echo(f"mission ended: {outcome['status']}")


# ---------------------------------------------------------------------------
# export
# ---------------------------------------------------------------------------


@main.command()
@click.option("--timeline", "timeline_path", required=True, type=click.Path(exists=True))
@click.option("--bare-array", is_flag=True,
              help="Emit only the event array (timestamp/action objects).")
@click.option("-o", "--output", "output_path", default=None,
              help="Output file (stdout if omitted).")
def export(timeline_path, bare_array, output_path):
    """Re-serialize a timeline file, optionally as the bare event array."""
    from .mission_log import parse_timeline, serialize_timeline

    try:
        timeline = parse_timeline(timeline_path)
    except CobuildError as err:
        raise _fail(err)
    text = serialize_timeline(timeline, bare_array=bare_array)
    if output_path:
        Path(output_path).write_text(text, encoding="utf-8")
        click.echo(f"wrote {output_path}")
    else:
        click.echo(text, nl=False)


if __name__ == "__main__":
    main()
