"""Wire protocol: codec round-trips, framing errors, and the start gate."""

import random

import pytest

from cobuild import protocol as P
from cobuild.errors import ProtocolError


# ---------------------------------------------------------------------------
# Seeded message generator (also used by the acceptance fuzz criterion)
# ---------------------------------------------------------------------------

MATERIALS = ["wood", "stone", "brick", "glass"]


def _cell(rng):
    return (rng.randrange(-2, 40), rng.randrange(-2, 40))


def _text(rng):
    alphabet = "abc xyz0129 é✓\"\\\n\t{}[]"
    return "".join(rng.choice(alphabet) for _ in range(rng.randrange(0, 24)))


def random_action(rng) -> P.ActionRequest:
    kind = rng.choice(["move_to", "mine", "craft", "chest", "place", "idle"])
    if kind == "move_to":
        return P.MoveTo(target=_cell(rng))
    if kind == "mine":
        return P.Mine(target=_cell(rng))
    if kind == "craft":
        return P.Craft(item=rng.choice(["pickaxe", "axe"]))
    if kind == "chest":
        return P.ChestOp(
            direction=rng.choice(["deposit", "withdraw"]),
            material=rng.choice(MATERIALS),
            n=rng.randrange(0, 65),
        )
    if kind == "place":
        return P.Place(target=_cell(rng), material=rng.choice(MATERIALS))
    return P.Idle()


def random_agent_view(rng) -> P.AgentView:
    return P.AgentView(
        kind=rng.choice(["human", "ai"]),
        position=(rng.uniform(0, 16), rng.uniform(0, 12)),
        inventory=P.InventoryView(
            counts={m: rng.randrange(0, 9) for m in rng.sample(MATERIALS, rng.randrange(0, 3))},
            tools=("pickaxe",) if rng.random() < 0.5 else (),
        ),
        held_item=rng.choice([None, "pickaxe", "wood"]),
        looking_at=_cell(rng) if rng.random() < 0.5 else None,
        behavior_state=rng.choice(["idle", "traveling", "gathering:wood", "crafting"]),
        can_place=rng.random() < 0.5,
    )


def random_trace(rng) -> P.DecisionTraceView:
    return P.DecisionTraceView(
        agent_id=rng.choice(["bot", "droid"]),
        sim_time=rng.uniform(0, 900),
        phase=rng.randrange(1, 6),
        active_branch=tuple(
            P.TraceStep(node=f"n{i}", result=rng.random() < 0.5)
            for i in range(rng.randrange(1, 4))
        ),
        selected_node=rng.choice(["gather_wood", "craft", "deposit", "hold_position"]),
        emitted_action=random_action(rng),
    )


def random_payload(rng):
    builders = [
        lambda: P.Join(name=rng.choice(["alice", "bot"]), kind=rng.choice(["human", "ai"]),
                       can_place=rng.choice([None, True, False])),
        lambda: P.Action(action=random_action(rng),
                         trace=random_trace(rng) if rng.random() < 0.3 else None),
        lambda: P.ChatSend(text=_text(rng)),
        lambda: P.Disconnect(),
        lambda: P.Joined(agent_id=rng.choice(["alice", "bot"]), kind=rng.choice(["human", "ai"])),
        lambda: P.StateUpdate(
            agents={f"a{i}": random_agent_view(rng) for i in range(rng.randrange(0, 3))},
            world=P.WorldView(
                completion=rng.random(),
                clock=rng.uniform(0, 900),
                phase=rng.randrange(1, 6),
                chest={m: rng.randrange(1, 20) for m in rng.sample(MATERIALS, rng.randrange(0, 3))},
                block_changes=tuple(
                    P.BlockChange(cell=_cell(rng), block=P.BlockView(kind="air"))
                    for _ in range(rng.randrange(0, 3))
                ),
            ),
        ),
        lambda: P.ChatRelay.model_validate({"from": rng.choice(["alice", "bot"]), "text": _text(rng)}),
        lambda: P.MissionEnd(outcome=P.OutcomeView(
            status=rng.choice(["success", "failure"]),
            ended_at=rng.uniform(0, 900),
            final_completion=rng.random(),
        )),
        lambda: P.ErrorMessage(code=rng.choice(["join-rejected", "protocol-violation"]), detail=_text(rng)),
    ]
    return rng.choice(builders)()


def random_envelope(rng) -> P.Envelope:
    return P.Envelope(seq=rng.randrange(0, 10_000), sim_time=rng.uniform(0, 900),
                      payload=random_payload(rng))


# ---------------------------------------------------------------------------
# Round-trip
# ---------------------------------------------------------------------------


def test_join_round_trip():
    env = P.Envelope(seq=0, sim_time=0.0, payload=P.Join(name="alice", kind="human"))
    assert P.decode(P.encode(env)) == env


def test_thousand_fuzzed_messages_round_trip():
    rng = random.Random(20240815)
    for _ in range(1000):
        env = random_envelope(rng)
        assert P.decode(P.encode(env)) == env


def test_mission_brief_round_trip():
    layout = P.LayoutView(
        width=16, height=12, tick_rate_hz=20, time_limit_s=90.0, reach_radius=1.5,
        move_speed_cells_s=3.5, crafting_table=(6, 2), chest=(8, 2), pickaxe_wood_cost=3,
        plan=(P.PlanCellView(cell=(6, 9), material="wood", layer=0),),
        towers=(P.TowerView(material="wood", cells=((2, 7),)),),
        blocks=(P.BlockChange(cell=(6, 9), block=P.BlockView(kind="marker", material="wood")),),
    )
    env = P.Envelope(seq=3, sim_time=0.0, payload=P.MissionBrief(
        mission_id="m1", config_digest="sha256:ff", layout=layout,
        roster=(P.RosterEntry(id="alice", kind="human", can_place=True),),
    ))
    assert P.decode(P.encode(env)) == env


# ---------------------------------------------------------------------------
# Malformed frames
# ---------------------------------------------------------------------------


def valid_frame():
    return P.encode(P.Envelope(seq=1, sim_time=0.0, payload=P.Disconnect()))


def test_truncated_frame():
    frame = valid_frame()
    with pytest.raises(ProtocolError) as err:
        P.decode(frame[:-3])
    assert err.value.code == "malformed-frame"


def test_empty_frame():
    with pytest.raises(ProtocolError) as err:
        P.decode(b"\x00")
    assert err.value.code == "malformed-frame"


def test_garbage_json():
    body = b"{nope"
    frame = len(body).to_bytes(4, "big") + body
    with pytest.raises(ProtocolError) as err:
        P.decode(frame)
    assert err.value.code == "malformed-frame"


def test_unknown_variant():
    body = b'{"v":1,"seq":1,"sim_time":0.0,"payload":{"type":"warp"}}'
    frame = len(body).to_bytes(4, "big") + body
    with pytest.raises(ProtocolError) as err:
        P.decode(frame)
    assert err.value.code == "unknown-variant"


def test_schema_version_mismatch():
    body = b'{"v":99,"seq":1,"sim_time":0.0,"payload":{"type":"disconnect"}}'
    frame = len(body).to_bytes(4, "big") + body
    with pytest.raises(ProtocolError) as err:
        P.decode(frame)
    assert err.value.code == "schema-version-mismatch"


def test_missing_version():
    body = b'{"seq":1,"sim_time":0.0,"payload":{"type":"disconnect"}}'
    frame = len(body).to_bytes(4, "big") + body
    with pytest.raises(ProtocolError) as err:
        P.decode(frame)
    assert err.value.code == "schema-version-mismatch"


def test_bad_field_shape():
    body = (
        b'{"v":1,"seq":1,"sim_time":0.0,'
        b'"payload":{"type":"action","action":{"type":"mine","target":"here"}}}'
    )
    frame = len(body).to_bytes(4, "big") + body
    with pytest.raises(ProtocolError) as err:
        P.decode(frame)
    assert err.value.code == "malformed-frame"


# ---------------------------------------------------------------------------
# Start gate
# ---------------------------------------------------------------------------


@pytest.mark.parametrize(
    "joined,expected",
    [
        ({"human"}, False),
        ({"human", "ai"}, True),
        ({"ai"}, False),
        (set(), False),
        ([("h1", "human"), ("h2", "human")], False),
        ([("h1", "human"), ("bot", "ai")], True),
    ],
)
def test_mission_start_gate(joined, expected):
    assert P.mission_start_gate(joined) is expected
