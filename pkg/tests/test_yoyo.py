import pytest

from overhear.belief import VisitCounter, init_beliefs, propagate_forward
from overhear.ingest import INIT, TERM, ObservedMessage
from overhear.model import program_from_document, program_to_document
from overhear.progen import team_program
from overhear.yoyo import (scale, team_init_beliefs, team_most_likely,
                           team_propagate_down, team_propagate_forward, yoyo_tick)


def _two_team_doc():
    """Root with one joint phase, then a parallel split over two teams."""
    return {
        "teams": [{"name": "TF", "parent": None},
                  {"name": "LEFT", "parent": "TF"},
                  {"name": "RIGHT", "parent": "TF"}],
        "agents": [{"name": "l1", "team": "LEFT"}, {"name": "l2", "team": "LEFT"},
                   {"name": "r1", "team": "RIGHT"}],
        "root": "m",
        "plans": [
            {"id": "m", "name": "mission", "team": "TF"},
            {"id": "j", "name": "joint-prep", "team": "TF", "parent": "m",
             "first_child": True, "lambda": 0.2},
            {"id": "s", "name": "split-work", "team": "TF", "parent": "m"},
            {"id": "la", "name": "left-a", "team": "LEFT", "parent": "s",
             "first_child": True, "lambda": 0.2},
            {"id": "lb", "name": "left-b", "team": "LEFT", "parent": "s",
             "lambda": 0.2},
            {"id": "ra", "name": "right-a", "team": "RIGHT", "parent": "s",
             "first_child": True, "lambda": 0.2},
        ],
        "transitions": [
            {"from": "j", "to": "s", "pi": 1.0, "mu": 0.9, "teams": ["TF"]},
            {"from": "la", "to": "lb", "pi": 1.0, "mu": 0.5, "teams": ["LEFT"]},
            {"from": "lb", "to": "TERMINATE", "pi": 1.0, "mu": 0.0,
             "teams": ["LEFT"]},
            {"from": "ra", "to": "TERMINATE", "pi": 1.0, "mu": 0.0,
             "teams": ["RIGHT"]},
            {"from": "s", "to": "TERMINATE", "pi": 1.0, "mu": 0.0, "teams": ["TF"]},
        ],
    }


@pytest.fixture
def two_team():
    return program_from_document(_two_team_doc(), team_mode=True)


def test_down_duplicates_across_teams(evac_mini):
    b = team_init_beliefs(evac_mini)
    for v in (b.active, b.blocked):
        for k in v:
            v[k] = 0.0
    team_propagate_down("n3", 0.6, b, evac_mini)
    # one first child per team group: each team gets the full mass
    assert b.active["n4"] == pytest.approx(0.6)
    assert b.active["n5"] == pytest.approx(0.6)


def test_down_splits_within_one_team():
    doc = _two_team_doc()
    doc["plans"].append({"id": "la2", "name": "left-a-alt", "team": "LEFT",
                         "parent": "s", "first_child": True, "lambda": 0.2})
    doc["transitions"].append({"from": "la2", "to": "TERMINATE", "pi": 1.0,
                               "mu": 0.0, "teams": ["LEFT"]})
    p = program_from_document(doc, team_mode=True)
    b = team_init_beliefs(p)
    for v in (b.active, b.blocked):
        for k in v:
            v[k] = 0.0
    team_propagate_down("s", 0.6, b, p)
    assert b.active["la"] == pytest.approx(0.3)
    assert b.active["la2"] == pytest.approx(0.3)
    assert b.active["ra"] == pytest.approx(0.6)


def test_team_init(evac_mini):
    b = team_init_beliefs(evac_mini)
    assert b.active["n0"] == 1.0
    assert b.active["n1"] == 1.0
    assert b.active["n4"] == 0.0


def test_forward_duplicates_to_parallel_successors():
    # one source with a LEFT-only and a RIGHT-only successor: both receive
    # the full outgoing mass, not a split
    doc = {
        "teams": [{"name": "TF", "parent": None},
                  {"name": "LEFT", "parent": "TF"},
                  {"name": "RIGHT", "parent": "TF"}],
        "agents": [{"name": "l1", "team": "LEFT"}, {"name": "r1", "team": "RIGHT"}],
        "root": "m",
        "plans": [
            {"id": "m", "name": "mission", "team": "TF"},
            {"id": "a", "name": "start", "team": "TF", "parent": "m",
             "first_child": True, "lambda": 10.0},
            {"id": "l", "name": "left-task", "team": "LEFT", "parent": "m",
             "lambda": 0.0},
            {"id": "r", "name": "right-task", "team": "RIGHT", "parent": "m",
             "lambda": 0.0},
        ],
        "transitions": [
            {"from": "a", "to": "l", "pi": 1.0, "mu": 0.0, "teams": ["LEFT"]},
            {"from": "a", "to": "r", "pi": 1.0, "mu": 0.0, "teams": ["RIGHT"]},
        ],
    }
    p = program_from_document(doc, team_mode=True)
    b = team_init_beliefs(p)
    for _ in range(60):
        team_propagate_forward(b, p)
    assert b.active["l"] == pytest.approx(1.0, abs=1e-6)
    assert b.active["r"] == pytest.approx(1.0, abs=1e-6)


def test_forward_splits_within_team(two_team):
    p = two_team
    sp = p.single_agent_view()
    # with a single team the yoyo forward pass must agree with the
    # single-agent pass on the LEFT chain
    doc = _two_team_doc()
    doc["teams"] = [{"name": "TF", "parent": None}]
    doc["agents"] = [{"name": "l1", "team": "TF"}]
    for plan in doc["plans"]:
        plan["team"] = "TF"
    for t in doc["transitions"]:
        t["teams"] = ["TF"]
    mono = program_from_document(doc, team_mode=True)
    b_team = team_init_beliefs(mono)
    b_single = init_beliefs(sp)
    for _ in range(40):
        team_propagate_forward(b_team, mono)
        b_single = propagate_forward(b_single, sp)
    for x in mono.node_ids:
        assert b_team.active[x] == pytest.approx(b_single.active[x], abs=1e-9)
        assert b_team.blocked[x] == pytest.approx(b_single.blocked[x], abs=1e-9)


def test_no_message_tick_is_forward_only(two_team):
    a = team_init_beliefs(two_team)
    b = team_init_beliefs(two_team)
    yoyo_tick(two_team, a, [])
    team_propagate_forward(b, two_team)
    assert a.active == b.active
    assert a.blocked == b.blocked


def test_duplicate_messages_merge(two_team):
    msgs1 = [ObservedMessage(6, "l1", "TF", TERM, "joint-prep")]
    msgs3 = [ObservedMessage(6, "l1", "TF", TERM, "joint-prep"),
             ObservedMessage(6, "l2", "TF", TERM, "joint-prep"),
             ObservedMessage(6, "r1", "TF", TERM, "joint-prep")]
    states = []
    for msgs in (msgs1, msgs3):
        b = team_init_beliefs(two_team)
        for _ in range(6):
            yoyo_tick(two_team, b, [])
        yoyo_tick(two_team, b, msgs)
        states.append(b)
    assert states[0].active == states[1].active
    assert states[0].blocked == states[1].blocked


def test_evidence_lights_up_parallel_subtrees(two_team):
    b = team_init_beliefs(two_team)
    for _ in range(6):
        yoyo_tick(two_team, b, [])
    yoyo_tick(two_team, b, [ObservedMessage(6, "l1", "TF", TERM, "joint-prep")])
    # the split phase and both teams' first tasks all carry the full belief
    assert b.active["s"] == pytest.approx(1.0)
    assert b.active["la"] == pytest.approx(1.0)
    assert b.active["ra"] == pytest.approx(1.0)
    assert b.active["j"] == 0.0
    assert team_most_likely(b, two_team, "LEFT") == ("m", "s", "la")
    assert team_most_likely(b, two_team, "RIGHT") == ("m", "s", "ra")


def test_sibling_team_keeps_prior_share_of_parent(two_team):
    # LEFT finishing left-a re-aligns RIGHT's subtree to the parent's new
    # belief, preserving RIGHT's share of the parent rather than its shape
    b = team_init_beliefs(two_team)
    for _ in range(6):
        yoyo_tick(two_team, b, [])
    yoyo_tick(two_team, b, [ObservedMessage(6, "l1", "TF", TERM, "joint-prep")])
    for _ in range(4):
        yoyo_tick(two_team, b, [])
    share_before = b.active["ra"] / b.active["s"]
    yoyo_tick(two_team, b, [ObservedMessage(11, "l2", "LEFT", TERM, "left-a")])
    assert b.active["lb"] == pytest.approx(1.0)
    assert b.active["s"] == pytest.approx(1.0)
    assert b.active["ra"] / b.active["s"] == pytest.approx(share_before, abs=1e-9)


def test_scale_rescales_sibling_team_subtree(evac_mini):
    p = evac_mini
    b = team_init_beliefs(p)
    # hand-built prior: landing-zone-maneuvers at 0.5, both tasks under it
    b.prior_active = dict.fromkeys(p.node_ids, 0.0)
    b.prior_blocked = dict.fromkeys(p.node_ids, 0.0)
    b.prior_active.update({"n0": 1.0, "n3": 0.5, "n4": 0.5, "n5": 0.5})
    for k in b.active:
        b.active[k] = 0.0
        b.blocked[k] = 0.0
    b.active.update({"n0": 1.0, "n3": 1.0, "n4": 1.0})
    scale("n3", "TRANSPORT", "n4", b, p)
    # ESCORT's subtree is re-aligned to the parent's new mass
    assert b.active["n5"] == pytest.approx(1.0)


def test_scale_prior_shares_are_preserved():
    # two leaves at prior 0.25/0.25 under a prior parent of 0.5: when the
    # parent rises to 1.0 the leaves keep their shares, becoming 0.5/0.5
    doc = _two_team_doc()
    doc["plans"].append({"id": "rb", "name": "right-b", "team": "RIGHT",
                         "parent": "s", "first_child": True, "lambda": 0.2})
    doc["transitions"].append({"from": "rb", "to": "TERMINATE", "pi": 1.0,
                               "mu": 0.0, "teams": ["RIGHT"]})
    p = program_from_document(doc, team_mode=True)
    b = team_init_beliefs(p)
    b.prior_active = dict.fromkeys(p.node_ids, 0.0)
    b.prior_blocked = dict.fromkeys(p.node_ids, 0.0)
    b.prior_active.update({"m": 1.0, "s": 0.5, "la": 0.5, "ra": 0.25, "rb": 0.25})
    for k in b.active:
        b.active[k] = 0.0
        b.blocked[k] = 0.0
    b.active.update({"m": 1.0, "s": 1.0, "la": 1.0})
    scale("s", "LEFT", "la", b, p)
    assert b.active["ra"] == pytest.approx(0.5)
    assert b.active["rb"] == pytest.approx(0.5)
    assert b.active["ra"] + b.active["rb"] == pytest.approx(b.active["s"])


def test_scale_skips_plans_of_ancestor_teams(evac_team):
    # after FLIGHT-TEAM evidence, the TASK-FORCE-owned predecessor must not
    # be resurrected from the prior
    p = evac_team
    b = team_init_beliefs(p)
    for _ in range(5):
        yoyo_tick(p, b, [])
    yoyo_tick(p, b, [ObservedMessage(5, "escort1", "TASK-FORCE", TERM,
                                     "process-orders")])
    assert b.active["n1"] == 0.0
    assert b.blocked["n1"] == 0.0
    assert b.active["n6"] == pytest.approx(1.0)
    assert team_most_likely(b, p, "ESCORT") == ("n0", "n2", "n6")


def test_term_of_sink_keeps_named_nodes(two_team):
    b = team_init_beliefs(two_team)
    for _ in range(6):
        yoyo_tick(two_team, b, [])
    yoyo_tick(two_team, b, [ObservedMessage(6, "l1", "TF", TERM, "joint-prep")])
    for _ in range(3):
        yoyo_tick(two_team, b, [])
    # right-a can only TERMINATE; announcing its end must not zero the state
    yoyo_tick(two_team, b, [ObservedMessage(10, "r1", "RIGHT", TERM, "right-a")])
    assert b.active["ra"] == pytest.approx(1.0)
    assert team_most_likely(b, two_team, "RIGHT") == ("m", "s", "ra")


def test_parallel_sibling_mass_matches_parent(two_team):
    # while no sibling mass has drained off through completions, every
    # evidence step leaves the parallel subtrees carrying the parent's mass
    b = team_init_beliefs(two_team)
    for _ in range(6):
        yoyo_tick(two_team, b, [])
    yoyo_tick(two_team, b, [ObservedMessage(6, "l1", "TF", TERM, "joint-prep")])
    left = b.active["la"] + b.active["lb"] + b.blocked["la"] + b.blocked["lb"]
    right = b.active["ra"] + b.blocked["ra"]
    assert left == pytest.approx(b.active["s"], abs=1e-9)
    assert right == pytest.approx(b.active["s"], abs=1e-9)


def test_unknown_plan_diagnostic(two_team):
    from overhear.belief import MonitoringError
    b = team_init_beliefs(two_team)
    with pytest.raises(MonitoringError, match="incoherently"):
        yoyo_tick(two_team, b, [ObservedMessage(0, "l1", "TF", INIT, "no-plan")])


def test_state_size_independent_of_agents():
    tp = team_program(0)
    doc = program_to_document(tp)
    doc["agents"].append({"name": "extra", "team": "ALPHA"})
    bigger = program_from_document(doc, team_mode=True)
    assert len(team_init_beliefs(tp).active) == len(team_init_beliefs(bigger).active)


def test_quiet_tick_visits_bounded():
    tp = team_program(0)
    b = team_init_beliefs(tp)
    counter = VisitCounter()
    for _ in range(10):
        yoyo_tick(tp, b, [], counter)
    assert counter.visits == 10 * len(tp.node_ids)
