"""Command-line front end.

One binary, six subcommands:

    simulate    run the team simulator, write trace + message log
    learn       build a rote communication model from message logs
    lose        drop an exact fraction of a log's messages
    recognize   stream a log, emit per-tick most-likely states
    evaluate    score a recognizer against a ground-truth trace
    bench       recognizer scalability table across team sizes

Exit status: 0 on success, 1 on file or validation errors (diagnostic on
stderr), 2 on bad flags (argparse usage text).  Identical arguments always
produce byte-identical outputs.
"""

from __future__ import annotations

import argparse
import os
import sys

from .belief import (MonitoringError, array_overseer_tick, init_beliefs,
                     most_likely_state)
from .harness import bench_scalability, evaluate_run, render_bench, render_report
from .ingest import IngestError, apply_loss, format_log, messages_by_tick, parse_log
from .model import ProgramError, load_program_path
from .progen import flatten_mu
from .sim import (COMM_POLICIES, MU_SAMPLED, SimConfig, SimulationError,
                  format_trace, parse_trace, simulate)
from .social import format_comm_model, learn_comm_model, parse_comm_model
from .yoyo import team_init_beliefs, team_most_likely, yoyo_tick

TICKS_ENV = "OVERHEAR_TICKS"


def _default_ticks() -> int:
    raw = os.environ.get(TICKS_ENV)
    if raw is None:
        return 200
    try:
        return int(raw)
    except ValueError:
        raise SimulationError(f"{TICKS_ENV} must be an integer, got {raw!r}")


def _read(path: str) -> str:
    with open(path, "r", encoding="utf-8") as fh:
        return fh.read()


def _emit(text: str, out: str | None):
    if out is None:
        sys.stdout.write(text)
    else:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)


def _load_recognizer(args):
    """Load the program named by --program, with optional flat-mu degradation."""
    p = load_program_path(args.program, team_mode=args.team_mode)
    if getattr(args, "flat_mu", None) is not None:
        p = flatten_mu(p, args.flat_mu)
    return p


def _load_comm(args):
    if getattr(args, "comm", None) is None:
        return None
    return parse_comm_model(_read(args.comm))


def _resolve_coherent(args) -> bool:
    if args.coherent is None:
        return args.mode == "yoyo"
    return args.coherent


# --- subcommand bodies ------------------------------------------------------


def _cmd_simulate(args) -> int:
    p = load_program_path(args.program, team_mode=args.team_mode)
    cfg = SimConfig(seed=args.seed, ticks=args.ticks, team_mode=args.team_mode,
                    comm_policy=args.comm_policy, send_prob=args.send_prob,
                    fail_agent=args.fail_agent, fail_from=args.fail_from,
                    fail_ticks=args.fail_ticks)
    trace, log = simulate(p, cfg)
    os.makedirs(args.out, exist_ok=True)
    _emit(format_trace(trace), os.path.join(args.out, "trace.txt"))
    _emit(format_log(log), os.path.join(args.out, "log.txt"))
    return 0


def _cmd_learn(args) -> int:
    model = None
    for path in args.log:
        model = learn_comm_model(parse_log(_read(path)), model,
                                 confidence=args.confidence)
    if model is None:
        raise IngestError("no logs given")
    _emit(format_comm_model(model), args.out)
    return 0


def _cmd_lose(args) -> int:
    survivors = apply_loss(parse_log(_read(args.log)), args.rate, args.seed)
    header = f"# loss rate={args.rate} seed={args.seed}\n"
    _emit(header + format_log(survivors), args.out)
    return 0


def _cmd_recognize(args) -> int:
    p = _load_recognizer(args)
    model = _load_comm(args)
    if model is not None:
        from .social import apply_comm_model
        p = apply_comm_model(p, model)
    log = parse_log(_read(args.log))
    ticks = args.ticks if args.ticks is not None else (
        (max(m.tick for m in log) + 2) if log else _default_ticks())
    by_tick = messages_by_tick(log)
    lines = []

    if args.mode == "yoyo":
        if not p.team_mode:
            raise MonitoringError("yoyo mode needs a team program (--team-mode)")
        b = team_init_beliefs(p)
        h = p.team_hierarchy
        teams = sorted(t for t in h.team_names
                       if h.members(t) and not h.child_teams(t))
        for t in range(ticks):
            yoyo_tick(p, b, by_tick.get(t, ()))
            for team in teams:
                path = p.path_names(team_most_likely(b, p, team))
                lines.append(f"{t} {team} {'/'.join(path)}")
    else:
        view = p.single_agent_view() if p.team_mode else p
        h = p.team_hierarchy
        agents = sorted(h.agent_names)
        known = set(agents)
        coherent = _resolve_coherent(args)
        if coherent:
            def recipients(m):
                if h.has_team(m.team):
                    return sorted(h.members(m.team))
                return [m.sender] if m.sender in known else []
        else:
            # unknown senders carry no evidence for any monitored unit
            def recipients(m):
                return [m.sender] if m.sender in known else []
        beliefs = {a: init_beliefs(view) for a in agents}
        programs = {a: view for a in agents}
        for t in range(ticks):
            array_overseer_tick(beliefs, programs, by_tick.get(t, ()),
                                recipients=recipients)
            for a in agents:
                path = view.path_names(most_likely_state(beliefs[a], view))
                lines.append(f"{t} {a} {'/'.join(path)}")

    _emit("".join(line + "\n" for line in lines), args.out)
    return 0


def _cmd_evaluate(args) -> int:
    p = load_program_path(args.program, team_mode=args.team_mode)
    rec = None
    if args.flat_mu is not None:
        rec = flatten_mu(p, args.flat_mu)
    trace = parse_trace(_read(args.truth))
    log = parse_log(_read(args.log))
    if args.loss is not None:
        log = apply_loss(log, args.loss, args.loss_seed)
    report = evaluate_run(p, trace, log, mode=args.mode,
                          temporal=args.temporal,
                          coherent=_resolve_coherent(args),
                          comm_model=_load_comm(args),
                          recognizer_program=rec, delay=args.delay)
    _emit(render_report(report), args.out)
    return 0


def _cmd_bench(args) -> int:
    p = load_program_path(args.program, team_mode=True)
    lo, sep, hi = args.agents.partition(":")
    if not sep:
        raise MonitoringError(f"--agents wants MIN:MAX, got {args.agents!r}")
    counts = range(int(lo), int(hi) + 1)
    rows = bench_scalability(p, counts, ticks=args.ticks)
    _emit(render_bench(rows), args.out)
    return 0


# --- argument grammar ---------------------------------------------------------


def _add_program(sub, required=True):
    sub.add_argument("--program", required=required, help="program document (JSON)")
    sub.add_argument("--team-mode", action="store_true",
                     help="load the program with team-level transition tags")


def _add_out(sub, help_text="output file (default stdout)"):
    sub.add_argument("--out", default=None, help=help_text)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="overhear",
        description="Infer the execution state of an agent team from its "
                    "overheard coordination messages.")
    sp = ap.add_subparsers(dest="subcommand", required=True)

    sim = sp.add_parser("simulate", help="run the simulator, write trace + log")
    _add_program(sim)
    sim.add_argument("--seed", type=int, required=True, help="simulation seed")
    sim.add_argument("--ticks", type=int, default=None,
                     help=f"run length (default ${TICKS_ENV} or 200)")
    sim.add_argument("--send-prob", type=float, default=1.0,
                     help="per-tick chance a blocked sender speaks")
    sim.add_argument("--comm-policy", choices=COMM_POLICIES, default=MU_SAMPLED,
                     help="announce transitions per mu, always, or never")
    sim.add_argument("--fail-agent", default=None,
                     help="agent whose messages are dropped during the outage")
    sim.add_argument("--fail-from", type=int, default=0,
                     help="first tick of the outage window")
    sim.add_argument("--fail-ticks", type=int, default=0,
                     help="outage length in ticks (0 disables)")
    sim.add_argument("--out", required=True,
                     help="directory for trace.txt and log.txt")
    sim.set_defaults(fn=_cmd_simulate)

    lrn = sp.add_parser("learn", help="build a communication model from logs")
    lrn.add_argument("--log", action="append", required=True,
                     help="message log (repeatable)")
    lrn.add_argument("--confidence", type=float, default=None,
                     help="mu assigned to predicted announcements (default 1.0)")
    _add_out(lrn)
    lrn.set_defaults(fn=_cmd_learn)

    lose = sp.add_parser("lose", help="drop an exact fraction of a log")
    lose.add_argument("--log", required=True, help="message log to filter")
    lose.add_argument("--rate", type=float, required=True,
                      help="fraction of messages to drop")
    lose.add_argument("--seed", type=int, required=True, help="loss seed")
    _add_out(lose)
    lose.set_defaults(fn=_cmd_lose)

    rec = sp.add_parser("recognize", help="emit per-tick most-likely states")
    _add_program(rec)
    rec.add_argument("--log", required=True, help="message log to stream")
    rec.add_argument("--mode", choices=("array", "yoyo"), default="array",
                     help="recognizer structure")
    rec.add_argument("--ticks", type=int, default=None,
                     help="ticks to replay (default: last message tick + 2)")
    rec.add_argument("--coherent", action=argparse.BooleanOptionalAction,
                     default=None,
                     help="route team messages to every member "
                          "(default: on for yoyo, off for array)")
    rec.add_argument("--comm", default=None, help="communication model file")
    rec.add_argument("--flat-mu", type=float, default=None,
                     help="replace every non-completion mu with this value")
    _add_out(rec)
    rec.set_defaults(fn=_cmd_recognize)

    ev = sp.add_parser("evaluate", help="score a recognizer against ground truth")
    _add_program(ev)
    ev.add_argument("--log", required=True, help="message log")
    ev.add_argument("--truth", required=True, help="ground-truth trace file")
    ev.add_argument("--mode", choices=("array", "yoyo"), default="yoyo",
                    help="recognizer structure")
    ev.add_argument("--temporal", action=argparse.BooleanOptionalAction,
                    default=True, help="use duration/transition probabilities")
    ev.add_argument("--coherent", action=argparse.BooleanOptionalAction,
                    default=None,
                    help="apply the coherence heuristic "
                         "(default: on for yoyo, off for array)")
    ev.add_argument("--comm", default=None, help="communication model file")
    ev.add_argument("--flat-mu", type=float, default=None,
                    help="degrade the recognizer's mu values to this constant")
    ev.add_argument("--delay", type=int, default=1,
                    help="checkpoint delay after each exchange")
    ev.add_argument("--loss", type=float, default=None,
                    help="drop this fraction of the log before scoring")
    ev.add_argument("--loss-seed", type=int, default=0, help="loss seed")
    _add_out(ev)
    ev.set_defaults(fn=_cmd_evaluate)

    ben = sp.add_parser("bench", help="scalability table across team sizes")
    ben.add_argument("--program", required=True, help="team program document")
    ben.add_argument("--agents", default="11:20",
                     help="agent count range MIN:MAX inclusive (default 11:20)")
    ben.add_argument("--ticks", type=int, default=100,
                     help="quiet ticks to instrument per size")
    _add_out(ben)
    ben.set_defaults(fn=_cmd_bench)

    return ap


def run_command(argv) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        if getattr(args, "ticks", None) is None and args.subcommand == "simulate":
            args.ticks = _default_ticks()
        return args.fn(args)
    except (ProgramError, IngestError, MonitoringError, SimulationError,
            OSError, ValueError) as exc:
        print(f"overhear {args.subcommand}: error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run_command(sys.argv[1:]))


if __name__ == "__main__":
    main()
