"""Command-line front end.

Reads network, system or problem JSON, runs one analysis and prints a
deterministic JSON report.  Exit codes: 0 ok, 1 parse/validation error,
2 analysis error, 3 negative verdict.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from fractions import Fraction
from pathlib import Path

from . import conet, decsys, linearizer, netmodel, simkit
from .exactalg import LtiError, format_scalar, parse_scalar, scalar_matrix_to_json
from .netmodel import RankConfig, ValidationError

EXIT_OK, EXIT_INPUT, EXIT_ANALYSIS, EXIT_NEGATIVE = 0, 1, 2, 3


class InputError(Exception):
    pass


class NegativeVerdict(Exception):
    def __init__(self, report: dict):
        super().__init__("negative verdict")
        self.report = report


# ---------------------------------------------------------------------------
# input helpers


def _load(path: str) -> tuple[dict, str]:
    try:
        raw = Path(path).read_bytes()
    except OSError as e:
        raise InputError(f"cannot read {path}: {e}") from e
    try:
        return json.loads(raw), hashlib.sha256(raw).hexdigest()
    except json.JSONDecodeError as e:
        raise InputError(f"{path} is not valid JSON: {e}") from e


def _with_field(data: dict, field: str | None) -> dict:
    if field is not None:
        data = dict(data)
        data["field"] = field
    return data


def _load_network(args) -> tuple[netmodel.LtiNetwork, str]:
    data, digest = _load(args.input)
    net = netmodel.network_from_json(_with_field(data, args.field))
    return net, digest


def _load_system(args) -> tuple[decsys.DecSystem, str]:
    data, digest = _load(args.input)
    return decsys.system_from_json(_with_field(data, args.field)), digest


def _load_problem(args) -> tuple[conet.ControlProblem, str]:
    data, digest = _load(args.input)
    if args.field is not None and isinstance(data.get("network"), dict):
        data = dict(data)
        data["network"] = _with_field(data["network"], args.field)
    return conet.problem_from_json(data), digest


def _lambda(s: str):
    try:
        return parse_scalar(s)
    except ValueError as e:
        raise InputError(str(e)) from e


def _cfg(args, need_seed: bool) -> RankConfig:
    if need_seed and args.seed is None:
        raise InputError(f"'{args.command}' is randomized; pass --seed")
    if args.sample_bound < 1 or args.rounds < 1:
        raise InputError("--sample-bound and --rounds must be positive")
    return RankConfig(args.sample_bound, args.rounds, args.seed or 0)


def _pairs(net: netmodel.LtiNetwork, tx: str | None, rx: str | None) -> list[tuple[str, str]]:
    txs = [tx] if tx else net.transmitters
    rxs = [rx] if rx else net.receivers
    return [(t, r) for t in txs for r in rxs]


def _pair_key(net, t, r) -> str:
    return r if len(net.transmitters) == 1 else f"{t}->{r}"


# ---------------------------------------------------------------------------
# commands


def cmd_capacity(args) -> dict:
    net, digest = _load_network(args)
    cfg = _cfg(args, True)
    at = _lambda(args.at) if args.at else None
    out = {}
    for t, r in _pairs(net, args.tx, args.rx):
        out[_pair_key(net, t, r)] = netmodel.generic_rank(net, at, cfg, t, r)
    return {"inputs_sha256": digest, "at": args.at or "z", "capacity": out}


def cmd_mincut(args) -> dict:
    net, digest = _load_network(args)
    at = _lambda(args.at) if args.at else None
    out = {}
    for t, r in _pairs(net, args.tx, args.rx):
        k, cut = netmodel.mincut_rank(net, at, t, r)
        out[_pair_key(net, t, r)] = {"mincut": k, "witness": cut.sorted([n.id for n in net.nodes])}
    return {"inputs_sha256": digest, "at": args.at or "z", "mincut": out}


def cmd_verify(args) -> dict:
    net, digest = _load_network(args)
    cfg = _cfg(args, True)
    at = _lambda(args.at) if args.at else None
    rows, ok = {}, True
    for t, r in _pairs(net, args.tx, args.rx):
        g = netmodel.generic_rank(net, at, cfg, t, r)
        k, cut = netmodel.mincut_rank(net, at, t, r)
        rows[_pair_key(net, t, r)] = {"generic_rank": g, "mincut": k, "holds": g == k}
        ok &= g == k
    report = {"inputs_sha256": digest, "at": args.at or "z", "pairs": rows, "mincut_equals_maxflow": ok}
    if not ok:
        raise NegativeVerdict(report)
    return report


def cmd_linearize(args) -> dict:
    net, digest = _load_network(args)
    if args.mode == "ptop":
        tx, rx = net.terminal_pair(args.tx, args.rx)
        d_ax = args.d_ax if args.d_ax is not None else max(net.node(tx).d_in, net.node(rx).d_out)
        fn = linearizer.linearize_with_aux_receiver if args.aux_receiver else linearizer.linearize_ptop
        lin = fn(net, d_ax, tx, rx)
    else:
        if args.d_ax is not None:
            d_ax = args.d_ax
        else:
            d_ax = max([net.node(t).d_in for t in net.transmitters] + [net.node(r).d_out for r in net.receivers])
        targets = [int(x) for x in args.targets.split(",")] if args.targets else None
        lin = linearizer.linearize_multi(net, args.mode, d_ax, targets)
        if args.aux_receiver:
            raise InputError("--aux-receiver applies to ptop mode only")
    return {
        "inputs_sha256": digest,
        "mode": args.mode,
        "offset_d": lin.offset_d,
        "annex": lin.annex(),
        "receivers": {k: list(v) for k, v in lin.receivers.items()},
        "network": netmodel.network_to_json(lin.base),
    }


def cmd_code_synth(args) -> dict:
    net, digest = _load_network(args)
    cfg = _cfg(args, True)
    if len(net.receivers) == 1 and len(net.transmitters) == 1:
        gains = linearizer.synthesize_gains(net, cfg)
        tx, rx = net.terminal_pair()
        ranks = {rx: netmodel.transfer_rank(net, gains, tx, rx)}
    else:
        gains, ranks = linearizer.synthesize_multicast_gains(net, cfg)
    out = {"relays": {k: scalar_matrix_to_json(v) for k, v in sorted(gains.relays.items())}}
    if gains.tx is not None:
        out["tx"] = scalar_matrix_to_json(gains.tx)
    if gains.rx is not None:
        out["rx"] = scalar_matrix_to_json(gains.rx)
    return {"inputs_sha256": digest, "gains": out, "achieved_rank": dict(sorted(ranks.items()))}


def cmd_fixed_modes(args) -> dict:
    sys_, digest = _load_system(args)
    cfg = _cfg(args, True)
    if args.lam == ["auto"] or not args.lam:
        lams = decsys.unstable_eigenvalues(sys_.A, sys_.field)
    else:
        lams = [_lambda(s) for s in args.lam]
    rows = []
    for lam in lams:
        rep = decsys.equivalence_report(sys_, lam, cfg, branch=args.branch)
        rows.append({"lambda": format_scalar(lam), **rep.as_dict()})
    return {"inputs_sha256": digest, "branch": args.branch, "eigenvalues": rows,
            "unstable_fixed_mode": any(r["fixed"] for r in rows)}


def cmd_externalize(args) -> dict:
    sys_, digest = _load_system(args)
    if args.at is None:
        raise InputError("externalize needs --lambda")
    lam = _lambda(args.at)
    if args.proper and not sys_.proper:
        sys_ = sys_.with_zero_d()
    fn = decsys.externalize_jordan if args.form == "jordan" else decsys.externalize_canonical
    net = fn(sys_, lam)
    return {"inputs_sha256": digest, "form": args.form, "lambda": format_scalar(lam), "network": netmodel.network_to_json(net)}


STAB_MODES = {
    "ptop": conet.stabilizability_ptop,
    "multicast": conet.stabilizability_multicast,
    "broadcast": conet.stabilizability_broadcast,
    "unicast-check": conet.stabilizability_unicast_check,
}


def cmd_stabilizability(args) -> dict:
    prob, digest = _load_problem(args)
    mode = args.mode or (prob.mode if prob.mode != "unicast" else "unicast-check")
    want = "unicast" if mode == "unicast-check" else mode
    if prob.mode != want:
        raise InputError(f"problem mode is {prob.mode!r} but --mode {mode} was requested")
    return {"inputs_sha256": digest, **STAB_MODES[mode](prob)}


def _synthesize(prob, mode, cfg):
    if prob.mode != mode:
        raise InputError(f"problem mode is {prob.mode!r} but --mode {mode} was requested")
    fn = conet.synthesize_ptop if mode == "ptop" else conet.synthesize_broadcast
    return fn(prob, cfg)


def cmd_synthesize(args) -> dict:
    prob, digest = _load_problem(args)
    cfg = _cfg(args, True)
    mode = args.mode or prob.mode
    try:
        design = _synthesize(prob, mode, cfg)
    except (conet.NotStabilizable, conet.NotIndependentlyStabilizable) as e:
        check = conet.stabilizability_ptop if mode == "ptop" else conet.stabilizability_broadcast
        raise NegativeVerdict({"inputs_sha256": digest, "verdict": "not stabilizable", "reason": str(e),
                               "conditions": check(prob)}) from e
    return {"inputs_sha256": digest, "design": design.as_dict()}


def cmd_simulate(args) -> dict:
    prob, digest = _load_problem(args)
    cfg = _cfg(args, True)
    try:
        design = _synthesize(prob, args.mode or prob.mode, cfg)
    except (conet.NotStabilizable, conet.NotIndependentlyStabilizable) as e:
        raise NegativeVerdict({"inputs_sha256": digest, "verdict": "not stabilizable", "reason": str(e)}) from e
    try:
        dist = simkit.DisturbanceSpec(args.disturbance, Fraction(args.amplitude), args.target, cfg.seed)
    except ValueError as e:
        raise InputError(str(e)) from e
    trace = simkit.simulate(design, dist, args.steps)
    ok = simkit.boundedness_verdict(trace, design, Fraction(args.growth))
    if args.csv:
        Path(args.csv).write_text(trace.to_csv(args.precision))
    report = {
        "inputs_sha256": digest,
        "steps": args.steps,
        "disturbance": {"kind": dist.kind, "amplitude": format_scalar(dist.amplitude), "target": dist.target},
        "peak_norm": format_scalar(trace.peak),
        "final_norm": format_scalar(trace.norms[-1]),
        "certificate_stable": design.stable,
        "bounded": ok,
        "csv": args.csv,
    }
    if not ok:
        raise NegativeVerdict(report)
    return report


def cmd_realize(args) -> dict:
    prob, digest = _load_problem(args)
    real = conet.realize_closed_network(prob)
    return {
        "inputs_sha256": digest,
        "controllers": real.roles,
        "plant_states": [list(s) for s in real.plant_slices],
        "channel_states": {f"{s}->{d}": list(v) for (s, d), v in sorted(real.channel_slices.items())},
        "system": decsys.system_to_json(real.system),
    }


COMMANDS = {
    "capacity": cmd_capacity,
    "mincut": cmd_mincut,
    "verify": cmd_verify,
    "linearize": cmd_linearize,
    "code-synth": cmd_code_synth,
    "fixed-modes": cmd_fixed_modes,
    "externalize": cmd_externalize,
    "stabilizability": cmd_stabilizability,
    "synthesize": cmd_synthesize,
    "simulate": cmd_simulate,
    "realize": cmd_realize,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="seed for randomized steps (required where sampling happens)")
    common.add_argument("--rounds", type=int, default=3, help="independent sampling rounds")
    common.add_argument("--sample-bound", type=int, default=10**6, help="integer sampling range [-S, S]")
    common.add_argument("--field", choices=["Q", "Qi"], default=None, help="override the field declared in the input")

    p = argparse.ArgumentParser(prog="ltinet", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    def add(name, help_):
        sp = sub.add_parser(name, parents=[common], help=help_)
        sp.add_argument("input", help="input JSON file")
        return sp

    for name, help_ in (("capacity", "generic transfer rank per receiver"),
                        ("mincut", "mincut rank with a witness cut per receiver"),
                        ("verify", "check generic rank = mincut rank per receiver")):
        sp = add(name, help_)
        sp.add_argument("--lambda", dest="at", default=None, help="evaluate at z = lambda instead of symbolically")
        sp.add_argument("--tx")
        sp.add_argument("--rx")

    sp = add("linearize", "linearized network with rank thresholds")
    sp.add_argument("--mode", choices=["ptop", "multicast", "broadcast", "unicast"], default="ptop")
    sp.add_argument("--aux-receiver", action="store_true", help="add the auxiliary receiver hearing relays only")
    sp.add_argument("--d-ax", type=int, default=None, help="width of each circulation arc")
    sp.add_argument("--targets", default=None, help="comma-separated rank targets d1,d2[,d3,d4]")
    sp.add_argument("--tx")
    sp.add_argument("--rx")

    add("code-synth", "relay gains achieving the mincut rank at every receiver")

    sp = add("fixed-modes", "fixed-mode verdicts with all equivalent statements")
    sp.add_argument("--lambda", dest="lam", nargs="*", default=["auto"], help="eigenvalues to test, or 'auto'")
    sp.add_argument("--branch", choices=["canonical", "jordan"], default="canonical")

    sp = add("externalize", "decentralized system to LTI network at z = lambda")
    sp.add_argument("--form", choices=["canonical", "jordan"], default="canonical")
    sp.add_argument("--proper", action="store_true", help="use the proper-system form even without D")
    sp.add_argument("--lambda", dest="at", default=None)

    sp = add("stabilizability", "stabilizability conditions of a control problem")
    sp.add_argument("--mode", choices=list(STAB_MODES), default=None)

    sp = add("synthesize", "relay, observer and controller design with a stability certificate")
    sp.add_argument("--mode", choices=["ptop", "broadcast"], default=None)

    sp = add("simulate", "synthesize, then simulate the closed loop exactly")
    sp.add_argument("--mode", choices=["ptop", "broadcast"], default=None)
    sp.add_argument("--steps", type=int, default=200)
    sp.add_argument("--disturbance", choices=list(simkit.KINDS), default="alternating")
    sp.add_argument("--amplitude", default="1")
    sp.add_argument("--target", choices=list(simkit.TARGETS), default="both")
    sp.add_argument("--growth", default="1", help="allowed excess of the late peak over the early peak, as a multiple of the early peak")
    sp.add_argument("--csv", default=None, help="write the trace here")
    sp.add_argument("--precision", type=int, default=12)

    add("realize", "closed-network state-space realization")
    return p


def run(argv: list[str] | None = None, out=None, err=None) -> int:
    out = out or sys.stdout
    err = err or sys.stderr
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if e.code == 0 else EXIT_INPUT
    config = {"seed": args.seed, "rounds": args.rounds, "sample_bound": args.sample_bound, "field": args.field}
    code = EXIT_OK
    try:
        result = COMMANDS[args.command](args)
    except NegativeVerdict as e:
        result, code = e.report, EXIT_NEGATIVE
    except (InputError, ValidationError, ValueError) as e:
        print(f"error: {e}", file=err)
        return EXIT_INPUT
    except LtiError as e:
        print(f"analysis error ({type(e).__name__}): {e}", file=err)
        return EXIT_ANALYSIS
    report = {"command": args.command, "config": config, **result}
    out.write(json.dumps(report, indent=2, sort_keys=True) + "\n")
    return code


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
