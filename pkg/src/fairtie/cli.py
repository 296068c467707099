"""Command-line entry point. All output is JSON unless ``--pretty`` is given.

Exit codes: 0 success, 1 a certification or audit failed, 2 bad usage or input.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Any, Sequence

from . import harness, mechanisms
from .io import FormatError, distribution_to_obj, format_rational, instance_to_obj, load_distribution, load_instance, matrix_to_obj, parse_rational
from .model import AgentOrdering, Instance, InvalidInstance
from .picking import cuq_fractional
from .rounding import faithful_implement, reduce_support
from .shares import SizeExceeded, share_report

OUTPUT_DIR_ENV = "FAIRTIE_OUTPUT_DIR"
RUN_MECHANISMS = ("logn", "public-deficiency", "loglog", "two-agent")
AUDIT_MECHANISMS = ("logn", "public-deficiency", "loglog", "two-agent", "uniform")


class UsageError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    """Validated flags of one invocation."""

    subcommand: str
    instance_path: str | None = None
    mechanism: str | None = None
    alpha: Fraction | None = None
    rho: Fraction | None = None
    seed: int | None = None
    threshold_override: Fraction | None = None
    output: str | None = None

    def __post_init__(self) -> None:
        if self.alpha is not None and self.mechanism != "public-deficiency":
            raise UsageError("--alpha applies only to --mechanism public-deficiency")
        if self.threshold_override is not None and self.mechanism != "loglog":
            raise UsageError("--threshold-override applies only to --mechanism loglog")
        if self.seed is not None and self.subcommand == "run" and self.mechanism != "loglog":
            raise UsageError("--seed applies only to the randomized mechanism loglog")
        if self.seed is not None and self.seed < 0:
            raise UsageError("--seed must be a non-negative integer")


def _rational(text: str) -> Fraction:
    try:
        return parse_rational(text, "argument")
    except FormatError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _ordering(text: str) -> AgentOrdering:
    try:
        return AgentOrdering(tuple(int(t) for t in text.split(",")))
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"--pi: {exc}") from None


def _int_list(text: str) -> list[int]:
    try:
        return [int(t) for t in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--pretty", action="store_true", help="human-readable output")
    common.add_argument("--output", help="also write the JSON result to this file")

    p = argparse.ArgumentParser(prog="fairtie", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("shares", parents=[common], help="PROP, TPS and optionally MMS per agent")
    s.add_argument("instance")
    s.add_argument("--mms", action="store_true", help="run the exhaustive maximin-share search")

    s = sub.add_parser("cuq", parents=[common], help="cyclic unit-quota fractional allocation")
    s.add_argument("instance")
    s.add_argument("--pi", type=_ordering, help="agent ordering, e.g. 2,0,1 (default identity)")

    s = sub.add_parser("round", parents=[common], help="faithfully round a fractional allocation")
    s.add_argument("instance")
    s.add_argument("--mechanism", choices=("cuq", "uniform"), required=True)
    s.add_argument("--pi", type=_ordering)
    s.add_argument("--reduce", action="store_true", help="reduce the support afterwards")

    s = sub.add_parser("run", parents=[common], help="run a mechanism and certify its output")
    s.add_argument("instance")
    s.add_argument("--mechanism", choices=RUN_MECHANISMS, required=True)
    s.add_argument("--alpha", type=_rational)
    s.add_argument("--seed", type=int)
    s.add_argument("--threshold-override", type=_rational)
    s.add_argument("--mms", action="store_true", help="also certify against the maximin share")

    s = sub.add_parser("audit", parents=[common], help="exhaustive misreport audit")
    s.add_argument("instance")
    s.add_argument("--mechanism", choices=AUDIT_MECHANISMS, required=True)
    s.add_argument("--agent", type=int, help="audit only this agent (default: all)")
    s.add_argument("--with-deficiency", action="store_true", help="also vary the reported deficiency")

    s = sub.add_parser("certify", parents=[common], help="check a distribution against a share ratio")
    s.add_argument("distribution")
    s.add_argument("instance")
    s.add_argument("--rho", type=_rational, required=True)
    s.add_argument("--basis", choices=("tps", "mms", "TPS", "MMS"), default="tps")

    s = sub.add_parser("corpus", parents=[common], help="print the built-in adversarial instances")
    s.add_argument("--name", help="print only this instance")

    s = sub.add_parser("weights", parents=[common], help="Monte-Carlo statistics of ordering weights")
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--deficiencies", type=_int_list, required=True)
    s.add_argument("--trials", type=int, default=10000)
    s.add_argument("--seed", type=int, default=0)
    return p


def _read(path: str) -> str:
    try:
        return Path(path).read_text()
    except OSError as exc:
        raise UsageError(f"{path}: {exc.strerror}") from None


def _instance(path: str) -> Instance:
    try:
        return load_instance(_read(path))
    except FormatError as exc:
        raise FormatError(f"{path}: {exc}") from None


def _certification_obj(cert: harness.Certification) -> dict[str, Any]:
    ratio = cert.min_ratio()
    return {
        "passed": cert.passed,
        "rho": format_rational(cert.rho),
        "basis": cert.basis,
        "shares": [format_rational(s) for s in cert.shares],
        "values": [[format_rational(v) for v in row] for row in cert.values],
        "min_ratio": None if ratio is None else format_rational(ratio),
        "failures": [
            {"allocation": w.allocation, "agent": w.agent, "value": format_rational(w.value), "share": format_rational(w.share)}
            for w in cert.failures
        ],
    }


def cmd_shares(args: argparse.Namespace) -> tuple[Any, int]:
    inst = _instance(args.instance)
    out = []
    for i, v in enumerate(inst.valuations):
        rep = share_report(v, inst.n, with_mms=args.mms)
        out.append(
            {
                "agent": i,
                "prop": format_rational(rep.prop),
                "tps": format_rational(rep.tps),
                "mms": None if rep.mms is None else format_rational(rep.mms),
            }
        )
    return {"n": inst.n, "m": inst.m, "agents": out}, 0


def cmd_cuq(args: argparse.Namespace) -> tuple[Any, int]:
    inst = _instance(args.instance)
    pi = args.pi or AgentOrdering.identity(inst.n)
    _check_pi(pi, inst)
    return {"pi": list(pi.order), "cuq": matrix_to_obj(cuq_fractional(inst.orders(), pi))}, 0


def _check_pi(pi: AgentOrdering, inst: Instance) -> None:
    if pi.n != inst.n:
        raise UsageError(f"--pi has {pi.n} agents, instance has {inst.n}")


def cmd_round(args: argparse.Namespace) -> tuple[Any, int]:
    inst = _instance(args.instance)
    if args.mechanism == "uniform":
        dist = mechanisms.uniform_baseline(inst).distribution
    else:
        pi = args.pi or AgentOrdering.identity(inst.n)
        _check_pi(pi, inst)
        if inst.m == 0:
            raise UsageError("rounding needs at least one good")
        dist = faithful_implement(cuq_fractional(inst.orders(), pi), inst.orders())
    if args.reduce:
        dist = reduce_support(dist)
    return distribution_to_obj(dist), 0


def run_mechanism(inst: Instance, cfg: RunConfig) -> mechanisms.MechanismResult:
    if cfg.mechanism == "logn":
        return mechanisms.mechanism_logn(inst)
    if cfg.mechanism == "public-deficiency":
        return mechanisms.mechanism_public_deficiency(inst, cfg.alpha or Fraction(1, 4))
    if cfg.mechanism == "loglog":
        return mechanisms.mechanism_loglog(inst, cfg.seed or 0, cfg.threshold_override)
    return mechanisms.mechanism_two_agents(inst)


def cmd_run(args: argparse.Namespace) -> tuple[Any, int]:
    cfg = RunConfig(
        "run", args.instance, args.mechanism, args.alpha, None, args.seed, args.threshold_override, args.output
    )
    inst = _instance(args.instance)
    res = run_mechanism(inst, cfg)
    cert = harness.certify_expost(res.distribution, inst, res.rho, "TPS")
    out: dict[str, Any] = {"mechanism": cfg.mechanism, **distribution_to_obj(res.distribution)}
    out["certification"] = _certification_obj(cert)
    ok = cert.passed
    if args.mms:
        mms_cert = harness.certify_expost(res.distribution, inst, res.rho, "MMS")
        out["certification_mms"] = _certification_obj(mms_cert)
        ok = ok and mms_cert.passed
    for key in ("branch", "seed", "case"):
        val = getattr(res, key)
        if val is not None:
            out[key] = val
    if res.ordering is not None:
        out["pi"] = list(res.ordering.order)
    if res.alpha is not None:
        out["alpha"] = format_rational(res.alpha)
    if res.deficiencies is not None:
        out["deficiencies"] = list(res.deficiencies)
    if res.epsilon_bound is not None:
        out["epsilon_bound"] = format_rational(res.epsilon_bound)
    return out, 0 if ok else 1


def cmd_audit(args: argparse.Namespace) -> tuple[Any, int]:
    inst = _instance(args.instance)
    agents = range(inst.n) if args.agent is None else [args.agent]
    if args.agent is not None and not 0 <= args.agent < inst.n:
        raise UsageError(f"--agent must lie in 0..{inst.n - 1}")
    if args.mechanism == "two-agent" and inst.n != 2:
        raise UsageError("two-agent audits need exactly two agents")
    d_truth = None
    d_space = None
    if args.mechanism in ("public-deficiency", "loglog"):
        alpha = Fraction(1, 4) if args.mechanism == "public-deficiency" else mechanisms.loglog_alpha(inst.n)
        d_truth = mechanisms.deficiencies(inst, alpha)
        if args.with_deficiency:
            d_space = list(range(inst.n + 1))
    elif args.with_deficiency:
        raise UsageError("--with-deficiency applies only to deficiency mechanisms")
    eps = mechanisms.loglog_epsilon_bound(inst.n) if args.mechanism == "loglog" else Fraction(0)
    mech = harness.audited(args.mechanism)
    reports = []
    ok = True
    for a in agents:
        rep = harness.audit_tie(args.mechanism, mech, inst, a, d_space, d_truth, eps)
        ok = ok and rep.holds
        reports.append(
            {
                "agent": rep.agent,
                "deviation_space": rep.deviation_space,
                "deviations": rep.deviations,
                "truthful_value": format_rational(rep.truthful_value),
                "best_deviation_value": format_rational(rep.best_deviation_value),
                "verdict": rep.verdict,
                "witness": rep.witness,
            }
        )
    return {"mechanism": args.mechanism, "reports": reports}, 0 if ok else 1


def cmd_certify(args: argparse.Namespace) -> tuple[Any, int]:
    inst = _instance(args.instance)
    try:
        dist = load_distribution(_read(args.distribution), inst.m)
    except FormatError as exc:
        raise FormatError(f"{args.distribution}: {exc}") from None
    if dist.n != inst.n:
        raise UsageError(f"distribution has {dist.n} agents, instance has {inst.n}")
    cert = harness.certify_expost(dist, inst, args.rho, args.basis)
    return _certification_obj(cert), 0 if cert.passed else 1


def cmd_corpus(args: argparse.Namespace) -> tuple[Any, int]:
    items = harness.adversarial_corpus()
    if args.name is not None:
        items = [(k, v) for k, v in items if k == args.name]
        if not items:
            raise UsageError(f"no corpus instance named {args.name!r}")
    return [{"name": k, "instance": instance_to_obj(v)} for k, v in items], 0


def cmd_weights(args: argparse.Namespace) -> tuple[Any, int]:
    if args.n < 1 or args.trials < 1 or args.seed < 0:
        raise UsageError("--n and --trials must be positive, --seed non-negative")
    if len(args.deficiencies) != args.n or any(not 0 <= d <= args.n for d in args.deficiencies):
        raise UsageError("--deficiencies needs n integers in 0..n")
    st = harness.weight_statistics(args.n, args.deficiencies, args.trials, args.seed)
    return {
        "n": st.n,
        "trials": st.trials,
        "seed": st.seed,
        "exact_mean": format_rational(st.exact_mean),
        "sample_mean_float": st.sample_mean,
        "sample_std_error_float": st.sample_std_error,
        "max_cyclic_weight": format_rational(st.max_cyclic_weight),
        "threshold": format_rational(st.threshold),
        "exceed_fraction_float": st.exceed_fraction,
        "harmonic_bound": format_rational(st.harmonic_bound),
    }, 0


COMMANDS = {
    "shares": cmd_shares,
    "cuq": cmd_cuq,
    "round": cmd_round,
    "run": cmd_run,
    "audit": cmd_audit,
    "certify": cmd_certify,
    "corpus": cmd_corpus,
    "weights": cmd_weights,
}


def render_pretty(obj: Any) -> str:
    """Plain-text rendering: support tables for lotteries, indented JSON otherwise."""
    if isinstance(obj, dict) and "support" in obj:
        lines = ["prob      bundles"]
        for entry in obj["support"]:
            bundles = "  ".join("{" + ",".join(map(str, b)) + "}" for b in entry["bundles"])
            lines.append(f"{entry['prob']:<9} {bundles}")
        rest = {k: v for k, v in obj.items() if k != "support"}
        if rest:
            lines.append(json.dumps(rest, indent=2))
        return "\n".join(lines)
    if isinstance(obj, dict) and "agents" in obj and "n" in obj:
        lines = ["agent  prop  tps  mms"]
        for a in obj["agents"]:
            lines.append(f"{a['agent']:<6} {a['prop']}  {a['tps']}  {a['mms'] if a['mms'] is not None else '-'}")
        return "\n".join(lines)
    return json.dumps(obj, indent=2)


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        result, code = COMMANDS[args.command](args)
    except (UsageError, FormatError, InvalidInstance, SizeExceeded, mechanisms.WrongAgentCount, mechanisms.AlphaTooLarge, harness.SpaceTooLarge) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    text = json.dumps(result, sort_keys=False)
    target = args.output
    if target is None and os.environ.get(OUTPUT_DIR_ENV):
        target = str(Path(os.environ[OUTPUT_DIR_ENV]) / f"{args.command}.json")
    if target is not None:
        Path(target).parent.mkdir(parents=True, exist_ok=True)
        Path(target).write_text(text + "\n")
    print(render_pretty(result) if args.pretty else text)
    return code


if __name__ == "__main__":
    sys.exit(main())
