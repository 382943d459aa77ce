"""Command line entry point (``difight``)."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import analysis, harness
from .engine import Algorithm, simulate_communication
from .network import Network, generate_connected_network
from .strategies import SelectionStrategy, expected_comms


def _write(text, out):
    if out in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(out).write_text(text)


def cmd_generate_network(args):
    net = generate_connected_network(args.L, args.p, args.seed,
                                     self_loops=not args.no_self_loops)
    _write(json.dumps(net.to_dict(), indent=1) + "\n", args.out)
    logging.info("connected after %d retries", net.retries)


def _config_and_net(args):
    config = harness.ExperimentConfig.load(args.config)
    if getattr(args, "workers", None):
        config.workers = args.workers
    net = Network.load(args.net) if args.net else harness.experiment_network(config)
    if net.L != config.L:
        raise SystemExit(f"network has L={net.L} but config says L={config.L}")
    return config, net


def cmd_generate_instance(args):
    config, _ = _config_and_net(args)
    inst = harness.generate_instance(config, args.index, args.M)
    doc = inst.to_dict(K=config.K)
    mu = harness.instance_step_sizes(config, inst)
    doc["mu"] = mu["nodes"].tolist()
    doc["algorithm"] = config.algorithms[0]
    if config.strategy is not None:
        doc["strategy"] = config.strategy
    _write(json.dumps(doc) + "\n", args.out)


def cmd_run(args):
    config, net = _config_and_net(args)
    algo = args.algo or config.algorithms[0]
    inst = harness.generate_instance(config, args.index, args.M)
    trace = harness.run_algorithm(config, net, inst, algo)
    _write(trace.to_csv(), args.out)
    if args.summary:
        Path(args.summary).write_text(trace.to_json() + "\n")


def cmd_sweep(args):
    config, net = _config_and_net(args)
    rows = harness.recovery_sweep(config, net)
    _write(harness.write_csv(rows, harness.SWEEP_COLUMNS), args.out)


def cmd_msd(args):
    config, net = _config_and_net(args)
    study = harness.msd_study(config, net, args.M)
    _write(harness.write_csv(study.rows(), ["algo", "strategy", "n", "msd"]), args.out)


def _context_from_summary(net, doc, args):
    algo = args.algo or doc.get("algorithm", "DiFIGHT")
    strategy = doc.get("strategy")
    pi = None
    if strategy is not None:
        pi = expected_comms(SelectionStrategy.from_dict(strategy), net, "DiFIGHT", 1, 1).pi
    if "omega" in doc:
        return analysis.BoundContext(doc["omega"], doc["mu"], doc.get("b", np.zeros(net.L)),
                                     net.combination, analysis.algorithm_constant(algo), pi,
                                     doc.get("certified", False)), strategy is not None
    inst = harness.Instance.from_dict(doc)
    if len(inst.costs) != net.L:
        raise SystemExit("cost summary and network disagree on the node count")
    K = int(doc["K"])
    mu = doc.get("mu")
    if mu is None:
        from .engine import default_step_sizes
        mu = default_step_sizes(inst.costs, K, args.seed)
    ctx = analysis.build_context(net, inst.costs, mu, inst.x_star, K, algo, pi,
                                 seed=args.seed)
    return ctx, strategy is not None


def cmd_analyze_bounds(args):
    net = Network.load(args.net)
    doc = json.loads(Path(args.cost_summary).read_text())
    ctx, randomized = _context_from_summary(net, doc, args)
    report = analysis.randomized_bound(ctx) if randomized else analysis.deterministic_bound(ctx)
    out = report.to_dict()
    out["omega"] = ctx.omega.tolist()
    out["alpha"] = ctx.alpha_algo
    _write(json.dumps(out, indent=1) + "\n", args.out)


def cmd_comms(args):
    net = Network.load(args.net)
    strategy = None if args.strategy == "deterministic" else SelectionStrategy(args.strategy,
                                                                               args.r)
    profile = expected_comms(strategy, net, args.algo, args.K, args.N)
    sim = simulate_communication(strategy, net, args.algo, args.K, args.N, args.steps,
                                 args.seed)
    lines = ["node,degree,pi,T_expected,T_simulated,R_expected,R_simulated"]
    for v in range(net.L):
        lines.append(",".join([
            str(v), str(int(net.degrees[v])), repr(float(profile.pi[v])),
            repr(float(profile.transmit[v])), repr(sim.transmit[v] / args.steps),
            repr(float(profile.receive[v])), repr(sim.receive[v] / args.steps),
        ]))
    _write("\n".join(lines) + "\n", args.out)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="difight", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate-network", help="sample a connected Erdos-Renyi network")
    p.add_argument("--L", type=int, required=True)
    p.add_argument("--p", type=float, default=None, help="edge probability (default ln L / L)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--no-self-loops", action="store_true")
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_generate_network)

    def experiment(p):
        p.add_argument("--config", required=True)
        p.add_argument("--net", default=None)
        p.add_argument("--out", default="-")

    p = sub.add_parser("generate-instance", help="write one instance's measurements as JSON")
    experiment(p)
    p.add_argument("--index", type=int, default=0)
    p.add_argument("--M", type=int, default=None)
    p.set_defaults(func=cmd_generate_instance)

    p = sub.add_parser("run", help="run one algorithm on one instance, trace as CSV")
    experiment(p)
    p.add_argument("--algo", default=None)
    p.add_argument("--index", type=int, default=0)
    p.add_argument("--M", type=int, default=None)
    p.add_argument("--summary", default=None, help="also write a JSON summary here")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", help="recovery probability over the config's M list")
    experiment(p)
    p.add_argument("--workers", type=int, default=None)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("msd", help="instance-averaged MSD curves")
    experiment(p)
    p.add_argument("--M", type=int, default=None)
    p.add_argument("--workers", type=int, default=None)
    p.set_defaults(func=cmd_msd)

    p = sub.add_parser("analyze-bounds", help="stability and limit bounds as JSON")
    p.add_argument("--net", required=True)
    p.add_argument("--cost-summary", required=True)
    p.add_argument("--algo", default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_analyze_bounds)

    p = sub.add_parser("comms", help="analytic vs simulated per-node communication")
    p.add_argument("--net", required=True)
    p.add_argument("--strategy", default="rp",
                   help="rp, rnp, rgp, rgnp or deterministic")
    p.add_argument("--r", type=int, default=2)
    p.add_argument("--algo", default="DiFIGHT", type=lambda s: Algorithm.parse(s).value)
    p.add_argument("--K", type=int, default=10)
    p.add_argument("--N", type=int, default=200)
    p.add_argument("--steps", type=int, default=100_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_comms)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    args.func(args)


if __name__ == "__main__":
    main()
