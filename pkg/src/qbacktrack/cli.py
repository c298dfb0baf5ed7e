"""Command-line front door.

Subcommands: gen-tree, resistance, spectrum, estimate-res, find-marked,
find-all, detect, descent-sim, grover-scaling, verify-all, and run (replay a
saved experiment spec).  Every flag can be overridden by an environment
variable named ``QBACKTRACK_<FLAG>`` (dashes to underscores, upper case).
Output is JSON by default; the run-style commands also emit CSV rows via
``--out csv``.  All numbers are serialized at full precision with sorted
keys, so identical specs and seeds produce byte-identical files.

Randomness: one 64-bit master seed per invocation; trials draw generators
spawned per trial index, so ``--jobs`` parallelism cannot change results,
only their wall-clock time.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass

import numpy as np

from . import __version__
from .algorithms import (
    EstimateResConfig,
    WalkSimulator,
    classical_descent,
    detect_existence,
    estimate_res,
    find_all,
    find_marked,
    k_doubling_find,
)
from .descent import descent_chain, exact_hitting_times, hitting_time_bound, simulate_descent
from .experiments import default_corpus, grover_scaling, verify_all
from .resistance import kappa_assignment, resistance_profile
from .trees import (
    build_complete_tree,
    build_dpll_tree,
    build_path,
    build_random_tree,
    build_star,
    shallowest_marked,
    solution_tree,
    tree_from_json,
    tree_to_json,
)
from .walk import build_walk_operator, spectral_decomposition

ENV_PREFIX = "QBACKTRACK_"


def _env(flag: str, fallback):
    return os.environ.get(ENV_PREFIX + flag.upper().replace("-", "_"), fallback)


def _json_default(value):
    if isinstance(value, float) and math.isinf(value):
        return "inf"
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (np.floating,)):
        return float(value)
    raise TypeError(f"cannot serialize {type(value)!r}")


def _emit(payload, args) -> None:
    if getattr(args, "out", "json") == "csv":
        rows = payload if isinstance(payload, list) else [payload]
        buffer = io.StringIO()
        writer = csv.DictWriter(buffer, fieldnames=list(rows[0].keys()))
        writer.writeheader()
        for row in rows:
            writer.writerow(row)
        text = buffer.getvalue()
    else:
        text = json.dumps(payload, sort_keys=True, default=_json_default) + "\n"
    output = getattr(args, "output", None)
    if output:
        with open(output, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _load_tree(args):
    with open(args.tree) as fh:
        return tree_from_json(fh.read())


def _config_from(args) -> EstimateResConfig:
    kwargs = {}
    if args.delta0 is not None:
        kwargs["delta0"] = args.delta0
    if args.gamma1 is not None:
        kwargs["gamma1"] = args.gamma1
    if args.gamma2 is not None:
        kwargs["gamma2"] = args.gamma2
    if args.step is not None:
        kwargs["step"] = args.step
    return EstimateResConfig(**kwargs)


def _trial_rngs(seed: int, trials: int):
    return [
        np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(t,)))
        for t in range(trials)
    ]


@dataclass
class ExperimentSpec:
    """A reproducible record of one CLI invocation."""

    command: str
    options: dict

    def to_json(self) -> str:
        return json.dumps({"command": self.command, "options": self.options}, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "ExperimentSpec":
        data = json.loads(text)
        return cls(command=data["command"], options=data["options"])


def _spec_from_args(args) -> ExperimentSpec:
    skip = {"func", "save_spec", "spec"}
    options = {k: v for k, v in vars(args).items() if k not in skip}
    return ExperimentSpec(command=args.command, options=options)


# ---------------------------------------------------------------------------
# subcommand bodies
# ---------------------------------------------------------------------------


def cmd_gen_tree(args) -> int:
    kind = args.kind
    if kind == "star":
        tree, oracle = build_star(args.size, args.marked)
    elif kind == "path":
        tree, oracle = build_path(args.size, bool(args.marked))
    elif kind == "random":
        tree, oracle = build_random_tree(args.size, args.degree, args.mark_prob, args.seed)
    elif kind == "complete":
        tree, oracle = build_complete_tree(args.depth, args.branching, bool(args.marked))
    elif kind == "dpll":
        with open(args.cnf) as fh:
            data = json.load(fh)
        tree, oracle = build_dpll_tree(data["clauses"], data["var_order"])
    else:  # pragma: no cover - argparse restricts choices
        raise ValueError(kind)
    text = tree_to_json(tree, oracle)
    if args.output:
        with open(args.output, "w") as fh:
            fh.write(text + "\n")
    else:
        sys.stdout.write(text + "\n")
    return 0


def cmd_resistance(args) -> int:
    tree, oracle = _load_tree(args)
    marked = shallowest_marked(tree, oracle)
    if not marked.members:
        _emit({"eta_bar_root": "inf", "eta_max": "inf", "kappa": {}}, args)
        return 0
    st = solution_tree(tree, marked)
    rp = resistance_profile(st)
    ka = kappa_assignment(st, rp)
    _emit(
        {
            "eta_bar_root": rp.eta_root,
            "eta_max": rp.eta_max,
            "kappa": {str(v): float(ka.kappa[v]) for v in sorted(st.vertices)},
        },
        args,
    )
    return 0


def cmd_spectrum(args) -> int:
    tree, oracle = _load_tree(args)
    op = build_walk_operator(tree, oracle, args.eta)
    sd = spectral_decomposition(op)
    root = np.zeros(tree.n_vertices)
    root[tree.root] = 1.0
    lam = np.abs(sd.amplitudes(root)) ** 2
    order = np.argsort(sd.phases)
    _emit(
        [
            {"theta": float(sd.phases[j]), "weight": float(lam[j])}
            for j in order
        ],
        args,
    )
    return 0


def _run_trials(args, runner) -> int:
    tree, oracle = _load_tree(args)
    cfg = _config_from(args)
    sim = WalkSimulator(tree, oracle)
    rngs = _trial_rngs(args.seed, args.trials)

    def one(rng):
        return runner(tree, oracle, cfg, rng, sim)

    if args.jobs > 1:
        with ThreadPoolExecutor(max_workers=args.jobs) as pool:
            records = list(pool.map(one, rngs))
    else:
        records = [one(rng) for rng in rngs]
    _emit([rec.as_row() for _, rec in records], args)
    return 0


def cmd_estimate_res(args) -> int:
    return _run_trials(
        args, lambda tree, oracle, cfg, rng, sim: estimate_res(tree, oracle, tree.root, cfg, rng, sim)
    )


def cmd_find_marked(args) -> int:
    return _run_trials(args, find_marked)


def cmd_detect(args) -> int:
    return _run_trials(args, detect_existence)


def cmd_find_all(args) -> int:
    tree, oracle = _load_tree(args)
    cfg = _config_from(args)
    rows = []
    for rng in _trial_rngs(args.seed, args.trials):
        found, rec = find_all(tree, oracle, cfg, rng)
        row = rec.as_row()
        row["outcome"] = ",".join(str(v) for v in found)
        rows.append(row)
    _emit(rows, args)
    return 0


def cmd_descent_sim(args) -> int:
    tree, oracle = _load_tree(args)
    marked = shallowest_marked(tree, oracle)
    if not marked.members:
        _emit({"error": "no marked vertices; descent chain undefined"}, args)
        return 1
    st = solution_tree(tree, marked)
    rp = resistance_profile(st)
    ka = kappa_assignment(st, rp)
    dc = descent_chain(st, ka)
    exact = exact_hitting_times(dc).root_value
    mean, err = simulate_descent(dc, args.trials, np.random.default_rng(args.seed))
    bound = hitting_time_bound(dc)
    bound_ln = math.log(len(st.leaf_set.members) * (rp.eta_root + 1.0))
    _emit(
        {
            "expected_steps_exact": exact,
            "expected_steps_mc": mean,
            "mc_stderr": err,
            "bound_log2": bound,
            "bound_ln_reference": bound_ln,
            "violated": bool(exact > bound + 1e-12),
        },
        args,
    )
    return 0


def cmd_grover_scaling(args) -> int:
    sizes = [int(x) for x in args.sizes.split(",")]
    k = "all" if args.marked == "all" else int(args.marked)
    result = grover_scaling(sizes, k, args.trials, args.seed, jobs=args.jobs)
    _emit(result.as_dict(), args)
    return 0


def cmd_verify_all(args) -> int:
    corpus = [] if args.count <= 0 else default_corpus(count=args.count, master_seed=args.seed)
    report = verify_all(
        corpus,
        master_seed=args.seed,
        include_statistical=args.full,
        inject_fault=args.fault,
    )
    _emit(report.as_dict(), args)
    return 0 if report.passed else 1


def cmd_run(args) -> int:
    with open(args.spec) as fh:
        spec = ExperimentSpec.from_json(fh.read())
    argv = [spec.command]
    for key, value in sorted(spec.options.items()):
        if key == "command" or value is None:
            continue
        flag = "--" + key.replace("_", "-")
        if isinstance(value, bool):
            if value:
                argv.append(flag)
        else:
            argv.extend([flag, str(value)])
    return main(argv)


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


def _add_common_run_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--tree", required=True, help="tree JSON file")
    p.add_argument("--seed", type=int, default=int(_env("seed", 0)))
    p.add_argument("--trials", type=int, default=int(_env("trials", 1)))
    p.add_argument("--jobs", type=int, default=int(_env("jobs", 1)))
    p.add_argument("--delta0", type=float, default=_env("delta0", None))
    p.add_argument("--gamma1", type=float, default=_env("gamma1", None))
    p.add_argument("--gamma2", type=float, default=_env("gamma2", None))
    p.add_argument("--step", type=float, default=_env("step", None))
    p.add_argument("--out", choices=["json", "csv"], default=_env("out", "json"))
    p.add_argument("--output", default=_env("output", None), help="write to file instead of stdout")
    p.add_argument("--save-spec", default=None, help="record this invocation as a replayable spec")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qbacktrack",
        description="Exact simulation and verification of quantum backtracking search",
    )
    parser.add_argument("--version", action="version", version=f"qbacktrack {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-tree", help="generate a tree JSON file")
    p.add_argument("--kind", choices=["star", "path", "random", "complete", "dpll"], required=True)
    p.add_argument("--size", type=int, default=8, help="leaves (star), edges (path), vertices (random)")
    p.add_argument("--marked", type=int, default=1)
    p.add_argument("--degree", type=int, default=3)
    p.add_argument("--mark-prob", type=float, default=0.1)
    p.add_argument("--depth", type=int, default=3)
    p.add_argument("--branching", type=int, default=2)
    p.add_argument("--seed", type=int, default=int(_env("seed", 0)))
    p.add_argument("--cnf", help="JSON file with {'clauses': [...], 'var_order': [...]}")
    p.add_argument("--output", default=None)
    p.add_argument("--save-spec", default=None, help="record this invocation as a replayable spec")
    p.set_defaults(func=cmd_gen_tree)

    p = sub.add_parser("resistance", help="resistance profile and vertex weights")
    p.add_argument("--tree", required=True)
    p.add_argument("--out", choices=["json", "csv"], default="json")
    p.add_argument("--output", default=None)
    p.add_argument("--save-spec", default=None, help="record this invocation as a replayable spec")
    p.set_defaults(func=cmd_resistance)

    p = sub.add_parser("spectrum", help="walk eigenphases and root weights")
    p.add_argument("--tree", required=True)
    p.add_argument("--eta", type=float, required=True)
    p.add_argument("--out", choices=["json", "csv"], default="json")
    p.add_argument("--output", default=None)
    p.add_argument("--save-spec", default=None, help="record this invocation as a replayable spec")
    p.set_defaults(func=cmd_spectrum)

    for name, func, blurb in [
        ("estimate-res", cmd_estimate_res, "estimate effective resistance at the root"),
        ("find-marked", cmd_find_marked, "walk down to one marked vertex"),
        ("find-all", cmd_find_all, "find every marked vertex via unmark-and-restart"),
        ("detect", cmd_detect, "decide whether any marked vertex exists"),
    ]:
        p = sub.add_parser(name, help=blurb)
        _add_common_run_flags(p)
        p.set_defaults(func=func)

    p = sub.add_parser("descent-sim", help="descent chain: exact vs Monte Carlo")
    p.add_argument("--tree", required=True)
    p.add_argument("--trials", type=int, default=int(_env("trials", 100_000)))
    p.add_argument("--seed", type=int, default=int(_env("seed", 0)))
    p.add_argument("--out", choices=["json", "csv"], default="json")
    p.add_argument("--output", default=None)
    p.add_argument("--save-spec", default=None, help="record this invocation as a replayable spec")
    p.set_defaults(func=cmd_descent_sim)

    p = sub.add_parser("grover-scaling", help="query scaling on marked stars")
    p.add_argument("--sizes", default="64,128,256,512")
    p.add_argument("--marked", default="4", help="marked leaves per star, or 'all'")
    p.add_argument("--trials", type=int, default=int(_env("trials", 5)))
    p.add_argument("--seed", type=int, default=int(_env("seed", 0)))
    p.add_argument("--jobs", type=int, default=int(_env("jobs", 1)))
    p.add_argument("--out", choices=["json", "csv"], default="json")
    p.add_argument("--output", default=None)
    p.add_argument("--save-spec", default=None, help="record this invocation as a replayable spec")
    p.set_defaults(func=cmd_grover_scaling)

    p = sub.add_parser("verify-all", help="run every invariant suite over a corpus")
    p.add_argument("--count", type=int, default=int(_env("count", 500)))
    p.add_argument("--seed", type=int, default=int(_env("seed", 20240913)))
    p.add_argument("--full", action="store_true", help="include statistical suites")
    p.add_argument("--fault", default=None, help="inject a named fault (kappa_perturbation)")
    p.add_argument("--out", choices=["json", "csv"], default="json")
    p.add_argument("--output", default=None)
    p.add_argument("--save-spec", default=None, help="record this invocation as a replayable spec")
    p.set_defaults(func=cmd_verify_all)

    p = sub.add_parser("run", help="replay a saved experiment spec")
    p.add_argument("--spec", required=True)
    p.set_defaults(func=cmd_run)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    save_spec = getattr(args, "save_spec", None)
    if args.command != "run":
        spec = _spec_from_args(args)
        if save_spec:
            with open(save_spec, "w") as fh:
                fh.write(spec.to_json() + "\n")
    return args.func(args)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
