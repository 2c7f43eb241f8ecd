"""Command-line interface.

Exit codes: 0 on success, 2 for bad input, 3 when a resource limit is hit.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from ..baselines import EpsilonGibbsConfig
from ..coopt import DEFAULT_DISTANCE_CUTOFF, DEFAULT_TEST_CUTOFF, CooptParams, fit
from ..numerics import RandomStream
from ..opt import GridBase, OptParams, ResourceLimitError, UniformBase, gof_statistic
from ..oracle import EnumerationLimitError, brute_force_coopt_full
from ..space import TABLE
from ..trees import distance_samples, hmap_tree
from .evaluation import make_statistic, power_from_scores, roc_curve, auc_from_curve, simulate_scores
from .ingest import IngestError, ingest, ingest_one, write_samples
from .scenarios import SCENARIOS, generate_scenario, get_scenario

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_RESOURCE = 3


def _bounds(text):
    if text is None:
        return None
    out = []
    for part in text.split(","):
        try:
            lo, hi = (float(v) for v in part.split(":"))
        except ValueError:
            raise argparse.ArgumentTypeError(f"bad bounds {text!r}; use lo:hi[,lo:hi...]") from None
        out.append((lo, hi))
    return out


def _add_inputs(p):
    p.add_argument("--input1")
    p.add_argument("--input2")
    p.add_argument("--input")
    p.add_argument("--group")
    p.add_argument("--mode", choices=["continuous", "table"], default="continuous")
    p.add_argument("--columns", help="comma-separated data columns (default: all but the group column)")
    p.add_argument("--bounds", type=_bounds, help="lo:hi per dimension, comma-separated")
    p.add_argument("--delimiter")


def _add_prior(p, cutoff):
    p.add_argument("--gamma0", type=float, default=0.5)
    p.add_argument("--rho0", type=float, default=0.5)
    p.add_argument("--alpha", type=float, default=0.5)
    p.add_argument("--cutoff", type=float, default=cutoff)
    p.add_argument("--max-depth", type=int, default=None)
    p.add_argument("--max-nodes", type=int, default=5_000_000)


def _params(a) -> CooptParams:
    return CooptParams(
        gamma0=a.gamma0,
        rho0=a.rho0,
        alpha1=a.alpha,
        alpha2=a.alpha,
        alpha_base=a.alpha,
        cutoff=a.cutoff,
        max_depth=a.max_depth,
        max_nodes=a.max_nodes,
    )


def _load_pair(a):
    cols = a.columns.split(",") if a.columns else None
    if a.input1 and a.input2:
        return ingest(a.input1, a.mode, path2=a.input2, columns=cols, bounds=a.bounds, delimiter=a.delimiter)
    if a.input and a.group:
        return ingest(a.input, a.mode, group=a.group, columns=cols, bounds=a.bounds, delimiter=a.delimiter)
    raise IngestError("give --input1 and --input2, or --input and --group")


def _write(path, text):
    if path:
        Path(path).write_text(text)


def cmd_test(a):
    d1, d2 = _load_pair(a)
    table = fit(d1, d2, _params(a))
    g = table.gamma_post(table.root_key)
    print(f"gamma_post {g:.10g}")
    print(f"log_marginal {table.relative_log_marginal():.10g}")
    _write(a.out, table.to_json(indent=1))


def cmd_hmap(a):
    d1, d2 = _load_pair(a)
    tree = hmap_tree(fit(d1, d2, _params(a)))
    print(tree.render())
    _write(a.out, tree.to_json(indent=1))


def cmd_distance(a):
    d1, d2 = _load_pair(a)
    sample = distance_samples(fit(d1, d2, _params(a)), a.metric, a.draws, RandomStream(a.seed))
    s = sample.summary()
    print(f"metric {sample.metric}")
    for k in ("mean", "q025", "q50", "q975"):
        print(f"{k} {s[k]:.6g}")
    _write(a.out, "".join(f"{v!r}\n" for v in sample.values.tolist()))


def _grid(path, space):
    p = Path(path)
    m = np.load(p) if p.suffix == ".npy" else np.loadtxt(p, ndmin=1)
    m = np.asarray(m, dtype=float).ravel()
    if space.kind == TABLE:
        shape = (2,) * space.dims
    else:
        side = round(len(m) ** (1.0 / space.dims))
        shape = (side,) * space.dims
    if int(np.prod(shape)) != m.size:
        raise IngestError(f"{path}: {m.size} masses do not fit a grid of shape {shape}")
    return GridBase(space, m.reshape(shape))


def cmd_gof(a):
    cols = a.columns.split(",") if a.columns else None
    data = ingest_one(a.input, a.mode, cols, a.bounds, a.delimiter)
    base = UniformBase(data.space) if a.base == "uniform" else _grid(a.base, data.space)
    params = OptParams(rho0=a.rho0, alpha=a.alpha, cutoff=a.cutoff, max_depth=a.max_depth, max_nodes=a.max_nodes)
    print(f"rho_post {gof_statistic(data, params, base):.10g}")


def _scenario(a):
    opts = {}
    if a.p is not None:
        opts["p"] = a.p
    if a.population is not None:
        opts["population"] = a.population
    return get_scenario(a.scenario, **opts)


def cmd_simulate(a):
    spec = _scenario(a)
    d1, d2 = generate_scenario(spec, a.n1, a.n2, RandomStream(a.seed))
    if a.out:
        write_samples(a.out, d1, d2)
    else:
        print(f"{len(d1)} + {len(d2)} points generated; pass --out to save them")


def _scores(a):
    spec = _scenario(a)
    gibbs = EpsilonGibbsConfig(burn_in=a.burn_in, kept=a.kept)
    stat = make_statistic(a.statistic, _params(a), gibbs)
    return simulate_scores(stat, spec, a.n1, a.n2, a.reps, RandomStream(a.seed), a.workers)


def cmd_roc(a):
    null, alt = _scores(a)
    fpr, tpr = roc_curve(null, alt)
    print(f"auc {auc_from_curve(fpr, tpr):.6f}")
    _write(a.out, "fpr,tpr\n" + "".join(f"{x!r},{y!r}\n" for x, y in zip(fpr.tolist(), tpr.tolist())))


def cmd_power(a):
    null, alt = _scores(a)
    print(f"power {power_from_scores(null, alt, a.level):.6f}")


def cmd_oracle(a):
    d1, d2 = _load_pair(a)
    if a.mode != "table":
        raise IngestError("the oracle works on tables only")
    r = brute_force_coopt_full(d1.space, d1, d2, _params(a))
    print(json.dumps({"log_p": r.log_p, "gamma_post": r.gamma_post, "n_configs": r.n_configs}))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cooptree", description="Two-sample comparison with coupling optional Polya trees")
    sub = parser.add_subparsers(dest="command", required=True, metavar="{test,hmap,distance,gof,simulate,roc,power}")

    p = sub.add_parser("test", help="posterior coupling probability of the whole space")
    _add_inputs(p)
    _add_prior(p, DEFAULT_TEST_CUTOFF)
    p.add_argument("--out", help="write the posterior table as JSON")
    p.set_defaults(func=cmd_test)

    p = sub.add_parser("hmap", help="most probable coupling tree")
    _add_inputs(p)
    _add_prior(p, DEFAULT_TEST_CUTOFF)
    p.add_argument("--out", help="write the tree as JSON")
    p.set_defaults(func=cmd_hmap)

    p = sub.add_parser("distance", help="posterior draws of L1 or squared Hellinger distance")
    _add_inputs(p)
    _add_prior(p, DEFAULT_DISTANCE_CUTOFF)
    p.add_argument("--metric", choices=["l1", "hellinger2"], default="l1")
    p.add_argument("--draws", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="write draws, one per line")
    p.set_defaults(func=cmd_distance)

    p = sub.add_parser("gof", help="goodness of fit to a base distribution")
    p.add_argument("--input", required=True)
    p.add_argument("--base", default="uniform", help="'uniform' or a file of grid masses")
    p.add_argument("--mode", choices=["continuous", "table"], default="continuous")
    p.add_argument("--columns")
    p.add_argument("--bounds", type=_bounds)
    p.add_argument("--delimiter")
    p.add_argument("--rho0", type=float, default=0.5)
    p.add_argument("--alpha", type=float, default=0.5)
    p.add_argument("--cutoff", type=float, default=DEFAULT_TEST_CUTOFF)
    p.add_argument("--max-depth", type=int, default=None)
    p.add_argument("--max-nodes", type=int, default=5_000_000)
    p.set_defaults(func=cmd_gof)

    def scenario_args(p):
        p.add_argument("--scenario", required=True, help=f"one of {', '.join(SCENARIOS)} (append -null for the null)")
        p.add_argument("--n1", type=int)
        p.add_argument("--n2", type=int)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--p", type=int, help="number of predictors (table scenarios)")
        p.add_argument("--population", type=int, help="population size (table scenarios)")

    p = sub.add_parser("simulate", help="generate a scenario's two samples")
    scenario_args(p)
    p.add_argument("--out")
    p.set_defaults(func=cmd_simulate)

    for name, func in (("roc", cmd_roc), ("power", cmd_power)):
        p = sub.add_parser(name, help="ROC curve and AUC" if name == "roc" else "power at a given level")
        scenario_args(p)
        _add_prior(p, DEFAULT_TEST_CUTOFF)
        p.add_argument("--statistic", choices=["coopt", "ks", "epsilon"], default="coopt")
        p.add_argument("--reps", type=int, default=200)
        p.add_argument("--workers", type=int, default=None)
        p.add_argument("--burn-in", type=int, default=10_000)
        p.add_argument("--kept", type=int, default=10_000)
        if name == "roc":
            p.add_argument("--out", help="write ROC points")
        else:
            p.add_argument("--level", type=float, default=0.05)
        p.set_defaults(func=func)

    p = sub.add_parser("oracle")
    _add_inputs(p)
    _add_prior(p, DEFAULT_TEST_CUTOFF)
    p.set_defaults(func=cmd_oracle)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code in (0, None) else EXIT_INPUT
    try:
        args.func(args)
    except ResourceLimitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RESOURCE
    except (IngestError, EnumerationLimitError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
