"""Command-line experiment runner.

Every subcommand writes CSV. The first lines are ``#`` comments holding the
resolved configuration, so an output file documents how it was produced.
Exit codes: 0 success, 2 configuration error, 3 numeric error.
"""
from __future__ import annotations

import argparse
import io
import json
import sys
from dataclasses import asdict, replace
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from . import __version__
from .bottleneck import bernoulli_model, factorization_check, information_plane, sufficiency_check
from .codec import DEFAULT_TAU
from .config import (
    GRAMMAR_KEYS,
    LINK_KEYS,
    check_keys,
    edge_config,
    fed_config,
    is_grammar,
    load_matrix,
    load_yaml,
    message_model,
    sentence_language,
)
from .edgesim import EDGE_COLUMNS, EdgeConfig, fedavg, sweep, sweep_rows
from .errors import ConfigError, InputError, NumericError
from .harness import (
    ARQ_COLUMNS,
    DEFAULT_GRAMMAR,
    LINK_COLUMNS,
    arq_rows,
    make_experiment,
    simulate_arq,
    sweep_snr,
)
from .measures import CSV_COLUMNS, measures_row

DEFAULT_SNR_GRID = (-6.0, -3.0, 0.0, 3.0, 6.0, 9.0, 12.0)
IB_KEYS = {"joint", "z_card", "beta", "restarts", "tol", "max_iter", "seed"}
SUFF_KEYS = {"joint", "statistic", "bernoulli_n", "thetas", "prior", "tol"}


# -- CSV output ---------------------------------------------------------


def _fmt(value: Any) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def _jsonable(value: Any) -> Any:
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, (np.floating, np.integer)):
        return value.item()
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    return value


def render_csv(command: str, resolved: dict, columns: Sequence[str], rows: Sequence[dict]) -> str:
    buf = io.StringIO()
    buf.write(f"# semcomm {__version__} {command}\n")
    for key in sorted(resolved):
        buf.write(f"# {key} = {json.dumps(_jsonable(resolved[key]), sort_keys=True)}\n")
    buf.write(",".join(columns) + "\n")
    for row in rows:
        buf.write(",".join(_fmt(row[c]) for c in columns) + "\n")
    return buf.getvalue()


# -- subcommands ----------------------------------------------------------


def _config(args) -> dict:
    return load_yaml(args.config) if getattr(args, "config", None) else {}


def _pick(flag, data: dict, key: str, default):
    if flag is not None:
        return flag
    return data.get(key, default)


def cmd_measures(args) -> tuple[dict, Sequence[str], list[dict]]:
    if not args.config:
        raise ConfigError("measures needs --config")
    data = _config(args)
    if is_grammar(data):
        check_keys(data, GRAMMAR_KEYS, "language config")
        lang = sentence_language(data)
        space, mapping = lang.message_space(), lang.mapping()
    else:
        space, mapping, _ = message_model(data)
    resolved = {"config": data, "messages": len(space), "symbols": len(mapping.alphabet)}
    return resolved, CSV_COLUMNS, [measures_row(mapping, space)]


def _link_setup(args, with_arq: bool):
    data = _config(args)
    check_keys(data, GRAMMAR_KEYS | LINK_KEYS, "link config")
    grammar = {k: v for k, v in data.items() if k in GRAMMAR_KEYS} or DEFAULT_GRAMMAR
    snr = _pick(args.snr_db, data, "snr_db", list(DEFAULT_SNR_GRID))
    snr = [float(s) for s in (snr if isinstance(snr, (list, tuple)) else [snr])]
    settings = {
        "grammar": grammar,
        "snr_db": snr,
        "trials": int(_pick(args.trials, data, "trials", 100_000)),
        "seed": int(_pick(args.seed, data, "seed", 0)),
        "tau": float(_pick(args.tau, data, "tau", DEFAULT_TAU)),
        "fading": _pick(args.fading, data, "fading", "none"),
        "block_len": _pick(args.block_len, data, "block_len", None),
        "source_code": _pick(args.source_code, data, "source_code", "fixed"),
        "channel_code": _pick(args.channel_code, data, "channel_code", "hamming74"),
    }
    if with_arq:
        settings["max_retx"] = int(_pick(args.max_retx, data, "max_retx", 3))
    elif "max_retx" in data:
        raise ConfigError("max_retx applies to arq-sim only")
    exp = make_experiment(
        sentence_language(grammar),
        snr_db=snr,
        source_code=settings["source_code"],
        channel_code=settings["channel_code"],
        trials=settings["trials"],
        seed=settings["seed"],
        tau=settings["tau"],
        fading=settings["fading"],
        block_length=None if settings["block_len"] is None else int(settings["block_len"]),
    )
    return settings, exp


def cmd_link_sim(args):
    settings, exp = _link_setup(args, with_arq=False)
    return settings, LINK_COLUMNS, sweep_snr(exp)


def cmd_arq_sim(args):
    settings, exp = _link_setup(args, with_arq=True)
    return settings, ARQ_COLUMNS, arq_rows(simulate_arq(exp, settings["max_retx"]))


def _joint_from(flag, data: dict) -> np.ndarray:
    if flag is not None:
        return load_matrix(flag)
    if "joint" in data:
        joint = data["joint"]
        if isinstance(joint, str):
            base = Path(data.get("_dir", "."))
            return load_matrix(base / joint)
        return np.asarray(joint, dtype=float)
    raise ConfigError("a joint table is required (--joint or 'joint' in the config)")


def cmd_ib_solve(args):
    data = _config(args)
    check_keys(data, IB_KEYS, "ib-solve config")
    if args.config:
        data["_dir"] = str(Path(args.config).parent)
    joint = _joint_from(args.joint, data)
    betas = _pick(args.beta, data, "beta", [1.0])
    betas = sorted(float(b) for b in (betas if isinstance(betas, (list, tuple)) else [betas]))
    settings = {
        "joint": joint,
        "z_card": int(_pick(args.z_card, data, "z_card", joint.shape[0])),
        "beta": betas,
        "restarts": int(_pick(args.restarts, data, "restarts", 10)),
        "tol": float(_pick(args.tol, data, "tol", 1e-10)),
        "max_iter": int(_pick(args.max_iter, data, "max_iter", 2000)),
        "seed": int(_pick(args.seed, data, "seed", 0)),
    }
    sols = information_plane(
        joint, settings["z_card"], betas, settings["restarts"], settings["tol"], settings["max_iter"], settings["seed"]
    )
    rows = [
        {"beta": s.beta, "I_XZ": s.I_XZ, "I_ZTheta": s.I_ZTheta, "objective": s.objective,
         "iterations": s.iterations, "converged": s.converged}
        for s in sols
    ]
    return settings, ("beta", "I_XZ", "I_ZTheta", "objective", "iterations", "converged"), rows


def _named_statistic(name: str, xs: list[tuple]) -> list:
    if name == "sum":
        return [sum(x) for x in xs]
    if name == "first":
        return [x[0] for x in xs]
    if name == "identity":
        return list(xs)
    raise ConfigError(f"unknown statistic {name!r} (sum, first, identity)")


def cmd_suff_check(args):
    data = _config(args)
    check_keys(data, SUFF_KEYS, "suff-check config")
    if args.config:
        data["_dir"] = str(Path(args.config).parent)
    tol = float(_pick(args.tol, data, "tol", 1e-10))
    n = _pick(args.bernoulli_n, data, "bernoulli_n", None)
    statistic = _pick(args.statistic, data, "statistic", None)
    rows = []
    if args.joint is None and "joint" not in data:
        n = 4 if n is None else int(n)
        if not 1 <= n <= 20:
            raise ConfigError("bernoulli_n must lie in 1..20")
        thetas = [float(t) for t in _pick(args.thetas, data, "thetas", [0.2, 0.8])]
        prior = data.get("prior")
        xs, joint = bernoulli_model(n, thetas, prior)
        names = ["sum", "first", "identity"] if statistic is None else [statistic]
        stats = [(name, _named_statistic(name, xs)) for name in names]
        settings = {"bernoulli_n": n, "thetas": thetas, "prior": prior, "statistic": names, "tol": tol}
    else:
        joint = _joint_from(args.joint, data)
        if statistic is None:
            labels, name = list(range(joint.shape[0])), "identity"
        else:
            labels = [s.strip() for s in statistic.split(",")] if isinstance(statistic, str) else list(statistic)
            name = "labels"
        stats = [(name, labels)]
        settings = {"joint": joint, "statistic": statistic, "tol": tol}
    for name, labels in stats:
        rep = sufficiency_check(joint, labels, tol=tol)
        rows.append({
            "statistic": name, "I_X_Theta": rep.I_X_Theta, "I_T_Theta": rep.I_T_Theta, "gap": rep.gap,
            "sufficient": rep.is_sufficient, "factorization": factorization_check(joint, labels),
        })
    return settings, ("statistic", "I_X_Theta", "I_T_Theta", "gap", "sufficient", "factorization"), rows


def cmd_edge_sim(args):
    data = _config(args)
    cfg, v_grid, l_grid = edge_config(data)
    if args.horizon is not None:
        cfg = replace(cfg, horizon=args.horizon)
    n_seeds = int(args.seeds)
    if n_seeds < 1:
        raise ConfigError("--seeds must be >= 1")
    base = int(_pick(args.seed, {}, "seed", 0))
    seeds = [int(s) for s in np.random.SeedSequence(base).generate_state(n_seeds)]
    points = sweep(cfg, v_grid, l_grid, seeds)
    settings = {"edge": _edge_dict(cfg), "V_grid": v_grid, "lambda_grid": l_grid, "seeds": n_seeds, "seed": base}
    return settings, EDGE_COLUMNS, sweep_rows(points)


def _edge_dict(cfg: EdgeConfig) -> dict:
    d = asdict(cfg)
    d["channel"] = {"kind": cfg.channel.kind, "mean_snr": cfg.channel.mean_snr, "block_length": cfg.channel.block_length}
    return d


def cmd_fed_sim(args):
    data = _config(args)
    if not data:
        data = {"centers": [0.0, 1.0, 2.0], "curvatures": [2.0, 2.0, 2.0], "counts": [1, 1, 1]}
    cfg, w0 = fed_config(data)
    if args.rounds is not None:
        cfg = replace(cfg, rounds=args.rounds)
    if args.step is not None:
        cfg = replace(cfg, step=args.step)
    res = fedavg(cfg, w0)
    rows = [
        {"round": r, "objective": o, "w_norm_error": e}
        for r, (o, e) in enumerate(zip(res.objective_trace, res.error_trace))
    ]
    settings = {
        "centers": cfg.centers, "curvatures": cfg.curvatures, "counts": cfg.counts, "rounds": cfg.rounds,
        "step": cfg.step_size, "local_steps": cfg.local_steps, "w0": w0, "w_star": res.w_star,
    }
    return settings, ("round", "objective", "w_norm_error"), rows


COMMANDS = {
    "measures": cmd_measures,
    "link-sim": cmd_link_sim,
    "arq-sim": cmd_arq_sim,
    "ib-solve": cmd_ib_solve,
    "suff-check": cmd_suff_check,
    "edge-sim": cmd_edge_sim,
    "fed-sim": cmd_fed_sim,
}


# -- argument parsing -----------------------------------------------------


def _floats(text: str) -> list[float]:
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected numbers, got {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="semcomm", description="Semantic and goal-oriented communication experiments.")
    parser.add_argument("--version", action="version", version=f"semcomm {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    def add(name: str, help_text: str) -> argparse.ArgumentParser:
        p = sub.add_parser(name, help=help_text, description=help_text)
        p.add_argument("--config", help="YAML configuration file")
        p.add_argument("--output", "-o", help="CSV destination (default: standard output)")
        return p

    add("measures", "Entropy decomposition and meaning-class Huffman rate of a language config.")

    for name, text in (
        ("link-sim", "Monte Carlo sweep: syntactic vs semantic MAP decoding over an SNR grid."),
        ("arq-sim", "Stop-and-wait ARQ with genie syntactic detection vs semantic detection."),
    ):
        p = add(name, text)
        p.add_argument("--snr-db", nargs="+", type=_floats, help="SNR points in dB (space or comma separated)")
        p.add_argument("--fading", choices=["none", "rayleigh"])
        p.add_argument("--block-len", type=int, help="bits per fade realization (default: one sentence)")
        p.add_argument("--seed", type=int)
        p.add_argument("--trials", type=int, help="trials per SNR point (default 100000)")
        p.add_argument("--source-code", choices=["fixed", "huffman"])
        p.add_argument("--channel-code", choices=["none", "repetition", "hamming74"])
        p.add_argument("--tau", type=float, help="semantic confidence threshold (default 0.9)")
        if name == "arq-sim":
            p.add_argument("--max-retx", type=int, help="retransmissions before forced acceptance (default 3)")

    p = add("ib-solve", "Information bottleneck solutions over a beta grid.")
    p.add_argument("--joint", help="file holding the p(x, theta) table (rows x, columns theta)")
    p.add_argument("--z-card", type=int, help="number of clusters |Z| (default |X|)")
    p.add_argument("--beta", nargs="+", type=float, help="trade-off weights")
    p.add_argument("--restarts", type=int)
    p.add_argument("--tol", type=float)
    p.add_argument("--max-iter", type=int)
    p.add_argument("--seed", type=int)

    p = add("suff-check", "Sufficiency and factorization checks for a statistic.")
    p.add_argument("--joint", help="file holding the p(x, theta) table")
    p.add_argument("--statistic", help="comma separated labels t(x), or sum / first / identity for the Bernoulli model")
    p.add_argument("--bernoulli-n", type=int, help="iid Bernoulli model size (default 4, used without --joint)")
    p.add_argument("--thetas", type=_floats, help="Bernoulli parameter values (default 0.2,0.8)")
    p.add_argument("--tol", type=float)

    p = add("edge-sim", "Drift-plus-penalty edge learning sweep over V and lambda.")
    p.add_argument("--seeds", type=int, default=5, help="number of paired seeds per grid point")
    p.add_argument("--seed", type=int, help="base seed the per-run seeds derive from")
    p.add_argument("--horizon", type=int, help="slots per run")

    p = add("fed-sim", "Federated averaging on quadratic device losses.")
    p.add_argument("--rounds", type=int)
    p.add_argument("--step", type=float)
    return parser


def _normalize(args) -> None:
    snr = getattr(args, "snr_db", None)
    if snr is not None:
        args.snr_db = [v for group in snr for v in group]


def run_cli(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    _normalize(args)
    try:
        resolved, columns, rows = COMMANDS[args.command](args)
        text = render_csv(args.command, resolved, columns, rows)
        if args.output:
            Path(args.output).write_text(text)
        else:
            sys.stdout.write(text)
    except (ConfigError, InputError, KeyError, TypeError, ValueError) as exc:
        print(f"semcomm: configuration error: {exc}", file=sys.stderr)
        return 2
    except (NumericError, FloatingPointError) as exc:
        print(f"semcomm: numeric error: {exc}", file=sys.stderr)
        return 3
    return 0


def main() -> None:
    sys.exit(run_cli())


if __name__ == "__main__":
    main()
