"""Command-line front end: certify, falsify, simulate, reproduce.

Exit codes: 0 success (certified / no violations), 1 error, 2 no
certificate found, 3 falsification witness found.  Reports are JSON with a
versioned schema; identical configs and seeds give byte-identical bodies
except for the provenance timestamp.
"""

from __future__ import annotations

import argparse
import json
import sys as _sys
from pathlib import Path

import numpy as np

from .benchmarks import reproduce
from .certify import (
    Certificate,
    InadmissibleInput,
    NoCertificate,
    SearchConfig,
    build_side_problem,
    certificate_to_dict,
    certify,
    _plans,
)
from .lmi import write_sdpa
from .model import (
    PersidskiiSystem,
    StabilityQuery,
    classify_nonlinearities,
    query_from_dict,
    reorder_blocks,
    system_from_dict,
)
from .rnn import ctrnn_from_dict, ctrnn_to_persidskii, augment_bias, load_checkpoint
from .simulate import (
    InputSignal,
    constant_input,
    falsify,
    integrate,
    sinusoid_input,
    table_input,
    trajectory_to_csv,
    zero_input,
)

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_NO_CERTIFICATE = 2
EXIT_WITNESS = 3


def _load_config(path: str) -> dict:
    with open(path) as fh:
        return json.load(fh)


def _system_from_config(config: dict) -> PersidskiiSystem:
    sources = [k for k in ("system", "ctrnn", "ctrnn_path") if k in config]
    if len(sources) != 1:
        raise InadmissibleInput(
            f"config must name exactly one system source, found {sources}"
        )
    if "system" in config:
        return system_from_dict(config["system"])
    rnn = (
        ctrnn_from_dict(config["ctrnn"])
        if "ctrnn" in config
        else load_checkpoint(config["ctrnn_path"])
    )
    return augment_bias(rnn) if rnn.b0 is not None else ctrnn_to_persidskii(rnn)


def _query_from_config(config: dict) -> StabilityQuery:
    if "query" not in config:
        raise InadmissibleInput("config is missing the query")
    return query_from_dict(config["query"])


def _search_from_config(config: dict) -> SearchConfig:
    s = config.get("search", {})
    cfg = SearchConfig()
    if "beta_grid" in s:
        grid = np.asarray(s["beta_grid"], dtype=float)
        cfg.beta_grid_upper = grid
        cfg.beta_grid_lower = grid
    if "beta_grid_upper" in s:
        cfg.beta_grid_upper = np.asarray(s["beta_grid_upper"], dtype=float)
    if "beta_grid_lower" in s:
        cfg.beta_grid_lower = np.asarray(s["beta_grid_lower"], dtype=float)
    if "rho_grid" in s:
        cfg.rho_grid = tuple(float(r) for r in s["rho_grid"])
    if "tol" in s:
        cfg.solver_tol = float(s["tol"])
    if "exhaustive" in s:
        cfg.exhaustive = bool(s["exhaustive"])
    if "prefalsify" in s:
        cfg.prefalsify = bool(s["prefalsify"])
    if "variant" in s:
        cfg.variant = str(s["variant"])
    if "time_budget_s" in s:
        cfg.time_budget_s = float(s["time_budget_s"])
    return cfg


def _input_from_dict(d: dict, dim: int) -> InputSignal:
    kind = d.get("kind", "zero")
    if kind == "zero":
        return zero_input(dim)
    if kind == "constant":
        return constant_input(d["value"])
    if kind == "sinusoid":
        return sinusoid_input(
            d["amplitudes"], d["frequencies"], d.get("phases")
        )
    if kind == "table":
        return table_input(d["times"], d["values"], d.get("bound"))
    raise InadmissibleInput(f"unknown input kind {kind!r}")


def _emit(report: dict, out: str | None, name: str) -> None:
    body = json.dumps(report, indent=2, sort_keys=True)
    if out:
        path = Path(out)
        path.mkdir(parents=True, exist_ok=True)
        (path / name).write_text(body + "\n")
    print(body)


def _trace_to_list(trace) -> list[dict]:
    return [
        {
            "side": c.side,
            "beta": c.beta,
            "rho": c.rho,
            "status": c.status,
            "reason": c.reason,
            "min_margin": None if not np.isfinite(c.min_margin) else c.min_margin,
        }
        for c in trace
    ]


def run_certify(args) -> int:
    config = _load_config(args.config)
    system = _system_from_config(config)
    query = _query_from_config(config)
    cfg = _search_from_config(config)
    if args.dump_sdp:
        _, mu, order = classify_nonlinearities(system)
        osys = reorder_blocks(system, order)
        plan = _plans(query)[0]
        beta = float(cfg.beta_grid_upper[0])
        problem = build_side_problem(
            osys, query, plan, beta, float(cfg.rho_grid[0]), mu, cfg
        )
        write_sdpa(problem, args.dump_sdp)
    outcome = certify(system, query, cfg=cfg)
    if isinstance(outcome, Certificate):
        report = {
            "schema": 1,
            "kind": query.kind,
            "certified": True,
            "certificate": certificate_to_dict(outcome),
        }
        _emit(report, args.out, "certify_report.json")
        return EXIT_OK
    assert isinstance(outcome, NoCertificate)
    report = {
        "schema": 1,
        "kind": query.kind,
        "certified": False,
        "reason": outcome.reason,
        "trace": _trace_to_list(outcome.trace),
    }
    if outcome.witness is not None:
        report["witness"] = {
            "x0": outcome.witness.x0.tolist(),
            "input_kind": outcome.witness.input_kind,
            "margin": outcome.witness.margin,
            "time": outcome.witness.time,
        }
    _emit(report, args.out, "certify_report.json")
    return EXIT_NO_CERTIFICATE


def run_falsify(args) -> int:
    config = _load_config(args.config)
    system = _system_from_config(config)
    query = _query_from_config(config)
    sim = config.get("sim", {})
    samples = args.samples or int(sim.get("samples", 100))
    seed = args.seed if args.seed is not None else int(sim.get("seed", 0))
    tol = float(sim.get("tol", 1e-9))
    inputs = None
    if "input" in sim:
        inputs = [_input_from_dict(sim["input"], system.n)]
    report_obj = falsify(
        system, query, n_samples=samples, seed=seed, inputs=inputs, tol=tol
    )
    report = {
        "schema": 1,
        "kind": query.kind,
        "samples": report_obj.n_samples,
        "violations": report_obj.violations,
        "inconclusive": report_obj.inconclusive,
        "worst_margin": report_obj.worst_margin,
        "seed": seed,
    }
    if report_obj.witness is not None:
        w = report_obj.witness
        report["witness"] = {
            "x0": w.x0.tolist(),
            "input_kind": w.input_kind,
            "time": w.time,
            "margin": w.margin,
        }
        if args.out:
            # re-integrate the witness deterministically for the CSV trace
            rng_children = np.random.SeedSequence(seed).spawn(report_obj.n_samples)
            rng = np.random.default_rng(rng_children[w.sample_index])
            from .simulate import default_input_family, sample_annulus

            x0 = sample_annulus(rng, system.n, query.eps1, query.eps2)
            if inputs is not None:
                sig = inputs[w.sample_index % len(inputs)]
            else:
                fam = default_input_family(system.n, query.gamma0, query.T)
                sig = fam[w.sample_index % len(fam)](rng)
            traj = integrate(system, x0, sig, query.T, tol=tol)
            csv_path = Path(args.out) / "witness_trajectory.csv"
            Path(args.out).mkdir(parents=True, exist_ok=True)
            trajectory_to_csv(traj, str(csv_path))
            report["witness"]["csv"] = str(csv_path)
    _emit(report, args.out, "falsify_report.json")
    return EXIT_WITNESS if report_obj.violations > 0 else EXIT_OK


def run_simulate(args) -> int:
    config = _load_config(args.config)
    system = _system_from_config(config)
    sim = config.get("sim", {})
    if "x0" not in sim:
        raise InadmissibleInput("simulate needs sim.x0")
    x0 = np.asarray(sim["x0"], dtype=float)
    T = float(sim.get("T", config.get("query", {}).get("T", 1.0)))
    tol = float(sim.get("tol", 1e-9))
    u = _input_from_dict(sim.get("input", {"kind": "zero"}), system.n)
    traj = integrate(system, x0, u, T, tol=tol)
    report = {
        "schema": 1,
        "T": T,
        "terminal_state_norm": float(np.linalg.norm(traj.x[:, -1])),
        "terminal_output_norm": float(np.linalg.norm(traj.y[:, -1])),
        "steps": traj.stats["steps"],
    }
    if args.out:
        Path(args.out).mkdir(parents=True, exist_ok=True)
        csv_path = Path(args.out) / "trajectory.csv"
        trajectory_to_csv(traj, str(csv_path))
        report["csv"] = str(csv_path)
    _emit(report, args.out, "simulate_report.json")
    return EXIT_OK


def run_reproduce(args) -> int:
    report = reproduce(
        benchmark_id=args.id,
        seed_budget=args.seed_budget,
        samples=args.samples or 1000,
        out_dir=args.out,
    )
    _emit(report, args.out, f"reproduce_benchmark{args.id}.json")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="persidskii",
        description=(
            "certificate synthesis and falsification for annular stability "
            "of generalized Persidskii systems"
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_cert = sub.add_parser("certify", help="search for an LMI certificate")
    p_cert.add_argument("--config", required=True)
    p_cert.add_argument("--out", default=None)
    p_cert.add_argument("--dump-sdp", default=None, dest="dump_sdp")
    p_cert.set_defaults(func=run_certify)

    p_fals = sub.add_parser("falsify", help="Monte Carlo property falsification")
    p_fals.add_argument("--config", required=True)
    p_fals.add_argument("--samples", type=int, default=None)
    p_fals.add_argument("--seed", type=int, default=None)
    p_fals.add_argument("--out", default=None)
    p_fals.set_defaults(func=run_falsify)

    p_sim = sub.add_parser("simulate", help="integrate one trajectory")
    p_sim.add_argument("--config", required=True)
    p_sim.add_argument("--out", default=None)
    p_sim.set_defaults(func=run_simulate)

    p_rep = sub.add_parser("reproduce", help="run a shipped benchmark sweep")
    p_rep.add_argument("--id", type=int, required=True, choices=(1, 2))
    p_rep.add_argument("--seed-budget", type=int, default=50, dest="seed_budget")
    p_rep.add_argument("--samples", type=int, default=None)
    p_rep.add_argument("--out", default=None)
    p_rep.set_defaults(func=run_reproduce)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse exits 2 on bad usage
        return EXIT_ERROR if exc.code else EXIT_OK
    try:
        return args.func(args)
    except (InadmissibleInput, ValueError, OSError, KeyError) as exc:
        print(f"error: {exc}", file=_sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    raise SystemExit(main())
