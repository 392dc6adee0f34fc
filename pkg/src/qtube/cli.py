"""Command-line surface: validate, example, analyze, trajectory, qlearn.

Exit codes: 0 success, 1 input or validation problem, 2 numeric failure.
All randomness funnels through the single --seed flag of qlearn.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .fileio import EXAMPLES, example, load_mdp, save_mdp, toy3x2_q0
from .geometry import default_basis, strip_half_width, tube_from_report
from .mdp import MdpValidationError, ValidatedMdp
from .report import build_analyze_report
from .solver import OptimalityReport, solve_qstar
from .trajectory import (
    QLearnConfig,
    TrajectoryResult,
    run_qlearning,
    run_qvi,
    write_records_csv,
)

MANIFEST_SCHEMA = "qtube.manifest.v1"


def _fail(message: str, code: int) -> int:
    print(f"error: {message}", file=sys.stderr)
    return code


def _load(path: str) -> ValidatedMdp:
    if not Path(path).exists():
        raise FileNotFoundError(f"no such file: {path}")
    return load_mdp(path)


def cmd_validate(args) -> int:
    try:
        mdp = _load(args.path)
    except FileNotFoundError as err:
        return _fail(str(err), 1)
    except MdpValidationError as err:
        return _fail(f"invalid MDP: {err}", 1)
    print(f"{args.path}: valid MDP '{mdp.name}' with {mdp.num_states} states, "
          f"{mdp.num_actions} actions, gamma={mdp.gamma}")
    return 0


def cmd_example(args) -> int:
    try:
        mdp = example(args.name)
    except KeyError as err:
        return _fail(err.args[0], 1)
    save_mdp(mdp, args.out)
    print(f"wrote {args.out}")
    return 0


def cmd_analyze(args) -> int:
    try:
        mdp = _load(args.path)
    except FileNotFoundError as err:
        return _fail(str(err), 1)
    except MdpValidationError as err:
        return _fail(f"invalid MDP: {err}", 1)
    try:
        doc = build_analyze_report(mdp, delta_frac=args.delta_frac, depth=args.depth)
    except ValueError as err:
        return _fail(str(err), 1)
    except (RuntimeError, np.linalg.LinAlgError) as err:
        return _fail(f"numeric failure: {err}", 2)
    text = json.dumps(doc, indent=2)
    if args.report:
        Path(args.report).write_text(text + "\n", encoding="utf-8")
        print(f"wrote {args.report}")
    else:
        print(text)
    return 0


def _parse_circle(spec: str) -> tuple[float, int]:
    try:
        radius_text, count_text = spec.split(":")
        radius, count = float(radius_text), int(count_text)
    except ValueError:
        raise ValueError(f"--circle expects R:M (radius:count), got {spec!r}") from None
    if radius <= 0.0 or count < 1:
        raise ValueError(f"--circle needs radius > 0 and count >= 1, got {spec!r}")
    return radius, count


def _setup_run(mdp: ValidatedMdp, delta_frac: float):
    report = solve_qstar(mdp)
    if report.delta_bar is None:
        raise ValueError(
            "every action is optimal at every state; the tube radius is undefined "
            "and trajectory flags would be meaningless"
        )
    tube = tube_from_report(report, delta_frac)
    basis = default_basis(mdp, report)
    return report, tube, basis


def _initial_points(args, mdp: ValidatedMdp, report: OptimalityReport, basis):
    """Resolve the starting vectors and their labels from the flags."""
    from .geometry import circle_initials

    if getattr(args, "circle", None):
        radius, count = _parse_circle(args.circle)
        points = circle_initials(report.q_star, basis, radius, count)
        labels = [f"circle{j:02d}" for j in range(count)]
        return points, labels, {"radius": radius, "count": count}
    if getattr(args, "paper_q0", False):
        if mdp.name != "toy3x2" or (mdp.num_states, mdp.num_actions) != (3, 2):
            raise ValueError("--paper-q0 applies only to the toy3x2 example")
        return [toy3x2_q0()], ["toyq0"], None
    if getattr(args, "q0", None):
        table = np.array(json.loads(Path(args.q0).read_text(encoding="utf-8")), dtype=float)
        if table.shape != (mdp.num_states, mdp.num_actions):
            raise ValueError(
                f"Q0 shape {table.shape} does not match "
                f"({mdp.num_states}, {mdp.num_actions})"
            )
        return [table.T.reshape(-1)], ["custom"], None
    return [np.zeros(mdp.num_pairs)], ["zeros"], None


def _write_manifest(
    out_dir: Path,
    kind: str,
    mdp: ValidatedMdp,
    tube,
    basis,
    results: list[TrajectoryResult],
    csv_names: list[str],
    circle: dict | None,
    config: dict,
) -> Path:
    manifest = {
        "schema": MANIFEST_SCHEMA,
        "version": __version__,
        "kind": kind,
        "mdp": {
            "name": mdp.name,
            "gamma": mdp.gamma,
            "num_states": mdp.num_states,
            "num_actions": mdp.num_actions,
        },
        "delta": tube.delta,
        "delta_bar": tube.delta_bar,
        "fraction": tube.fraction,
        "strip_half_width_v": strip_half_width(tube, basis),
        "rate_gamma": results[0].rate_gamma,
        "rate_gamma_lambda2": results[0].rate_gamma_lambda2,
        "basis_label": basis.label,
        "circle": circle,
        "config": config,
        "trajectories": [
            {
                "csv": name,
                "label": res.q0_label,
                "seed": res.seed,
                "tube_entrance": res.tube_entrance,
                "poss_entrance": res.poss_entrance,
                "final_k": res.records[-1].k,
            }
            for res, name in zip(results, csv_names)
        ],
    }
    path = out_dir / f"{kind}_manifest.json"
    path.write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")
    return path


def cmd_trajectory(args) -> int:
    try:
        mdp = _load(args.path)
    except FileNotFoundError as err:
        return _fail(str(err), 1)
    except MdpValidationError as err:
        return _fail(f"invalid MDP: {err}", 1)
    try:
        report, tube, basis = _setup_run(mdp, args.delta_frac)
        points, labels, circle = _initial_points(args, mdp, report, basis)
    except (ValueError, FileNotFoundError, json.JSONDecodeError) as err:
        return _fail(str(err), 1)
    except (RuntimeError, np.linalg.LinAlgError) as err:
        return _fail(f"numeric failure: {err}", 2)

    out_dir = Path(args.csv)
    out_dir.mkdir(parents=True, exist_ok=True)
    results, csv_names = [], []
    for q0, label in zip(points, labels):
        res = run_qvi(mdp, report, q0, args.iters, tube, basis, q0_label=label)
        name = f"qvi_{label}.csv"
        write_records_csv(res.records, out_dir / name)
        results.append(res)
        csv_names.append(name)
    manifest = _write_manifest(
        out_dir, "qvi", mdp, tube, basis, results, csv_names, circle,
        config={"iters": args.iters, "delta_frac": args.delta_frac},
    )
    print(f"wrote {len(csv_names)} trajectory file(s) and {manifest}")
    return 0


def cmd_qlearn(args) -> int:
    try:
        mdp = _load(args.path)
    except FileNotFoundError as err:
        return _fail(str(err), 1)
    except MdpValidationError as err:
        return _fail(f"invalid MDP: {err}", 1)
    try:
        report, tube, basis = _setup_run(mdp, 0.4)
        points, labels, circle = _initial_points(args, mdp, report, basis)
    except ValueError as err:
        return _fail(str(err), 1)
    except (RuntimeError, np.linalg.LinAlgError) as err:
        return _fail(f"numeric failure: {err}", 2)

    out_dir = Path(args.csv)
    out_dir.mkdir(parents=True, exist_ok=True)
    results, csv_names = [], []
    for j, (q0, label) in enumerate(zip(points, labels)):
        config = QLearnConfig(
            seed=args.seed + j, steps=args.steps, alpha0=args.alpha0, decay=args.decay
        )
        res = run_qlearning(mdp, report, q0, config, tube, basis, q0_label=label)
        name = f"qlearn_{label}.csv"
        write_records_csv(res.records, out_dir / name)
        results.append(res)
        csv_names.append(name)
    manifest = _write_manifest(
        out_dir, "qlearn", mdp, tube, basis, results, csv_names, circle,
        config={
            "seed": args.seed,
            "steps": args.steps,
            "alpha0": args.alpha0,
            "decay": args.decay,
        },
    )
    print(f"wrote {len(csv_names)} run file(s) and {manifest}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qtube",
        description="Tabular MDP solver with switching-system geometry certificates.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p_validate = sub.add_parser("validate", help="check an MDP JSON file")
    p_validate.add_argument("path")
    p_validate.set_defaults(func=cmd_validate)

    p_example = sub.add_parser("example", help="write a built-in example MDP")
    p_example.add_argument("name", help=f"one of: {', '.join(sorted(EXAMPLES))}")
    p_example.add_argument("--out", required=True, help="output JSON path")
    p_example.set_defaults(func=cmd_example)

    p_analyze = sub.add_parser("analyze", help="solve and certify an MDP")
    p_analyze.add_argument("path")
    p_analyze.add_argument("--delta-frac", type=float, default=0.4)
    p_analyze.add_argument("--depth", type=int, default=3)
    p_analyze.add_argument("--report", help="write the JSON document here instead of stdout")
    p_analyze.set_defaults(func=cmd_analyze)

    p_traj = sub.add_parser("trajectory", help="run deterministic value iteration")
    p_traj.add_argument("path")
    group = p_traj.add_mutually_exclusive_group()
    group.add_argument("--q0", help="JSON file with a (num_states x num_actions) Q table")
    group.add_argument(
        "--paper-q0", action="store_true",
        help="use the built-in toy3x2 reference starting point",
    )
    group.add_argument("--circle", metavar="R:M", help="M starts on an in-plane circle of radius R")
    p_traj.add_argument("--iters", type=int, default=50)
    p_traj.add_argument("--delta-frac", type=float, default=0.4)
    p_traj.add_argument("--csv", default=".", help="output directory")
    p_traj.set_defaults(func=cmd_trajectory)

    p_ql = sub.add_parser("qlearn", help="run stochastic tabular Q-learning")
    p_ql.add_argument("path")
    p_ql.add_argument("--seed", type=int, default=0)
    p_ql.add_argument("--steps", type=int, default=100_000)
    p_ql.add_argument("--alpha0", type=float, default=0.35)
    p_ql.add_argument("--decay", type=float, default=0.01)
    p_ql.add_argument("--circle", metavar="R:M", help="M starts on an in-plane circle of radius R")
    p_ql.add_argument("--csv", default=".", help="output directory")
    p_ql.set_defaults(func=cmd_qlearn)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
