"""``qforge`` command line: design, verify, sweep, sample, tomo, presets.

Exit codes: 0 success, 2 numerical failure, 3 invalid input.  Every artifact
carries the command configuration, the seed and the package version, and
contains nothing else that varies between runs.
"""

from __future__ import annotations

import argparse
import cmath
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from qforge import __version__, fock, presets
from qforge.factor import FactorError, FactorPlan, NonConvergence, TargetState, design, expand_plan, target_fidelity
from qforge.herald import PNR, THRESHOLD, DetectorModel, HeraldError, build_herald_circuit, compare_paths, simulate_herald
from qforge.sample import SampleConfig, analytic_curve, reports_to_csv, sample_events, sweep_q
from qforge.tomo import TomoError, apply_loss, mle_reconstruct, qutrit_diagnostics, sample_homodyne, subspace_fidelity

EXIT_OK = 0
EXIT_NUMERICAL = 2
EXIT_INVALID = 3
AGREEMENT_TOL = 1e-8
SEED_ENV = "QFORGE_SEED"


class InvalidInput(Exception):
    pass


class NumericalFailure(Exception):
    def __init__(self, message: str, report: dict | None = None):
        super().__init__(message)
        self.report = report or {}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INVALID, f"{self.prog}: error: {message}\n")


# ---------------------------------------------------------------------------
# shared helpers


def resolve_seed(seed: int | None) -> int:
    if seed is not None:
        return seed
    raw = os.environ.get(SEED_ENV)
    if raw is None:
        return 0
    try:
        return int(raw)
    except ValueError:
        raise InvalidInput(f"{SEED_ENV} must be an integer, got {raw!r}") from None


def provenance(command: str, config: dict, seed: int | None = None) -> dict:
    out = {"qforge_version": __version__, "command": command, "config": config}
    if seed is not None:
        out["seed"] = seed
    return out


def _read_json(path: str) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise InvalidInput(f"no such file: {path}") from None
    except json.JSONDecodeError as exc:
        raise InvalidInput(f"{path} is not valid JSON: {exc}") from None


def _emit(payload: dict | str, output: str | None) -> None:
    text = payload if isinstance(payload, str) else json.dumps(payload, indent=2, sort_keys=True) + "\n"
    if output is None or output == "-":
        sys.stdout.write(text)
    else:
        Path(output).write_text(text)


def _jsonable(value):
    if isinstance(value, complex):
        return value.real if value.imag == 0 else [value.real, value.imag]
    return value


def _preset_params(args) -> dict:
    preset = presets.get(args.preset)
    params = {}
    for name in preset.parameters:
        value = getattr(args, name, None)
        if value is None:
            raise InvalidInput(f"preset {preset.name!r} needs --{name}")
        params[name] = value
    return params


def load_target(args) -> tuple[TargetState, FactorPlan | None, dict]:
    """Target from ``--preset`` or a target JSON file, with a closed-form plan when one exists."""
    if args.preset:
        try:
            preset = presets.get(args.preset)
        except KeyError as exc:
            raise InvalidInput(str(exc)) from None
        params = _preset_params(args)
        closed = preset.closed_form(**params) if preset.closed_form else None
        shown = {k: _jsonable(v) for k, v in params.items()}
        return preset.target(**params), closed, {"preset": preset.name, **shown}
    if not args.target:
        raise InvalidInput("give a target file or --preset")
    data = _read_json(args.target)
    data = data.get("target", data)
    try:
        return TargetState.from_dict(data), None, {"target_file": args.target}
    except (KeyError, TypeError) as exc:
        raise InvalidInput(f"malformed target file: {exc}") from None


def load_plan(args) -> tuple[FactorPlan, dict]:
    if getattr(args, "plan", None):
        data = _read_json(args.plan)
        try:
            return FactorPlan.from_dict(data.get("plan", data)), {"plan_file": args.plan}
        except (KeyError, TypeError) as exc:
            raise InvalidInput(f"malformed plan file: {exc}") from None
    target, closed, cfg = load_target(args)
    return (closed or design(target)), cfg


def _fmt(z: complex) -> str:
    # round before printing so -1e-17 shows as +0.000000
    return f"{round(z.real, 6) + 0.0:+.6f}{round(z.imag, 6) + 0.0:+.6f}j"


def plan_table(plan: FactorPlan) -> str:
    rows = [f"{'k':>3}  {'t':>22}  {'r':>22}  {'|t|^2:|r|^2':>15}  {'phase/pi':>9}"]
    for k, (t, r) in enumerate(plan.factors, start=1):
        phase = cmath.phase(r) - cmath.phase(t) if abs(r) > 0 and abs(t) > 0 else 0.0
        phase = (phase + math.pi) % (2 * math.pi) - math.pi
        phase = round(phase / math.pi, 9) + 0.0
        rows.append(
            f"{k:>3}  {_fmt(t)}  {_fmt(r)}  "
            f"{abs(t) ** 2:.4f}:{abs(r) ** 2:.4f}  {phase:+9.5f}"
        )
    rows.append(f"scale = {_fmt(plan.scale)}")
    return "\n".join(rows)


def _q_grid(args) -> np.ndarray:
    if args.q:
        grid = np.array(args.q, dtype=float)
    else:
        grid = np.linspace(args.q_min, args.q_max, args.points)
    if np.any((grid <= 0) | (grid >= 1)):
        raise InvalidInput("every q must lie in (0, 1)")
    return grid


def _check_q(q: float) -> float:
    if not 0 < q < 1:
        raise InvalidInput(f"q must lie in (0, 1), got {q}")
    return q


def _detector(plan: FactorPlan, kind: str) -> DetectorModel:
    return DetectorModel.standard(plan.n, kind)


# ---------------------------------------------------------------------------
# commands


def cmd_design(args) -> int:
    target, closed, cfg = load_target(args)
    try:
        plan = closed or design(target)
    except NonConvergence as exc:
        raise NumericalFailure(str(exc), {"worst_residual": exc.worst_residual}) from None
    fid = target_fidelity(expand_plan(plan), target)
    payload = {
        **provenance("design", cfg),
        "target": target.to_dict(),
        "plan": plan.to_dict(),
        "roundtrip_fidelity": fid,
    }
    _emit(payload, args.output)
    if args.output not in (None, "-"):
        print(plan_table(plan))
    else:
        print(plan_table(plan), file=sys.stderr)
    return EXIT_OK


def cmd_verify(args) -> int:
    plan, cfg = load_plan(args)
    q = _check_q(args.q)
    cutoff = args.cutoff if args.cutoff is not None else plan.n + 3
    if cutoff < plan.n:
        raise InvalidInput(f"cutoff {cutoff} is below the photon number {plan.n}")
    comparison = compare_paths(plan, q, cutoff)
    report = {
        **provenance("verify", {**cfg, "q": q, "detector": args.detector, "cutoff": cutoff}),
        "n": plan.n,
        "pnr": comparison,
        "agreement_tol": AGREEMENT_TOL,
    }
    warnings = []
    if comparison["truncation_flag"]:
        warnings.append(f"source cutoff {cutoff} truncates a visible part of the heralding probability")
    if args.detector == THRESHOLD:
        out = simulate_herald(build_herald_circuit(plan, q, _detector(plan, THRESHOLD), cutoff))
        report["threshold"] = {
            "success_probability": out.success_probability,
            "purity": out.purity,
            "impurity": 1 - out.purity,
            "fidelity_to_target": out.fidelity_to_target,
            "truncation_flag": out.truncation_flag,
        }
        if out.truncation_flag:
            warnings.append("threshold path: source cutoff truncates the mixture")
    report["warnings"] = warnings
    for w in warnings:
        print(f"warning: {w}", file=sys.stderr)
    disagreement = max(1 - comparison["fidelity"], comparison["probability_rel_diff"])
    report["disagreement"] = disagreement
    report["agree"] = disagreement <= AGREEMENT_TOL
    _emit(report, args.output)
    if not report["agree"]:
        print(f"error: analytic and simulated heralding disagree by {disagreement:.3e}", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


def cmd_sweep(args) -> int:
    plan, cfg = load_plan(args)
    grid = _q_grid(args)
    seed = resolve_seed(args.seed)
    config = {**cfg, "q": grid.tolist(), "shots": args.shots, "detector": args.detector, "cutoff": args.cutoff}
    header = "# " + json.dumps(provenance("sweep", config, seed), sort_keys=True) + "\n"
    if args.shots > 0:
        reports = sweep_q(plan, grid, args.shots, seed, _detector(plan, args.detector), args.cutoff, args.workers)
        body = reports_to_csv(reports)
    else:
        lines = ["q,analytic"] + [f"{q!r},{p!r}" for q, p in zip(grid.tolist(), analytic_curve(plan, grid).tolist())]
        body = "\n".join(lines) + "\n"
    _emit(header + body, args.output)
    return EXIT_OK


def cmd_sample(args) -> int:
    plan, cfg = load_plan(args)
    seed = resolve_seed(args.seed)
    q = _check_q(args.q)
    if args.shots < 1:
        raise InvalidInput("shots must be >= 1")
    config = SampleConfig(args.shots, seed, q, _detector(plan, args.detector), args.cutoff, args.workers)
    report = sample_events(plan, config)
    payload = {
        **provenance("sample", {**cfg, "q": q, "shots": args.shots, "detector": args.detector, "cutoff": args.cutoff}, seed),
        **report.to_dict(),
        "covers_analytic": report.covers_analytic(),
    }
    _emit(payload, args.output)
    return EXIT_OK


def cmd_tomo(args) -> int:
    if not 0 < args.eta <= 1:
        raise InvalidInput(f"eta must lie in (0, 1], got {args.eta}")
    target, _, cfg = load_target(args)
    seed = resolve_seed(args.seed)
    if target.n != 2:
        raise InvalidInput("tomography diagnostics are defined for two-photon (qutrit) targets")
    ideal = target.to_state()
    rho_true = apply_loss(fock.density_from_pure(ideal, args.cutoff), args.eta)
    samples = sample_homodyne(rho_true, args.shots, args.phase_strategy, seed)
    if args.samples_out:
        Path(args.samples_out).write_text(samples.to_csv())
    result = mle_reconstruct(samples, args.cutoff, max_iter=args.max_iter, target=ideal)
    lls = result.log_likelihoods
    payload = {
        **provenance(
            "tomo",
            {**cfg, "eta": args.eta, "shots": args.shots, "cutoff": args.cutoff,
             "phase_strategy": args.phase_strategy, "max_iter": args.max_iter},
            seed,
        ),
        "result": result.to_dict(),
        "true_state": {
            "two_photon_population": qutrit_diagnostics(rho_true)["two_photon_population"],
            "photon_number_dist": fock.total_photon_distribution(rho_true).tolist(),
        },
        "reconstructed": qutrit_diagnostics(result.rho, ideal),
        "subspace_fidelity_to_true": subspace_fidelity(result.rho, rho_true),
        "log_likelihood_monotone": bool(all(b >= a - 1e-9 for a, b in zip(lls, lls[1:]))),
    }
    _emit(payload, args.output)
    return EXIT_OK


def cmd_presets(args) -> int:
    if args.json:
        _emit({name: {"description": p.description, "parameters": list(p.parameters),
                      "closed_form": p.closed_form is not None} for name, p in presets.PRESETS.items()}, None)
    else:
        for name, p in presets.PRESETS.items():
            params = " ".join(f"--{x}" for x in p.parameters)
            print(f"{name:<14} {p.description}" + (f"  [{params}]" if params else ""))
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser


def _add_target_args(p, positional: str = "target"):
    p.add_argument(positional, nargs="?", help=f"{positional} JSON file")
    p.add_argument("--preset", help="named target (see `qforge presets`)")
    p.add_argument("--N", type=int, help="NOON photon number")
    p.add_argument("--alpha", type=complex, help="loss-code |0_L> amplitude")
    p.add_argument("--beta", type=complex, help="loss-code |1_L> amplitude")
    p.add_argument("--n", type=int, help="photon number for the basis preset")
    p.add_argument("--k", type=int, default=0, help="photons in mode 2 for the basis preset")


def _add_detector_args(p):
    p.add_argument("--detector", choices=[PNR, THRESHOLD], default=PNR)
    p.add_argument("--cutoff", type=int, default=None, help="per-source photon cutoff (default n+3)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="qforge", description="Heralded two-mode photon-number state design and checks.")
    parser.add_argument("--version", action="version", version=f"qforge {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("design", help="factor a target into beam-splitter coefficients")
    _add_target_args(p)
    p.add_argument("-o", "--output", help="plan JSON path (default stdout)")
    p.set_defaults(func=cmd_design)

    p = sub.add_parser("verify", help="compare analytic and simulated heralding for a plan")
    _add_target_args(p, "plan")
    p.add_argument("--q", type=float, default=0.1)
    _add_detector_args(p)
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("sweep", help="success probability over a q grid (CSV)")
    _add_target_args(p, "plan")
    p.add_argument("--q", type=float, nargs="+", help="explicit q values")
    p.add_argument("--q-min", type=float, default=0.01)
    p.add_argument("--q-max", type=float, default=0.3)
    p.add_argument("--points", type=int, default=30)
    p.add_argument("--shots", type=int, default=0, help="Monte Carlo shots per point (0: analytic only)")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--workers", type=int, default=1)
    _add_detector_args(p)
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("sample", help="Monte Carlo heralding rate at one q")
    _add_target_args(p, "plan")
    p.add_argument("--q", type=float, default=0.1)
    p.add_argument("--shots", type=int, default=1_000_000)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--workers", type=int, default=1)
    _add_detector_args(p)
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("tomo", help="lossy homodyne tomography of a qutrit target")
    _add_target_args(p)
    p.add_argument("--eta", type=float, default=0.7)
    p.add_argument("--shots", type=int, default=100_000)
    p.add_argument("--cutoff", type=int, default=3, help="total-photon cutoff of the reconstruction")
    p.add_argument("--phase-strategy", choices=["uniform", "grid"], default="uniform")
    p.add_argument("--max-iter", type=int, default=500)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--samples-out", help="write the quadrature samples as CSV")
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_tomo)

    p = sub.add_parser("presets", help="list named targets")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_presets)
    return parser


def main(argv: list[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        # argparse exits on --help/--version (0) and on bad usage (3)
        return exc.code if isinstance(exc.code, int) else EXIT_INVALID
    try:
        return args.func(args)
    except NumericalFailure as exc:
        print(f"error: {exc}", file=sys.stderr)
        if exc.report:
            print(json.dumps(exc.report, sort_keys=True), file=sys.stderr)
        return EXIT_NUMERICAL
    except NonConvergence as exc:
        print(f"error: {exc} (worst residual {exc.worst_residual:.3e})", file=sys.stderr)
        return EXIT_NUMERICAL
    except (np.linalg.LinAlgError, FloatingPointError) as exc:
        print(f"error: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (InvalidInput, FactorError, HeraldError, TomoError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
