"""Command-line interface: runs every pipeline end to end and emits
CSV/JSON data files plus a run manifest.

Exit codes: 0 success, 2 usage error, 3 model/domain error,
4 non-convergence (result files are still written).
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import tempfile
from pathlib import Path

import numpy as np

from . import __version__
from .calibration import (
    LossBudget,
    combine_losses,
    fit_imperfections,
    read_observations_csv,
    residual_loss,
)
from .cavity import branch_amplitudes, cooperativity, f1_max, xi
from .distillation import distilled_state, sweep_rows
from .errors import ModelError
from .fockspace import coherent_state, wigner
from .photonstats import HBTConfig, PulseShape, bandwidth_check, g2_curve, hbt_monte_carlo
from .presets import HBT_DEFAULTS, budget_csv_path, resolve_config
from .tomography import (
    mle_reconstruct,
    read_samples_csv,
    reconstruction_report,
    sample_homodyne,
    write_samples_csv,
)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_MODEL = 3
EXIT_NO_CONVERGENCE = 4


def _atomic_write(path: Path, text: str):
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


class RunWriter:
    """Collects output files and emits the run manifest."""

    def __init__(self, out_dir: str):
        self.out_dir = Path(out_dir)
        self.out_dir.mkdir(parents=True, exist_ok=True)
        self.outputs: list[str] = []

    def write_csv(self, name: str, fieldnames, rows):
        lines = [",".join(fieldnames)]
        for row in rows:
            lines.append(",".join(_format_cell(row[key]) for key in fieldnames))
        _atomic_write(self.out_dir / name, "\n".join(lines) + "\n")
        self.outputs.append(name)
        return self.out_dir / name

    def write_json(self, name: str, payload: dict):
        _atomic_write(self.out_dir / name, json.dumps(payload, indent=2) + "\n")
        self.outputs.append(name)
        return self.out_dir / name

    def write_text(self, name: str, text: str):
        _atomic_write(self.out_dir / name, text)
        self.outputs.append(name)
        return self.out_dir / name

    def manifest(self, command: str, config_path: str, seed: int):
        import scipy

        payload = {
            "command": command,
            "config_path": config_path,
            "seed": seed,
            "output_dir": str(self.out_dir),
            "versions": {
                "photondistill": __version__,
                "python": sys.version.split()[0],
                "numpy": np.__version__,
                "scipy": scipy.__version__,
            },
            "outputs": list(self.outputs),
        }
        _atomic_write(self.out_dir / "manifest.json", json.dumps(payload, indent=2) + "\n")


def _format_cell(value) -> str:
    if isinstance(value, float):
        return f"{value:.12g}"
    return str(value)


def _parse_grid(text: str) -> np.ndarray:
    try:
        lo, hi, steps = text.split(":")
        return np.linspace(float(lo), float(hi), int(steps))
    except (ValueError, TypeError) as exc:
        raise argparse.ArgumentTypeError(f"grid must be MIN:MAX:STEPS, got {text!r}") from exc


def _add_common(parser):
    parser.add_argument("--config", default="reference",
                        help="preset name (reference, reference-g2, fiber) or config file path")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--out", default="out", help="output directory")
    parser.add_argument("--dim", type=int, default=20, help="Fock truncation dimension")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="photondistill",
        description="Heralded single-photon distillation: model curves, "
        "tomography and photon statistics as data files.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("params", help="derived cavity quantities")
    _add_common(p)

    p = sub.add_parser("sweep", help="heralding probability and populations vs intensity")
    _add_common(p)
    p.add_argument("--grid", type=_parse_grid, default="0.05:2.5:50",
                   help="alpha^2 grid MIN:MAX:STEPS")
    p.add_argument("--uncorrected", dest="corrected", action="store_false", default=True,
                   help="report populations without inverting the downstream loss")

    p = sub.add_parser("wigner", help="phase-space map of the distilled state")
    _add_common(p)
    p.add_argument("--alpha-sq", type=float, default=0.31)
    p.add_argument("--grid", type=_parse_grid, default="-3:3:81",
                   help="q and p axis MIN:MAX:STEPS")
    p.add_argument("--uncorrected", dest="corrected", action="store_false", default=True)

    p = sub.add_parser("g2", help="second-order correlation predictions")
    _add_common(p)
    p.add_argument("--alpha-sq", type=float, default=None,
                   help="single-point Monte Carlo at this intensity")
    p.add_argument("--grid", type=_parse_grid, default=None,
                   help="alpha^2 grid MIN:MAX:STEPS for the curve")
    p.add_argument("--mc", action="store_true", help="Monte Carlo instead of analytic curve")
    p.add_argument("--trials", type=int, default=1_000_000)
    p.add_argument("--offsets", type=int, default=5, help="run offsets for g2(tau)")
    p.add_argument("--detector-efficiency", type=float, default=HBT_DEFAULTS["detector_efficiency"])
    p.add_argument("--dark-rate", type=float, default=HBT_DEFAULTS["dark_count_rate"])
    p.add_argument("--pulse-fwhm", type=float, default=HBT_DEFAULTS["pulse_fwhm"])
    p.add_argument("--pulse-kind", default="gaussian",
                   choices=["gaussian", "double_peak", "rectangular"])

    p = sub.add_parser("tomography", help="synthetic homodyne records and reconstruction")
    tomo_sub = p.add_subparsers(dest="mode", required=True)
    sim = tomo_sub.add_parser("simulate", help="draw homodyne samples")
    _add_common(sim)
    sim.add_argument("--state", default="distilled", choices=["distilled", "coherent"])
    sim.add_argument("--alpha-sq", type=float, default=0.31)
    sim.add_argument("--phases", type=int, default=12)
    sim.add_argument("--samples", type=int, default=120_000, help="total sample count")
    sim.add_argument("--efficiency", type=float, default=1.0)
    sim.add_argument("--uncorrected", dest="corrected", action="store_false", default=True)
    rec = tomo_sub.add_parser("reconstruct", help="maximum-likelihood estimate from samples")
    _add_common(rec)
    rec.add_argument("--samples", required=True, help="CSV with theta,x columns")
    rec.add_argument("--efficiency", type=float, default=1.0)
    rec.add_argument("--max-iter", type=int, default=1000)
    rec.add_argument("--tol", type=float, default=1e-9)

    p = sub.add_parser("fit", help="fit loss, detection error and detuning to populations")
    _add_common(p)
    p.add_argument("--observations", required=True, help="CSV with alpha_sq,p0,p1,p2")
    p.add_argument("--corrected-loss", type=float, default=0.251)
    p.add_argument("--restarts", type=int, default=8)

    p = sub.add_parser("budget", help="combine a loss budget")
    _add_common(p)
    p.add_argument("--file", default=None, help="CSV with label,loss (default: bundled budget)")
    p.add_argument("--l-fit", type=float, default=None,
                   help="also report the residual loss after correcting the budget total")

    return parser


def cmd_params(args, writer: RunWriter) -> int:
    config = resolve_config(args.config)
    params = config.params
    up = branch_amplitudes(params, True, 1.0)
    down = branch_amplitudes(params, False, 1.0)
    report = {
        "cooperativity": cooperativity(params),
        "xi": xi(params),
        "f1_max": f1_max(params),
        "energy_conservation_error": max(
            abs(up.total_power - 1.0), abs(down.total_power - 1.0)
        ),
        "rates": {
            "g": params.g, "kappa": params.kappa, "kappa_r": params.kappa_r,
            "kappa_t": params.kappa_t, "kappa_m": params.kappa_m,
            "gamma": params.gamma, "delta_a": params.delta_a, "delta_c": params.delta_c,
        },
    }
    writer.write_json("params.json", report)
    print(json.dumps(report, indent=2))
    return EXIT_OK


def cmd_sweep(args, writer: RunWriter) -> int:
    config = resolve_config(args.config)
    rows = sweep_rows(config, args.grid, dim=args.dim, corrected=args.corrected)
    fields = ["alpha_sq", "p_up", "f1", "p0", "p1", "p2", "p3",
              "suppression", "suppression_rel", "coherent_ref"]
    writer.write_csv("sweep.csv", fields, rows)
    finite = [r for r in rows if not math.isnan(r["f1"])]
    best = max(finite, key=lambda r: r["f1"]) if finite else None
    summary = {
        "rows": len(rows),
        "corrected": args.corrected,
        "max_f1": None if best is None else best["f1"],
        "argmax_alpha_sq": None if best is None else best["alpha_sq"],
    }
    writer.write_json("sweep_summary.json", summary)
    return EXIT_OK


def cmd_wigner(args, writer: RunWriter) -> int:
    config = resolve_config(args.config)
    axis = args.grid
    rho, p_up = distilled_state(
        config, math.sqrt(args.alpha_sq), dim=args.dim, corrected=args.corrected
    )
    Q, P = np.meshgrid(axis, axis, indexing="ij")
    W = wigner(rho, Q, P)
    rows = [
        {"q": float(q), "p": float(p), "w": float(w)}
        for q, p, w in zip(Q.ravel(), P.ravel(), W.ravel())
    ]
    writer.write_csv("wigner.csv", ["q", "p", "w"], rows)
    imin = int(np.argmin(W))
    summary = {
        "alpha_sq": args.alpha_sq,
        "corrected": args.corrected,
        "herald_probability": p_up,
        "w_origin": float(wigner(rho, 0.0, 0.0)),
        "w_min": float(W.ravel()[imin]),
        "w_min_q": float(Q.ravel()[imin]),
        "w_min_p": float(P.ravel()[imin]),
    }
    writer.write_json("wigner_summary.json", summary)
    print(json.dumps(summary, indent=2))
    return EXIT_OK


def cmd_g2(args, writer: RunWriter) -> int:
    config = resolve_config(args.config)
    hbt = HBTConfig(
        detector_efficiency=args.detector_efficiency,
        dark_count_rate=args.dark_rate,
        coincidence_window=3.0 * args.pulse_fwhm,
        trials=args.trials,
        seed=args.seed,
    )
    if args.alpha_sq is None and args.grid is None:
        raise ModelError("g2 needs --alpha-sq (point mode) or --grid (curve mode)")
    if args.grid is not None:
        rows = g2_curve(config, args.grid, hbt, pulse_width=args.pulse_fwhm,
                        dim=args.dim, monte_carlo=args.mc)
        writer.write_csv("g2_curve.csv", ["alpha_sq", "g2_zero", "stderr", "g2_state"], rows)
    if args.alpha_sq is not None:
        pulse = PulseShape(args.pulse_kind, args.pulse_fwhm, args.alpha_sq)
        rho, _ = distilled_state(config, math.sqrt(args.alpha_sq), dim=args.dim)
        result = hbt_monte_carlo(rho, pulse, hbt, n_offsets=args.offsets)
        rows = [
            {"tau_index": tau, "g2": float(result.g2_tau[tau]),
             "stderr": float(result.stderr_tau[tau])}
            for tau in range(len(result.g2_tau))
        ]
        writer.write_csv("g2_tau.csv", ["tau_index", "g2", "stderr"], rows)
        check = bandwidth_check(pulse, config.params)
        summary = {
            "alpha_sq": args.alpha_sq,
            "g2_zero": result.g2_zero,
            "stderr": result.stderr,
            "singles": list(result.singles),
            "coincidences": result.coincidences,
            "trials": result.trials,
            "bandwidth_valid": check["valid"],
            "bandwidth_ratio": check["ratio"],
        }
        writer.write_json("g2_summary.json", summary)
        print(json.dumps(summary, indent=2))
    return EXIT_OK


def cmd_tomography(args, writer: RunWriter) -> int:
    config = resolve_config(args.config)
    if args.mode == "simulate":
        if args.state == "distilled":
            rho, _ = distilled_state(
                config, math.sqrt(args.alpha_sq), dim=args.dim, corrected=args.corrected
            )
        else:
            rho = coherent_state(math.sqrt(args.alpha_sq), args.dim).density_matrix()
        phases = [k * math.pi / args.phases for k in range(args.phases)]
        per_phase = max(args.samples // args.phases, 1)
        samples = sample_homodyne(rho, phases, per_phase,
                                  efficiency=args.efficiency, seed=args.seed)
        path = writer.out_dir / "samples.csv"
        write_samples_csv(path, samples)
        writer.outputs.append("samples.csv")
        writer.write_json("samples_summary.json", {
            "state": args.state,
            "alpha_sq": args.alpha_sq,
            "phases": args.phases,
            "samples": len(samples),
            "efficiency": args.efficiency,
        })
        return EXIT_OK
    samples = read_samples_csv(args.samples)
    result = mle_reconstruct(samples, dim=args.dim, efficiency=args.efficiency,
                             max_iter=args.max_iter, tol=args.tol)
    writer.write_json("reconstruction.json", reconstruction_report(result))
    return EXIT_OK if result.converged else EXIT_NO_CONVERGENCE


def cmd_fit(args, writer: RunWriter) -> int:
    config = resolve_config(args.config)
    observations = read_observations_csv(args.observations)
    result = fit_imperfections(
        observations, config.params, corrected_loss=args.corrected_loss,
        restarts=args.restarts, seed=args.seed,
    )
    payload = {
        "loss": result.loss,
        "epsilon": result.epsilon,
        "delta_c": result.delta_c,
        "residual": result.residual,
        "converged": result.converged,
        "restart_residuals": result.restarts,
    }
    writer.write_json("fit.json", payload)
    print(json.dumps(payload, indent=2))
    return EXIT_OK if result.converged else EXIT_NO_CONVERGENCE


def cmd_budget(args, writer: RunWriter) -> int:
    path = args.file if args.file is not None else budget_csv_path()
    budget = LossBudget.from_csv(path)
    total = combine_losses(budget)
    payload = {"file": str(path), "items": len(budget.items), "l_sum": total}
    if args.l_fit is not None:
        payload["l_fit"] = args.l_fit
        payload["l_uncorrected"] = residual_loss(args.l_fit, total)
    writer.write_json("budget.json", payload)
    print(json.dumps(payload, indent=2))
    return EXIT_OK


COMMANDS = {
    "params": cmd_params,
    "sweep": cmd_sweep,
    "wigner": cmd_wigner,
    "g2": cmd_g2,
    "tomography": cmd_tomography,
    "fit": cmd_fit,
    "budget": cmd_budget,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    writer = RunWriter(args.out)
    try:
        code = COMMANDS[args.command](args, writer)
    except (ModelError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        writer.manifest(args.command, getattr(args, "config", ""), args.seed)
        return EXIT_MODEL
    writer.manifest(args.command, getattr(args, "config", ""), args.seed)
    return code


if __name__ == "__main__":
    sys.exit(main())
