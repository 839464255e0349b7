"""Command-line surface and file formats.

Structured inputs and outputs are JSON; complex matrices are stored as
paired real/imaginary 2-D arrays ``{"re": [[...]], "im": [[...]]}`` (``im``
may be omitted for real matrices) and pure states as paired 1-D arrays.
Histograms are also written as CSV (``bin_center,density,error``) for
external plotting.  Floats round-trip exactly: JSON and CSV use Python's
shortest-repr formatting, which preserves every double bit for bit.

Subcommands: ``analyze`` (full pipeline), ``simulate``, ``mle``, ``fit``,
``qeb``, ``confidence``, ``bootstrap``.  Failures exit nonzero after
printing a machine-readable error JSON to stderr.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .figures import (
    FigureOfMerit,
    ObservableExpectation,
    PurifiedDistanceTo,
    SquaredFidelityTo,
    SquaredFidelityToPure,
    TraceDistanceTo,
    model_variables,
)
from .fitqeb import (
    FitParams,
    bootstrap_compare,
    confidence_threshold,
    fit_log_model,
    quantum_error_bars,
)
from .histstats import FomHistogram, HistogramSpec
from .mle import mle
from .sampler import (
    WalkConfig,
    pilot_histogram_spec,
    run_analysis,
    tune_step_size,
    walker_seed,
)
from .statespace import DensityMatrix, PureState
from .tomodata import (
    CalibrationReadout,
    PovmEffect,
    TomographyDataset,
    merge_duplicate_effects,
    simulate_dataset,
    standard_pauli_settings,
)


def _load_json(path: str) -> dict:
    try:
        with open(path) as handle:
            return json.load(handle)
    except FileNotFoundError:
        raise ValueError(f"{path}: file not found") from None
    except json.JSONDecodeError as exc:
        raise ValueError(f"{path}: invalid JSON ({exc})") from None


def _complex_array(obj: dict, what: str) -> np.ndarray:
    if not isinstance(obj, dict) or "re" not in obj:
        raise ValueError(f"{what}: expected an object with 're' (and optional 'im')")
    re = np.asarray(obj["re"], dtype=float)
    im = np.asarray(obj.get("im", np.zeros_like(re)), dtype=float)
    if re.shape != im.shape:
        raise ValueError(f"{what}: 're' shape {re.shape} != 'im' shape {im.shape}")
    return re + 1j * im


def parse_dataset(path: str) -> TomographyDataset:
    """Read and validate a dataset JSON file.

    Schema: ``{"dim": int, "effects": [{"re", "im"}...], "counts": [int...],
    "total": optional int}``.  Duplicate effects are merged, summing their
    counts.  Violations raise with the offending field or index named.
    """
    doc = _load_json(path)
    for field in ("dim", "effects", "counts"):
        if field not in doc:
            raise ValueError(f"{path}: missing field '{field}'")
    dim = doc["dim"]
    if not isinstance(dim, int) or dim < 1:
        raise ValueError(f"{path}: 'dim' must be a positive integer, got {dim!r}")
    raw_effects = doc["effects"]
    raw_counts = doc["counts"]
    if len(raw_counts) != len(raw_effects):
        raise ValueError(
            f"{path}: counts has length {len(raw_counts)} but effects has "
            f"length {len(raw_effects)}"
        )
    matrices = []
    for idx, entry in enumerate(raw_effects):
        mat = _complex_array(entry, f"{path}: effects[{idx}]")
        if mat.shape != (dim, dim):
            raise ValueError(
                f"{path}: effects[{idx}] has shape {mat.shape}, expected ({dim}, {dim})"
            )
        matrices.append(mat)
    counts = []
    for idx, count in enumerate(raw_counts):
        if not isinstance(count, int) or count < 0:
            raise ValueError(
                f"{path}: counts[{idx}] must be a non-negative integer, got {count!r}"
            )
        counts.append(count)
    matrices, counts = merge_duplicate_effects(matrices, counts)
    effects = []
    for idx, mat in enumerate(matrices):
        try:
            effects.append(PovmEffect(dim, mat))
        except ValueError as exc:
            raise ValueError(f"{path}: effects[{idx}]: {exc}") from None
    return TomographyDataset(
        dim, tuple(effects), np.array(counts, dtype=np.int64), total=doc.get("total")
    )


def parse_calibration(path: str) -> CalibrationReadout:
    """Read a binned readout calibration JSON file.

    Schema: ``{"bins": B, "q0": [...], "q1": [...], "rotations":
    [{"re", "im"}...]}`` with ``q0``/``q1`` the bin probabilities for
    trusted |0> and |1> preparations and one 2x2 unitary per measurement
    setting.  Feed the result to ``tomodata.build_effective_povm``.
    """
    doc = _load_json(path)
    for field in ("bins", "q0", "q1", "rotations"):
        if field not in doc:
            raise ValueError(f"{path}: missing field '{field}'")
    rotations = tuple(
        _complex_array(entry, f"{path}: rotations[{idx}]")
        for idx, entry in enumerate(doc["rotations"])
    )
    try:
        return CalibrationReadout(doc["bins"], doc["q0"], doc["q1"], rotations)
    except ValueError as exc:
        raise ValueError(f"{path}: {exc}") from None


def _matrix_json(mat: np.ndarray) -> dict:
    return {"re": mat.real.tolist(), "im": mat.imag.tolist()}


def _load_state(path: str) -> DensityMatrix | PureState:
    arr = _complex_array(_load_json(path), path)
    if arr.ndim == 1:
        return PureState(arr.shape[0], arr / np.linalg.norm(arr))
    return DensityMatrix(arr.shape[0], arr)


def _as_pure(state: DensityMatrix | PureState) -> PureState | None:
    if isinstance(state, PureState):
        return state
    eigvals, eigvecs = np.linalg.eigh(state.entries)
    if eigvals[-1] >= 1.0 - 1e-10:
        return PureState(state.dim, eigvecs[:, -1])
    return None


def _as_density(state: DensityMatrix | PureState) -> DensityMatrix:
    if isinstance(state, PureState):
        return state.projector()
    return state


def _resolve_figure(args, data: TomographyDataset) -> FigureOfMerit:
    kind = args.fom
    if kind == "observable":
        if not args.observable:
            raise ValueError("--observable FILE is required for --fom observable")
        mat = _complex_array(_load_json(args.observable), args.observable)
        return ObservableExpectation(
            mat, extremum=args.extremum, direction=args.extremum_kind
        )
    if not args.ref:
        raise ValueError(f"--ref FILE|mle is required for --fom {kind}")
    if args.ref == "mle":
        reference = mle(data).state
    else:
        reference = _load_state(args.ref)
    if kind == "fidelity2":
        pure = _as_pure(reference)
        if pure is not None:
            return SquaredFidelityToPure(pure)
        return SquaredFidelityTo(_as_density(reference))
    if kind == "trace-dist":
        return TraceDistanceTo(_as_density(reference))
    if kind == "purified-dist":
        return PurifiedDistanceTo(_as_density(reference))
    raise ValueError(f"unknown figure of merit {kind!r}")


def _dump_json(obj, path: str | None) -> None:
    text = json.dumps(obj, indent=2)
    if path:
        Path(path).write_text(text + "\n")
    else:
        print(text)


def _histogram_csv(hist: FomHistogram) -> str:
    lines = ["bin_center,density,error"]
    for center, dens, err in zip(hist.spec.centers, hist.density, hist.error):
        lines.append(f"{float(center)!r},{float(dens)!r},{float(err)!r}")
    return "\n".join(lines) + "\n"


def _histogram_json(hist: FomHistogram) -> dict:
    return {
        "f_min": hist.spec.f_min,
        "f_max": hist.spec.f_max,
        "num_bins": hist.spec.num_bins,
        "bin_centers": hist.spec.centers.tolist(),
        "density": hist.density.tolist(),
        "error": hist.error.tolist(),
        "off_range_count": hist.off_range_count,
    }


def _fit_json(params: FitParams) -> dict:
    bars = quantum_error_bars(params)
    return {
        "a2": params.a2,
        "a1": params.a1,
        "m": params.m,
        "c": params.c,
        "h": params.h,
        "s": params.s,
        "bounds_95": {k: list(v) for k, v in params.bounds_95.items()},
        "reduced_chi_square": params.reduced_chi_square,
        "num_points": params.num_points,
        "quantum_error_bars": {
            "f0": bars.f0,
            "delta": bars.delta,
            "gamma": bars.gamma,
            "y0": bars.y0,
        },
    }


def _confidence_json(report) -> dict:
    return {
        "epsilon": report.epsilon,
        "n": report.n,
        "d": report.d,
        "poly_n": report.poly_n,
        "epsilon_reduced": report.epsilon_reduced,
        "log10_epsilon_reduced": report.log10_epsilon_reduced,
        "f_star": report.f_star,
        "delta_enlargement": report.delta_enlargement,
        "f_reported": report.f_reported,
        "region_bounds": [b if math.isfinite(b) else repr(b) for b in report.region_bounds],
        "region": report.region,
    }


class _CliFigure(FigureOfMerit):
    # Figure-of-merit stand-in when only (kind, h, s) are known, as in the
    # standalone `confidence` subcommand.

    def __init__(self, kind: str, h: float, s: int):
        super().__init__(h=h, s=s)
        self.kind = kind

    def natural_range(self) -> tuple[float, float]:
        if self.kind in ("fidelity2", "trace-dist", "purified-dist"):
            return (0.0, 1.0)
        return (-math.inf, self.h) if self.s == -1 else (self.h, math.inf)


def _cmd_simulate(args) -> int:
    state = _as_density(_load_state(args.state))
    settings = standard_pauli_settings(args.num_qubits)
    if state.dim != 2**args.num_qubits:
        raise ValueError(
            f"state dimension {state.dim} does not match {args.num_qubits} qubits"
        )
    data = simulate_dataset(state, settings, args.shots, np.random.default_rng(args.seed))
    doc = {
        "dim": data.dim,
        "effects": [_matrix_json(e.matrix) for e in data.effects],
        "counts": data.counts.tolist(),
        "total": data.n_total,
    }
    _dump_json(doc, args.out)
    return 0


def _cmd_mle(args) -> int:
    data = parse_dataset(args.dataset)
    result = mle(data, tol=args.tol, max_iter=args.max_iter)
    doc = {
        "dim": result.state.dim,
        **_matrix_json(result.state.entries),
        "eigenvalues": np.linalg.eigvalsh(result.state.entries).tolist(),
        "log_likelihood": result.log_likelihood,
        "iterations": result.iterations,
        "converged": result.converged,
    }
    _dump_json(doc, args.out)
    return 0


def _parse_range(text: str) -> tuple[float, float] | None:
    if text == "auto":
        return None
    try:
        lo, hi = text.split(":")
        return float(lo), float(hi)
    except ValueError:
        raise ValueError(f"--range must be 'auto' or 'lo:hi', got {text!r}") from None


def _cmd_analyze(args) -> int:
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    data = parse_dataset(args.dataset)
    fom = _resolve_figure(args, data)

    if args.step_size == "auto":
        step_size = tune_step_size(data, fom, base_seed=args.seed)
    else:
        step_size = float(args.step_size)
    n_sweep = None if args.n_sweep == "auto" else int(args.n_sweep)
    config = WalkConfig(
        n_samples=args.n_samples,
        step_size=step_size,
        n_therm=args.n_therm,
        n_sweep=n_sweep,
        n_walkers=args.walkers,
        base_seed=args.seed,
    )
    fixed_range = _parse_range(args.range)
    if fixed_range is None:
        spec = pilot_histogram_spec(data, config, fom, num_bins=args.bins)
    else:
        spec = HistogramSpec(fixed_range[0], fixed_range[1], args.bins)

    result = run_analysis(data, config, fom, spec)
    hist = result.histogram

    report = {
        "provenance": {
            "tool": "qerrbars",
            "version": __version__,
            "config": {
                "dataset": args.dataset,
                "fom": args.fom,
                "ref": args.ref,
                "observable": args.observable,
                "extremum": args.extremum,
                "extremum_kind": args.extremum_kind,
                "bins": args.bins,
                "range": [spec.f_min, spec.f_max],
                "step_size": step_size,
                "n_therm": config.n_therm,
                "n_sweep": config.resolved_n_sweep,
                "n_samples": config.n_samples,
                "walkers": config.n_walkers,
                "seed": config.base_seed,
                "epsilon": args.epsilon,
                "delta": args.delta,
                "w_range": args.w_range,
            },
            "walker_seeds": [
                walker_seed(config.base_seed, i) for i in range(config.n_walkers)
            ],
        },
        "dataset": {
            "dim": data.dim,
            "num_effects": len(data.effects),
            "total_counts": data.n_total,
        },
        "figure_of_merit": {"kind": fom.kind, "h": fom.h, "s": fom.s},
        "walk": {
            "acceptance_ratios": [r.acceptance_ratio for r in result.walker_reports],
            "recorded_samples": sum(r.n_samples for r in result.walker_reports),
        },
        "histogram": _histogram_json(hist),
    }

    params = None
    if not args.no_fit:
        try:
            params = fit_log_model(hist, model_variables(fom))
            report["fit"] = _fit_json(params)
        except (ValueError, RuntimeError) as exc:
            report["fit"] = {"error": str(exc)}

    if args.epsilon is not None:
        if args.delta is None:
            raise ValueError("--delta is required together with --epsilon")
        if params is None:
            raise ValueError("confidence thresholds need a successful fit")
        conf = confidence_threshold(
            params,
            fom,
            args.epsilon,
            data.n_total,
            data.dim,
            args.delta,
            observable_range=args.w_range,
        )
        report["confidence"] = _confidence_json(conf)

    (out_dir / "histogram.csv").write_text(_histogram_csv(hist))
    _dump_json(report, str(out_dir / "report.json"))
    if args.dump_samples:
        lines = ["walker,sample_index,value"]
        for widx, wreport in enumerate(result.walker_reports):
            for sidx, value in enumerate(wreport.sample_series):
                lines.append(f"{widx},{sidx},{float(value)!r}")
        (out_dir / "samples.csv").write_text("\n".join(lines) + "\n")
    print(f"wrote {out_dir / 'report.json'}")
    return 0


def _read_histogram_csv(path: str) -> FomHistogram:
    rows = Path(path).read_text().strip().splitlines()
    if not rows or rows[0].strip() != "bin_center,density,error":
        raise ValueError(f"{path}: expected header 'bin_center,density,error'")
    table = np.array(
        [[float(cell) for cell in row.split(",")] for row in rows[1:]]
    )
    if table.shape[0] < 2:
        raise ValueError(f"{path}: need at least two bins")
    centers, density, error = table.T
    widths = np.diff(centers)
    if not np.allclose(widths, widths[0], rtol=1e-9, atol=0):
        raise ValueError(f"{path}: bin centers are not evenly spaced")
    width = float(widths[0])
    spec = HistogramSpec(centers[0] - width / 2, centers[-1] + width / 2, len(centers))
    return FomHistogram(spec, density, error)


def _cmd_fit(args) -> int:
    hist = _read_histogram_csv(args.histogram)
    params = fit_log_model(hist, (args.h, args.s))
    _dump_json(_fit_json(params), args.out)
    return 0


def _params_from_args(args) -> FitParams:
    return FitParams(
        a2=args.a2,
        a1=args.a1,
        m=args.m,
        c=args.c,
        h=args.h,
        s=args.s,
        bounds_95={},
        reduced_chi_square=math.nan,
        num_points=0,
    )


def _cmd_qeb(args) -> int:
    bars = quantum_error_bars(_params_from_args(args))
    if args.json:
        _dump_json(
            {"f0": bars.f0, "delta": bars.delta, "gamma": bars.gamma, "y0": bars.y0},
            None,
        )
    else:
        print(f"f0 = {bars.f0!r}")
        print(f"Delta = {bars.delta!r}")
        print(f"gamma = {bars.gamma!r}")
    return 0


def _cmd_confidence(args) -> int:
    fom = _CliFigure(args.fom, args.h, args.s)
    report = confidence_threshold(
        _params_from_args(args),
        fom,
        args.epsilon,
        args.n,
        args.d,
        args.delta,
        observable_range=args.w_range,
    )
    _dump_json(_confidence_json(report), args.out)
    return 0


def _cmd_bootstrap(args) -> int:
    data = parse_dataset(args.dataset)
    estimate = mle(data).state
    fom = _resolve_figure(args, data)
    settings = standard_pauli_settings(args.num_qubits)
    result = bootstrap_compare(
        settings,
        args.shots,
        estimate,
        fom,
        np.random.default_rng(args.seed),
        reps=args.reps,
    )
    _dump_json(
        {"values": result.values.tolist(), "failures": result.failures}, args.out
    )
    return 0


def _add_figure_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "--fom",
        required=True,
        choices=["fidelity2", "trace-dist", "purified-dist", "observable"],
        help="figure of merit",
    )
    parser.add_argument(
        "--ref", help="reference state JSON file, or 'mle' to estimate it"
    )
    parser.add_argument("--observable", help="observable matrix JSON file")
    parser.add_argument(
        "--extremum", type=float, help="extremal expectation value of the observable"
    )
    parser.add_argument(
        "--extremum-kind",
        choices=["max", "min"],
        default="max",
        help="whether the extremum is a maximum or a minimum",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qerrbars",
        description="Quantum error bars for tomography data",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_sim = sub.add_parser("simulate", help="simulate Pauli measurement outcomes")
    p_sim.add_argument("--state", required=True, help="true state JSON file")
    p_sim.add_argument("--num-qubits", type=int, required=True)
    p_sim.add_argument("--shots", type=int, required=True, help="shots per setting")
    p_sim.add_argument("--seed", type=int, default=0)
    p_sim.add_argument("--out", help="output dataset file (default: stdout)")
    p_sim.set_defaults(func=_cmd_simulate)

    p_mle = sub.add_parser("mle", help="maximum likelihood estimate")
    p_mle.add_argument("--dataset", required=True)
    p_mle.add_argument("--tol", type=float, default=1e-10)
    p_mle.add_argument("--max-iter", type=int, default=100_000)
    p_mle.add_argument("--out")
    p_mle.set_defaults(func=_cmd_mle)

    p_an = sub.add_parser("analyze", help="full pipeline: sample, fit, report")
    p_an.add_argument("--dataset", required=True)
    _add_figure_args(p_an)
    p_an.add_argument("--bins", type=int, default=100)
    p_an.add_argument("--range", default="auto", help="'auto' or 'lo:hi'")
    p_an.add_argument("--step-size", default="0.01", help="step size or 'auto'")
    p_an.add_argument("--n-therm", type=int, default=500, help="thermalization sweeps")
    p_an.add_argument("--n-sweep", default="auto", help="steps per sample or 'auto'")
    p_an.add_argument("--n-samples", type=int, default=8192, help="samples per walker")
    p_an.add_argument("--walkers", type=int, default=4)
    p_an.add_argument("--seed", type=int, default=0)
    p_an.add_argument("--no-fit", action="store_true")
    p_an.add_argument("--epsilon", type=float, help="confidence parameter epsilon")
    p_an.add_argument("--delta", type=float, help="purified-distance enlargement")
    p_an.add_argument("--w-range", type=float, help="observable eigenvalue spread w")
    p_an.add_argument("--dump-samples", action="store_true")
    p_an.add_argument("--out", required=True, help="output directory")
    p_an.set_defaults(func=_cmd_analyze)

    p_fit = sub.add_parser("fit", help="fit a saved histogram CSV")
    p_fit.add_argument("--histogram", required=True)
    p_fit.add_argument("--h", type=float, required=True)
    p_fit.add_argument("--s", type=int, choices=[-1, 1], required=True)
    p_fit.add_argument("--out")
    p_fit.set_defaults(func=_cmd_fit)

    p_qeb = sub.add_parser("qeb", help="quantum error bars from fit parameters")
    for name in ("a2", "a1", "m", "h"):
        p_qeb.add_argument(f"--{name}", type=float, required=True)
    p_qeb.add_argument("--c", type=float, default=0.0)
    p_qeb.add_argument("--s", type=int, choices=[-1, 1], required=True)
    p_qeb.add_argument("--json", action="store_true")
    p_qeb.set_defaults(func=_cmd_qeb)

    p_conf = sub.add_parser("confidence", help="confidence threshold from a fit")
    for name in ("a2", "a1", "m", "h"):
        p_conf.add_argument(f"--{name}", type=float, required=True)
    p_conf.add_argument("--c", type=float, default=0.0)
    p_conf.add_argument("--s", type=int, choices=[-1, 1], required=True)
    p_conf.add_argument(
        "--fom",
        required=True,
        choices=["fidelity2", "trace-dist", "purified-dist", "observable"],
    )
    p_conf.add_argument("--epsilon", type=float, required=True)
    p_conf.add_argument("--delta", type=float, required=True)
    p_conf.add_argument("--n", type=int, required=True, help="total measurement count")
    p_conf.add_argument("--d", type=int, required=True, help="state dimension")
    p_conf.add_argument("--w-range", type=float)
    p_conf.add_argument("--out")
    p_conf.set_defaults(func=_cmd_confidence)

    p_boot = sub.add_parser("bootstrap", help="parametric bootstrap comparison")
    p_boot.add_argument("--dataset", required=True)
    _add_figure_args(p_boot)
    p_boot.add_argument("--num-qubits", type=int, required=True)
    p_boot.add_argument("--shots", type=int, required=True, help="shots per setting")
    p_boot.add_argument("--reps", type=int, default=300)
    p_boot.add_argument("--seed", type=int, default=0)
    p_boot.add_argument("--out")
    p_boot.set_defaults(func=_cmd_bootstrap)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, RuntimeError, TypeError, OSError) as exc:
        print(
            json.dumps({"error": type(exc).__name__, "message": str(exc)}),
            file=sys.stderr,
        )
        return 1


if __name__ == "__main__":
    sys.exit(main())
