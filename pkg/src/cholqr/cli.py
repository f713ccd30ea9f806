"""Command-line harness: matrix generation, one-shot factorizations,
timing sweeps, and flop accounting.

Thread control has to land before the numerical stack spins up its thread
pools, so this module keeps every numpy-dependent import out of module
scope and applies --threads (or the CHOLQR_THREADS environment variable)
to the standard BLAS thread variables first thing in main().

Benchmark output is one CSV row per (algorithm, point, repetition); medians
and any other aggregation are left to downstream analysis.  Timing covers
only the factorization call, never matrix generation or file I/O.  Each
point gets one warm-up run that is not recorded.
"""

import argparse
import csv
import json
import os
import sys
import time
from dataclasses import dataclass

CSV_HEADER = [
    "algorithm",
    "backend",
    "m",
    "n",
    "log10_cond",
    "rep",
    "runtime_s",
    "loo",
    "rrr",
    "rcr",
    "iters",
    "shifts",
    "flops",
    "status",
]

FLOPS_HEADER = [
    "algorithm",
    "backend",
    "m",
    "n",
    "log10_cond",
    "panels",
    "outer_iters",
    "gemm_measured",
    "gemm_predicted",
    "trmm_measured",
    "trmm_predicted",
    "potrf_measured",
    "potrf_predicted",
    "trtri_measured",
    "trtri_predicted",
    "fro_norm_measured",
    "fro_norm_predicted",
    "eig_est_measured",
    "eig_est_predicted",
    "total_measured",
    "total_predicted",
    "match",
    "ratio_measured",
    "ratio_predicted",
]

STATUSES = ("ok", "breakdown", "iter_limit", "oom")

ALGORITHM_NAMES = (
    "cholqr",
    "cholqr2",
    "scholqr3",
    "ischolqr",
    "rscholqr",
    "pncholqr:<r>",
    "mgs",
    "reference",
)

_THREAD_VARS = (
    "OMP_NUM_THREADS",
    "OPENBLAS_NUM_THREADS",
    "MKL_NUM_THREADS",
    "BLIS_NUM_THREADS",
    "NUMEXPR_NUM_THREADS",
)


class CLIError(Exception):
    """Bad invocation or bad input detected after argument parsing."""


@dataclass
class BenchRecord:
    """One benchmark repetition, fields in CSV column order.

    Optional fields are None when the run did not produce them (a breakdown
    has no factors to measure, an out-of-memory point has no runtime) and
    round-trip through CSV as empty cells.
    """

    algorithm: str
    backend: str
    m: int
    n: int
    log10_cond: float
    rep: int
    runtime_s: float | None
    loo: float | None
    rrr: float | None
    rcr: float | None
    iters: int | None
    shifts: int | None
    flops: int | None
    status: str

    def __post_init__(self):
        if self.status not in STATUSES:
            raise ValueError(
                f"status must be one of {STATUSES}, got {self.status!r}"
            )
        if self.runtime_s is not None and self.runtime_s < 0:
            raise ValueError("runtime must be >= 0")

    def to_row(self):
        return [
            self.algorithm,
            self.backend,
            str(self.m),
            str(self.n),
            repr(float(self.log10_cond)),
            str(self.rep),
            _cell(self.runtime_s),
            _cell(self.loo),
            _cell(self.rrr),
            _cell(self.rcr),
            _cell(self.iters),
            _cell(self.shifts),
            _cell(self.flops),
            self.status,
        ]

    @classmethod
    def from_row(cls, row):
        if len(row) != len(CSV_HEADER):
            raise ValueError(
                f"expected {len(CSV_HEADER)} cells, got {len(row)}"
            )
        return cls(
            algorithm=row[0],
            backend=row[1],
            m=int(row[2]),
            n=int(row[3]),
            log10_cond=float(row[4]),
            rep=int(row[5]),
            runtime_s=_opt(row[6], float),
            loo=_opt(row[7], float),
            rrr=_opt(row[8], float),
            rcr=_opt(row[9], float),
            iters=_opt(row[10], int),
            shifts=_opt(row[11], int),
            flops=_opt(row[12], int),
            status=row[13],
        )


def _cell(value):
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _opt(text, convert):
    return None if text == "" else convert(text)


def _apply_threads(threads):
    """Export the requested thread count to the BLAS environment variables.

    Must run before numpy is first imported; afterwards the pools are
    already sized.  Falls back to CHOLQR_THREADS when no flag was given.
    """
    if threads is None:
        raw = os.environ.get("CHOLQR_THREADS", "").strip()
        if raw:
            try:
                threads = int(raw)
            except ValueError:
                raise CLIError(
                    f"CHOLQR_THREADS must be an integer, got {raw!r}"
                ) from None
    if threads is None:
        return
    if threads < 1:
        raise CLIError("thread count must be >= 1")
    for var in _THREAD_VARS:
        os.environ[var] = str(threads)


def _resolve_algorithm(name):
    """Map a CLI algorithm name to a runner(array, cfg, ledger) -> QRResult."""
    from . import algorithms

    plain = {
        "cholqr": algorithms.chol_qr,
        "cholqr2": algorithms.chol_qr2,
        "scholqr3": algorithms.s_chol_qr3,
        "ischolqr": algorithms.is_chol_qr,
        "rscholqr": algorithms.rs_chol_qr,
        "mgs": algorithms.mgs,
    }
    if name in plain:
        return plain[name]
    if name == "reference":
        return _run_reference
    if name.startswith("pncholqr:"):
        tail = name.split(":", 1)[1]
        try:
            panels = int(tail)
        except ValueError:
            raise CLIError(f"bad panel count in {name!r}") from None
        if panels < 1:
            raise CLIError("panel count must be >= 1")

        def runner(array, cfg, ledger, _panels=panels):
            return algorithms.pn_chol_qr(array, _panels, cfg, ledger)

        return runner
    raise CLIError(
        f"unknown algorithm {name!r}; choose from {', '.join(ALGORITHM_NAMES)}"
    )


def _run_reference(array, cfg, ledger):
    from .algorithms import QRResult, reference_qr
    from .varray import to_dense_block

    q, r = reference_qr(to_dense_block(array))
    return QRResult(type(array).from_numpy(q), r, iterations=1)


def _parse_algs(text):
    names = [part.strip() for part in text.split(",")]
    names = [name for name in names if name]
    if not names:
        raise CLIError("--algs must name at least one algorithm")
    return names


def _build_config(args):
    from .algorithms import AlgoConfig

    kwargs = {}
    if getattr(args, "tol", None) is not None:
        kwargs["tol"] = args.tol
    if getattr(args, "max_iter", None) is not None:
        kwargs["max_iter"] = args.max_iter
    if getattr(args, "tol_policy", None) is not None:
        kwargs["tol_policy"] = args.tol_policy
    return AlgoConfig(**kwargs)


def _parse_points(text):
    parts = text.split(":")
    if len(parts) != 3:
        raise CLIError("--points must look like start:stop:count")
    try:
        start, stop, count = float(parts[0]), float(parts[1]), int(parts[2])
    except ValueError:
        raise CLIError(f"bad --points value {text!r}") from None
    if count < 1:
        raise CLIError("--points count must be >= 1")
    return start, stop, count


def _sweep_points(args):
    """Expand the sweep flags into per-point settings.

    The condition axis walks log10(cond) linearly; the size axes walk m or
    n over log-spaced integers; the backend axis runs one point per
    registered backend at fixed shape.
    """
    import numpy as np

    if args.axis == "backend":
        from .varray import BACKENDS

        return [
            {
                "m": args.m,
                "n": args.n,
                "log10_cond": args.log10_cond,
                "backend": name,
            }
            for name in BACKENDS
        ]
    points_text = args.points
    if points_text is None:
        if args.axis == "cond":
            points_text = "0:20:21"
        else:
            raise CLIError(f"--points is required for --axis {args.axis}")
    start, stop, count = _parse_points(points_text)
    if args.axis == "cond":
        return [
            {
                "m": args.m,
                "n": args.n,
                "log10_cond": float(c),
                "backend": args.backend,
            }
            for c in np.linspace(start, stop, count)
        ]
    if start < 1 or stop < 1:
        raise CLIError("size sweeps need start and stop >= 1")
    sizes = [int(round(v)) for v in np.geomspace(start, stop, count)]
    if args.axis == "m":
        return [
            {
                "m": s,
                "n": args.n,
                "log10_cond": args.log10_cond,
                "backend": args.backend,
            }
            for s in sizes
        ]
    return [
        {
            "m": args.m,
            "n": s,
            "log10_cond": args.log10_cond,
            "backend": args.backend,
        }
        for s in sizes
    ]


def _guarded_run(runner, array, cfg, ledger):
    """Run one factorization, mapping failures to a status string."""
    from .algorithms import ShiftAttemptLimitError
    from .kernels import CholeskyBreakdown

    try:
        res = runner(array, cfg, ledger)
    except (CholeskyBreakdown, ShiftAttemptLimitError):
        return "breakdown", None
    except MemoryError:
        return "oom", None
    return ("ok" if res.success else "iter_limit"), res


def _write_csv(path, header, rows):
    if path:
        fh = open(path, "w", newline="")
    else:
        fh = sys.stdout
    try:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)
    finally:
        if path:
            fh.close()


def cmd_gen(args):
    from .matgen import SEED_MIXING, MatrixSpec, effective_seed, generate
    from .varray import save_matrix_market

    try:
        spec = MatrixSpec(args.m, args.n, args.log10_cond, args.seed)
    except ValueError as exc:
        raise CLIError(str(exc)) from None
    array, sigma = generate(spec, backend=args.backend)
    try:
        save_matrix_market(array, args.output)
    except OSError as exc:
        raise CLIError(f"cannot write {args.output}: {exc}") from None
    meta = {
        "m": spec.m,
        "n": spec.n,
        "log10_cond": spec.log10_cond,
        "seed": spec.seed,
        "effective_seed": effective_seed(spec),
        "seed_mixing": SEED_MIXING,
        "backend": args.backend,
        "singular_values": [float(s) for s in sigma],
    }
    meta_path = args.output + ".json"
    with open(meta_path, "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(f"wrote {args.output} ({spec.m} x {spec.n}) and {meta_path}")
    return 0


def cmd_qr(args):
    from .flops import FlopLedger
    from .kernels import CholeskyBreakdown
    from .algorithms import ShiftAttemptLimitError
    from .metrics import quality_report
    from .varray import DenseVectorArray, load_matrix_market, save_matrix_market

    runner = _resolve_algorithm(args.algorithm)
    try:
        array = load_matrix_market(args.input, backend=args.backend)
    except OSError as exc:
        raise CLIError(f"cannot read {args.input}: {exc}") from None
    except ValueError as exc:
        raise CLIError(f"malformed input {args.input}: {exc}") from None
    cfg = _build_config(args)
    ledger = FlopLedger()
    try:
        res = runner(array, cfg, ledger)
    except CholeskyBreakdown as exc:
        print(
            "error: cholesky breakdown "
            f"(pivot {exc.pivot_index}, value {exc.pivot_value:.3e}); "
            "the Gramian is numerically indefinite at this conditioning, "
            "try rscholqr or pncholqr:<r>",
            file=sys.stderr,
        )
        return 3
    except ShiftAttemptLimitError as exc:
        print(
            "error: cholesky breakdown persisted through "
            f"{exc.attempts} shifted retries (last shift {exc.last_shift:.3e})",
            file=sys.stderr,
        )
        return 3
    prefix = args.output or os.path.splitext(args.input)[0]
    save_matrix_market(res.q, prefix + ".q.mtx")
    save_matrix_market(DenseVectorArray.from_numpy(res.r), prefix + ".r.mtx")
    report = quality_report(array, res.q, res.r_with_drops())
    status = "ok" if res.success else "iter_limit"
    line = (
        f"algorithm={args.algorithm} backend={args.backend}"
        f" m={array.space.dim} n={array.ncols}"
        f" iterations={res.iterations} shifts={len(res.shifts_applied)}"
        f" flops={ledger.total()}"
        f" loo={report.loo:.6e} rrr={report.rrr:.6e} rcr={report.rcr:.6e}"
    )
    if res.dropped:
        line += f" dropped={len(res.dropped)}"
    line += f" status={status}"
    print(line)
    if not res.success:
        print(
            "error: iteration cap reached before the basis settled",
            file=sys.stderr,
        )
        return 4
    return 0


def _bench_point(name, runner, array, cfg, point, reps):
    from .flops import FlopLedger
    from .metrics import quality_report

    # Warm-up run, excluded from the records.
    _guarded_run(runner, array, cfg, FlopLedger())
    rows = []
    last = None
    for rep in range(reps):
        ledger = FlopLedger()
        t0 = time.perf_counter()
        status, res = _guarded_run(runner, array, cfg, ledger)
        elapsed = time.perf_counter() - t0
        if res is not None:
            last = res
        rows.append(
            BenchRecord(
                algorithm=name,
                backend=point["backend"],
                m=point["m"],
                n=point["n"],
                log10_cond=point["log10_cond"],
                rep=rep,
                runtime_s=None if status == "oom" else elapsed,
                loo=None,
                rrr=None,
                rcr=None,
                iters=None if res is None else res.iterations,
                shifts=None if res is None else len(res.shifts_applied),
                flops=ledger.total(),
                status=status,
            )
        )
    # The runs are deterministic, so the quality metrics are identical
    # across repetitions; compute them once, outside the timed region.
    if last is not None and last.q.ncols > 0:
        report = quality_report(array, last.q, last.r_with_drops())
        for row in rows:
            if row.status in ("ok", "iter_limit"):
                row.loo = report.loo
                row.rrr = report.rrr
                row.rcr = report.rcr
    return rows


def cmd_bench(args):
    from .flops import FlopLedger
    from .matgen import MatrixSpec, generate

    if args.reps < 1:
        raise CLIError("--reps must be >= 1")
    if args.gnuplot and not args.output:
        raise CLIError("--gnuplot needs -o so the script can reference the CSV")
    names = _parse_algs(args.algs)
    runners = [(name, _resolve_algorithm(name)) for name in names]
    cfg = _build_config(args)
    points = _sweep_points(args)
    records = []
    for point in points:
        try:
            spec = MatrixSpec(
                point["m"], point["n"], point["log10_cond"], args.seed
            )
        except ValueError as exc:
            raise CLIError(f"bad sweep point {point}: {exc}") from None
        try:
            array, _ = generate(spec, backend=point["backend"])
        except MemoryError:
            for name, _runner in runners:
                for rep in range(args.reps):
                    records.append(
                        BenchRecord(
                            algorithm=name,
                            backend=point["backend"],
                            m=point["m"],
                            n=point["n"],
                            log10_cond=point["log10_cond"],
                            rep=rep,
                            runtime_s=None,
                            loo=None,
                            rrr=None,
                            rcr=None,
                            iters=None,
                            shifts=None,
                            flops=None,
                            status="oom",
                        )
                    )
            continue
        for name, runner in runners:
            records.extend(
                _bench_point(name, runner, array, cfg, point, args.reps)
            )
    _write_csv(args.output, CSV_HEADER, [rec.to_row() for rec in records])
    if args.gnuplot:
        backends = sorted({point["backend"] for point in points})
        _write_gnuplot(args.gnuplot, args.output, args.axis, names, backends)
    return 0


def _write_gnuplot(path, csv_path, axis, names, backends):
    """Emit a plotting script for the benchmark CSV: runtime per repetition
    against the sweep axis, one series per algorithm (and per backend for
    the backend axis, which plots against the repetition index)."""
    xcol = {"cond": 5, "m": 3, "n": 4, "backend": 6}[axis]
    xlabel = {
        "cond": "log10 condition number",
        "m": "rows",
        "n": "columns",
        "backend": "repetition",
    }[axis]
    lines = [
        "# benchmark plot script (generated alongside the CSV)",
        'set datafile separator ","',
        "set key outside",
        f"set xlabel '{xlabel}'",
        "set ylabel 'runtime [s]'",
        "set logscale y",
    ]
    if axis in ("m", "n"):
        lines.append("set logscale x")
    terms = []
    if axis == "backend":
        for name in names:
            for backend in backends:
                cond = f"strcol(1) eq '{name}' && strcol(2) eq '{backend}'"
                terms.append(
                    f"'{csv_path}' using {xcol}:(({cond}) ? $7 : NaN) "
                    f"title '{name} [{backend}]' with points"
                )
    else:
        for name in names:
            terms.append(
                f"'{csv_path}' using {xcol}:((strcol(1) eq '{name}') ? $7 : NaN) "
                f"title '{name}' with points"
            )
    script = "\n".join(lines) + "\nplot \\\n  " + ", \\\n  ".join(terms) + "\n"
    with open(path, "w") as fh:
        fh.write(script)


def cmd_flops(args):
    from . import flops as flopmod
    from .algorithms import panel_widths
    from .flops import FlopLedger
    from .matgen import MatrixSpec, generate

    names = _parse_algs(args.algs)
    panel_requests = {}
    for name in names:
        if name == "rscholqr":
            continue
        if name.startswith("pncholqr:"):
            _resolve_algorithm(name)
            panel_requests[name] = int(name.split(":", 1)[1])
            continue
        raise CLIError(
            "flop prediction covers rscholqr and pncholqr:<r>; "
            f"got {name!r}"
        )
    cfg = _build_config(args)
    points = _sweep_points(args)
    rows = []
    for point in points:
        try:
            spec = MatrixSpec(
                point["m"], point["n"], point["log10_cond"], args.seed
            )
        except ValueError as exc:
            raise CLIError(f"bad sweep point {point}: {exc}") from None
        array, _ = generate(spec, backend=point["backend"])
        # One run of the recomputing scheme anchors the ratio columns even
        # when only panel variants were requested.
        rs_ledger = FlopLedger()
        _status, rs_res = _guarded_run(
            _resolve_algorithm("rscholqr"), array, cfg, rs_ledger
        )
        rs_total = rs_ledger.total()
        for name in names:
            if name == "rscholqr":
                measured = rs_ledger.as_dict()
                predicted = (
                    None
                    if rs_res is None or rs_res.profile is None
                    else flopmod.rscholqr_counts(
                        point["m"], point["n"], rs_res.profile
                    )
                )
                iters = None if rs_res is None else rs_res.iterations
                panels = None
                ratio_measured = None
                ratio_predicted = None
            else:
                panels = panel_requests[name]
                ledger = FlopLedger()
                _status, res = _guarded_run(
                    _resolve_algorithm(name), array, cfg, ledger
                )
                measured = ledger.as_dict()
                predicted = None
                if res is not None and res.panel_profiles is not None:
                    profiles = res.panel_profiles
                    if all(p is not None for p in profiles):
                        predicted = flopmod.panel_counts(
                            point["m"],
                            panel_widths(point["n"], panels),
                            profiles,
                        )
                iters = None if res is None else res.iterations
                ratio_measured = (
                    ledger.total() / rs_total if rs_total else None
                )
                ratio_predicted = (
                    None
                    if rs_res is None
                    else flopmod.panel_flop_ratio(
                        point["n"], panels, rs_res.iterations
                    )
                )
            row = [
                name,
                point["backend"],
                str(point["m"]),
                str(point["n"]),
                repr(float(point["log10_cond"])),
                _cell(panels),
                _cell(iters),
            ]
            for category in flopmod.CATEGORIES:
                row.append(str(measured.get(category, 0)))
                row.append(
                    "" if predicted is None else str(predicted[category])
                )
            total_measured = sum(measured.values())
            row.append(str(total_measured))
            if predicted is None:
                row.extend(["", ""])
            else:
                total_predicted = sum(predicted.values())
                row.append(str(total_predicted))
                row.append(
                    "true"
                    if all(
                        measured.get(c, 0) == predicted[c]
                        for c in flopmod.CATEGORIES
                    )
                    else "false"
                )
            row.append(_cell(ratio_measured))
            row.append(_cell(ratio_predicted))
            rows.append(row)
    _write_csv(args.output, FLOPS_HEADER, rows)
    return 0


def _add_shape_flags(parser, need_cond=True):
    parser.add_argument("-m", "--m", type=int, required=True, help="row count")
    parser.add_argument("-n", "--n", type=int, required=True, help="column count")
    if need_cond:
        parser.add_argument(
            "--log10-cond",
            type=float,
            default=10.0,
            help="log10 of the 2-norm condition number (fixed axes only)",
        )
    parser.add_argument("--seed", type=int, default=0, help="base seed")


def _add_config_flags(parser):
    parser.add_argument(
        "--tol", type=float, default=None, help="Gramian settling tolerance"
    )
    parser.add_argument(
        "--max-iter", type=int, default=None, help="outer iteration cap"
    )
    parser.add_argument(
        "--tol-policy",
        choices=("fixed", "roundoff"),
        default=None,
        help="fixed uses --tol; roundoff scales unit roundoff by sqrt(width)",
    )


def _add_sweep_flags(parser):
    parser.add_argument(
        "--axis",
        choices=("cond", "m", "n", "backend"),
        default="cond",
        help="which quantity the sweep varies",
    )
    _add_shape_flags(parser)
    parser.add_argument(
        "--points",
        default=None,
        help="sweep grid start:stop:count (cond defaults to 0:20:21)",
    )
    parser.add_argument(
        "--backend",
        choices=("dense", "list"),
        default="dense",
        help="column storage backend (ignored for --axis backend)",
    )
    parser.add_argument(
        "--algs",
        default="rscholqr",
        help="comma-separated algorithm list",
    )
    parser.add_argument("-o", "--output", default=None, help="CSV path (default stdout)")
    parser.add_argument(
        "--threads",
        type=int,
        default=None,
        help="BLAS thread count (falls back to CHOLQR_THREADS)",
    )
    _add_config_flags(parser)


def build_parser():
    parser = argparse.ArgumentParser(
        prog="cholqr",
        description=(
            "Tall-and-skinny QR via Cholesky factorization of the Gramian: "
            "generation, factorization, benchmarking, and flop accounting."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen", help="generate a test matrix with known spectrum")
    _add_shape_flags(gen)
    gen.add_argument(
        "--backend", choices=("dense", "list"), default="dense"
    )
    gen.add_argument("-o", "--output", required=True, help="Matrix Market path")
    gen.set_defaults(func=cmd_gen)

    qr = sub.add_parser("qr", help="factorize one Matrix Market file")
    qr.add_argument(
        "algorithm",
        help="one of: " + ", ".join(ALGORITHM_NAMES),
    )
    qr.add_argument("input", help="Matrix Market file to factorize")
    qr.add_argument(
        "-o",
        "--output",
        default=None,
        help="output prefix for the Q and R files (default: input stem)",
    )
    qr.add_argument("--backend", choices=("dense", "list"), default="dense")
    qr.add_argument(
        "--threads",
        type=int,
        default=None,
        help="BLAS thread count (falls back to CHOLQR_THREADS)",
    )
    _add_config_flags(qr)
    qr.set_defaults(func=cmd_qr)

    bench = sub.add_parser("bench", help="timing sweep, one CSV row per repetition")
    _add_sweep_flags(bench)
    bench.add_argument(
        "--reps", type=int, default=10, help="repetitions per point"
    )
    bench.add_argument(
        "--gnuplot",
        default=None,
        help="also write a gnuplot script to this path (needs -o)",
    )
    bench.set_defaults(func=cmd_bench)

    flops = sub.add_parser(
        "flops", help="measured vs predicted flop counts per sweep point"
    )
    _add_sweep_flags(flops)
    flops.set_defaults(func=cmd_flops)

    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        _apply_threads(getattr(args, "threads", None))
        return args.func(args)
    except CLIError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
