"""``telecap`` command line: threshold tables, state files, capability reports,
figure data and verification suites.

Exit codes: 0 success, 1 failed verification, 2 usage error, 3 I/O or format error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from fractions import Fraction
from typing import Any, Callable, Sequence

import numpy as np

from . import __version__
from .config import DimensionError, check_dim
from .ctel import CtelOptions, ctel_fraction, usefulness_report
from .factory import ExtremalStateSpec, extremal_ksep_state, ghz, isotropic_ghz, phi_mt, random_ksep_mixture
from .qstate import Ket, StateFormatError, as_density, atomic_write_text, read_state, write_state
from .thresholds import (
    M_SPECS,
    gme_bound,
    m_for_spec,
    min_entangled_parties,
    te_table,
    threshold_T,
    threshold_Te,
    threshold_table,
)

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_IO = 0, 1, 2, 3
N_MAX_TABLE = 10_000
THRESHOLD_HEADER = ["d", "N", "k_or_m", "value_num", "value_den", "value_float"]
SUITES = ("fef", "theorem2", "iso-ghz", "combinatorics", "teleport")
KINDS = ("ghz", "phi-mt", "extremal", "iso-ghz", "random-ksep")


class UsageError(Exception):
    """Invalid flag combination or value found after parsing."""


def _f17(x: float) -> str:
    return format(float(x), ".17g")


def _csv_text(header: Sequence[str], rows: Sequence[Sequence[Any]]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_f17(v) if isinstance(v, float) else v for v in row])
    return buf.getvalue()


def _emit(text: str, out: str | None) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        try:
            atomic_write_text(out, text)
        except OSError as exc:
            raise StateFormatError(f"cannot write {out}: {exc}") from exc


def _frac_parts(x: Fraction, prefix: str) -> dict[str, Any]:
    return {f"{prefix}_num": x.numerator, f"{prefix}_den": x.denominator, f"{prefix}_float": float(x)}


def _require(cond: bool, message: str) -> None:
    if not cond:
        raise UsageError(message)


# ---------------------------------------------------------------------------
# thresholds


def cmd_thresholds(args: argparse.Namespace) -> int:
    _require(args.d >= 2, f"--d must be >= 2, got {args.d}")
    _require(3 <= args.n_min <= args.n_max <= N_MAX_TABLE, f"need 3 <= --n-min <= --n-max <= {N_MAX_TABLE}")
    if args.te:
        _require(args.m_spec is not None, "--te needs --m-spec")
        _require(args.k is None, "--k cannot be combined with --te")
        rows = te_table(args.d, args.n_min, args.n_max, args.m_spec)
    else:
        _require(args.m_spec is None, "--m-spec needs --te")
        k = None if args.k in (None, "all") else _int_flag("--k", args.k)
        if k is not None:
            _require(2 <= k <= args.n_max, f"--k must satisfy 2 <= k <= --n-max, got {k}")
        rows = threshold_table(args.d, args.n_min, args.n_max, k)
    _emit(_csv_text(THRESHOLD_HEADER, rows), args.out)
    return EXIT_OK


def _int_flag(name: str, raw: str) -> int:
    try:
        return int(raw)
    except ValueError:
        raise UsageError(f"{name} must be an integer or 'all', got {raw!r}") from None


# ---------------------------------------------------------------------------
# capability


def _pair_index(layout, raw: str) -> int:
    try:
        return layout.index(int(raw)) if raw.lstrip("-").isdigit() else layout.index(raw)
    except (ValueError, IndexError, KeyError) as exc:
        raise UsageError(f"bad pair member {raw!r}: {exc}") from None


def _result_json(res) -> dict[str, Any]:
    return {
        "pair": list(res.pair),
        "fraction": res.fraction,
        "fidelity": res.fidelity,
        "converged": res.converged,
        "controller_unitaries": [[[[z.real, z.imag] for z in row] for row in u] for u in res.maximizing_unitaries],
    }


def cmd_capability(args: argparse.Namespace) -> int:
    _require(args.restarts >= 0, f"--restarts must be >= 0, got {args.restarts}")
    state = read_state(args.state)
    rho = as_density(state)
    layout = rho.layout
    try:
        d = layout.uniform_dim()
    except ValueError as exc:
        raise StateFormatError(str(exc)) from exc
    if layout.n < 3:
        raise StateFormatError(f"capability needs N >= 3 parties, got {layout.n}")
    options = CtelOptions(restarts=args.restarts, seed=args.seed)
    report: dict[str, Any] = {
        "state": args.state,
        "d": d,
        "N": layout.n,
        "seed": args.seed,
        "solver": {
            "method": "coordinate ascent over controller unitaries",
            "restarts": args.restarts,
            "seeded_starts": ["identity", "fourier"],
            "inner": "magic-basis exact (d=2), Schmidt (pure), manifold ascent otherwise",
        },
    }
    if args.pair is not None:
        i, j = (_pair_index(layout, x) for x in args.pair)
        _require(i != j, "pair members must differ")
        res = ctel_fraction(rho, i, j, options)
        report["mode"] = "pair"
        report["pairs"] = [_result_json(res)]
        report["min_fidelity"] = res.fidelity
        report["argmin"] = list(res.pair)
        # One pair cannot certify anything about the minimum over all pairs.
        report["verdicts"] = None
    else:
        rep = usefulness_report(rho, options)
        report["mode"] = "min"
        report["pairs"] = [_result_json(r) for r in rep.pair_results.values()]
        report["min_fidelity"] = rep.min_fidelity
        report["argmin"] = list(rep.argmin)
        report["thresholds"] = {str(k): {"exact": f"{t.numerator}/{t.denominator}", "float": float(t)} for k, t in rep.thresholds.items()}
        report["verdicts"] = {str(k): v for k, v in rep.verdicts.items()}
        report["largest_certified_k"] = rep.largest_certified_k
        report["smallest_certified_k"] = rep.smallest_certified_k
        report["beats_classical"] = rep.beats_classical
    _emit(json.dumps(report, indent=2) + "\n", args.out)
    return EXIT_OK


# ---------------------------------------------------------------------------
# make-state


def _need(args: argparse.Namespace, kind: str, *names: str) -> None:
    for name in names:
        _require(getattr(args, name) is not None, f"--kind {kind} needs --{name.replace('_', '-')}")


def cmd_make_state(args: argparse.Namespace) -> int:
    kind, d = args.kind, args.dqu
    _require(d >= 2, f"--dqu must be >= 2, got {d}")
    if kind == "ghz":
        _need(args, kind, "n")
        _require(args.n >= 2, f"--n must be >= 2, got {args.n}")
        check_dim(d**args.n)
        state = ghz(args.n, d)
    elif kind == "phi-mt":
        _need(args, kind, "m", "t")
        _require(args.m >= 1, f"--m must be >= 1, got {args.m}")
        _require(0 <= args.t < d, f"--t must lie in 0..{d - 1}, got {args.t}")
        check_dim(d**args.m)
        state = phi_mt(args.m, args.t, d)
    elif kind == "extremal":
        _need(args, kind, "n", "k")
        _require(args.n >= 3 and 2 <= args.k <= args.n, "extremal needs N >= 3 and 2 <= k <= N")
        check_dim(d**args.n)
        state = extremal_ksep_state(ExtremalStateSpec(d, args.n, args.k))
    elif kind == "iso-ghz":
        _need(args, kind, "n", "p")
        _require(d == 2, "iso-ghz is defined for qubits only (--dqu 2)")
        _require(args.n >= 3, f"--n must be >= 3, got {args.n}")
        _require(0.0 < args.p < 1.0, f"--p must lie in (0, 1), got {args.p}")
        check_dim(2**args.n)
        state = isotropic_ghz(args.n, args.p)
    else:
        _need(args, kind, "n", "k")
        _require(args.n >= 3 and 2 <= args.k <= args.n, "random-ksep needs N >= 3 and 2 <= k <= N")
        _require(args.terms >= 1, f"--terms must be >= 1, got {args.terms}")
        check_dim(d**args.n)
        state = random_ksep_mixture(args.n, args.k, d, args.terms, args.seed)
    try:
        write_state(args.out, state)
    except OSError as exc:
        raise StateFormatError(f"cannot write {args.out}: {exc}") from exc
    rho = as_density(state)
    dims = "x".join(str(x) for x in state.layout.dims)
    form = "ket" if isinstance(state, Ket) else "density"
    print(f"kind={kind} form={form} dims={dims} trace={_f17(rho.trace())} purity={_f17(rho.purity())} out={args.out}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# figure


def figure1_rows(n_min: int = 3, n_max: int = 7) -> list[tuple]:
    return threshold_table(2, n_min, n_max)


def figure2_rows(t_max: int = 5) -> list[dict[str, Any]]:
    rows = []
    for t in range(1, t_max + 1):
        n = 6 * t
        row: dict[str, Any] = {"N": n}
        for spec in M_SPECS:
            m = m_for_spec(n, spec)
            value = threshold_Te(2, n, m)
            row[f"m_{spec}"] = m
            row.update(_frac_parts(value, f"te_{spec}"))
            row[spec] = float(value)
        rows.append(row)
    return rows


def figure3_rows(n_min: int = 3, n_max: int = 10) -> list[dict[str, Any]]:
    rows = []
    for n in range(n_min, n_max + 1):
        h = min_entangled_parties(n)
        hi, lo, gme = 2 * threshold_T(2, n, h + 1) - 1, 2 * threshold_T(2, n, h) - 1, gme_bound(n)
        row: dict[str, Any] = {"N": n, "k_hi": h + 1}
        row.update(_frac_parts(hi, "p_hi"))
        row["k_lo"] = h
        row.update(_frac_parts(lo, "p_lo"))
        row.update(_frac_parts(gme, "gme"))
        row.update(p_hi=float(hi), p_lo=float(lo), gme=float(gme))
        rows.append(row)
    return rows


FIG2_HEADER = ["N"] + [c for s in M_SPECS for c in (f"m_{s}", f"te_{s}_num", f"te_{s}_den", f"te_{s}_float")]
FIG3_HEADER = [
    "N", "k_hi", "p_hi_num", "p_hi_den", "p_hi_float",
    "k_lo", "p_lo_num", "p_lo_den", "p_lo_float",
    "gme_num", "gme_den", "gme_float",
]


def cmd_figure(args: argparse.Namespace) -> int:
    if args.which == 1:
        n_min, n_max = args.n_min or 3, args.n_max or 7
        _require(3 <= n_min <= n_max <= N_MAX_TABLE, "figure 1 needs 3 <= --n-min <= --n-max")
        rows = figure1_rows(n_min, n_max)
        text = _csv_text(THRESHOLD_HEADER, rows)
        render: Callable = lambda path: plotting.plot_figure1(rows, path)
    elif args.which == 2:
        _require(args.n_min is None and args.n_max is None, "figure 2 takes --t-max, not --n-min/--n-max")
        _require(1 <= args.t_max <= 1000, f"--t-max must lie in 1..1000, got {args.t_max}")
        rows2 = figure2_rows(args.t_max)
        text = _csv_text(FIG2_HEADER, [[r[c] for c in FIG2_HEADER] for r in rows2])
        render = lambda path: plotting.plot_figure2(rows2, path)
    else:
        n_min, n_max = args.n_min or 3, args.n_max or 10
        _require(3 <= n_min <= n_max <= N_MAX_TABLE, "figure 3 needs 3 <= --n-min <= --n-max")
        rows3 = figure3_rows(n_min, n_max)
        text = _csv_text(FIG3_HEADER, [[r[c] for c in FIG3_HEADER] for r in rows3])
        render = lambda path: plotting.plot_figure3(rows3, path)
    _emit(text, args.out)
    if args.plot:
        from . import plotting  # matplotlib only when a PNG is requested

        try:
            render(args.plot)
        except OSError as exc:
            raise StateFormatError(f"cannot write {args.plot}: {exc}") from exc
    return EXIT_OK


# ---------------------------------------------------------------------------
# verify


def _suite_fef(seed: int) -> list:
    from .fef import FefOptions, fef_exact_qubit, fef_general
    from .oracle import CheckRecord, fef_random_search
    from .qstate import DensityMatrix, SystemLayout

    rng = np.random.default_rng(seed)
    layout = SystemLayout.qudits(2, 2)
    records = []
    for idx in range(20):
        g = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
        rho = DensityMatrix(layout, g @ g.conj().T / np.trace(g @ g.conj().T).real)
        exact = fef_exact_qubit(rho).value
        general = fef_general(rho, FefOptions(seed=seed + idx)).value
        search = fef_random_search(rho, 10_000, seed=seed + idx).value
        params = {"state": idx}
        records.append(CheckRecord("fef_general_vs_exact", params, exact, general, abs(general - exact) <= 1e-6))
        records.append(CheckRecord("fef_random_search_below_exact", params, exact, search, search <= exact + 1e-12))
    return records


def _suite_theorem2(seed: int) -> list:
    from .oracle import verify_theorem2_value

    records = []
    for d in (2, 3):
        for n in range(3, 6):
            if d**n > 6561:
                continue
            for k in range(2, n + 1):
                records += verify_theorem2_value(ExtremalStateSpec(d, n, k), options=CtelOptions(seed=seed))
    return records


def _suite_iso_ghz(seed: int) -> list:
    from .oracle import verify_isotropic_ghz

    grid = [round(0.1 * i, 1) for i in range(1, 10)]
    records = verify_isotropic_ghz(3, grid, optimize=True, options=CtelOptions(seed=seed))
    for n in (4, 5):
        records += verify_isotropic_ghz(n, grid, optimize=False)
    return records


def _suite_combinatorics(seed: int) -> list:
    from .oracle import CheckRecord, verify_gme_consistency, verify_partition_lemma
    from .thresholds import enumerate_partitions, stirling2

    records = verify_partition_lemma(10) + verify_gme_consistency(range(3, 11))
    for n in range(3, 9):
        for k in range(2, n + 1):
            count = sum(1 for _ in enumerate_partitions(n, k))
            records.append(CheckRecord("partition_count_stirling", {"N": n, "k": k}, stirling2(n, k), count, count == stirling2(n, k)))
    return records


def _suite_teleport(seed: int) -> list:
    from .oracle import CheckRecord, isotropic_pair_state, simulate_standard_teleportation
    from .qstate import DensityMatrix, SystemLayout

    layout = SystemLayout.qudits(2, 2)
    zero = np.zeros((4, 4), dtype=complex)
    zero[0, 0] = 1.0
    cases = [("sigma_plus", {"p": p}, isotropic_pair_state(p), (2 * (1 + 3 * p) / 4 + 1) / 3) for p in (0.2, 0.5, 0.8)]
    cases.append(("phi_plus", {}, isotropic_pair_state(1.0), 1.0))
    cases.append(("product_00", {}, DensityMatrix(layout, zero), 2 / 3))
    records = []
    for name, params, rho, want in cases:
        mean, err = simulate_standard_teleportation(rho, 100_000, seed)
        ok = abs(mean - want) <= 3 * err + 1e-12
        records.append(CheckRecord(f"teleport_{name}", params | {"stderr": err, "samples": 100_000}, want, mean, ok))
    return records


SUITE_RUNNERS = {
    "fef": _suite_fef,
    "theorem2": _suite_theorem2,
    "iso-ghz": _suite_iso_ghz,
    "combinatorics": _suite_combinatorics,
    "teleport": _suite_teleport,
}


def cmd_verify(args: argparse.Namespace) -> int:
    from .oracle import all_passed

    names = SUITES if args.suite == "all" else (args.suite,)
    suites = {}
    for name in names:
        records = SUITE_RUNNERS[name](args.seed)
        suites[name] = {"pass": all_passed(records), "checks": [r.to_dict() for r in records]}
    ok = all(s["pass"] for s in suites.values())
    payload = {"seed": args.seed, "pass": ok, "suites": suites}
    _emit(json.dumps(payload, indent=2) + "\n", args.out)
    return EXIT_OK if ok else EXIT_FAIL


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="telecap", description="Controlled-teleportation capability of multipartite states.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("thresholds", help="exact threshold tables as CSV")
    p.add_argument("--d", "--dqu", dest="d", type=int, required=True)
    p.add_argument("--n-min", type=int, required=True)
    p.add_argument("--n-max", type=int, required=True)
    p.add_argument("--k", default=None, help="INT or 'all' (default all)")
    p.add_argument("--te", action="store_true", help="refined bound T_e instead of T")
    p.add_argument("--m-spec", choices=M_SPECS)
    p.add_argument("--out")
    p.set_defaults(func=cmd_thresholds)

    p = sub.add_parser("capability", help="min pair fidelity and separability verdicts as JSON")
    p.add_argument("--state", required=True)
    group = p.add_mutually_exclusive_group()
    group.add_argument("--pair", nargs=2, metavar=("I", "J"), help="labels (A1) or 0-based indices")
    group.add_argument("--min", action="store_true", help="minimise over all pairs (default)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--restarts", type=int, default=10)
    p.add_argument("--out")
    p.set_defaults(func=cmd_capability)

    p = sub.add_parser("make-state", help="write a named state to a JSON state file")
    p.add_argument("--kind", choices=KINDS, required=True)
    p.add_argument("--n", type=int)
    p.add_argument("--dqu", "--d", dest="dqu", type=int, default=2)
    p.add_argument("--m", type=int)
    p.add_argument("--t", type=int)
    p.add_argument("--k", type=int)
    p.add_argument("--p", type=float)
    p.add_argument("--terms", type=int, default=3)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_make_state)

    p = sub.add_parser("figure", help="CSV data behind the figures (optional PNG)")
    p.add_argument("--which", type=int, choices=(1, 2, 3), required=True)
    p.add_argument("--n-min", type=int)
    p.add_argument("--n-max", type=int)
    p.add_argument("--t-max", type=int, default=5, help="figure 2: N = 6t for t = 1..t-max")
    p.add_argument("--out")
    p.add_argument("--plot", metavar="PNG", help="also render the figure with matplotlib")
    p.set_defaults(func=cmd_figure)

    p = sub.add_parser("verify", help="run oracle verification suites")
    p.add_argument("--suite", choices=SUITES + ("all",), required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_verify)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_OK
    try:
        return args.func(args)
    except (UsageError, DimensionError) as exc:
        print(f"telecap {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except StateFormatError as exc:
        print(f"telecap {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
