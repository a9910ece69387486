"""Command-line pipeline: validate / compile / run / analyze.

Exit codes: 0 success, 1 semantic failure (validation, missing series),
2 I/O or usage failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from .andl import CompileError, compile_network, has_errors, parse, validate
from .config import NetworkConfig, apply_override_layers
from .engine import Runtime
from .kernel import SEC, US, parse_duration

EXIT_OK = 0
EXIT_SEMANTIC = 1
EXIT_IO = 2


def _read(path: str) -> str:
    return Path(path).read_text()


def _print_diags(diags, path: str) -> None:
    for d in diags:
        print(f"{path}:{d}", file=sys.stderr)


def _load_config(path: str, overrides: list[tuple[str, str]], network: str | None) -> NetworkConfig:
    text = _read(path)
    if text.lstrip().startswith("{"):
        cfg = NetworkConfig.from_json(text)
    else:
        ast, diags = parse(text)
        if has_errors(diags):
            _print_diags(diags, path)
            raise CompileError(diags)
        cfg = compile_network(ast, network)
    apply_override_layers(cfg, overrides)
    return cfg


def _parse_set(values: list[str]) -> list[tuple[str, str]]:
    out = []
    for item in values or []:
        if "=" not in item:
            raise ValueError(f"--set expects key=value, got {item!r}")
        key, _, value = item.partition("=")
        out.append((key.strip(), value.strip()))
    return out


def cmd_validate(args) -> int:
    try:
        text = _read(args.file)
    except OSError as exc:
        print(exc, file=sys.stderr)
        return EXIT_IO
    ast, diags = parse(text)
    diags = diags + validate(ast, args.network)
    _print_diags(diags, args.file)
    if has_errors(diags):
        return EXIT_SEMANTIC
    print(f"{args.file}: ok ({len(diags)} warning(s))")
    return EXIT_OK


def cmd_compile(args) -> int:
    try:
        text = _read(args.file)
    except OSError as exc:
        print(exc, file=sys.stderr)
        return EXIT_IO
    ast, diags = parse(text)
    if has_errors(diags):
        _print_diags(diags, args.file)
        return EXIT_SEMANTIC
    try:
        cfg = compile_network(ast, args.network)
    except CompileError as exc:
        _print_diags(exc.diagnostics, args.file)
        return EXIT_SEMANTIC
    _print_diags([d for d in diags if d.severity == "warning"], args.file)
    try:
        Path(args.out).write_text(cfg.to_json())
    except OSError as exc:
        print(exc, file=sys.stderr)
        return EXIT_IO
    print(f"wrote {args.out}")
    return EXIT_OK


def _run_one(path: str, args, overrides, outdir: Path) -> int:
    cfg = _load_config(path, overrides, args.network)
    rt = Runtime(cfg, seed=args.seed)
    horizon = parse_duration(args.horizon)
    if horizon <= 0:
        raise ValueError("horizon must be positive")
    result = rt.run(horizon, drain=not args.no_drain)
    if args.window:
        t0, _, t1 = args.window.partition(":")
        w0, w1 = parse_duration(t0), parse_duration(t1)
        for link in sorted(rt.store.link_bits):
            bw = rt.store.utilized_bandwidth(link, w0, w1)
            rt.store.scalar_set(link, f"utilizedBandwidth[{args.window}]", bw, "bit/s")
    for link in sorted(rt.store.link_bits):
        rt.store.scalar_set(link, "utilizedBandwidth", rt.store.utilized_bandwidth(link), "bit/s")
    outdir.mkdir(parents=True, exist_ok=True)
    if args.format == "csv":
        rt.store.export_csv(outdir)
    else:
        rt.store.export_json(outdir / "results.json")
    print(f"[{path}] {result.events} events, final time {result.final_time} ps")
    for key in sorted(result.deliveries):
        print(f"[{path}]   delivered {key}: {result.deliveries[key]}")
    for link in sorted(result.link_frames):
        print(f"[{path}]   frames {link}: {result.link_frames[link]}")
    print(f"[{path}]   drops: {result.drops}")
    return EXIT_OK


def cmd_run(args) -> int:
    try:
        overrides = _parse_set(args.set)
    except ValueError as exc:
        print(exc, file=sys.stderr)
        return EXIT_IO
    out_base = Path(args.out)
    jobs = []
    for path in args.files:
        sub = out_base if len(args.files) == 1 else out_base / Path(path).stem
        jobs.append((path, sub))
    try:
        if args.jobs > 1 and len(jobs) > 1:
            with ThreadPoolExecutor(max_workers=args.jobs) as pool:
                codes = list(pool.map(lambda j: _run_one(j[0], args, overrides, j[1]), jobs))
            return max(codes)
        for path, sub in jobs:
            code = _run_one(path, args, overrides, sub)
            if code != EXIT_OK:
                return code
        return EXIT_OK
    except OSError as exc:
        print(exc, file=sys.stderr)
        return EXIT_IO
    except (CompileError, KeyError) as exc:
        print(exc, file=sys.stderr)
        return EXIT_SEMANTIC
    except ValueError as exc:
        print(exc, file=sys.stderr)
        return EXIT_IO


def _load_results(results_dir: Path) -> dict:
    doc_path = results_dir / "results.json"
    if doc_path.exists():
        return json.loads(doc_path.read_text())
    doc = {"vectors": {}, "scalars": {}, "links": {}}
    for csv_path in sorted(results_dir.glob("*.csv")):
        if csv_path.name.startswith("analysis_"):
            continue
        if csv_path.name == "scalars.csv":
            for line in csv_path.read_text().splitlines()[1:]:
                module, name, value, unit = line.split(",", 3)
                doc["scalars"][f"{module}.{name}"] = {"value": value, "unit": unit}
            continue
        series = csv_path.name[: -len(".csv")]
        points = []
        for line in csv_path.read_text().splitlines()[1:]:
            t, value = line.split(",", 1)
            points.append([int(t), value])
        doc["vectors"][series] = points
    return doc


def _stats(values: list[float]) -> tuple[float, float, float]:
    return (min(values), max(values), sum(values) / len(values))


def cmd_analyze(args) -> int:
    results_dir = Path(args.results)
    if not results_dir.exists():
        print(f"no such results directory: {results_dir}", file=sys.stderr)
        return EXIT_IO
    doc = _load_results(results_dir)
    pattern = args.filter or ""
    rows: list[tuple[str, str]] = []
    plot: list[tuple[str, int, str]] = []

    if args.metric in ("latency", "jitter"):
        for series, points in sorted(doc["vectors"].items()):
            if not series.endswith(".rxLatency") or ".app[" not in series:
                continue
            if pattern not in series:
                continue
            values = [float(v) for _, v in points]
            if not values:
                continue
            if args.metric == "latency":
                lo, hi, mean = _stats(values)
                rows.append((series, f"n={len(values)} min={lo/US:.3f}us max={hi/US:.3f}us mean={mean/US:.3f}us"))
            else:
                diffs = [abs(b - a) for a, b in zip(values, values[1:])]
                jit = max(diffs) if diffs else 0.0
                rows.append((series, f"jitter={jit/US:.3f}us over {len(values)} samples"))
            plot.extend((series, t, v) for t, v in points)
    elif args.metric == "bandwidth":
        window = doc.get("window")
        for link, info in sorted(doc.get("links", {}).items()):
            if pattern not in link:
                continue
            if window:
                bw = info["wire_bits"] * SEC / (window[1] - window[0])
                rows.append((link, f"{bw:.1f} bit/s over run window"))
            else:
                rows.append((link, f"{info['wire_bits']} wire bits"))
        for name, entry in sorted(doc.get("scalars", {}).items()):
            if "utilizedBandwidth" in name and pattern in name:
                rows.append((name, f"{entry['value']} {entry['unit']}"))
    elif args.metric == "queues":
        for series, points in sorted(doc["vectors"].items()):
            if "QueueLength[" not in series or pattern not in series:
                continue
            occ = [int(float(v)) for _, v in points]
            rows.append((series, f"max occupancy {max(occ)}"))
            plot.extend((series, t, v) for t, v in points)
        for name, entry in sorted(doc.get("scalars", {}).items()):
            if ".drops[" in name and pattern in name:
                rows.append((name, f"{entry['value']} dropped"))
    else:  # credit trajectories and anything else by explicit name
        for series, points in sorted(doc["vectors"].items()):
            if pattern and pattern not in series:
                continue
            rows.append((series, f"{len(points)} points"))
            plot.extend((series, t, v) for t, v in points)

    if not rows:
        print(f"no series matching {pattern!r} for metric {args.metric}", file=sys.stderr)
        return EXIT_SEMANTIC
    width = max(len(r[0]) for r in rows)
    for name, desc in rows:
        print(f"{name:<{width}}  {desc}")
    if plot:
        plot_path = results_dir / f"analysis_{args.metric}.csv"
        lines = ["series,time_ps,value"]
        lines += [f"{s},{t},{v}" for s, t, v in plot]
        plot_path.write_text("\n".join(lines) + "\n")
        print(f"plot data: {plot_path}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="autonetsim",
        description="Simulate mixed-critical automotive networks from ANDL descriptions.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="parse and semantically check a description")
    p.add_argument("file")
    p.add_argument("--network", default=None)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("compile", help="compile a description to a config document")
    p.add_argument("file")
    p.add_argument("-o", "--out", default="network.json")
    p.add_argument("--network", default=None)
    p.set_defaults(func=cmd_compile)

    p = sub.add_parser("run", help="simulate one or more scenarios")
    p.add_argument("files", nargs="+")
    p.add_argument("--horizon", required=True, help="e.g. 1s, 500ms")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE")
    p.add_argument("--out", default="results")
    p.add_argument("--format", choices=("csv", "structured"), default="csv")
    p.add_argument("--window", default=None, metavar="T0:T1")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--network", default=None)
    p.add_argument("--no-drain", action="store_true",
                   help="stop exactly at the horizon without draining in-flight frames")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("analyze", help="summarize exported metrics")
    p.add_argument("results")
    p.add_argument("metric", choices=("latency", "jitter", "bandwidth", "queues", "series"))
    p.add_argument("--filter", default=None)
    p.set_defaults(func=cmd_analyze)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
