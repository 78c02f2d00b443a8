"""Command-line front end.

Commands::

    spraysim run MANIFEST.json [--out DIR] [--workers N] [--no-svg]
    spraysim gen-fields N [--seed S] [--out DIR]
    spraysim fig13 [--dg 0.5,0.25,0.125] [--out DIR]
    spraysim economics [--params FILE] [--out DIR]

The output directory defaults to the manifest's ``output`` entry (or
``out``); relative paths in a manifest resolve against its directory. The
``SPRAYSIM_OUT`` environment variable overrides the default and ``--out``
wins over both. Exit codes: 0 success, 1 run failure, 2 bad invocation.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import dataclass, field, fields, replace

import numpy as np

from . import economics as eco
from .field_io import (
    FieldParseError,
    FieldValidationError,
    RunConfig,
    generate_fields,
    load_config,
    load_field,
    parse_kv,
    save_field,
    validate_config,
)
from .geometry import GeometryError
from .report import coverage_csv, economics_csv, pathlengths_csv, render_svg, svg_name, volumes_csv
from .scenarios import compare_overlap_filters, filter_comparison_csv
from .simulator import MODES, SprayMap, run_batch

log = logging.getLogger("spraysim")

OUT_ENV = "SPRAYSIM_OUT"
EXIT_OK, EXIT_FAILURE, EXIT_USAGE = 0, 1, 2
ALL_SETUPS = [(m, s) for m in ("M1", "M2") for s in MODES]


class UsageError(Exception):
    """Invalid invocation or manifest (exit code 2)."""


@dataclass
class RunManifest:
    fields: list = field(default_factory=list)
    config: str | None = None
    output: str = "out"
    setups: list = field(default_factory=lambda: list(ALL_SETUPS))
    seed: int = 0
    synthetic: int = 0  # number of generated fields used when ``fields`` is empty

    def validate(self) -> "RunManifest":
        if not self.fields and self.synthetic <= 0:
            raise UsageError("manifest lists no fields")
        bad = [s for s in self.setups if tuple(s) not in ALL_SETUPS]
        if bad or not self.setups:
            raise UsageError(f"unknown setups {bad}; expected method:mode with method in M1/M2 and mode in {MODES}")
        return self


def _parse_setup(s) -> tuple[str, str]:
    if isinstance(s, (list, tuple)) and len(s) == 2:
        return str(s[0]), str(s[1])
    if isinstance(s, str) and ":" in s:
        a, b = s.split(":", 1)
        return a.strip(), b.strip()
    raise UsageError(f"bad setup entry {s!r}; use 'M1:multi'")


def load_manifest(path: str) -> RunManifest:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise UsageError(f"cannot read manifest {path}: {exc.strerror}") from exc
    except json.JSONDecodeError as exc:
        raise UsageError(f"manifest {path} is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise UsageError(f"manifest {path} must be a JSON object")
    known = {f.name for f in fields(RunManifest)}
    unknown = sorted(set(doc) - known)
    if unknown:
        raise UsageError(f"manifest {path}: unknown keys {unknown}")
    base = os.path.dirname(os.path.abspath(path))

    def rel(p):
        return p if os.path.isabs(p) else os.path.join(base, p)

    m = RunManifest(
        fields=[rel(p) for p in doc.get("fields", [])],
        config=rel(doc["config"]) if doc.get("config") else None,
        output=rel(doc.get("output", "out")),
        setups=[_parse_setup(s) for s in doc.get("setups", [f"{a}:{b}" for a, b in ALL_SETUPS])],
        seed=int(doc.get("seed", 0)),
        synthetic=int(doc.get("synthetic", 0)),
    )
    return m.validate()


def resolve_out(cli_out: str | None, default: str) -> str:
    out = cli_out or os.environ.get(OUT_ENV) or default
    os.makedirs(out, exist_ok=True)
    if not os.access(out, os.W_OK):
        raise UsageError(f"output directory {out} is not writable")
    return out


def _write(path: str, text: str) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(text)


# --------------------------------------------------------------------------
# commands


def cmd_run(args) -> int:
    manifest = load_manifest(args.manifest)
    try:
        cfg = load_config(manifest.config) if manifest.config else RunConfig()
    except OSError as exc:
        raise UsageError(f"cannot read run configuration {manifest.config}: {exc.strerror}") from exc
    except (FieldParseError, ValueError, TypeError) as exc:
        raise UsageError(f"bad run configuration {manifest.config}: {exc}") from exc
    problems = validate_config(cfg)
    if problems:
        raise UsageError("invalid run configuration: " + "; ".join(problems))
    out = resolve_out(args.out, manifest.output)

    specs, failures = [], []
    for p in manifest.fields:
        try:
            specs.append(load_field(p))
        except FileNotFoundError:
            failures.append((p, "field file not found"))
        except (FieldParseError, FieldValidationError, GeometryError) as exc:
            failures.append((p, str(exc)))
    if not manifest.fields:
        specs = generate_fields(manifest.synthetic, manifest.seed)

    results = run_batch(specs, cfg, setups=manifest.setups, workers=args.workers, keep_maps=not args.no_svg)
    ok = []
    for spec, res in zip(specs, results):
        if isinstance(res, Exception):
            failures.append((spec.id, f"{type(res).__name__}: {res}"))
        else:
            ok.append(res)

    methods = {m for m, _ in manifest.setups}
    if {"M1", "M2"} <= methods:
        _write(os.path.join(out, "pathlengths.csv"), pathlengths_csv(ok))
    _write(os.path.join(out, "volumes.csv"), volumes_csv(ok, cfg.n_sections))
    _write(os.path.join(out, "coverage.csv"), coverage_csv(ok))
    _write(os.path.join(out, "economics.csv"), economics_csv(ok, eco.CostParams()))
    if not args.no_svg:
        for res in ok:
            for (m, mode), spray in sorted(res.maps.items()):
                _write(os.path.join(out, svg_name(res.field.id, m, mode)),
                       render_svg(spray, res.field, res.plans[m].xy, title=f"{res.field.id} {m} {mode}"))
    for res in ok:
        for mm in res.rows():
            log.info("%s %s/%s S=%.1f l dS=%.2f%% gap=%.1f m2", mm.field_id, mm.method, mm.mode, mm.S, mm.dS_pct,
                     mm.gap_area)
    if failures:
        for what, why in failures:
            print(f"error: {what}: {why}", file=sys.stderr)
        return EXIT_FAILURE
    print(f"wrote results for {len(ok)} field(s) to {out}")
    return EXIT_OK


def cmd_gen_fields(args) -> int:
    if args.n <= 0:
        raise UsageError("number of fields must be positive")
    out = resolve_out(args.out, "fields")
    for spec in generate_fields(args.n, args.seed):
        save_field(spec, os.path.join(out, f"{spec.id}.json"))
        print(f"{spec.id}: {spec.area_ha:.2f} ha")
    return EXIT_OK


def _parse_floats(text: str) -> list[float]:
    try:
        vals = [float(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise UsageError(f"bad number list {text!r}") from exc
    if not vals or any(not v > 0 for v in vals):
        raise UsageError("d_G values must be positive")
    return vals


def cmd_fig13(args) -> int:
    dgs = _parse_floats(args.dg)
    out = resolve_out(args.out, "out")
    results = compare_overlap_filters(dgs)
    _write(os.path.join(out, "filter_comparison.csv"), filter_comparison_csv(results))
    for r in results:
        name = "polygon" if r.d_G is None else f"grid_dG{r.d_G:g}"
        spray = SprayMap(r.quads, np.ones(len(r.quads)), np.zeros(len(r.quads)), np.zeros(len(r.quads), dtype=object),
                         np.zeros(len(r.quads), dtype=int), np.zeros(len(r.quads), dtype=int), 1.0)
        _write(os.path.join(out, f"filters_{name}.svg"), render_svg(spray, None, np.zeros((0, 2)), title=name,
                                                                      fill_opacity=0.5))
        print(f"{name:>14}: gap {r.gap_area:9.3f} m2 ({r.gap_pct:.4f}%)  overlap {r.overlap_area:9.3f} m2")
    return EXIT_OK


def load_cost_params(path: str | None) -> eco.CostParams:
    if not path:
        return eco.CostParams()
    try:
        with open(path) as fh:
            kv = parse_kv(fh.read())
    except OSError as exc:
        raise UsageError(f"cannot read parameter file {path}: {exc.strerror}") from exc
    except FieldParseError as exc:
        raise UsageError(f"parameter file {path}: {exc}") from exc
    names = {f.name for f in fields(eco.CostParams)}
    unknown = sorted(set(kv) - names)
    if unknown:
        raise UsageError(f"unknown cost parameters {unknown}")
    try:
        p = replace(eco.CostParams(), **{k: float(v) for k, v in kv.items()})
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    bad = p.violations()
    if bad:
        raise UsageError("; ".join(bad))
    return p


def cmd_economics(args) -> int:
    p = load_cost_params(args.params)
    out = resolve_out(args.out, "out")
    table = eco.cost_table(base=p)
    _write(os.path.join(out, "table_years.csv"), eco.cost_table_csv(table))
    try:
        be = eco.breakeven_volume(p)
        print(f"break-even volume: {be:,.0f} l of mixture (per-litre cost {p.per_litre:.4f} EUR)")
    except ZeroDivisionError as exc:
        print(f"break-even volume undefined: {exc}")
    print(f"wrote {len(table)} entries to {os.path.join(out, 'table_years.csv')}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="spraysim", description="Spray coverage planning and section-control simulation.")
    ap.add_argument("-v", "--verbose", action="store_true", help="log progress")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="simulate fields listed in a manifest")
    p.add_argument("manifest")
    p.add_argument("--out", help=f"output directory (overrides ${OUT_ENV} and the manifest)")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--no-svg", action="store_true", help="skip SVG coverage maps")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("gen-fields", help="write seeded synthetic fields as JSON")
    p.add_argument("n", type=int)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_gen_fields)

    p = sub.add_parser("fig13", help="overlap-filter comparison on the serpentine scenario")
    p.add_argument("--dg", default="0.5,0.25,0.125", help="comma-separated grid thresholds in m")
    p.add_argument("--out")
    p.set_defaults(func=cmd_fig13)

    p = sub.add_parser("economics", help="years-to-profit table and break-even volume")
    p.add_argument("--params", help="key = value file with cost parameters")
    p.add_argument("--out")
    p.set_defaults(func=cmd_economics)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:  # argparse reports usage errors with code 2
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
