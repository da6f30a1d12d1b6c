"""Command-line front end (``epwind``)."""
from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path as FsPath
from typing import Optional

from . import catalog
from .braidgroup import based_equivalent, default_rays, freely_conjugate, homotopy_word, reduce_word
from .branches import ReAsc, SortKey
from .dynamics import EvolutionConfig, evolution_csv, evolution_summary, evolve_loop
from .errors import (
    AmbiguityError,
    AtlasInconsistencyError,
    BasepointMismatchError,
    ClassificationError,
    ConvergenceError,
    EpwindError,
    EvaluationError,
    IntegrationError,
    InvalidInputError,
    ParseError,
    ProbeError,
    RayConstructionError,
    RefinementError,
    TieError,
)
from .fileio import dumps, write_json_atomic, write_text_atomic
from .model_dsl import BUILTINS, MatrixFamily, load_family
from .paths import Path
from .plots import atlas_svg, trajectory_svg
from .singularities import Atlas, Region, find_eps, map_cuts
from .tracker import trace_path

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_MISMATCH = 0, 2, 3, 4
NUMERIC_ERRORS = (RefinementError, ConvergenceError, AmbiguityError, ProbeError, ClassificationError,
                  AtlasInconsistencyError, IntegrationError, EvaluationError, TieError, RayConstructionError)


@dataclass
class RunConfig:
    family: MatrixFamily
    region: Region
    grid_n: int = 200
    key: SortKey = ReAsc
    paths: dict = field(default_factory=dict)
    evolution: dict = field(default_factory=dict)
    out: FsPath = FsPath("epwind-out")


def load_config(path: Optional[str]) -> RunConfig:
    doc = {}
    base = FsPath(".")
    if path is not None:
        p = FsPath(path)
        try:
            doc = json.loads(p.read_text(encoding="utf-8"))
        except FileNotFoundError:
            raise InvalidInputError(f"config file not found: {path}") from None
        except json.JSONDecodeError as exc:
            raise InvalidInputError(f"config {path} is not valid JSON: {exc}") from None
        if not isinstance(doc, dict):
            raise InvalidInputError("config must be a JSON object")
        base = p.parent
    fam_ref = doc.get("family", "paper4")
    if isinstance(fam_ref, str) and fam_ref not in BUILTINS and not FsPath(fam_ref).is_absolute():
        fam_ref = str(base / fam_ref)
    family = load_family(fam_ref)
    paths = dict(catalog.named_paths()) if family.name == "paper4" else {}
    for name, pdoc in doc.get("paths", {}).items():
        paths[name] = Path.from_json(pdoc, name)
    unknown = set(doc) - {"family", "region", "grid_n", "key", "paths", "evolution", "out"}
    if unknown:
        raise InvalidInputError(f"unknown config keys: {sorted(unknown)}")
    return RunConfig(
        family=family,
        region=Region.parse(doc.get("region", [-3, 3, -3, 3])),
        grid_n=int(doc.get("grid_n", 200)),
        key=SortKey.parse(doc.get("key", "re_asc")),
        paths=paths,
        evolution=dict(doc.get("evolution", {})),
        out=FsPath(doc.get("out", "epwind-out")),
    )


def _apply_flags(cfg: RunConfig, args) -> RunConfig:
    if getattr(args, "out", None):
        cfg.out = FsPath(args.out)
    if getattr(args, "grid", None):
        cfg.grid_n = args.grid
    if getattr(args, "key", None):
        cfg.key = SortKey.parse(args.key)
    return cfg


def _path(cfg: RunConfig, name: str) -> Path:
    try:
        return cfg.paths[name]
    except KeyError:
        raise InvalidInputError(f"no path named {name!r}; known: {', '.join(sorted(cfg.paths))}") from None


def _atlas(cfg: RunConfig) -> Atlas:
    cached = cfg.out / "atlas.json"
    if cached.exists():
        try:
            at = Atlas.from_json(json.loads(cached.read_text(encoding="utf-8")))
            if at.region == cfg.region and at.grid_n == cfg.grid_n and at.key == cfg.key:
                return at
        except (KeyError, ValueError, EpwindError):
            pass
    return map_cuts(cfg.family, cfg.region, cfg.grid_n, cfg.key)


def _safe(name: str) -> str:
    return "".join(ch if ch.isalnum() or ch in "-_" else "_" for ch in name)


# -- subcommands -----------------------------------------------------------

def cmd_find_eps(cfg, args) -> int:
    eps = find_eps(cfg.family, cfg.region, cfg.grid_n, cfg.key)
    rows = [e.to_json() for e in eps]
    if args.format == "csv":
        text = "re,im,order,cycle,residual\n" + "".join(
            f"{r['re']!r},{r['im']!r},{r['order']},{r['cycle']},{r['residual']!r}\n" for r in rows)
        write_text_atomic(cfg.out / "eps.csv", text)
    else:
        write_json_atomic(cfg.out / "eps.json", rows)
    for e in eps:
        print(f"EP  {e.location.real:+.10f}{e.location.imag:+.10f}i  order {e.order}  cycle {e.cycle}")
    for w in eps.warnings:
        print(f"warning: {w}", file=sys.stderr)
    return EXIT_OK


def cmd_map_cuts(cfg, args) -> int:
    atlas = map_cuts(cfg.family, cfg.region, cfg.grid_n, cfg.key)
    write_json_atomic(cfg.out / "atlas.json", atlas.to_json())
    write_text_atomic(cfg.out / "atlas.svg", atlas_svg(atlas, title="EPs and branch cuts"))
    for c in atlas.cuts:
        a, b = c.points[0], c.points[-1]
        print(f"cut {c.cut_id}: perm {c.perm}  {len(c.points)} points  "
              f"from {a.real:+.4f}{a.imag:+.4f}i to {b.real:+.4f}{b.imag:+.4f}i")
    return EXIT_OK


def cmd_trace_loop(cfg, args) -> int:
    p = _path(cfg, args.name)
    atlas = _atlas(cfg)
    tr = trace_path(cfg.family, p, cfg.key, atlas)
    stem = _safe(args.name)
    write_text_atomic(cfg.out / f"trace_{stem}.csv", tr.to_csv())
    write_json_atomic(cfg.out / f"events_{stem}.json", tr.events_json())
    write_text_atomic(cfg.out / f"trace_{stem}.svg", trajectory_svg(tr, f"eigenvalues along {args.name}"))
    write_text_atomic(cfg.out / f"loop_{stem}.svg", atlas_svg(atlas, [p], f"{args.name} in the kappa plane"))
    word = tr.word() if all(e.cut_id is not None for e in tr.events) else None
    print(f"crossings: {' '.join(f'{e.perm}@{e.kappa.real:+.4f}{e.kappa.imag:+.4f}i' for e in tr.events) or 'none'}")
    print(f"cut word: {word if word is not None and len(word) else ('(empty)' if word is not None else 'unmatched')}")
    print(f"net permutation: {tr.net_perm()}")
    print(f"exchange: {tr.exchange()}")
    return EXIT_OK


def cmd_classify(cfg, args) -> int:
    p1, p2 = _path(cfg, args.name1), _path(cfg, args.name2)
    atlas = _atlas(cfg)
    rays = default_rays(atlas.eps)
    w1 = reduce_word(homotopy_word(p1, atlas.eps, rays))
    w2 = reduce_word(homotopy_word(p2, atlas.eps, rays))
    try:
        based = based_equivalent(cfg.family, p1, p2, atlas, cfg.key, rays)
    except BasepointMismatchError as exc:
        based = f"n/a ({exc})"
    free = freely_conjugate(p1, p2, atlas, rays)
    print(f"{args.name1}: word {w1 or '(empty)'}")
    print(f"{args.name2}: word {w2 or '(empty)'}")
    print(f"based: {based}")
    print(f"free: {'conjugate' if free else 'not conjugate'}")
    write_json_atomic(cfg.out / f"classify_{_safe(args.name1)}_{_safe(args.name2)}.json",
                      {"loops": [args.name1, args.name2], "words": [str(w1), str(w2)], "based": based, "free": free})
    return EXIT_OK


def cmd_evolve(cfg, args) -> int:
    p = _path(cfg, args.name)
    ev = dict(cfg.evolution)
    if args.omega is not None:
        ev["omega"] = args.omega
    try:
        ec = EvolutionConfig(**{k: ev[k] for k in ("omega", "rtol", "atol", "renorm", "n_snapshots", "biorthogonal")
                                if k in ev})
    except TypeError as exc:
        raise InvalidInputError(f"bad evolution settings: {exc}") from None
    res = evolve_loop(cfg.family, p, args.start, ec, cfg.key)
    stem = f"evolve_{_safe(args.name)}_s{args.start}"
    summary = evolution_summary(res, args.name)
    write_text_atomic(cfg.out / f"{stem}.csv", evolution_csv(res))
    write_json_atomic(cfg.out / f"{stem}.json", summary)
    print(f"start s{args.start} -> dominant s{res.final_dominant} (margin {res.margin:.4g}, {res.steps} steps)")
    return EXIT_OK


def cmd_paper_repro(cfg, args) -> int:
    from .paper_repro import format_table, run_paper_repro

    checks = run_paper_repro(cfg.out, cfg.grid_n, dynamics=not args.no_dynamics,
                             omega=args.omega if args.omega is not None else 1e-4)
    sys.stdout.write(format_table(checks))
    return EXIT_MISMATCH if any(c.passed is False for c in checks) else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON run configuration")
    common.add_argument("--out", help="output directory")
    common.add_argument("--grid", type=int, help="grid points per axis")
    common.add_argument("--key", choices=["re_asc", "re_desc", "im_asc", "im_desc"], help="sort key")
    common.add_argument("--format", choices=["csv", "json"], default="json")
    ap = argparse.ArgumentParser(prog="epwind", description="Exceptional points, branch cuts and loop words.")
    sub = ap.add_subparsers(dest="cmd", required=True)
    sub.add_parser("find-eps", parents=[common], help="locate and classify exceptional points")
    sub.add_parser("map-cuts", parents=[common], help="build the branch-cut atlas")
    t = sub.add_parser("trace-loop", parents=[common], help="crossing word and exchange of a loop")
    t.add_argument("name")
    c = sub.add_parser("classify", parents=[common], help="based and free homotopy verdicts")
    c.add_argument("name1")
    c.add_argument("name2")
    e = sub.add_parser("evolve", parents=[common], help="slow dynamical encircling")
    e.add_argument("name")
    e.add_argument("--start", type=int, default=1)
    e.add_argument("--omega", type=float)
    r = sub.add_parser("paper-repro", parents=[common], help="regression table for the four-site model")
    r.add_argument("--omega", type=float)
    r.add_argument("--no-dynamics", action="store_true")
    return ap


COMMANDS = {
    "find-eps": cmd_find_eps,
    "map-cuts": cmd_map_cuts,
    "trace-loop": cmd_trace_loop,
    "classify": cmd_classify,
    "evolve": cmd_evolve,
    "paper-repro": cmd_paper_repro,
}


def run(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_CONFIG
    try:
        cfg = _apply_flags(load_config(args.config), args)
        return COMMANDS[args.cmd](cfg, args)
    except (InvalidInputError, ParseError, BasepointMismatchError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NUMERIC_ERRORS as exc:
        print(f"numerical failure ({type(exc).__name__}): {exc}", file=sys.stderr)
        if getattr(exc, "interval", None):
            lo, hi = exc.interval
            print(f"offending path interval: t in [{lo:.6g}, {hi:.6g}]", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
