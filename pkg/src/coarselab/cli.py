"""Command-line front end.

Subcommands
-----------
net      greedy maximal separated subset of a space, with density witness
gap      Laplacian spectral report for a radius or explicit entourage
folner   search for a small-boundary subset at a slack target, or replay one
warp     build a warped system from a config and profile its gaps
suite    run the numbered self-checks at smoke or full scale

Exit codes: 0 success, 1 failed property or verdict, 2 bad input, 3
eigensolver non-convergence.  Every input is validated before any
computation starts.  Outputs are written atomically under --out-dir and are
byte-stable for a fixed config and seed; figures are SVG with timestamps
stripped.  COARSE_LAB_THREADS caps internal parallelism.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import tempfile

import numpy as np

from .amenability import FolnerCertificate, folner_ratio, folner_search
from .entourages import Entourage
from .errors import (EXIT_INPUT, EXIT_NONCONVERGENCE, EXIT_OK, EXIT_PROPERTY,
                     ConvergenceError, InputError, PropertyFailure)
from .geometry import coarse_net
from .operators import build_laplacian
from .plotting import gap_profile, net_overlay, spectrum_strip
from .spaces import FiniteCoarseSpace, space_from_json
from .spectral import spectral_gap
from .suite import run_suite
from .warped import (Generator, GroupPresentation, _normalize_base,
                     build_warped_system, expander_profile, save_system,
                     verify_entourage_decomposition, warped_ball_entourage,
                     warped_distance)

SCHEMA_VERSION = 1


# -- input plumbing ---------------------------------------------------------

def _load_json(path: str) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except FileNotFoundError:
        raise InputError(f"no such file: {path}") from None
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputError(
            f"invalid JSON in {path}: {exc.msg} at line {exc.lineno} column {exc.colno}",
            detail={"line": exc.lineno, "column": exc.colno}) from None
    if not isinstance(doc, dict):
        raise InputError(f"{path} must hold a JSON object at top level")
    v = doc.get("schema_version")
    if v is not None and v != SCHEMA_VERSION:
        raise InputError(f"{path} has schema_version {v!r}; this build reads {SCHEMA_VERSION}")
    return doc


def _load_space(path: str) -> FiniteCoarseSpace:
    return space_from_json(_load_json(path))


def _require_nonnegative(value: float, what: str) -> float:
    if not value >= 0.0:
        raise InputError(f"{what} must be nonnegative, got {value}")
    return float(value)


# -- output plumbing --------------------------------------------------------

def _json_default(obj):
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def _write_text(path: str, text: str) -> None:
    out_dir = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=out_dir, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    finally:
        if os.path.exists(tmp):
            os.unlink(tmp)


def _write_json(path: str, doc: dict) -> None:
    _write_text(path, json.dumps(doc, indent=2, sort_keys=True,
                                 default=_json_default) + "\n")


def _out(args, name: str) -> str:
    os.makedirs(args.out_dir, exist_ok=True)
    return os.path.join(args.out_dir, name)


# -- net --------------------------------------------------------------------

def cmd_net(args) -> int:
    space = _load_space(args.space)
    radius = _require_nonnegative(args.radius, "--radius")
    E = Entourage.from_radius(space, radius)
    net, witness, density_ok = coarse_net(space, E)
    net_ids = [space.points[i] for i in net]
    doc = {
        "schema_version": SCHEMA_VERSION,
        "kind": "net",
        "radius": radius,
        "net": net_ids,
        "witness": {str(space.points[x]): (space.points[w] if w is not None else None)
                    for x, w in enumerate(witness)},
        "density_ok": bool(density_ok),
    }
    _write_json(_out(args, "net.json"), doc)
    if args.svg:
        net_overlay(space, net_ids, _out(args, "net.svg"))
    print(f"net: {len(net)} of {space.n} points, density_ok={density_ok}")
    return EXIT_OK


# -- gap --------------------------------------------------------------------

def _entourage_from_args(space: FiniteCoarseSpace, args) -> Entourage:
    if args.entourage is not None:
        return Entourage.from_descriptor(space, _load_json(args.entourage))
    radius = _require_nonnegative(args.radius, "--radius")
    return Entourage.from_radius(space, radius)


def cmd_gap(args) -> int:
    space = _load_space(args.space)
    E = _entourage_from_args(space, args)
    delta = build_laplacian(space, E)
    rep = spectral_gap(delta)
    doc = {"schema_version": SCHEMA_VERSION, "kind": "gap-report",
           "entourage": E.descriptor()}
    doc.update(rep.to_json())
    _write_json(_out(args, "report.json"), doc)
    _write_text(_out(args, "spectrum.csv"), rep.to_csv())
    if args.svg:
        spectrum_strip(rep.eigenvalues, _out(args, "spectrum.svg"), title="spectrum")
    print(f"gap: {rep.gap:.12g} kernel_dim: {rep.kernel_dim} method: {rep.method}")
    return EXIT_OK


# -- folner -----------------------------------------------------------------

def _replay_certificate(args) -> int:
    space = _load_space(args.space)
    doc = _load_json(args.replay)
    record = doc.get("certificate", doc)
    if record is None:
        raise InputError(f"{args.replay} records no certificate to replay")
    cert = FolnerCertificate.from_json(record)
    E = Entourage.from_descriptor(space, cert.entourage)
    idx = np.array([space.index_of(p) for p in cert.subset], dtype=int)
    fresh = folner_ratio(space, E, idx)
    match = abs(fresh - cert.ratio) <= 1e-12 * max(1.0, abs(cert.ratio))
    print(f"replay: recorded {cert.ratio:.17g} fresh {fresh:.17g} "
          f"{'match' if match else 'MISMATCH'}")
    return EXIT_OK if match else EXIT_PROPERTY


def cmd_folner(args) -> int:
    if args.replay is not None:
        if args.radius is not None or args.eps is not None:
            raise InputError("--replay does not combine with --radius/--eps")
        return _replay_certificate(args)
    if args.radius is None or args.eps is None:
        raise InputError("folner needs --radius and --eps (or --replay CERT)")
    space = _load_space(args.space)
    radius = _require_nonnegative(args.radius, "--radius")
    E = Entourage.from_radius(space, radius)
    out = folner_search(space, E, args.eps, budget=args.budget)
    found = out.certificate is not None
    doc = {
        "schema_version": SCHEMA_VERSION,
        "kind": "folner-certificate",
        "epsilon": float(args.eps),
        "found": found,
        "best_ratio": float(out.best_ratio),
        "best_subset": list(out.best_subset),
        "stage": out.stage,
        "half_mass_ratio": out.half_mass_ratio,
        "certificate": out.certificate.to_json() if found else None,
    }
    _write_json(_out(args, "certificate.json"), doc)
    if found:
        print(f"certificate: {len(out.certificate.subset)} points, "
              f"ratio {out.best_ratio:.12g} <= 1 + {args.eps}")
        return EXIT_OK
    print(f"no certificate at eps={args.eps}; best ratio {out.best_ratio:.12g} "
          f"(stage {out.stage})")
    return EXIT_PROPERTY


# -- warp -------------------------------------------------------------------

def _synthesize_inverse(i: int, spec: dict, side: float) -> dict:
    kind = spec["kind"]
    inv_name = spec.get("inverse") or f"{spec['name']}_inv"
    if kind == "identity":
        return None  # identity inverts itself
    if kind == "rotation":
        off = np.atleast_1d(np.asarray(spec["parameter"], dtype=float))
        param = [float((-x) % side) for x in off]
    else:
        mat = np.asarray(spec["parameter"])
        if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
            raise InputError(f"generators[{i}].parameter must be a square matrix")
        inv = np.linalg.inv(mat.astype(float))
        rounded = np.rint(inv).astype(np.int64)
        if not np.array_equal(mat.astype(np.int64) @ rounded,
                              np.eye(mat.shape[0], dtype=np.int64)):
            raise InputError(
                f"generators[{i}].parameter has no integer inverse; "
                "list the inverse generator explicitly")
        param = rounded.tolist()
    return {"name": inv_name, "kind": kind, "parameter": param,
            "lipschitz": spec.get("lipschitz"), "inverse": spec["name"]}


def _parse_generators(doc: dict, side: float) -> list[dict]:
    raw = doc.get("generators")
    if not isinstance(raw, list) or not raw:
        raise InputError("config needs a non-empty 'generators' list")
    specs: list[dict] = []
    by_name: dict = {}
    for i, g in enumerate(raw):
        if not isinstance(g, dict):
            raise InputError(f"generators[{i}] must be an object")
        name = g.get("name")
        if not isinstance(name, str) or not name:
            raise InputError(f"generators[{i}].name must be a non-empty string")
        if name in by_name:
            raise InputError(f"generators[{i}].name repeats {name!r}")
        kind = g.get("kind")
        if kind not in ("rotation", "automorphism", "identity"):
            raise InputError(
                f"generators[{i}].kind must be 'rotation', 'automorphism', "
                f"or 'identity', got {kind!r}")
        if kind != "identity" and g.get("parameter") is None:
            raise InputError(f"generators[{i}].parameter is required for kind {kind!r}")
        inv = g.get("inverse")
        if inv is not None and not isinstance(inv, str):
            raise InputError(f"generators[{i}].inverse must be a generator name")
        spec = {"name": name, "kind": kind, "parameter": g.get("parameter"),
                "lipschitz": g.get("lipschitz"), "inverse": inv}
        specs.append(spec)
        by_name[name] = spec

    # close under inverses: a generator that leaves its partner implicit, or
    # names one that is absent, gets it synthesized here
    for i, spec in enumerate(list(specs)):
        inv = spec["inverse"]
        if spec["kind"] == "identity":
            spec["inverse"] = inv or spec["name"]
            continue
        if inv is not None and inv in by_name:
            continue
        partner = _synthesize_inverse(i, spec, side)
        spec["inverse"] = partner["name"]
        if partner["name"] not in by_name:
            specs.append(partner)
            by_name[partner["name"]] = partner
    return specs


def cmd_warp(args) -> int:
    doc = _load_json(args.config)
    try:
        _, _, side = _normalize_base(doc.get("base"))
    except InputError as exc:
        raise InputError(f"base: {exc}") from None
    levels = doc.get("levels")
    if not isinstance(levels, list) or len(levels) < 2:
        raise InputError("config needs a 'levels' list with at least two entries")
    density = doc.get("density")
    if density is None:
        raise InputError("config needs a 'density' (net points per unit length)")
    specs = _parse_generators(doc, side)
    try:
        gens = tuple(Generator.from_json(s) for s in specs)
        presentation = GroupPresentation(
            generators=gens, relations=tuple(doc.get("relations", ())))
        presentation.validate_on(doc["base"])
    except InputError as exc:
        raise InputError(f"generators: {exc}") from None

    ball_radius = _require_nonnegative(doc.get("ball_radius", 1.0), "ball_radius")
    threshold = float(doc.get("gap_threshold", 0.05))
    system = build_warped_system(doc["base"], levels=tuple(levels), density=int(density))
    tables = {t: warped_distance(system.level(t), presentation)
              for t in system.levels}
    profile = expander_profile(system, presentation, ball_radius=ball_radius,
                               gap_threshold=threshold, tables=tables)

    spectra = {}
    for t in system.levels:
        lev = system.level(t)
        W = warped_ball_entourage(lev, presentation, ball_radius, table=tables[t])
        delta = build_laplacian(lev.space, W)
        spectra[t] = np.linalg.eigvalsh(delta.symmetric_matrix())

    out_doc = {"schema_version": SCHEMA_VERSION, "kind": "warped-profile",
               "density": int(density)}
    out_doc.update(profile.to_json())
    radii = doc.get("decomposition_radii", [])
    if radii:
        reports = {}
        for t in system.levels:
            lev = system.level(t)
            reports[str(t)] = {
                str(R): verify_entourage_decomposition(
                    lev, presentation, float(R), table=tables[t]).to_json()
                for R in radii}
        out_doc["decompositions"] = reports

    save_system(_out(args, "system"), system, presentation, tables, spectra=spectra)
    _write_json(_out(args, "profile.json"), out_doc)
    if args.svg:
        ts = sorted(profile.per_level_gap)
        gap_profile(ts, [profile.per_level_gap[t] for t in ts],
                    _out(args, "profile.svg"), threshold=threshold)
    gaps = ", ".join(f"t={t}: {profile.per_level_gap[t]:.6g}"
                     for t in sorted(profile.per_level_gap))
    print(f"profile: {profile.verdict} ({gaps})")
    return EXIT_OK


# -- suite ------------------------------------------------------------------

def cmd_suite(args) -> int:
    report = run_suite(args.seed, args.scale, timings=args.timings)
    _write_json(_out(args, "suite-report.json"), report)
    for c in report["criteria"]:
        print(f"[{'PASS' if c['passed'] else 'FAIL'}] {c['number']:>2} {c['name']}")
    failed = sum(not c["passed"] for c in report["criteria"])
    if failed:
        print(f"{failed} of {len(report['criteria'])} checks failed")
        return EXIT_PROPERTY
    print(f"all {len(report['criteria'])} checks passed")
    return EXIT_OK


# -- entry point ------------------------------------------------------------

def _build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="coarselab",
        description="weighted coarse spaces: nets, spectra, slack subsets, "
                    "warped metrics")
    sub = p.add_subparsers(dest="command", required=True)

    net = sub.add_parser("net", help="maximal separated subset with witnesses")
    net.add_argument("space", help="space JSON file")
    net.add_argument("--radius", type=float, required=True,
                     help="separation radius")
    net.add_argument("--out-dir", default=".")
    net.add_argument("--svg", action="store_true", help="draw the net overlay")
    net.set_defaults(func=cmd_net)

    gap = sub.add_parser("gap", help="Laplacian spectral report")
    gap.add_argument("space", help="space JSON file")
    grp = gap.add_mutually_exclusive_group(required=True)
    grp.add_argument("--radius", type=float, help="radius entourage")
    grp.add_argument("--entourage", help="entourage descriptor JSON file")
    gap.add_argument("--out-dir", default=".")
    gap.add_argument("--svg", action="store_true", help="draw the spectrum strip")
    gap.set_defaults(func=cmd_gap)

    folner = sub.add_parser("folner", help="search for a small-boundary subset")
    folner.add_argument("space", help="space JSON file")
    folner.add_argument("--radius", type=float, help="entourage radius")
    folner.add_argument("--eps", type=float, help="slack target")
    folner.add_argument("--budget", type=int, default=None,
                        help="greedy-stage step budget")
    folner.add_argument("--replay", metavar="CERT",
                        help="recompute a recorded certificate and compare")
    folner.add_argument("--out-dir", default=".")
    folner.set_defaults(func=cmd_folner)

    warp = sub.add_parser("warp", help="build and profile a warped system")
    warp.add_argument("config", help="warp config JSON file")
    warp.add_argument("--out-dir", default=".")
    warp.add_argument("--svg", action="store_true", help="draw the gap profile")
    warp.set_defaults(func=cmd_warp)

    suite = sub.add_parser("suite", help="run the numbered self-checks")
    suite.add_argument("--scale", choices=("smoke", "full"), default="smoke")
    suite.add_argument("--seed", type=int, default=20260822)
    suite.add_argument("--timings", action="store_true",
                       help="record per-check wall-clock (breaks byte determinism)")
    suite.add_argument("--out-dir", default=".")
    suite.set_defaults(func=cmd_suite)
    return p


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse already printed; keep its code
        return int(exc.code or 0)
    try:
        return args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except PropertyFailure as exc:
        print(f"property failure: {exc}", file=sys.stderr)
        return EXIT_PROPERTY
    except ConvergenceError as exc:
        print(f"non-convergence: {exc}", file=sys.stderr)
        return EXIT_NONCONVERGENCE


if __name__ == "__main__":
    raise SystemExit(main())
