"""Command-line front end: batch experiments driven by key=value configs.

Subcommands: spectrum, derivative, criticality, gap, optimize, verify. Each
takes --config <path> and --out <dir>, writes a report.json plus CSV/JSON
artifacts into the output directory, and exits 0 only when every verdict
passed and no errors occurred (2 signals a configuration error).
"""
from __future__ import annotations

import argparse
import csv
import sys
from pathlib import Path

import numpy as np

from .certificates import CertificateStatus, full_criticality_report, gap_certificate
from .config import ParsedConfig, get_float, get_floats, get_int, parse_config_text, validate_schema
from .domain import DomainGrid, Potential, grid_from_mapping
from .errors import ConfigError, DegenerateGapError
from .optimize import ConstraintSpec, ObjectiveSpec, Schedule, project_feasible, run_optimizer
from .perturbation import (
    ProbeDirection,
    fd_eigenvalue_derivative,
    fd_richardson_derivative,
    is_critical_probe,
    make_direction,
    one_sided_derivatives,
    sample_probes,
    gap_one_sided_derivatives,
)
from .reports import (
    certificate_payload,
    eigenvalues_payload,
    fmt,
    gap_certificate_payload,
    new_report,
    write_csv,
    write_direction_csv,
    write_eigenvectors_csv,
    write_json,
    write_potential_csv,
)
from .spectral import detect_cluster, solve_spectrum, spectrum_with_complete_cluster
from .verify import run_suite

_DOMAIN = ({"kind", "length", "nodes", "bc"}, {"kind", "length", "nodes", "bc"})
_POTENTIAL = ({"preset", "value", "coeffs", "sin_coeffs", "path"}, {"preset"})
_OUTPUT = ({"directory", "formats", "seed"}, set())

SCHEMAS: dict[str, dict[str, tuple[set[str], set[str]]]] = {
    "spectrum": {
        "domain": _DOMAIN,
        "potential": _POTENTIAL,
        "task": ({"modes"}, set()),
        "output": _OUTPUT,
    },
    "derivative": {
        "domain": _DOMAIN,
        "potential": _POTENTIAL,
        "task": ({"index", "direction", "coeffs", "sin_coeffs", "path", "fd_step"},
                 {"index", "direction"}),
        "output": _OUTPUT,
    },
    "criticality": {
        "domain": _DOMAIN,
        "potential": _POTENTIAL,
        "task": ({"index", "probes"}, {"index"}),
        "output": _OUTPUT,
    },
    "gap": {
        "domain": _DOMAIN,
        "potential": _POTENTIAL,
        "task": ({"index", "jindex", "probes"}, {"index", "jindex"}),
        "output": _OUTPUT,
    },
    "optimize": {
        "domain": _DOMAIN,
        "potential": _POTENTIAL,
        "task": ({"target", "index", "jindex", "sense", "mean", "bound", "iters",
                  "schedule", "step", "polyak_target", "cert_every"},
                 {"target", "index", "sense", "mean", "bound"}),
        "output": _OUTPUT,
    },
    "verify": {
        "task": ({"suite"}, {"suite"}),
        "output": _OUTPUT,
    },
}

_NEEDS_SEED = {"criticality", "gap", "verify"}


def _require_seed(cfg: ParsedConfig, command: str) -> int | None:
    seed = get_int(cfg.section("output"), "seed")
    if seed is None and command in _NEEDS_SEED:
        raise ConfigError(f"[output] seed is required for {command!r} (random probes are used)")
    return seed


def _check_index(grid: DomainGrid, i: int | None, key: str = "index") -> int:
    if i is None or not 1 <= i <= grid.n_nodes:
        raise ConfigError(f"{key} must be in 1..{grid.n_nodes}, got {i}")
    return i


def _build_potential(grid: DomainGrid, section: dict[str, str]) -> Potential:
    preset = section["preset"].strip().lower()
    if preset == "zero":
        return Potential.zero(grid)
    if preset == "constant":
        value = get_float(section, "value")
        if value is None:
            raise ConfigError("constant potential requires value=")
        return Potential.constant(grid, value)
    if preset == "fourier":
        cos_coeffs = get_floats(section, "coeffs")
        sin_coeffs = get_floats(section, "sin_coeffs")
        if not cos_coeffs and not sin_coeffs:
            raise ConfigError("fourier potential requires coeffs= and/or sin_coeffs=")
        return Potential.fourier(grid, cos_coeffs, sin_coeffs)
    if preset == "file":
        if "path" not in section:
            raise ConfigError("file potential requires path=")
        return Potential.from_values(grid, _read_column_csv(section["path"], grid.n_nodes))
    raise ConfigError(f"unknown potential preset {section['preset']!r}")


def _read_column_csv(path: str, n: int) -> np.ndarray:
    rows = []
    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read {path!r}: {exc}") from exc
    with fh:
        reader = csv.reader(fh)
        header: list[str] | None = None
        for row in reader:
            if not row:
                continue
            if header is None:
                try:
                    float(row[-1])
                except ValueError:
                    header = row
                    continue
                header = []
            rows.append(row)
    if not rows:
        raise ConfigError(f"no data rows in {path!r}")
    col = -1
    if header and "q" in header:
        col = header.index("q")
    values = np.array([float(r[col]) for r in rows])
    if len(values) != n:
        raise ConfigError(f"{path!r} has {len(values)} rows, expected {n}")
    return values


def _build_direction(grid: DomainGrid, task: dict[str, str], seed: int | None) -> ProbeDirection:
    kind = task["direction"].strip().lower()
    if kind == "fourier":
        cos_coeffs = get_floats(task, "coeffs")
        sin_coeffs = get_floats(task, "sin_coeffs")
        if not cos_coeffs and not sin_coeffs:
            raise ConfigError("fourier direction requires coeffs= and/or sin_coeffs=")
        return make_direction(grid, Potential.fourier(grid, cos_coeffs, sin_coeffs).values)
    if kind == "file":
        if "path" not in task:
            raise ConfigError("file direction requires path=")
        return make_direction(grid, _read_column_csv(task["path"], grid.n_nodes))
    if kind in ("noise", "spike"):
        if seed is None:
            raise ConfigError(f"[output] seed is required for a {kind!r} direction")
        return sample_probes(grid, 1, seed, kind)[0]
    raise ConfigError(f"unknown direction {task['direction']!r}")


def cmd_spectrum(cfg: ParsedConfig, outdir: Path) -> tuple[dict, int]:
    grid = grid_from_mapping(cfg.section("domain"))
    q = _build_potential(grid, cfg.section("potential"))
    modes = get_int(cfg.section("task"), "modes", 8)
    if not 1 <= modes <= grid.n_nodes:
        raise ConfigError(f"modes must be in 1..{grid.n_nodes}, got {modes}")
    spec = solve_spectrum(grid, q, modes)
    report = new_report("spectrum", cfg.sections)
    report["eigenvalues"] = eigenvalues_payload(spec)
    write_json(outdir / "eigenvalues.json", {"eigenvalues": report["eigenvalues"]})
    if _wants_csv(cfg):
        write_eigenvectors_csv(grid, spec, outdir / "eigenvectors.csv")
        report["artifacts"]["eigenvectors_csv"] = "eigenvectors.csv"
    report["artifacts"]["eigenvalues_json"] = "eigenvalues.json"
    return report, 0


def cmd_derivative(cfg: ParsedConfig, outdir: Path) -> tuple[dict, int]:
    grid = grid_from_mapping(cfg.section("domain"))
    q = _build_potential(grid, cfg.section("potential"))
    task = cfg.section("task")
    i = _check_index(grid, get_int(task, "index"))
    seed = get_int(cfg.section("output"), "seed")
    u = _build_direction(grid, task, seed)
    t = get_float(task, "fd_step", 1e-4)
    spec, cluster = spectrum_with_complete_cluster(grid, q, i)
    d = one_sided_derivatives(spec, i, u)
    critical = is_critical_probe(spec, i, u)
    fd_central = fd_eigenvalue_derivative(grid, q, i, u, t)
    fd_rich = fd_richardson_derivative(grid, q, i, u, t)
    rank = cluster.rank_of(i)
    interior = 0 < rank < cluster.multiplicity - 1
    report = new_report("derivative", cfg.sections)
    report["eigenvalues"] = eigenvalues_payload(spec)
    report["payload"] = {
        "index": i,
        "multiplicity": cluster.multiplicity,
        "left": d.left,
        "right": d.right,
        "critical": critical,
        "fd_central": fd_central,
        "fd_richardson": fd_rich,
        "fd_step": t,
        # the extremal selections carry the variational meaning; strictly
        # interior ranks use the sorted-branch extension
        "branch_rule": "sorted-extension (interior of cluster)" if interior else "extremal",
    }
    write_csv(outdir / "derivatives.csv",
              ["u_id", "i", "left", "right", "critical", "fd_central", "fd_richardson"],
              [["u0", i, fmt(d.left), fmt(d.right), int(critical), fmt(fd_central), fmt(fd_rich)]])
    report["artifacts"]["derivatives_csv"] = "derivatives.csv"
    return report, 0


def cmd_criticality(cfg: ParsedConfig, outdir: Path) -> tuple[dict, int]:
    grid = grid_from_mapping(cfg.section("domain"))
    q = _build_potential(grid, cfg.section("potential"))
    task = cfg.section("task")
    i = _check_index(grid, get_int(task, "index"))
    probes = get_int(task, "probes", 200)
    seed = _require_seed(cfg, "criticality")
    spec, cluster = spectrum_with_complete_cluster(grid, q, i)
    crit = full_criticality_report(spec, i, probes=probes, seed=seed)
    report = new_report("criticality", cfg.sections)
    report["eigenvalues"] = eigenvalues_payload(spec)
    report["payload"] = crit.to_dict()

    direction_csv = None
    cert = crit.certificate
    if cert.status is CertificateStatus.INFEASIBLE and _wants_csv(cfg):
        direction_csv = "separating_direction.csv"
        write_direction_csv(grid, cert.separating_direction.values, outdir / direction_csv)
        report["artifacts"]["separating_direction_csv"] = direction_csv
    write_json(outdir / "certificate.json", certificate_payload(cert, direction_csv))
    report["artifacts"]["certificate_json"] = "certificate.json"
    if cert.status is CertificateStatus.FEASIBLE and _wants_csv(cfg):
        from .certificates import extract_frame
        from .spectral import recover_potential

        frame = extract_frame(cert, spec, cluster)
        header = (["x"] if grid.ndim == 1 else ["x", "y"]) + [f"g{p+1}" for p in range(len(frame))]
        rows = []
        for idx in range(grid.n_nodes):
            coords = [grid.coords[idx]] if grid.ndim == 1 else list(grid.coords[idx])
            rows.append([fmt(c) for c in coords] + [fmt(f[idx]) for f in frame])
        write_csv(outdir / "frame.csv", header, rows)
        report["artifacts"]["frame_csv"] = "frame.csv"
        recovered = recover_potential(grid, frame, cluster.value)
        write_potential_csv(grid, recovered.values, outdir / "recovered_potential.csv")
        report["artifacts"]["recovered_potential_csv"] = "recovered_potential.csv"
    return report, 0


def cmd_gap(cfg: ParsedConfig, outdir: Path) -> tuple[dict, int]:
    grid = grid_from_mapping(cfg.section("domain"))
    q = _build_potential(grid, cfg.section("potential"))
    task = cfg.section("task")
    i = _check_index(grid, get_int(task, "index"))
    j = _check_index(grid, get_int(task, "jindex"), "jindex")
    if not 1 <= i < j:
        raise ConfigError(f"gap requires 1 <= index < jindex, got {i}, {j}")
    probes = get_int(task, "probes", 20)
    seed = _require_seed(cfg, "gap")
    spec, _ = spectrum_with_complete_cluster(grid, q, j)
    ci = detect_cluster(spec, i)
    cj = detect_cluster(spec, j)
    cert = gap_certificate(spec, ci, cj)

    report = new_report("gap", cfg.sections)
    report["eigenvalues"] = eigenvalues_payload(spec)
    direction_csv = None
    if cert.status is CertificateStatus.INFEASIBLE and _wants_csv(cfg):
        direction_csv = "separating_direction.csv"
        write_direction_csv(grid, cert.separating_direction.values, outdir / direction_csv)
        report["artifacts"]["separating_direction_csv"] = direction_csv
    write_json(outdir / "gap_certificate.json", gap_certificate_payload(cert, direction_csv))
    report["artifacts"]["gap_certificate_json"] = "gap_certificate.json"

    rows = []
    table = []
    if not cert.degenerate:
        for u_id, u in enumerate(sample_probes(grid, probes, seed, "fourier")):
            try:
                d = gap_one_sided_derivatives(spec, i, j, u)
            except DegenerateGapError:
                break
            scale = max(abs(d.left), abs(d.right), 1.0)
            critical = d.left * d.right <= 1e-12 * scale**2
            rows.append([f"u{u_id}", f"{i},{j}", fmt(d.left), fmt(d.right), int(critical)])
            table.append({"u_id": f"u{u_id}", "left": d.left, "right": d.right,
                          "critical": bool(critical)})
    if _wants_csv(cfg):
        write_csv(outdir / "gap_derivatives.csv",
                  ["u_id", "i", "left", "right", "critical"], rows)
        report["artifacts"]["gap_derivatives_csv"] = "gap_derivatives.csv"
    report["payload"] = {
        "index": i,
        "jindex": j,
        "gap": spec.eigenvalue(j) - spec.eigenvalue(i),
        "certificate_status": cert.status.value,
        "degenerate": cert.degenerate,
        "derivative_table": table,
        "seed": seed,
    }
    return report, 0


def cmd_optimize(cfg: ParsedConfig, outdir: Path) -> tuple[dict, int]:
    grid = grid_from_mapping(cfg.section("domain"))
    task = cfg.section("task")
    target = task["target"].strip().lower()
    i = _check_index(grid, get_int(task, "index"))
    j = get_int(task, "jindex")
    if j is not None:
        _check_index(grid, j, "jindex")
    objective = ObjectiveSpec(target, i, j, sense=task["sense"].strip().lower())
    constraint = ConstraintSpec(get_float(task, "mean"), get_float(task, "bound"))
    q0 = project_feasible(grid, _build_potential(grid, cfg.section("potential")), constraint)
    iters = get_int(task, "iters", 200)
    schedule_kind = task.get("schedule", "sqrt").strip().lower()
    schedule = Schedule(schedule_kind, s0=get_float(task, "step"),
                        target=get_float(task, "polyak_target"))
    cert_every = get_int(task, "cert_every", 25)

    result = run_optimizer(grid, objective, constraint, q0, schedule, iters,
                           cert_every=cert_every)
    report = new_report("optimize", cfg.sections)
    report["payload"] = {
        "stop_reason": result.stop_reason,
        "iterations": result.iterations,
        "objective": result.objective,
        "box_saturated_fraction": result.box_saturated_fraction,
        "aborted": result.aborted,
    }
    if _wants_csv(cfg):
        result.log.write_csv(outdir / "iterates.csv")
        write_potential_csv(grid, result.potential.values, outdir / "final_potential.csv")
        report["artifacts"]["iterates_csv"] = "iterates.csv"
        report["artifacts"]["final_potential_csv"] = "final_potential.csv"
    code = 1 if result.aborted else 0
    return report, code


def cmd_verify(cfg: ParsedConfig, outdir: Path) -> tuple[dict, int]:
    suite = cfg.section("task")["suite"].strip()
    seed = _require_seed(cfg, "verify")
    outcome = run_suite(suite, seed)
    report = new_report("verify", cfg.sections)
    report["payload"] = outcome
    report["verdicts"] = _flatten_checks(outcome)
    passed = outcome["passed"]
    return report, 0 if passed else 1


def _flatten_checks(outcome: dict) -> list[dict]:
    if "checks" in outcome:
        return [dict(c, suite=outcome["suite"]) for c in outcome["checks"]]
    flat: list[dict] = []
    for sub in outcome.get("suites", []):
        flat.extend(_flatten_checks(sub))
    return flat


def _wants_csv(cfg: ParsedConfig) -> bool:
    formats = cfg.section("output").get("formats", "json,csv")
    return "csv" in [f.strip().lower() for f in formats.split(",")]


COMMANDS = {
    "spectrum": cmd_spectrum,
    "derivative": cmd_derivative,
    "criticality": cmd_criticality,
    "gap": cmd_gap,
    "optimize": cmd_optimize,
    "verify": cmd_verify,
}


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="specpot",
                                     description="Spectral experiments for potentials of -Laplacian + q")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="key=value config file with [section] headers")
        p.add_argument("--out", default=None, help="output directory (default: [output] directory)")
    args = parser.parse_args(argv)

    try:
        text = Path(args.config).read_text(encoding="utf-8")
    except OSError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    try:
        cfg = parse_config_text(text)
        validate_schema(cfg, SCHEMAS[args.command])
        outdir = args.out or cfg.section("output").get("directory")
        if not outdir:
            raise ConfigError("no output directory: pass --out or set [output] directory")
        outdir = Path(outdir)
        outdir.mkdir(parents=True, exist_ok=True)
        report, code = COMMANDS[args.command](cfg, outdir)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2

    write_json(outdir / "report.json", report)
    for v in report["verdicts"]:
        status = "PASS" if v["passed"] else "FAIL"
        measured = "" if v.get("measured") is None else f"  measured={v['measured']:.3e}"
        tolerance = "" if v.get("tolerance") is None else f"  tol={v['tolerance']:.3e}"
        suite = f"[{v['suite']}] " if "suite" in v else ""
        print(f"{status}  {suite}{v['name']}{measured}{tolerance}")
    print(f"report: {outdir / 'report.json'}")
    return code


if __name__ == "__main__":
    sys.exit(main())
