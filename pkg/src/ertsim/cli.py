"""Configuration-driven entry point.

Run descriptions are YAML documents with a ``schema_version`` field and a
strict schema: unknown keys are rejected so a typo can never silently
change a study.  ``run`` integrates one model with one solver and writes
``series.csv`` plus ``meta.json``; ``sweep`` runs an accuracy-versus-
runtime grid and writes ``sweep.csv``.  All files are written atomically
(temp file + rename); sweeps additionally persist completed cells to
``sweep.partial.csv`` as they finish.

Exit codes: 0 success, 2 configuration error, 3 memory-cap exceeded,
4 numerical failure, 1 anything else.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import os
import sys
import tempfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import yaml

from . import __version__, analysis, ert, kraus, models, reference
from .errors import ConfigError, ErtsimError, MemoryCapError, NumericalError, default_memory_cap

SCHEMA_VERSION = 1

_MODEL_BUILDERS = {
    "heisenberg": (models.SpinChainParams, models.build_heisenberg),
    "cavity": (models.CavityParams, models.build_cavity),
    "fermi_hubbard": (models.HubbardParams, models.build_fermi_hubbard),
}
_SOLVER_KINDS = ("exact", "ert", "wmc")


@dataclass(frozen=True)
class SolverSettings:
    kind: str
    dt: float | None = None
    rank: int | None = None
    n_traj: int | None = None
    seed: int = 0
    renormalize_trace: bool = True


@dataclass(frozen=True)
class RunConfig:
    model_kind: str
    model_params: object
    solver: SolverSettings
    t_final: float
    sample_every: int
    output_dir: Path
    memory_cap_bytes: int | None


@dataclass(frozen=True)
class SweepConfig:
    model_kind: str
    base_params: object
    coupling_field: str
    couplings: tuple[float, ...]
    ranks: tuple[int, ...]
    n_trajs: tuple[int, ...]
    t_final: float
    out_dt: float
    ert_dt: float
    wmc_dt: float
    exact_dt: float
    seed: int
    output_dir: Path
    memory_cap_bytes: int | None


def _require_mapping(node, path: str) -> dict:
    if not isinstance(node, dict):
        raise ConfigError(f"{path}: expected a mapping, got {type(node).__name__}")
    return node


def _reject_unknown(node: dict, allowed: set[str], path: str) -> None:
    unknown = sorted(set(node) - allowed)
    if unknown:
        raise ConfigError(f"unknown key {path}.{unknown[0]!r}" if path
                          else f"unknown key {unknown[0]!r}")


def _get(node: dict, key: str, path: str, required: bool = True, default=None):
    if key not in node:
        if required:
            raise ConfigError(f"missing required key {path}.{key}" if path
                              else f"missing required key {key}")
        return default
    return node[key]


def _load_yaml(text: str):
    try:
        return yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"config parse error: {exc}") from exc


def _check_schema_version(doc: dict) -> None:
    version = _get(doc, "schema_version", "")
    if version != SCHEMA_VERSION:
        raise ConfigError(
            f"schema_version: expected {SCHEMA_VERSION}, got {version!r}"
        )


def _parse_model(node, path: str = "model"):
    node = dict(_require_mapping(node, path))
    kind = _get(node, "kind", path)
    if kind not in _MODEL_BUILDERS:
        raise ConfigError(
            f"{path}.kind: expected one of {sorted(_MODEL_BUILDERS)}, got {kind!r}"
        )
    node.pop("kind")
    params_cls, _ = _MODEL_BUILDERS[kind]
    fields = {f.name for f in dataclasses.fields(params_cls)}
    _reject_unknown(node, fields, path)
    if kind == "cavity" and node.get("lambda_matrix") is not None:
        node["lambda_matrix"] = np.asarray(node["lambda_matrix"], dtype=np.complex128)
    try:
        params = params_cls(**node)
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    return kind, params


def _parse_solver(node, path: str = "solver") -> SolverSettings:
    node = _require_mapping(node, path)
    kind = _get(node, "kind", path)
    if kind not in _SOLVER_KINDS:
        raise ConfigError(f"{path}.kind: expected one of {sorted(_SOLVER_KINDS)}, got {kind!r}")
    allowed = {"kind", "dt"}
    if kind == "ert":
        allowed |= {"rank", "renormalize_trace"}
    elif kind == "wmc":
        allowed |= {"n_traj", "seed"}
    _reject_unknown(node, allowed, path)
    dt = node.get("dt")
    if dt is not None and float(dt) <= 0:
        raise ConfigError(f"{path}.dt: dt > 0 required, got {dt}")
    settings = SolverSettings(
        kind=kind,
        dt=None if dt is None else float(dt),
        rank=node.get("rank"),
        n_traj=node.get("n_traj"),
        seed=int(node.get("seed", 0)),
        renormalize_trace=bool(node.get("renormalize_trace", True)),
    )
    if kind == "ert":
        if settings.rank is None:
            raise ConfigError(f"{path}.rank is required for the ert solver")
        if int(settings.rank) < 1:
            raise ConfigError(f"{path}.rank: rank >= 1 required, got {settings.rank}")
    if kind == "wmc":
        if settings.n_traj is None:
            raise ConfigError(f"{path}.n_traj is required for the wmc solver")
        if int(settings.n_traj) < 1:
            raise ConfigError(f"{path}.n_traj: n_traj >= 1 required, got {settings.n_traj}")
    return settings


def parse_config(text: str) -> RunConfig:
    """Parse and fully validate a single-run configuration document."""
    doc = _require_mapping(_load_yaml(text), "top level")
    _reject_unknown(doc, {"schema_version", "model", "solver", "t_final",
                          "sample_every", "output_dir", "memory_cap_bytes"}, "")
    _check_schema_version(doc)
    model_kind, params = _parse_model(_get(doc, "model", ""))
    solver = _parse_solver(_get(doc, "solver", ""))
    t_final = float(_get(doc, "t_final", ""))
    if t_final <= 0:
        raise ConfigError(f"t_final: t_final > 0 required, got {t_final}")
    sample_every = int(doc.get("sample_every", 1))
    if sample_every < 1:
        raise ConfigError(f"sample_every: sample_every >= 1 required, got {sample_every}")
    cap = doc.get("memory_cap_bytes")
    if cap is not None and int(cap) <= 0:
        raise ConfigError(f"memory_cap_bytes must be positive, got {cap}")
    return RunConfig(
        model_kind=model_kind,
        model_params=params,
        solver=solver,
        t_final=t_final,
        sample_every=sample_every,
        output_dir=Path(_get(doc, "output_dir", "")),
        memory_cap_bytes=None if cap is None else int(cap),
    )


def parse_sweep_config(text: str) -> SweepConfig:
    """Parse and validate a sweep configuration document."""
    doc = _require_mapping(_load_yaml(text), "top level")
    _reject_unknown(doc, {"schema_version", "sweep"}, "")
    _check_schema_version(doc)
    node = _require_mapping(_get(doc, "sweep", ""), "sweep")
    _reject_unknown(node, {"model", "coupling_field", "couplings", "ranks", "n_trajs",
                           "t_final", "out_dt", "ert_dt", "wmc_dt", "exact_dt",
                           "seed", "output_dir"}, "sweep")
    model_kind, base_params = _parse_model(_get(node, "model", "sweep"), "sweep.model")
    coupling_field = _get(node, "coupling_field", "sweep")
    param_fields = {f.name for f in dataclasses.fields(type(base_params))}
    if coupling_field not in param_fields:
        raise ConfigError(
            f"sweep.coupling_field: {coupling_field!r} is not a parameter of "
            f"the {model_kind} model"
        )
    couplings = tuple(float(v) for v in _get(node, "couplings", "sweep"))
    if not couplings:
        raise ConfigError("sweep.couplings must be nonempty")
    ranks = tuple(int(r) for r in node.get("ranks", ()))
    n_trajs = tuple(int(n) for n in node.get("n_trajs", ()))
    if any(r < 1 for r in ranks):
        raise ConfigError("sweep.ranks: rank >= 1 required")
    if any(n < 1 for n in n_trajs):
        raise ConfigError("sweep.n_trajs: n_traj >= 1 required")
    if not ranks and not n_trajs:
        raise ConfigError("sweep needs at least one of ranks / n_trajs")
    t_final = float(_get(node, "t_final", "sweep"))
    out_dt = float(_get(node, "out_dt", "sweep"))
    return SweepConfig(
        model_kind=model_kind,
        base_params=base_params,
        coupling_field=coupling_field,
        couplings=couplings,
        ranks=ranks,
        n_trajs=n_trajs,
        t_final=t_final,
        out_dt=out_dt,
        ert_dt=float(node.get("ert_dt", out_dt)),
        wmc_dt=float(node.get("wmc_dt", out_dt)),
        exact_dt=float(node.get("exact_dt", out_dt)),
        seed=int(node.get("seed", 0)),
        output_dir=Path(_get(node, "output_dir", "sweep")),
        memory_cap_bytes=None,
    )


def _atomic_write(path: Path, writer) -> None:
    """Write through a temp file in the same directory, then rename."""
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp_name = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as handle:
            writer(handle)
        os.replace(tmp_name, path)
    except BaseException:
        if os.path.exists(tmp_name):
            os.unlink(tmp_name)
        raise


def _fmt(x: float) -> str:
    return f"{x:.15g}"


def _write_series_csv(path: Path, series) -> None:
    names = list(series.channels)

    def writer(handle):
        out = csv.writer(handle)
        out.writerow(["time", *names])
        for i, t in enumerate(series.times):
            out.writerow([_fmt(t), *(_fmt(series.channels[name][i]) for name in names)])

    _atomic_write(path, writer)


def _write_stderr_csv(path: Path, series) -> None:
    names = list(series.stderr)

    def writer(handle):
        out = csv.writer(handle)
        out.writerow(["time", *names])
        for i, t in enumerate(series.times):
            out.writerow([_fmt(t), *(_fmt(series.stderr[name][i]) for name in names)])

    _atomic_write(path, writer)


def _json_default(obj):
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, Path):
        return str(obj)
    raise TypeError(f"not JSON serializable: {type(obj)}")


def _write_meta_json(path: Path, payload: dict) -> None:
    def writer(handle):
        json.dump(payload, handle, indent=2, default=_json_default)
        handle.write("\n")

    _atomic_write(path, writer)


def _build_model(kind: str, params, cap: int | None) -> models.ModelSpec:
    _, builder = _MODEL_BUILDERS[kind]
    return builder(params, memory_cap_bytes=cap)


def _default_dt(model: models.ModelSpec) -> float:
    return kraus.default_timestep(model.hamiltonian, model.dissipators)


def run(config: RunConfig) -> int:
    """Execute one run and write series.csv / meta.json; returns exit status 0."""
    cap = config.memory_cap_bytes if config.memory_cap_bytes is not None else default_memory_cap()
    model = _build_model(config.model_kind, config.model_params, cap)
    solver = config.solver
    dt = solver.dt if solver.dt is not None else _default_dt(model)

    if solver.kind == "exact":
        series = reference.exact_evolve(model, dt, config.t_final,
                                        sample_every=config.sample_every,
                                        memory_cap_bytes=cap)
    elif solver.kind == "ert":
        cfg = ert.ErtConfig(rank=int(solver.rank), dt=dt,
                            renormalize_trace=solver.renormalize_trace)
        series = ert.evolve(model, cfg, config.t_final,
                            sample_every=config.sample_every)
    else:
        cfg = reference.WmcConfig(n_traj=int(solver.n_traj), seed=solver.seed, dt=dt)
        series = reference.wmc_evolve(model, cfg, config.t_final,
                                      sample_every=config.sample_every)

    out = config.output_dir
    out.mkdir(parents=True, exist_ok=True)
    _write_series_csv(out / "series.csv", series)
    if series.stderr is not None:
        _write_stderr_csv(out / "stderr.csv", series)
    meta = {
        "schema_version": SCHEMA_VERSION,
        "library_version": __version__,
        "command": "run",
        "solver": {"kind": solver.kind, "dt": dt, "rank": solver.rank,
                   "n_traj": solver.n_traj, "seed": solver.seed,
                   "renormalize_trace": solver.renormalize_trace},
        "model": dict(config.model_params.__dict__, kind=config.model_kind),
        "t_final": config.t_final,
        "sample_every": config.sample_every,
        "memory_cap_bytes": cap,
        "series_meta": series.meta,
    }
    _write_meta_json(out / "meta.json", meta)
    return 0


def run_sweep(config: SweepConfig, workers: int = 1) -> int:
    """Execute a sweep and write sweep.csv / meta.json; returns exit status 0."""
    cap = config.memory_cap_bytes if config.memory_cap_bytes is not None else default_memory_cap()
    cells = []
    for value in config.couplings:
        params = dataclasses.replace(config.base_params,
                                     **{config.coupling_field: value})
        cells.append(analysis.SweepCell(
            model_name=config.model_kind, coupling=value,
            model=_build_model(config.model_kind, params, cap),
        ))
    spec = analysis.SweepSpec(
        cells=tuple(cells), ranks=config.ranks, n_trajs=config.n_trajs,
        t_final=config.t_final, out_dt=config.out_dt, ert_dt=config.ert_dt,
        wmc_dt=config.wmc_dt, exact_dt=config.exact_dt, seed=config.seed,
    )

    out = config.output_dir
    out.mkdir(parents=True, exist_ok=True)
    header = ["model", "coupling", "solver", "control", "integrated_error",
              "wall_seconds"]
    partial_path = out / "sweep.partial.csv"
    if partial_path.exists():
        partial_path.unlink()

    def persist_cell(cell, rows):
        new_file = not partial_path.exists()
        with open(partial_path, "a", newline="") as handle:
            writer = csv.writer(handle)
            if new_file:
                writer.writerow(header)
            for row in rows:
                writer.writerow(_sweep_row_fields(row))
        print(f"cell done: {cell.model_name} coupling={cell.coupling:g} "
              f"({len(rows)} points)", flush=True)

    result = analysis.benchmark_sweep(spec, workers=workers, on_cell=persist_cell)

    def writer(handle):
        outw = csv.writer(handle)
        outw.writerow(header)
        for row in result.rows:
            outw.writerow(_sweep_row_fields(row))

    _atomic_write(out / "sweep.csv", writer)
    if partial_path.exists():
        partial_path.unlink()
    meta = {
        "schema_version": SCHEMA_VERSION,
        "library_version": __version__,
        "command": "sweep",
        "model": dict(config.base_params.__dict__, kind=config.model_kind),
        "coupling_field": config.coupling_field,
        "couplings": list(config.couplings),
        "ranks": list(config.ranks),
        "n_trajs": list(config.n_trajs),
        "sweep_meta": result.meta,
        "workers": workers,
        "memory_cap_bytes": cap,
    }
    _write_meta_json(out / "meta.json", meta)
    return 0


def _sweep_row_fields(row) -> list[str]:
    return [row.model, _fmt(row.coupling), row.solver, _fmt(row.control),
            _fmt(row.integrated_error), _fmt(row.wall_seconds)]


def _apply_overrides(args, doc_text: str) -> str:
    """--output-dir and --seed rewrite the corresponding config entries."""
    if args.output_dir is None and args.seed is None:
        return doc_text
    doc = _load_yaml(doc_text)
    target = doc.get("sweep", doc) if isinstance(doc, dict) else doc
    if not isinstance(target, dict):
        return doc_text
    if args.output_dir is not None:
        target["output_dir"] = args.output_dir
    if args.seed is not None:
        if "sweep" in doc:
            target["seed"] = args.seed
        else:
            target.setdefault("solver", {})
            if isinstance(target["solver"], dict):
                target["solver"]["seed"] = args.seed
    return yaml.safe_dump(doc)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="ertsim",
        description="Simulate open quantum systems with a rank-truncated "
                    "ensemble solver and reference integrators.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, doc in (("run", "single run from a config file"),
                      ("sweep", "accuracy-versus-runtime sweep from a config file")):
        s = sub.add_parser(name, help=doc)
        s.add_argument("config", type=Path, help="path to the YAML config")
        s.add_argument("--output-dir", type=str, default=None,
                       help="override the configured output directory")
        s.add_argument("--seed", type=int, default=None,
                       help="override the configured seed")
        if name == "sweep":
            s.add_argument("--workers", type=int, default=1,
                           help="parallel worker processes for sweep cells")
    args = parser.parse_args(argv)

    try:
        try:
            text = args.config.read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from exc
        text = _apply_overrides(args, text)
        if args.command == "run":
            return run(parse_config(text))
        return run_sweep(parse_sweep_config(text), workers=max(1, args.workers))
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except MemoryCapError as exc:
        print(f"resource cap: {exc}", file=sys.stderr)
        return 3
    except (NumericalError, FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 4
    except ErtsimError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
