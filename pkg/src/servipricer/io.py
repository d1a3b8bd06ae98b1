"""Persistence: event-history CSV, JSON configs and parameter files, manifests, atomic writes."""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import os
import tempfile
from dataclasses import dataclass
from pathlib import Path
from typing import Any

from .model import (
    CENSOR, EVENT_TYPES, F3, EventRecord, GammaCost, HazardParams, MachineProfile, ModelParams,
    PortfolioDataset, SeverityParams, TariffPlan, Timeline, TypeLogitParams, ValidationError,
)
from .simulate import ObservationLaw

CSV_COLUMNS = ("machine_id", "t", "t_prev", "censored", "event_type", "cost",
               "x1_1", "x1_2", "x1_3", "x1_4", "x2", "sub_cost_1", "sub_cost_2")
REQUIRED_COLUMNS = CSV_COLUMNS[:11]


class DataError(ValidationError):
    """Unreadable or inconsistent data file."""


class ConfigError(ValidationError):
    """Malformed configuration or parameter file."""


# -- atomic writes ---------------------------------------------------------------

def atomic_write_text(path: str | os.PathLike, text: str) -> None:
    """Write ``text`` so that ``path`` either keeps its old content or holds all of it."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent if str(path.parent) else ".", prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def sha256_text(text: str) -> str:
    return hashlib.sha256(text.encode()).hexdigest()


def write_manifest(out_path: str | os.PathLike, content: str, **info) -> Path:
    manifest = Path(f"{out_path}.manifest.json")
    from . import __version__
    doc = {"output": str(out_path), "sha256": sha256_text(content), "version": __version__, **info}
    atomic_write_text(manifest, json.dumps(doc, indent=2, sort_keys=True, default=_json_default) + "\n")
    return manifest


def _json_default(obj):
    if hasattr(obj, "tolist"):
        return obj.tolist()
    if isinstance(obj, (tuple, set)):
        return list(obj)
    return str(obj)


def dumps_json(doc: Any) -> str:
    return json.dumps(doc, indent=2, sort_keys=True, default=_json_default, allow_nan=True) + "\n"


# -- CSV -----------------------------------------------------------------------------

def _fmt(x: float) -> str:
    # repr gives the shortest string that round-trips exactly (up to 17 significant digits)
    return repr(float(x))


def dataset_to_csv(dataset: PortfolioDataset) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for tl in sorted(dataset.timelines, key=lambda tl: tl.machine_id):
        for e in tl.events:
            subs = ("", "") if e.sub_costs is None else tuple(_fmt(c) for c in e.sub_costs)
            w.writerow([e.machine_id, _fmt(e.t), _fmt(e.t_prev), e.censored, e.event_type, _fmt(e.cost),
                        *e.x1, e.x2, *subs])
    return buf.getvalue()


def write_dataset(dataset: PortfolioDataset, path: str | os.PathLike) -> str:
    text = dataset_to_csv(dataset)
    atomic_write_text(path, text)
    return text


def _parse_row(row: dict, lineno: int) -> EventRecord:
    try:
        event_type = row["event_type"].strip()
        if event_type not in EVENT_TYPES:
            raise ValueError(f"unknown event_type {event_type!r}")
        x1 = tuple(int(row[f"x1_{j}"]) for j in range(1, 5))
        subs = None
        s1, s2 = (row.get("sub_cost_1") or "").strip(), (row.get("sub_cost_2") or "").strip()
        if s1 or s2:
            if event_type != F3:
                raise ValueError("sub-costs are only recorded for f3 events")
            subs = (float(s1), float(s2))
        values = dict(
            machine_id=int(row["machine_id"]), t=float(row["t"]), t_prev=float(row["t_prev"]),
            censored=int(row["censored"]), event_type=event_type, cost=float(row["cost"]),
            x1=x1, x2=int(row["x2"]), sub_costs=subs,
        )
        if not all(math.isfinite(values[k]) for k in ("t", "t_prev", "cost")):
            raise ValueError("non-finite number")
        return EventRecord(**values)
    except (TypeError, ValueError) as exc:
        raise DataError(f"line {lineno}: {exc}") from None


def dataset_from_csv(text: str, source: str = "<csv>") -> PortfolioDataset:
    reader = csv.DictReader(io.StringIO(text))
    if reader.fieldnames is None:
        raise DataError(f"{source}: no events (empty file)")
    missing = [c for c in REQUIRED_COLUMNS if c not in reader.fieldnames]
    if missing:
        raise DataError(f"{source}: line 1: missing columns {', '.join(missing)}")
    by_machine: dict[int, list[tuple[int, EventRecord]]] = {}
    for lineno, row in enumerate(reader, start=2):
        rec = _parse_row(row, lineno)
        by_machine.setdefault(rec.machine_id, []).append((lineno, rec))
    if not by_machine:
        raise DataError(f"{source}: no events")
    timelines = []
    for mid in sorted(by_machine):
        # rows may come in any order; timelines hold them sorted
        rows = sorted(by_machine[mid], key=lambda lr: (lr[1].sort_key(), lr[0]))
        events = tuple(r for _, r in rows)
        first_line = rows[0][0]
        censor = events[-1]
        if censor.event_type != CENSOR:
            raise DataError(f"{source}: line {rows[-1][0]}: machine {mid} must end with a censor row")
        try:
            profile = MachineProfile(events[0].x1, events[0].x2)
            timelines.append(Timeline(mid, profile, censor.t, events))
        except ValidationError as exc:
            raise DataError(f"{source}: machine {mid} (from line {first_line}): {exc}") from None
    try:
        return PortfolioDataset(tuple(timelines))
    except ValidationError as exc:
        raise DataError(f"{source}: {exc}") from None


def read_dataset(path: str | os.PathLike) -> PortfolioDataset:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc.strerror or exc}") from None
    return dataset_from_csv(text, str(path))


# -- parameters and configs -------------------------------------------------------------

PARAM_KEYS = ("alpha0", "kappa0", "gamma0", "beta1", "beta2", "pm_interval", "alpha_c", "kappa_c",
              "alpha1", "alpha2", "gamma_m", "gamma_1", "gamma_2", "gamma_c", "theta")
OPTIONAL_PARAM_KEYS = ("pm_phase", "tvc_reset_on_overhaul")
RUN_KEYS = ("n", "t_obs", "seed", "plan")


def params_to_dict(p: ModelParams) -> dict:
    h, s = p.hazard, p.severity
    return {
        "alpha0": h.alpha0, "kappa0": h.kappa0, "gamma0": h.gamma0, "beta1": list(h.beta1),
        "beta2": h.beta2, "pm_interval": h.pm_interval, "alpha_c": h.alpha_c, "kappa_c": h.kappa_c,
        "pm_phase": h.pm_phase, "tvc_reset_on_overhaul": h.tvc_reset_on_overhaul,
        "alpha1": list(p.type_logit.alpha_vectors[0]), "alpha2": list(p.type_logit.alpha_vectors[1]),
        "gamma_m": [s.maintenance.shape, s.maintenance.scale],
        "gamma_1": [s.minor1.shape, s.minor1.scale],
        "gamma_2": [s.minor2.shape, s.minor2.scale],
        "gamma_c": [s.catastrophic.shape, s.catastrophic.scale],
        "theta": s.frank_theta,
    }


def params_from_dict(doc: dict) -> ModelParams:
    missing = [k for k in PARAM_KEYS if k not in doc]
    if missing:
        raise ConfigError(f"missing parameter(s): {', '.join(missing)}")
    try:
        hazard = HazardParams(
            alpha0=float(doc["alpha0"]), kappa0=float(doc["kappa0"]), gamma0=float(doc["gamma0"]),
            beta1=tuple(float(b) for b in doc["beta1"]), beta2=float(doc["beta2"]),
            pm_interval=float(doc["pm_interval"]), alpha_c=float(doc["alpha_c"]), kappa_c=float(doc["kappa_c"]),
            pm_phase=doc.get("pm_phase", "reset"),
            tvc_reset_on_overhaul=bool(doc.get("tvc_reset_on_overhaul", True)),
        )
        gammas = {}
        for key in ("gamma_m", "gamma_1", "gamma_2", "gamma_c"):
            pair = doc[key]
            if len(pair) != 2:
                raise ValueError(f"{key} must be [shape, scale]")
            gammas[key] = GammaCost(float(pair[0]), float(pair[1]))
        return ModelParams(
            hazard=hazard,
            type_logit=TypeLogitParams((tuple(doc["alpha1"]), tuple(doc["alpha2"]))),
            severity=SeverityParams(gammas["gamma_m"], gammas["gamma_1"], gammas["gamma_2"], gammas["gamma_c"],
                                    float(doc["theta"])),
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid parameter value: {exc}") from None


@dataclass(frozen=True)
class RunConfig:
    params: ModelParams
    n: int
    t_obs: ObservationLaw
    seed: int
    plan: TariffPlan

    def to_dict(self) -> dict:
        return {**params_to_dict(self.params), "n": self.n, "t_obs": str(self.t_obs), "seed": self.seed,
                "plan": self.plan.id}


def _load_json(path: str | os.PathLike, kind: type[ValidationError]) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise kind(f"cannot read {path}: {exc.strerror or exc}") from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise kind(f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    if not isinstance(doc, dict):
        raise kind(f"{path}: line 1: expected a JSON object")
    return doc


def run_config_from_dict(doc: dict) -> RunConfig:
    known = set(PARAM_KEYS) | set(OPTIONAL_PARAM_KEYS) | set(RUN_KEYS)
    unknown = sorted(set(doc) - known)
    if unknown:
        raise ConfigError(f"unknown key(s): {', '.join(unknown)}")
    missing = [k for k in RUN_KEYS if k not in doc]
    if missing:
        raise ConfigError(f"missing key(s): {', '.join(missing)}")
    n, seed = doc["n"], doc["seed"]
    if not isinstance(n, int) or isinstance(n, bool) or n < 1:
        raise ConfigError(f"n must be a positive integer, got {n!r}")
    if not isinstance(seed, int) or isinstance(seed, bool) or seed < 0:
        raise ConfigError(f"seed must be a non-negative integer, got {seed!r}")
    try:
        law = ObservationLaw.parse(doc["t_obs"])
        plan = TariffPlan.named(str(doc["plan"]))
    except ValidationError as exc:
        raise ConfigError(str(exc)) from None
    return RunConfig(params_from_dict(doc), n, law, seed, plan)


def load_run_config(path: str | os.PathLike) -> RunConfig:
    doc = _load_json(path, ConfigError)
    try:
        return run_config_from_dict(doc)
    except ConfigError as exc:
        raise ConfigError(f"{path}: {exc}") from None


def load_params(path: str | os.PathLike) -> ModelParams:
    """Model parameters from a run config or from a calibration report (its ``params`` entry)."""
    doc = _load_json(path, ConfigError)
    if "params" in doc and isinstance(doc["params"], dict):
        doc = doc["params"]
    try:
        return params_from_dict(doc)
    except ConfigError as exc:
        raise ConfigError(f"{path}: {exc}") from None


# -- price tables -------------------------------------------------------------------------

PRICE_COLUMNS = ("x1_1", "x1_2", "x1_3", "x1_4", "x2", "duration", "price", "catastrophic_term", "minor_term",
                 "maintenance_term", "mc_std_error", "mc_paths", "full_path_price", "full_path_std_error")


def price_table_to_csv(table) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(PRICE_COLUMNS)
    for profile, q in table:
        w.writerow([*profile.fixed_covariates, profile.initial_tvc, _fmt(q.duration), _fmt(q.price),
                    *(_fmt(c) for c in q.components), _fmt(q.mc_std_error), q.mc_paths,
                    _fmt(q.full_path_price), _fmt(q.full_path_std_error)])
    return buf.getvalue()


def read_price_table(path: str | os.PathLike) -> tuple[dict[tuple, float], dict[tuple, float], float]:
    """Prices and maintenance terms keyed by profile tuple, plus the contract duration."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc.strerror or exc}") from None
    reader = csv.DictReader(io.StringIO(text))
    if reader.fieldnames is None or any(c not in reader.fieldnames for c in ("x1_1", "x2", "price", "duration")):
        raise DataError(f"{path}: line 1: not a price table")
    prices, maint, durations = {}, {}, set()
    for lineno, row in enumerate(reader, start=2):
        try:
            key = (*(int(row[f"x1_{j}"]) for j in range(1, 5)), int(row["x2"]))
            prices[key] = float(row["price"])
            maint[key] = float(row.get("maintenance_term") or 0.0)
            durations.add(float(row["duration"]))
        except (TypeError, ValueError) as exc:
            raise DataError(f"{path}: line {lineno}: {exc}") from None
    if len(durations) != 1:
        raise DataError(f"{path}: price table must have exactly one contract duration")
    return prices, maint, durations.pop()
