"""Single runs and parameter sweeps with deterministic CSV/JSON output."""

from __future__ import annotations

import csv
import io
import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass

from .algebra import AlgebraDescriptor
from .config import ConfigError, ExperimentConfig
from .maps import ProbeSet
from .perturbation import PerturbationSpec
from .stabilizer import HypothesisError, IterationError, StabilizerConfig
from .verifier import format_value, ledger_entry, run_pipeline

OUTPUT_DIR_ENV = "TERNSTAB_OUTPUT_DIR"
SWEEP_FORMAT_VERSION = "ternstab-sweep v1"

SWEEP_COLUMNS = (
    "p", "theta_prime", "theta", "mode", "L", "n_star", "d_f_Jf", "d_f_D",
    "paper_constant", "derived_constant", "sound_constant",
    "paper_holds", "derived_holds", "sound_holds", "max_residual", "converged", "error",
)

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_PREMISE_FAIL = 2
EXIT_NOT_CERTIFIED = 3


@dataclass
class RunOutcome:
    exit_code: int
    document: dict
    row: dict


def build_probes(cfg: ExperimentConfig, desc: AlgebraDescriptor) -> ProbeSet:
    return ProbeSet.generate(desc, seed=cfg.probe_seed, element_count=cfg.element_count,
                             r_min=cfg.r_min, r_max=cfg.r_max, mu_count=cfg.mu_count,
                             triple_count=cfg.triple_count)


def _error_row(cfg: ExperimentConfig, code: str) -> dict:
    row = dict.fromkeys(SWEEP_COLUMNS)
    row.update(p=cfg.p, theta_prime=cfg.theta_prime, error=code)
    return row


def execute(cfg: ExperimentConfig) -> RunOutcome:
    """Run the whole pipeline for one configuration. Never raises on bad input."""
    try:
        cfg.validate()
    except ConfigError as exc:
        return RunOutcome(EXIT_INVALID, {"status": "INVALID", "error": str(exc)},
                          _error_row(cfg, "INVALID"))
    mode = cfg.resolved_mode
    desc = AlgebraDescriptor(cfg.k, cfg.norm_tolerance)
    probes = build_probes(cfg, desc)
    spec = PerturbationSpec(cfg.theta_prime, cfg.p, cfg.direction_seed)
    scfg = StabilizerConfig(mode, cfg.max_iterations, cfg.tolerance, cfg.ratio_cap)
    try:
        result = run_pipeline(desc, cfg.derivation_seed, spec, cfg.resolved_theta, cfg.arity,
                              scfg, probes, cfg.derivation_norm)
    except HypothesisError as exc:
        return RunOutcome(EXIT_INVALID, {"status": "INVALID", "error": str(exc)},
                          _error_row(cfg, "HYPOTHESIS"))
    except IterationError as exc:
        return RunOutcome(EXIT_NOT_CERTIFIED, {"status": "NONFINITE", "error": str(exc)},
                          _error_row(cfg, "NONFINITE"))
    entry = ledger_entry(result, desc, cfg.derivation_seed, spec, probes)
    row = {
        "p": cfg.p, "theta_prime": cfg.theta_prime, "theta": result.phi.theta,
        "mode": mode.value, "L": entry.L, "n_star": None, "d_f_Jf": None, "d_f_D": None,
        "paper_constant": entry.paper_constant, "derived_constant": entry.derived_constant,
        "sound_constant": None, "paper_holds": entry.paper_holds,
        "derived_holds": entry.derived_holds, "sound_holds": entry.sound_holds,
        "max_residual": None, "converged": entry.converged, "error": None,
    }
    if result.certificate is None:
        row["error"] = "PREMISE_FAIL"
        doc = {"status": "PREMISE_FAIL", "premise": result.premise.to_dict(),
               "ledger": asdict(entry), "warnings": cfg.warnings()}
        return RunOutcome(EXIT_PREMISE_FAIL, doc, row)

    cert = result.certificate
    cert.checks = {"premise": result.premise.to_dict(), "ledger": asdict(entry),
                   "warnings": cfg.warnings()}
    row.update(n_star=cert.n_star, d_f_Jf=cert.d_f_Jf, d_f_D=cert.d_f_D,
               sound_constant=cert.sound_bound, max_residual=result.residuals.max)
    code = EXIT_OK if cert.converged and cert.sound_bound_holds else EXIT_NOT_CERTIFIED
    return RunOutcome(code, cert.to_dict(), row)


def resolve_output(path: str) -> str:
    base = os.environ.get(OUTPUT_DIR_ENV)
    if base and not os.path.isabs(path):
        return os.path.join(base, path)
    return path


def rows_to_csv(rows) -> str:
    buf = io.StringIO()
    buf.write(f"# {SWEEP_FORMAT_VERSION}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(SWEEP_COLUMNS)
    for row in rows:
        writer.writerow([format_value(row[c]) for c in SWEEP_COLUMNS])
    return buf.getvalue()


def document_to_json(doc: dict) -> str:
    return json.dumps(doc, indent=2) + "\n"


def _write(path: str, text: str) -> str:
    path = resolve_output(path)
    parent = os.path.dirname(path)
    if parent:
        os.makedirs(parent, exist_ok=True)
    with open(path, "w", newline="") as fh:
        fh.write(text)
    return path


def run(cfg: ExperimentConfig, out: str | None = None, fmt: str | None = None):
    """Execute one configuration and write its certificate. Returns (exit code, path)."""
    outcome = execute(cfg)
    fmt = (fmt or cfg.output_format).lower()
    text = rows_to_csv([outcome.row]) if fmt == "csv" else document_to_json(outcome.document)
    path = _write(out or cfg.output_path, text)
    return outcome.exit_code, path


def sweep_rows(cfg: ExperimentConfig, jobs: int = 1) -> list:
    configs = cfg.grid()
    if not configs:
        raise ConfigError("sweep", "grid is empty")
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            outcomes = list(pool.map(execute, configs))
    else:
        outcomes = [execute(c) for c in configs]
    return [o.row for o in outcomes]


def sweep(cfg: ExperimentConfig, out: str | None = None, jobs: int = 1) -> str:
    """Run every grid point and write the CSV table in grid order. Returns the path."""
    return _write(out or cfg.output_path, rows_to_csv(sweep_rows(cfg, jobs)))
