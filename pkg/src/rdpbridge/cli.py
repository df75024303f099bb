"""Command-line entry point.

Every subcommand writes one canonical JSON document (sorted keys, repr
floats) to ``--output`` or stdout. Options may also come from
``--config file.json``; flags given on the command line win. Exit codes:
0 success or property holds, 1 usage error, 2 input error, 3 property
violated, 4 inconclusive.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import json
import logging
import math
import os
import sys
from typing import Any, Callable, Dict, List, Optional, Tuple

import numpy as np

from rdpbridge.divergence import DivergenceOrder, renyi_divergence
from rdpbridge.equivalence import FiniteInstance, evaluate_claim, random_instance_sweep
from rdpbridge.errors import CapabilityError, DomainError, ParameterError, UnsupportedPairError
from rdpbridge.measures import Categorical, LabelDistribution
from rdpbridge.mechanisms import EXACT, MonteCarlo, apply, input_dim, input_size, label_distribution
from rdpbridge.metrics import FiniteSpace, MetricSpec
from rdpbridge.privacy import SearchBudget, certify_classical_dp, certify_metric_dp, certify_rdp
from rdpbridge.robustness import (
    AttackBudget,
    FiniteWeighted,
    RobustnessBudget,
    Sampler,
    check_generalized_robustness,
    craft_adversarial,
    prediction_change_risk,
    verdict_from_ci,
)
from rdpbridge.serialization import (
    InputError,
    as_float,
    classifier_from_json,
    dumps,
    load_json_arg,
    load_json_file,
    mapping_from_json,
    measure_from_json,
    measure_to_json,
)

log = logging.getLogger("rdpbridge")

EXIT_OK, EXIT_USAGE, EXIT_INPUT, EXIT_VIOLATED, EXIT_INCONCLUSIVE = 0, 1, 2, 3, 4
COMMON = ("seed", "threads", "output")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


@dataclasses.dataclass
class ExperimentConfig:
    """One run: a subcommand, its options, the seed and the output path."""

    subcommand: str
    params: Dict[str, Any] = dataclasses.field(default_factory=dict)
    seed: int = 0
    output_path: Optional[str] = None

    def to_dict(self) -> dict:
        return {"subcommand": self.subcommand, "params": dict(self.params), "seed": self.seed,
                "output_path": self.output_path}

    @classmethod
    def from_dict(cls, obj: dict) -> "ExperimentConfig":
        allowed = {"subcommand", "params", "seed", "output_path"}
        if not isinstance(obj, dict) or set(obj) - allowed or "subcommand" not in obj:
            raise InputError(f"config must be an object with keys among {sorted(allowed)} including 'subcommand'")
        cfg = cls(obj["subcommand"], dict(obj.get("params", {})), int(obj.get("seed", 0)), obj.get("output_path"))
        cfg.validate()
        return cfg

    def validate(self) -> None:
        if not SCHEMA:
            build_parser()
        if self.subcommand not in SCHEMA:
            raise InputError(f"unknown subcommand {self.subcommand!r}")
        unknown = set(self.params) - set(SCHEMA[self.subcommand])
        if unknown:
            raise InputError(f"unknown keys for {self.subcommand}: {sorted(unknown)}")


# --------------------------------------------------------------------------
# input helpers


def _order(value) -> DivergenceOrder:
    return DivergenceOrder.parse(value)


def _vector(text) -> np.ndarray:
    if isinstance(text, (list, tuple)):
        return np.asarray([as_float(v) for v in text])
    if isinstance(text, (int, float)):
        return np.array([float(text)])
    try:
        return np.array([float(v) for v in str(text).replace(";", ",").split(",") if v.strip()])
    except ValueError:
        raise InputError(f"cannot parse point {text!r}") from None


def _point(mapping_or_h, text):
    if input_size(mapping_or_h) is not None:
        try:
            return int(str(text).strip())
        except ValueError:
            raise InputError(f"point {text!r} must be an index into the finite input space") from None
    return _vector(text)


def _metric(p, mapping) -> Any:
    if p.get("metric_table") is not None:
        return FiniteSpace(load_json_arg(p["metric_table"]))
    kind = p["metric"]
    if input_size(mapping) is not None:
        return MetricSpec(kind)
    return MetricSpec(kind, input_dim(mapping))


def read_points_csv(path: str):
    """Rows of coordinates with an optional header and weight column ``w``."""
    try:
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise InputError(f"{path}: {exc.strerror}") from None
    rows = [(i + 1, r) for i, r in enumerate(rows) if any(c.strip() for c in r)]
    if not rows:
        raise InputError(f"{path}: no data rows")
    header = None
    first = rows[0][1]
    try:
        [float(c) for c in first]
    except ValueError:
        header = [c.strip() for c in first]
        rows = rows[1:]
    wcol = header.index("w") if header and "w" in header else None
    points, weights = [], []
    width = None
    for line, row in rows:
        if width is None:
            width = len(row)
        if len(row) != width:
            raise InputError(f"{path}:{line}:1: expected {width} columns, found {len(row)}")
        vals = []
        for col, cell in enumerate(row):
            try:
                vals.append(float(cell))
            except ValueError:
                raise InputError(f"{path}:{line}:{col + 1}: not a number: {cell!r}") from None
        if wcol is not None:
            weights.append(vals.pop(wcol))
        points.append(vals)
    pts = np.array(points)
    w = np.array(weights) if wcol is not None else np.ones(len(pts))
    if np.any(w < 0) or w.sum() <= 0:
        raise InputError(f"{path}: weights must be non-negative with a positive sum")
    return pts, w / w.sum()


def _data(p, mapping):
    spec = p["data"]
    finite = input_size(mapping) is not None
    if isinstance(spec, dict) or str(spec).lstrip().startswith("{") or str(spec).endswith(".json"):
        obj = spec if isinstance(spec, dict) else load_json_arg(spec)
        if "sampler" in obj:
            s = obj["sampler"]
            return Sampler(s["family"], s.get("params", {}), int(s.get("dim", 1)), int(s.get("n", 1000)),
                           int(p["seed"]))
        pts = obj["points"]
        w = obj.get("weights")
        pts = [int(x) for x in pts] if finite else [np.atleast_1d(np.asarray(x, dtype=float)) for x in pts]
        return FiniteWeighted(tuple(pts), np.asarray(w) / np.sum(w)) if w is not None else FiniteWeighted.uniform(pts)
    pts, w = read_points_csv(spec)
    if finite:
        if pts.shape[1] != 1 or np.any(pts != np.round(pts)):
            raise InputError(f"{spec}: finite input spaces need one integer index column")
        return FiniteWeighted(tuple(int(v) for v in pts[:, 0]), w)
    return FiniteWeighted(tuple(pts), w)


def _labels_budget(p):
    if p["labels"] == "exact":
        return EXACT
    return MonteCarlo(int(p["n"]), int(p["seed"]))


# --------------------------------------------------------------------------
# subcommands; each returns (payload, exit code)


def cmd_divergence(p):
    m1, m2 = measure_from_json(load_json_arg(p["m1"])), measure_from_json(load_json_arg(p["m2"]))
    order = _order(p["order"])
    res = renyi_divergence(m1, m2, order, p["method"], n=int(p["n"]), seed=int(p["seed"]))
    out = res.to_dict()
    out.update(order=order.to_json(), seed=int(p["seed"]))
    if res.method == "monte_carlo":
        out["n"] = int(p["n"])
    return out, EXIT_OK


def cmd_apply(p):
    mapping = mapping_from_json(load_json_arg(p["mapping"]))
    x = _point(mapping, p["x"])
    if p["labels"] == "exact":
        try:
            dist = label_distribution(mapping, x, EXACT)
        except CapabilityError:
            return {"measure": measure_to_json(apply(mapping, x)), "method": "symbolic"}, EXIT_OK
    else:
        dist = label_distribution(mapping, x, _labels_budget(p), threads=int(p["threads"]))
    out = {"probs": dist.probs, "lower": dist.lower, "upper": dist.upper, "method": dist.method,
           "seed": int(p["seed"])}
    if dist.n is not None:
        out["n"] = dist.n
    return out, EXIT_OK


def _search_budget(p) -> SearchBudget:
    return SearchBudget(int(p["n_pairs"]), int(p["n_steps"]), float(p["box"]), int(p["seed"]), int(p["mc_samples"]))


def cmd_certify_rdp(p):
    mapping = mapping_from_json(load_json_arg(p["mapping"]))
    cert = certify_rdp(mapping, _metric(p, mapping), float(p["alpha"]), _order(p["lambda"]),
                       search=_search_budget(p), direction=p["direction"])
    out = {"certificate": cert.to_dict(), "seed": int(p["seed"])}
    code = EXIT_OK
    if p.get("epsilon") is not None:
        eps = as_float(p["epsilon"])
        verdict = cert.holds(eps)
        out["epsilon_claimed"] = eps
        out["status"] = "inconclusive" if verdict is None else ("holds" if verdict else "violated")
        code = {None: EXIT_INCONCLUSIVE, True: EXIT_OK, False: EXIT_VIOLATED}[verdict]
    return out, code


def cmd_certify_dp(p):
    mapping = mapping_from_json(load_json_arg(p["mapping"]))
    eps = as_float(p["epsilon"])
    if p["classical"]:
        verdict = certify_classical_dp(mapping, eps)
    else:
        verdict = certify_metric_dp(mapping, _metric(p, mapping), float(p["alpha"]), eps, search=_search_budget(p))
    out = verdict.to_dict()
    out["seed"] = int(p["seed"])
    code = {"holds": EXIT_OK, "violated": EXIT_VIOLATED, "inconclusive": EXIT_INCONCLUSIVE}[verdict.status]
    return out, code


def cmd_attack(p):
    h = classifier_from_json(load_json_arg(p["classifier"]))
    x = _point(h, p["x"])
    metric = _metric(p, h)
    budget = AttackBudget(as_float(p["max_radius"]), float(p["resolution"]), int(p["n_directions"]), int(p["seed"]))
    ex = craft_adversarial(h, x, metric, budget)
    out = {"found": ex is not None, "seed": int(p["seed"])}
    if ex is not None:
        out.update(ex.to_dict())
    return out, EXIT_OK


def cmd_robustness(p):
    threads = int(p["threads"])
    if p.get("classifier") is not None:
        h = classifier_from_json(load_json_arg(p["classifier"]))
        data = _data(p, h)
        budget = AttackBudget(as_float(p["max_radius"]), float(p["resolution"]), int(p["n_directions"]),
                              int(p["seed"]))
        report = prediction_change_risk(h, data, _metric(p, h), float(p["alpha"]), budget, threads)
    else:
        if p.get("mapping") is None:
            raise UsageError("robustness needs --mapping or --classifier")
        mapping = mapping_from_json(load_json_arg(p["mapping"]))
        data = _data(p, mapping)
        budget = RobustnessBudget(_labels_budget(p), int(p["n_candidates"]),
                                  AttackBudget(resolution=float(p["resolution"]),
                                               n_directions=int(p["n_directions"]), seed=int(p["seed"])),
                                  p["divergence_method"], int(p["seed"]))
        lam = p["lambda"]
        kind = lam if str(lam).lower() == "trivial" else _order(lam)
        report = check_generalized_robustness(mapping, data, _metric(p, mapping), float(p["alpha"]),
                                              as_float(p["epsilon"]), kind, budget, p["ball_search"], threads)
    out = report.to_dict()
    out.update(seed=int(p["seed"]), method=report.ball_search)
    if p["labels"] == "mc":
        out["n"] = int(p["n"])
    if p.get("per_point"):
        report.write_per_point(p["per_point"])
    code = EXIT_OK
    if p.get("gamma") is not None:
        verdict = verdict_from_ci(report.ci95, float(p["gamma"]))
        out["gamma"] = float(p["gamma"])
        out["verdict"] = verdict
        code = {"robust": EXIT_OK, "not_robust": EXIT_VIOLATED, "inconclusive": EXIT_INCONCLUSIVE}[verdict]
    return out, code


def cmd_equivalence(p):
    if p.get("instance"):
        inst = FiniteInstance.from_dict(load_json_arg(p["instance"]))
        verdict = evaluate_claim(inst)
        out = verdict.to_dict()
        out["method"] = "enumeration"
        return out, EXIT_OK if verdict.agree else EXIT_VIOLATED
    summary = random_instance_sweep(int(p["sweep"]), int(p["seed"]), (int(p["min_size"]), int(p["max_size"])),
                                    threads=int(p["threads"]), dump_dir=p["dump_dir"])
    out = summary.to_dict()
    return out, EXIT_OK if summary.agree_count == summary.n_instances else EXIT_VIOLATED


def cmd_sweep_report(p):
    rows = []
    for path in p["reports"]:
        obj = load_json_file(path)
        cert = obj.get("certificate", {}) if isinstance(obj, dict) else {}
        rows.append({
            "source": path,
            "lambda": obj.get("divergence_kind", cert.get("lambda", "")),
            "alpha": obj.get("alpha", cert.get("alpha", "")),
            "epsilon": obj.get("epsilon", cert.get("epsilon", "")),
            "gamma_hat": obj.get("gamma_hat", ""),
        })
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=["source", "lambda", "alpha", "epsilon", "gamma_hat"],
                            lineterminator="\n")
    writer.writeheader()
    for r in rows:
        writer.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in r.items()})
    return buf.getvalue(), EXIT_OK


# --------------------------------------------------------------------------
# parser

SCHEMA: Dict[str, Dict[str, Any]] = {}
HANDLERS: Dict[str, Callable] = {
    "divergence": cmd_divergence,
    "apply": cmd_apply,
    "certify-rdp": cmd_certify_rdp,
    "certify-dp": cmd_certify_dp,
    "attack": cmd_attack,
    "robustness": cmd_robustness,
    "equivalence": cmd_equivalence,
    "sweep-report": cmd_sweep_report,
}


def _opt(sp, name, default=None, **kw):
    dest = kw.pop("dest", name.lstrip("-").replace("-", "_"))
    SCHEMA[sp.prog.split()[-1]][dest] = default
    if default is not None and "help" in kw and kw.get("action") != "store_true":
        kw["help"] += f" (default: {default})"
    sp.add_argument(name, dest=dest, default=argparse.SUPPRESS, **kw)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="rdpbridge", description="Renyi divergences, privacy certificates and robustness checks.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    subs = parser.add_subparsers(dest="subcommand", required=True, parser_class=_Parser)

    def sub(name, help_text):
        sp = subs.add_parser(name, help=help_text, description=help_text)
        SCHEMA[name] = {}
        _opt(sp, "--config", help="JSON file with option values; command-line flags override it")
        _opt(sp, "--seed", 0, type=int, help="random seed")
        _opt(sp, "--threads", os.cpu_count() or 1, type=int, help="worker threads")
        _opt(sp, "--output", help="output file (stdout if omitted)")
        return sp

    def mapping_opts(sp):
        _opt(sp, "--metric", "l2", choices=["l1", "l2", "linf", "hamming", "discrete"], help="input metric")
        _opt(sp, "--metric-table", help="JSON distance table for finite input spaces")

    def search_opts(sp):
        _opt(sp, "--n-pairs", 512, type=int, help="pair-search restarts")
        _opt(sp, "--n-steps", 64, type=int, help="local-ascent steps per restart")
        _opt(sp, "--box", 2.0, type=float, help="half-width of the search box")
        _opt(sp, "--mc-samples", 2000, type=int, help="Monte Carlo draws per label distribution in the search")

    sp = sub("divergence", "Renyi divergence between two measures given as JSON")
    _opt(sp, "--m1", required=False, help="first measure (JSON text or file)")
    _opt(sp, "--m2", required=False, help="second measure (JSON text or file)")
    _opt(sp, "--order", "2", help="Renyi order: number > 1, kl or max")
    _opt(sp, "--method", "auto", choices=["auto", "closed_form", "quadrature", "enumeration", "mc"],
         help="evaluation method")
    _opt(sp, "--n", 100000, type=int, help="Monte Carlo sample size")

    sp = sub("apply", "output distribution of a mapping at one input")
    _opt(sp, "--mapping", help="mapping JSON")
    _opt(sp, "--x", help="input point: comma-separated coordinates or an index")
    _opt(sp, "--labels", "exact", choices=["exact", "mc"], help="exact or Monte Carlo label distribution")
    _opt(sp, "--n", 100000, type=int, help="Monte Carlo sample size")

    sp = sub("certify-rdp", "Renyi-DP certificate of a mapping")
    _opt(sp, "--mapping", help="mapping JSON")
    mapping_opts(sp)
    _opt(sp, "--alpha", 1.0, type=float, help="neighbourhood radius")
    _opt(sp, "--lambda", "2", help="Renyi order: number > 1, kl or max")
    _opt(sp, "--epsilon", help="claimed epsilon; sets the exit code")
    _opt(sp, "--direction", "both", choices=["both", "forward", "reverse"], help="divergence direction")
    search_opts(sp)

    sp = sub("certify-dp", "metric or classical DP verdict")
    _opt(sp, "--mapping", help="mapping JSON")
    mapping_opts(sp)
    _opt(sp, "--alpha", 1.0, type=float, help="neighbourhood radius")
    _opt(sp, "--epsilon", help="privacy parameter")
    _opt(sp, "--classical", False, action="store_true", help="databases as input rows, Hamming adjacency")
    search_opts(sp)

    def attack_opts(sp):
        _opt(sp, "--max-radius", "inf", help="largest perturbation considered")
        _opt(sp, "--resolution", 1e-3, type=float, help="radial grid step for multi-class search")
        _opt(sp, "--n-directions", 256, type=int, help="random directions for multi-class search")

    sp = sub("attack", "minimal adversarial perturbation of one input")
    _opt(sp, "--classifier", help="classifier JSON")
    _opt(sp, "--x", help="input point: comma-separated coordinates or an index")
    mapping_opts(sp)
    attack_opts(sp)

    sp = sub("robustness", "classic or generalized robustness estimate")
    _opt(sp, "--mapping", help="mapping JSON (generalized robustness)")
    _opt(sp, "--classifier", help="classifier JSON (prediction-change risk)")
    _opt(sp, "--data", help="CSV of points (optional weight column w) or JSON")
    mapping_opts(sp)
    _opt(sp, "--alpha", 0.1, type=float, help="ball radius")
    _opt(sp, "--epsilon", 0.5, help="divergence threshold")
    _opt(sp, "--lambda", "trivial", help="Renyi order, max, kl or trivial")
    _opt(sp, "--gamma", type=float, help="claimed risk bound; sets the exit code")
    _opt(sp, "--labels", "exact", choices=["exact", "mc"], help="exact or Monte Carlo label distributions")
    _opt(sp, "--n", 10000, type=int, help="Monte Carlo draws per label distribution")
    _opt(sp, "--n-candidates", 257, type=int, help="ball points tried per data point when searching")
    _opt(sp, "--ball-search", "auto", choices=["auto", "search"], help="auto uses exact routes where available")
    _opt(sp, "--divergence-method", "auto", choices=["auto", "closed_form", "quadrature"],
         help="divergence route for raw noise mechanisms")
    _opt(sp, "--per-point", help="write per-point CSV here")
    attack_opts(sp)

    sp = sub("equivalence", "check the robustness/privacy equivalence on finite instances")
    _opt(sp, "--sweep", 100, type=int, help="number of random instances")
    _opt(sp, "--min-size", 2, type=int, help="smallest input space")
    _opt(sp, "--max-size", 8, type=int, help="largest input space")
    _opt(sp, "--instance", help="evaluate one instance JSON instead of a sweep")
    _opt(sp, "--dump-dir", "disagreements", help="directory for disagreeing instances")

    sp = sub("sweep-report", "collate report JSON files into a CSV of (lambda, alpha, epsilon, gamma_hat)")
    _opt(sp, "--reports", nargs="+", help="report JSON files")
    return parser


REQUIRED = {
    "divergence": ("m1", "m2"),
    "apply": ("mapping", "x"),
    "certify-rdp": ("mapping",),
    "certify-dp": ("mapping", "epsilon"),
    "attack": ("classifier", "x"),
    "robustness": ("data",),
    "sweep-report": ("reports",),
}


def config_from_args(argv: Optional[List[str]] = None) -> Tuple[ExperimentConfig, bool]:
    parser = build_parser()
    ns = vars(parser.parse_args(argv))
    verbose = ns.pop("verbose", False)
    name = ns.pop("subcommand")
    params: Dict[str, Any] = {}
    if ns.get("config"):
        obj = load_json_file(ns["config"])
        if isinstance(obj, dict) and "subcommand" in obj:
            file_cfg = ExperimentConfig.from_dict(obj)
            if file_cfg.subcommand != name:
                raise InputError(f"config is for {file_cfg.subcommand!r}, not {name!r}")
            params.update(file_cfg.params)
            params.setdefault("seed", file_cfg.seed)
            if file_cfg.output_path is not None:
                params.setdefault("output", file_cfg.output_path)
        elif isinstance(obj, dict):
            params.update(obj)
        else:
            raise InputError("config file must hold a JSON object")
    params.update({k: v for k, v in ns.items() if k != "config"})
    params = {k.replace("-", "_"): v for k, v in params.items()}
    cfg = ExperimentConfig(name, {k: v for k, v in params.items() if k not in ("seed", "output")},
                           int(params.get("seed", 0)), params.get("output"))
    cfg.validate()
    return cfg, verbose


def run(cfg: ExperimentConfig) -> int:
    """Execute one configured run and write its output; returns the exit code."""
    cfg.validate()
    p = {k: v for k, v in SCHEMA[cfg.subcommand].items() if k != "config"}
    p.update(cfg.params)
    p["seed"] = cfg.seed
    p["output"] = cfg.output_path
    missing = [k for k in REQUIRED.get(cfg.subcommand, ()) if p.get(k) is None]
    if missing:
        raise UsageError(f"{cfg.subcommand}: missing required option(s) " +
                         ", ".join("--" + m.replace("_", "-") for m in missing))
    payload, code = HANDLERS[cfg.subcommand](p)
    text = payload if isinstance(payload, str) else dumps(payload)
    if cfg.output_path:
        with open(cfg.output_path, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return code


def main(argv: Optional[List[str]] = None) -> int:
    try:
        cfg, verbose = config_from_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except (InputError, ParameterError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    logging.basicConfig(level=logging.INFO if verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return run(cfg)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except (InputError, ParameterError, DomainError, CapabilityError, UnsupportedPairError,
            KeyError, TypeError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
