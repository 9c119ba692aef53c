"""Command-line front end.

Every subcommand reads one JSON run configuration, writes its artifacts
(CSV tables, a JSON summary and ``run-manifest.json``) under ``--out`` and
exits 0 when all checks pass, 2 on a violated inequality or identity, and 1
on configuration errors.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import platform
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__, carleman, quadrature, reduction, transform
from .fields import constant, expression, make_bump, random_polynomial
from .operators import (CoefficientSet, coefficients_from_dict, load_coefficients,
                        scaled_identity, validate_coefficients)
from .params import (CarlemanParams, DomainParams, ParamsError, Thresholds, admissible_params,
                     estimate_thresholds, in_domain, validate_params)
from .reports import fmt, merge, params_hash, rows_to_csv

EXIT_OK, EXIT_CONFIG, EXIT_VIOLATION = 0, 1, 2
CONFIG_DIR = Path(__file__).parent / "configs"

CONFIG_KEYS = {"params", "coefficients", "admissible", "safety", "resolution", "trials",
               "points", "mode", "lambda_factor", "lambda_factors", "epsilon", "panels",
               "primitive_panels", "fd_step", "description"}


# ---------------------------------------------------------------------------
# configuration


@dataclass
class RunConfig:
    command: str
    p: CarlemanParams
    d: DomainParams
    coeffs: CoefficientSet
    seed: int = 0
    out: Path = Path("out")
    tolerance: float = 1e-9
    panels: int = 16
    strict_lemma4: bool = False
    options: dict = field(default_factory=dict)
    inputs_hash: str = ""

    def opt(self, key, default):
        return self.options.get(key, default)


def preset_coefficients(doc, n, m):
    """Named coefficient sets: ``scaled_identity`` and ``variable``."""
    name = doc["preset"]
    if name == "scaled_identity":
        return scaled_identity(n, m, scale=float(doc.get("scale", 1.0)), M=float(doc.get("M", 1.0)))
    if name == "variable":
        return variable_coefficients(n, m)
    raise ParamsError(f"unknown coefficient preset {name!r}")


def variable_coefficients(n=2, m=2, f=None):
    """A non-diagonal ``a_ij`` depending on ``x1``, ``x'`` and ``y'``, with lower-order terms.

    ``a_11 = -x1 (0.7 + 0.1 (1 - x2^2))``, ``a_22 = -x1 (0.7 + 0.1 y1^2)`` and
    ``a_12 = -0.05 x1 x2 y1``; the ellipticity condition holds with ``alpha1 >= 0.5`` on
    the unit box.
    """
    if (n, m) != (2, 2):
        raise ParamsError("the variable preset is defined for n = m = 2")
    a11 = expression(lambda X: X[0] * (-1.0) * (0.7 + 0.1 * (1 - X[1] * X[1])), "a11")
    a22 = expression(lambda X: X[0] * (-1.0) * (0.7 + 0.1 * X[2] * X[2]), "a22")
    a12 = expression(lambda X: X[0] * (-0.05) * X[1] * X[2], "a12")
    f = f if f is not None else expression(lambda X: 2.0 + 0.3 * X[0] + 0.1 * X[2] * X[3], "f")
    return CoefficientSet(2, 2, ((a11, a12), (a12, a22)), (constant(0.3), constant(0.0)),
                          (constant(0.0), constant(0.2)), constant(0.1), f)


def _read_json(path):
    path = Path(path)
    if not path.is_file():
        raise ParamsError(f"missing file: {path}")
    try:
        return json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ParamsError(f"{path}: invalid JSON ({exc})") from None


def load_config(args) -> RunConfig:
    cfg_path = Path(args.config)
    doc = _read_json(cfg_path)
    if not isinstance(doc, dict):
        raise ParamsError("run configuration must be a JSON object")
    unknown = set(doc) - CONFIG_KEYS
    if unknown:
        raise ParamsError(f"unknown keys in run configuration: {sorted(unknown)}")
    blobs = [json.dumps(doc, sort_keys=True)]
    pdoc = doc.get("params", {})
    if isinstance(pdoc, str):
        pdoc = _read_json(cfg_path.parent / pdoc)
        blobs.append(json.dumps(pdoc, sort_keys=True))
    p = CarlemanParams.from_dict(pdoc.get("carleman", {}))
    d = DomainParams.from_dict(pdoc.get("domain", {}))
    cdoc = doc.get("coefficients", {"preset": "scaled_identity"})
    if isinstance(cdoc, str):
        cpath = cfg_path.parent / cdoc
        blobs.append(Path(cpath).read_text() if cpath.is_file() else "")
        coeffs = load_coefficients(cpath) if cpath.is_file() else None
        if coeffs is None:
            raise ParamsError(f"missing file: {cpath}")
    elif "preset" in cdoc:
        coeffs = preset_coefficients(cdoc, d.n, d.m)
    else:
        coeffs = coefficients_from_dict(cdoc, cfg_path.parent)
    if (coeffs.n, coeffs.m) != (d.n, d.m):
        raise ParamsError("coefficient dimensions disagree with the domain")
    panels = args.panels if args.panels is not None else int(doc.get("panels", 16))
    try:
        quadrature.QuadSpec(panels)
    except ValueError as exc:
        raise ParamsError(str(exc)) from None
    blobs.append(json.dumps([args.seed, panels, args.tolerance, args.strict_lemma4]))
    digest = hashlib.sha256("\n".join(blobs).encode()).hexdigest()
    return RunConfig(args.command, p, d, coeffs, int(args.seed), Path(args.out),
                     float(args.tolerance), panels, bool(args.strict_lemma4), doc, digest)


# ---------------------------------------------------------------------------
# shared helpers


def sample_points(rng, p, d, count):
    """``count`` uniform points of the slab (rejection from the tight box)."""
    box = np.array(d.tight_box(p))
    out = []
    while sum(len(o) for o in out) < count:
        cand = rng.uniform(box[:, 0], box[:, 1], size=(4 * count, d.ndim))
        out.append(cand[in_domain(p, d, cand)])
    return np.concatenate(out)[:count]


def random_fields(rng, d, count, degree=3):
    return [random_polynomial(rng, d.ndim, degree, label=f"rand{k}") for k in range(count)]


def with_thresholds(cfg: RunConfig):
    """Parameters raised to the estimated thresholds when ``admissible`` is set."""
    safety = float(cfg.opt("safety", 2.0))
    res = int(cfg.opt("resolution", 8))
    if cfg.opt("admissible", True):
        return admissible_params(cfg.coeffs, cfg.p, cfg.d, res, safety)
    return cfg.p, estimate_thresholds(cfg.coeffs, cfg.p, cfg.d, res, safety)


@dataclass
class Outcome:
    status: int
    summary: dict
    tables: dict = field(default_factory=dict)     # filename -> csv text


def _status(ok):
    return EXIT_OK if ok else EXIT_VIOLATION


# ---------------------------------------------------------------------------
# subcommands


def cmd_validate(cfg: RunConfig) -> Outcome:
    rep = validate_params(cfg.p, cfg.d)
    pts = sample_points(np.random.default_rng(cfg.seed), cfg.p, cfg.d, 256)
    crep = validate_coefficients(cfg.coeffs, pts, cfg.p.alpha1)
    rows = [[c.name, str(c.passed), fmt(c.slack), c.detail, str(c.informational)]
            for c in rep.conditions + crep.conditions]
    csv = rows_to_csv(["condition", "passed", "slack", "detail", "informational"], rows)
    return Outcome(_status(rep.ok and crep.ok),
                   {"params": rep.to_dict(), "coefficients": crep.to_dict()},
                   {"validation.csv": csv})


def cmd_thresholds(cfg: RunConfig) -> Outcome:
    p, th = with_thresholds(cfg)
    rows = [[k, fmt(v)] for k, v in th.to_dict().items() if isinstance(v, (int, float))]
    return Outcome(EXIT_OK, {"params": p.to_dict(), "thresholds": th.to_dict()},
                   {"thresholds.csv": rows_to_csv(["name", "value"], rows)})


def cmd_check_identity(cfg: RunConfig) -> Outcome:
    rng = np.random.default_rng(cfg.seed)
    pts = sample_points(rng, cfg.p, cfg.d, int(cfg.opt("points", 500)))
    reps = [carleman.check_identity_lemma3(phi, cfg.coeffs, cfg.p, cfg.d, pts)
            for phi in random_fields(rng, cfg.d, int(cfg.opt("trials", 10)))]
    worst = max(r.max_abs_relative() for r in reps)
    ok = all(r.passed(cfg.tolerance) for r in reps)
    rows = []
    for k, r in enumerate(reps):
        rel = np.abs(r.relative)
        for i, row in enumerate(r.csv_rows()):
            rows.append([k] + row + [fmt(rel[i])])
    csv = rows_to_csv(["trial"] + r.CSV_HEADER + ["relative_residual"], rows)
    return Outcome(_status(ok), {"max_relative_residual": worst, "tolerance": cfg.tolerance,
                                 "trials": len(reps)}, {"identity.csv": csv})


def cmd_check_lemma2(cfg: RunConfig) -> Outcome:
    p, th = with_thresholds(cfg)
    rng = np.random.default_rng(cfg.seed)
    pts = sample_points(rng, p, cfg.d, int(cfg.opt("points", 1000)))
    reps = [carleman.check_pointwise_lemma2(phi, cfg.coeffs, p, cfg.d, pts, th)
            for phi in random_fields(rng, cfg.d, int(cfg.opt("trials", 5)))]
    allrep = merge(reps)
    viol = len(allrep.violations(cfg.tolerance))
    return Outcome(_status(viol == 0),
                   {"violations": viol, "min_relative_margin": float(allrep.relative.min()),
                    "params": p.to_dict(), "thresholds": th.to_dict()},
                   {"lemma2.csv": allrep.to_csv()})


def bump_fields(rng, p, d, count):
    b = make_bump(p, d)
    return [f * b for f in random_fields(rng, d, count)]


def cmd_check_carleman(cfg: RunConfig) -> Outcome:
    p, th = with_thresholds(cfg)
    lam = float(cfg.opt("lambda_factor", 1.0)) * th.lambda_star
    rng = np.random.default_rng(cfg.seed)
    mode = cfg.opt("mode", "integrated")
    trials = int(cfg.opt("trials", 3))
    rows, ok = [], True
    if mode == "pointwise":
        pts = sample_points(rng, p, cfg.d, int(cfg.opt("points", 500)))
        reps = [carleman.check_carleman_lemma1(phi, cfg.coeffs, p, cfg.d, th, "pointwise", pts,
                                               lam) for phi in random_fields(rng, cfg.d, trials)]
        rep = merge(reps)
        ok = len(rep.violations(cfg.tolerance)) == 0
        return Outcome(_status(ok), {"mode": mode, "lambda": lam,
                                     "min_relative_margin": float(rep.relative.min())},
                       {"carleman.csv": rep.to_csv()})
    for k, phi in enumerate(bump_fields(rng, p, cfg.d, trials)):
        rep = carleman.check_carleman_lemma1(phi, cfg.coeffs, p, cfg.d, th, "integrated",
                                             lam=lam, panels=cfg.panels)
        e = rep.extras
        d_ok = abs(e["integral_D"]) <= 3 * e["integral_D_error"]
        m_ok = e["divergence_free_margin"] >= -cfg.tolerance * float(rep.scale[0])
        ok = ok and d_ok and m_ok
        rows.append([k, fmt(lam), fmt(e["divergence_free_margin"]), fmt(e["margin_error"]),
                     fmt(e["integral_D"]), fmt(e["integral_D_error"]), fmt(e["lam3_term"]),
                     fmt(e["log_scale"]), str(d_ok and m_ok), params_hash(rep.params)])
    head = ["trial", "lambda", "margin", "margin_error", "integral_D", "integral_D_error",
            "lam3_term", "log_scale", "passed", "params_hash"]
    return Outcome(_status(ok), {"mode": mode, "lambda": lam, "lambda_star": th.lambda_star,
                                 "params": p.to_dict()},
                   {"carleman.csv": rows_to_csv(head, rows)})


def cmd_check_lemma4(cfg: RunConfig) -> Outcome:
    rng = np.random.default_rng(cfg.seed)
    c_factor = 1.0 if cfg.strict_lemma4 else 2.0
    q = quadrature.QuadSpec(cfg.panels)
    rows, ok = [], True
    for k, z in enumerate(random_fields(rng, cfg.d, int(cfg.opt("trials", 10)))):
        rep = quadrature.check_lemma4(z, cfg.p, cfg.d, q, c_factor)
        ok = ok and rep.passed(include_ym=False)
        for r in rep.rows():
            rows.append([k, r["label"], fmt(r["ratio"]), fmt(r["bound"]), str(r["within"]),
                         str(r["within_gamma"])])
    head = ["trial", "ratio", "value", "bound", "within_bound", "within_gamma"]
    return Outcome(_status(ok), {"c_factor": c_factor, "gamma": cfg.p.gamma,
                                 "note": "I_y{m}* is a point evaluation and is not gated"},
                   {"lemma4.csv": rows_to_csv(head, rows)})


def manufactured_w(rng, d, count):
    """``w = y_m * P`` with random cubic ``P``, so ``w`` vanishes on ``{y_m = 0}``."""
    ym = d.ndim - 1
    out = []
    for P in random_fields(rng, d, count):
        out.append(expression(lambda X, P=P: X[ym] * P(X), label=f"ym*{P.label}"))
    return out


def cmd_check_reduction(cfg: RunConfig) -> Outcome:
    rng = np.random.default_rng(cfg.seed)
    pts = sample_points(rng, cfg.p, cfg.d, int(cfg.opt("points", 100)))
    rc = reduction.reduced_coefficients(cfg.coeffs, cfg.p, points=pts)
    base = int(cfg.opt("primitive_panels", reduction.PRIMITIVE_PANELS))
    rows, ok, worst = [], True, 0.0
    for k, w in enumerate(manufactured_w(rng, cfg.d, int(cfg.opt("trials", 10)))):
        errs = []
        for panels in (base // 4, base // 2, base):
            r, s = reduction.check_reduction_identity(w, cfg.coeffs, rc, cfg.p, pts, panels)
            errs.append(float(np.abs(r).max()))
        order = math.log2(errs[-2] / errs[-1]) if errs[-1] > 0 and errs[-2] > 0 else math.inf
        worst = max(worst, errs[-1])
        passed = errs[-1] <= 1e-6 and order >= 2 - 0.1
        ok = ok and passed
        rows.append([k, fmt(errs[0]), fmt(errs[1]), fmt(errs[2]), fmt(order), str(passed)])
    head = ["trial", f"residual_{base // 4}", f"residual_{base // 2}", f"residual_{base}",
            "observed_order", "passed"]
    return Outcome(_status(ok), {"max_residual": worst, "primitive_panels": base},
                   {"reduction.csv": rows_to_csv(head, rows)})


def cmd_demo_uniqueness(cfg: RunConfig) -> Outcome:
    p, th = with_thresholds(cfg)
    eps = float(cfg.opt("epsilon", 1e-3))
    inst = reduction.InverseProblemInstance(cfg.coeffs, make_bump(p, cfg.d) * eps,
                                            label=f"{eps}*bump")
    rep = quadrature.uniqueness_demo(inst, p, cfg.d, th, quadrature.QuadSpec(cfg.panels))
    head = rep.CSV_HEADER
    rows = [[fmt(r[k]) for k in head] for r in rep.rows]
    ok = rep.applicable and all(r["final_margin"] >= -cfg.tolerance * abs(r["budget"])
                                for r in rep.rows)
    return Outcome(_status(ok), {"conclusion": rep.conclusion, "applicable": rep.applicable,
                                 "bound_min_slack": rep.bound_min_slack, "rows": rep.rows,
                                 "notes": rep.notes},
                   {"uniqueness.csv": rows_to_csv(head, rows)})


def cmd_scaling_study(cfg: RunConfig) -> Outcome:
    p, th = with_thresholds(cfg)
    factors = [float(f) for f in cfg.opt("lambda_factors", [1, 2, 4])]
    rng = np.random.default_rng(cfg.seed)
    rows, ok = [], True
    for k, phi in enumerate(bump_fields(rng, p, cfg.d, int(cfg.opt("trials", 5)))):
        study = carleman.lambda_scaling_study(phi, cfg.coeffs, p, cfg.d,
                                              [f * th.lambda_star for f in factors], cfg.panels)
        for f, r in zip(factors, study):
            passed = r["margin"] >= 0 and r["ratio"] >= 0.5
            ok = ok and passed
            rows.append([k, fmt(f), fmt(r["lambda"]), fmt(r["margin"]), fmt(r["lam3_term"]),
                         fmt(r["ratio"]), str(passed)])
    head = ["trial", "factor", "lambda", "margin", "lam3_term", "ratio", "passed"]
    return Outcome(_status(ok), {"lambda_star": th.lambda_star, "factors": factors},
                   {"scaling.csv": rows_to_csv(head, rows)})


COMMANDS = {
    "validate": cmd_validate,
    "thresholds": cmd_thresholds,
    "check-identity": cmd_check_identity,
    "check-lemma2": cmd_check_lemma2,
    "check-carleman": cmd_check_carleman,
    "check-lemma4": cmd_check_lemma4,
    "check-reduction": cmd_check_reduction,
    "demo-uniqueness": cmd_demo_uniqueness,
    "scaling-study": cmd_scaling_study,
}


# ---------------------------------------------------------------------------
# entry point


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        sys.exit(EXIT_CONFIG)


def build_parser():
    ap = _Parser(prog="ultracarleman", description=__doc__.splitlines()[0])
    ap.add_argument("command", choices=sorted(COMMANDS), metavar="command",
                    help="one of: " + ", ".join(sorted(COMMANDS)))
    ap.add_argument("--config", default=str(CONFIG_DIR / "desk.json"),
                    help="run configuration JSON (default: shipped desk example)")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", default="out")
    ap.add_argument("--tolerance", type=float, default=1e-9)
    ap.add_argument("--panels", type=int, default=None)
    ap.add_argument("--strict-lemma4", action="store_true",
                    help="compare Lemma 4 ratios against gamma instead of 2 gamma")
    return ap


def _jsonable(v):
    if isinstance(v, np.ndarray):
        return v.tolist()
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    if isinstance(v, np.bool_):
        return bool(v)
    return str(v)


def run(args) -> int:
    t0 = time.perf_counter()
    try:
        cfg = load_config(args)
    except (ParamsError, ValueError, KeyError) as exc:
        sys.stderr.write(f"configuration error: {exc}\n")
        return EXIT_CONFIG
    try:
        outcome = COMMANDS[cfg.command](cfg)
    except ParamsError as exc:
        sys.stderr.write(f"configuration error: {exc}\n")
        return EXIT_CONFIG
    cfg.out.mkdir(parents=True, exist_ok=True)
    artifacts = []
    for name, text in outcome.tables.items():
        (cfg.out / name).write_text(text)
        artifacts.append(name)
    summary_name = f"{cfg.command}.json"
    (cfg.out / summary_name).write_text(
        json.dumps({"command": cfg.command, "status": outcome.status, **outcome.summary},
                   indent=2, sort_keys=True, default=_jsonable))
    artifacts.append(summary_name)
    manifest = {"command": cfg.command, "exit_status": outcome.status,
                "inputs_hash": cfg.inputs_hash, "config": str(args.config), "seed": cfg.seed,
                "panels": cfg.panels, "tolerance": cfg.tolerance,
                "versions": {"ultracarleman": __version__, "numpy": np.__version__,
                             "python": platform.python_version()},
                "timings": {"wall_seconds": time.perf_counter() - t0},
                "artifacts": artifacts}
    (cfg.out / "run-manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True))
    print(f"{cfg.command}: {'ok' if outcome.status == EXIT_OK else 'VIOLATION'} "
          f"(artifacts in {cfg.out})")
    return outcome.status


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return run(args)


if __name__ == "__main__":
    sys.exit(main())
