"""pfkit command line.

Subcommands: `analyze` (CSV attribute-privacy sensitivities), `calibrate`
(noise calibration), `pabi` (iteration privacy-loss curves and schedule
bounds), `apply` (noise a query value). All machine output is JSON; every
subcommand also accepts a flat key=value config file via --config, with
explicit flags winning.

Exit codes: 0 success, 2 infeasible calibration, 3 input-format error,
4 transport cap exceeded.
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from dataclasses import dataclass
from itertools import combinations
from typing import Sequence

from .core import (DiscreteDistribution, Framework, Guarantee, NoiseSpec,
                   SecretPair, gaussian_noise, gen_cauchy_noise, laplace_noise,
                   make_distribution)
from .mechanisms import (CalibratedMechanism, InfeasibleCalibration, apply,
                         approx_gaussian_mechanism, approx_laplace_mechanism,
                         cauchy_mechanism_epsilon, gaussian_mechanism,
                         laplace_mechanism)
from .pabi import (PabiSchedule, SgdParams, allocation_global_uniform,
                   allocation_naive, allocation_tail_uniform, pabi_bound,
                   privacy_loss_curve)
from .transport import (AtomCapExceeded, framework_sensitivity,
                        noise_aware_cost, proximity_threshold, wasserstein_inf,
                        wasserstein_p, wasserstein_p_1d)

EXIT_OK = 0
EXIT_INFEASIBLE = 2
EXIT_INPUT = 3
EXIT_CAP = 4

ATOM_CAP_ENV = "PFKIT_ATOM_CAP"


class InputFormatError(ValueError):
    """Malformed CSV, config, mechanism file, or flag combination."""


class _Parser(argparse.ArgumentParser):
    # argparse exits with status 2 on bad flags; 2 is reserved for infeasible
    # calibrations, so route flag errors through the input-error path instead
    def error(self, message):
        raise InputFormatError(message)


# ---------------------------------------------------------------- serialization

def _alpha_to_json(alpha: float):
    return "inf" if math.isinf(alpha) else alpha


def _alpha_from_json(alpha) -> float:
    return math.inf if alpha == "inf" else float(alpha)


def guarantee_to_dict(g: Guarantee) -> dict:
    return {"alpha": _alpha_to_json(g.alpha), "epsilon": g.epsilon, "delta": g.delta}


def guarantee_from_dict(d: dict) -> Guarantee:
    return Guarantee(_alpha_from_json(d["alpha"]), float(d["epsilon"]),
                     None if d.get("delta") is None else float(d["delta"]))


def noise_to_dict(spec: NoiseSpec | None) -> dict | None:
    if spec is None:
        return None
    out = {"family": spec.family, "dim": spec.dim, "norm": spec.norm}
    for field in ("sigma", "scale", "k", "lam"):
        value = getattr(spec, field)
        if value is not None:
            out[field] = value
    return out


def noise_from_dict(d: dict | None) -> NoiseSpec | None:
    if d is None:
        return None
    return NoiseSpec(d["family"], int(d["dim"]),
                     sigma=d.get("sigma"), scale=d.get("scale"),
                     k=d.get("k"), lam=d.get("lam"))


def mechanism_to_dict(mech: CalibratedMechanism) -> dict:
    return {"kind": mech.kind,
            "noise": noise_to_dict(mech.noise),
            "guarantee": guarantee_to_dict(mech.guarantee),
            "sensitivity_used": mech.sensitivity_used,
            "degenerate": mech.degenerate}


def mechanism_from_dict(d: dict) -> CalibratedMechanism:
    try:
        return CalibratedMechanism(kind=d["kind"],
                                   noise=noise_from_dict(d.get("noise")),
                                   guarantee=guarantee_from_dict(d["guarantee"]),
                                   sensitivity_used=float(d["sensitivity_used"]),
                                   degenerate=bool(d.get("degenerate", False)))
    except (KeyError, TypeError, ValueError) as exc:
        raise InputFormatError(f"malformed mechanism file: {exc}") from exc


def distribution_to_dict(d: DiscreteDistribution) -> dict:
    return {"dim": d.dim,
            "atoms": [{"point": list(p), "weight": w} for p, w in d.atoms]}


def distribution_from_dict(d: dict) -> DiscreteDistribution:
    atoms = d["atoms"]
    return DiscreteDistribution(
        tuple((tuple(a["point"]), float(a["weight"])) for a in atoms), int(d["dim"]))


def _emit(payload, out_path: str | None):
    text = payload if isinstance(payload, str) else json.dumps(payload, indent=2)
    if out_path:
        with open(out_path, "w") as fh:
            fh.write(text + "\n")
    else:
        sys.stdout.write(text + "\n")


# ---------------------------------------------------------------- analyze

@dataclass(frozen=True)
class AnalysisConfig:
    input_path: str
    value_column: str
    secret_column: str
    norm: str = "l2"
    delta: float | None = None
    p_list: tuple[float, ...] | None = None
    dagwm: tuple[NoiseSpec, float, float] | None = None
    output: str = "json"
    delimiter: str = ","
    value_min: float | None = None
    value_max: float | None = None

    def __post_init__(self):
        if self.value_column == self.secret_column:
            raise InputFormatError("value and secret columns must differ")
        if self.p_list and any(p < 1 for p in self.p_list):
            raise InputFormatError("every p must be >= 1")
        if self.output not in ("json", "table"):
            raise InputFormatError("output must be json or table")


def read_conditionals(config: AnalysisConfig) -> tuple[dict[str, DiscreteDistribution], list[float]]:
    """Empirical conditional of the value column per secret value, plus all
    values (for the observed range). Dot-decimal parsing only; row order is
    irrelevant because distributions are canonical."""
    groups: dict[str, list[float]] = {}
    values: list[float] = []
    try:
        fh = open(config.input_path, newline="")
    except OSError as exc:
        raise InputFormatError(f"cannot read {config.input_path}: {exc}") from exc
    with fh:
        reader = csv.DictReader(fh, delimiter=config.delimiter)
        header = reader.fieldnames or []
        for col in (config.value_column, config.secret_column):
            if col not in header:
                raise InputFormatError(f"column {col!r} not in header {header}")
        for lineno, row in enumerate(reader, start=2):
            raw = (row[config.value_column] or "").strip()
            try:
                value = float(raw)
            except ValueError as exc:
                raise InputFormatError(
                    f"line {lineno}: non-numeric value {raw!r} in column "
                    f"{config.value_column!r}") from exc
            secret = (row[config.secret_column] or "").strip()
            groups.setdefault(secret, []).append(value)
            values.append(value)
    if len(groups) < 2:
        raise InputFormatError(
            f"need at least 2 distinct secret values, found {sorted(groups)}")
    conditionals = {s: make_distribution([[v] for v in vals])
                    for s, vals in groups.items()}
    return conditionals, values


def run_analysis(config: AnalysisConfig, cap: int | None = None) -> dict:
    conditionals, values = read_conditionals(config)
    labels = sorted(conditionals)
    pairs = tuple(SecretPair(conditionals[a], conditionals[b], label=f"{a} vs {b}")
                  for a, b in combinations(labels, 2))
    fw = Framework(pairs)

    if config.value_min is not None and config.value_max is not None:
        delta_range = config.value_max - config.value_min
        qualifier = "exact"
    else:
        delta_range = max(values) - min(values)
        qualifier = "at-least"   # observed range only bounds the true one from below
    report = framework_sensitivity(fw, norm=config.norm, delta=config.delta,
                                   p_list=config.p_list, noise_aware=config.dagwm,
                                   delta_group=delta_range, cap=cap)

    pair_rows = []
    for sp in pairs:
        row = {"label": sp.label,
               "w_inf": wasserstein_inf(sp.left, sp.right, config.norm)}
        if config.delta is not None:
            row["near_threshold"] = proximity_threshold(sp.left, sp.right,
                                                        config.delta, config.norm)
        if config.p_list:
            row["wp"] = [{"p": p,
                          "value": (wasserstein_p_1d(sp.left, sp.right, p) if fw.dim == 1
                                    else wasserstein_p(sp.left, sp.right, p, config.norm, cap))}
                         for p in config.p_list]
        if config.dagwm is not None:
            noise, q, alpha = config.dagwm
            row["dagwm_cost"] = noise_aware_cost(sp.left, sp.right, noise, q, alpha, cap)
        pair_rows.append(row)

    sensitivities = {"delta": delta_range, "delta_qualifier": qualifier,
                     "delta_g": report.delta_g}
    if report.delta_g_delta is not None:
        d, v = report.delta_g_delta
        sensitivities["delta_g_delta"] = {"delta": d, "value": v}
    if report.w_p is not None:
        sensitivities["wp"] = [{"p": p, "value": v} for p, v in report.w_p]
    if report.delta_g_zeta is not None:
        q, alpha, v = report.delta_g_zeta
        sensitivities["dagwm"] = {"q": q, "alpha": alpha, "value": v,
                                  "epsilon": math.log(v) / (q * (alpha - 1))}
    return {"sensitivities": sensitivities,
            "pairs": pair_rows,
            "config_echo": {"input": config.input_path,
                            "value_column": config.value_column,
                            "secret_column": config.secret_column,
                            "norm": config.norm,
                            "delta": config.delta,
                            "p_list": list(config.p_list) if config.p_list else None,
                            "delimiter": config.delimiter,
                            "value_min": config.value_min,
                            "value_max": config.value_max}}


def _format_table(result: dict) -> str:
    s = result["sensitivities"]
    qual = ">=" if s["delta_qualifier"] == "at-least" else ""
    lines = ["sensitivity        value",
             f"delta (DP)         {qual}{s['delta']:g}",
             f"delta_g            {s['delta_g']:.17g}"]
    if "delta_g_delta" in s:
        lines.append(f"delta_g_delta      {s['delta_g_delta']['value']:.17g}"
                     f"  (delta={s['delta_g_delta']['delta']:g})")
    for entry in s.get("wp", []):
        lines.append(f"w_{entry['p']:g}                {entry['value']:.17g}")
    if "dagwm" in s:
        lines.append(f"dagwm value        {s['dagwm']['value']:.17g}"
                     f"  (epsilon={s['dagwm']['epsilon']:.17g})")
    lines.append("")
    lines.append("pair                                   w_inf")
    for row in result["pairs"]:
        lines.append(f"{row['label']:<38} {row['w_inf']:.17g}")
    return "\n".join(lines)


def _cmd_analyze(args) -> int:
    dagwm = None
    if args.dagwm_family:
        q, alpha = args.dagwm_q, args.dagwm_alpha
        if q is None or alpha is None:
            raise InputFormatError("--dagwm-family needs --dagwm-q and --dagwm-alpha")
        if args.dagwm_family == "gaussian":
            if args.dagwm_sigma is None:
                raise InputFormatError("gaussian dagwm noise needs --dagwm-sigma")
            noise = gaussian_noise(args.dagwm_sigma, 1)
        elif args.dagwm_family == "laplace":
            if args.dagwm_scale is None:
                raise InputFormatError("laplace dagwm noise needs --dagwm-scale")
            noise = laplace_noise(args.dagwm_scale, 1)
        else:
            if args.dagwm_k is None or args.dagwm_lambda is None:
                raise InputFormatError("gcauchy dagwm noise needs --dagwm-k and --dagwm-lambda")
            noise = gen_cauchy_noise(args.dagwm_k, args.dagwm_lambda, 1)
        dagwm = (noise, q, alpha)
    p_list = tuple(float(p) for p in args.wp.split(",")) if args.wp else None
    config = AnalysisConfig(input_path=args.input, value_column=args.value_col,
                            secret_column=args.secret_col, norm=args.norm,
                            delta=args.delta, p_list=p_list, dagwm=dagwm,
                            output=args.output, delimiter=args.delimiter,
                            value_min=args.value_min, value_max=args.value_max)
    result = run_analysis(config, cap=_env_cap())
    _emit(_format_table(result) if config.output == "table" else result, args.out)
    return EXIT_OK


# ---------------------------------------------------------------- calibrate

def _sensitivity_from_args(args) -> float:
    if args.sensitivity is not None:
        if args.report:
            raise InputFormatError("give either --sensitivity or --report, not both")
        return args.sensitivity
    if not args.report:
        raise InputFormatError("need --sensitivity or --report")
    try:
        with open(args.report) as fh:
            data = json.load(fh)
        sens = data["sensitivities"]
        field = args.field
        if field == "delta_g":
            return float(sens["delta_g"])
        if field == "delta":
            return float(sens["delta"])
        if field == "delta_g_delta":
            return float(sens["delta_g_delta"]["value"])
        if field.startswith("wp:"):
            p = float(field.split(":", 1)[1])
            for entry in sens["wp"]:
                if entry["p"] == p:
                    return float(entry["value"])
            raise InputFormatError(f"no wp entry with p = {p} in report")
        raise InputFormatError(f"unknown report field {field!r}")
    except (OSError, json.JSONDecodeError, KeyError, TypeError) as exc:
        raise InputFormatError(f"cannot extract sensitivity from report: {exc}") from exc


def _cmd_calibrate(args) -> int:
    sens = _sensitivity_from_args(args)
    mech_name = args.mechanism
    inputs = {"mechanism": mech_name, "sensitivity": sens, "dim": args.dim}

    if mech_name == "gwm-gauss":
        _require(args, "alpha", "epsilon")
        mech = gaussian_mechanism(sens, args.alpha, args.epsilon, args.dim)
        inputs.update(alpha=args.alpha, epsilon=args.epsilon)
    elif mech_name == "gwm-laplace":
        if args.scale is not None:
            _require(args, "alpha")
            mech = laplace_mechanism(sens, args.dim, alpha=args.alpha, scale=args.scale)
            inputs.update(alpha=args.alpha, scale=args.scale)
        else:
            _require(args, "epsilon")
            mech = laplace_mechanism(sens, args.dim, epsilon_pp=args.epsilon)
            inputs.update(epsilon=args.epsilon)
    elif mech_name == "gawm-gauss":
        _require(args, "alpha", "epsilon", "delta")
        mech = approx_gaussian_mechanism(sens, args.alpha, args.epsilon, args.delta, args.dim)
        inputs.update(alpha=args.alpha, epsilon=args.epsilon, delta=args.delta)
    elif mech_name == "gawm-laplace":
        _require(args, "epsilon", "delta")
        mech = approx_laplace_mechanism(sens, args.epsilon, args.delta, args.dim)
        inputs.update(epsilon=args.epsilon, delta=args.delta)
    elif mech_name == "cauchy":
        _require(args, "k", "lam", "q", "alpha")
        eps = cauchy_mechanism_epsilon(sens, args.dim, args.k, args.lam, args.q, args.alpha)
        noise = gen_cauchy_noise(args.k, args.lam, args.dim)
        mech = CalibratedMechanism("dagwm", noise, Guarantee(args.alpha, eps), sens)
        inputs.update(k=args.k, lam=args.lam, q=args.q, alpha=args.alpha)
    else:
        raise InputFormatError(f"unknown mechanism {mech_name!r}")

    payload = mechanism_to_dict(mech)
    payload["inputs"] = inputs
    _emit(payload, args.out)
    return EXIT_OK


def _require(args, *names):
    missing = [n for n in names if getattr(args, n) is None]
    if missing:
        raise InputFormatError(f"{args.mechanism} needs --" + ", --".join(missing))


# ---------------------------------------------------------------- pabi

def _parse_rho(spec: str, steps: int | None) -> list[float]:
    if spec.startswith("const:"):
        if steps is None:
            raise InputFormatError("const rho schedule needs --steps")
        return [float(spec.split(":", 1)[1])] * steps
    if spec.startswith("powerlaw:"):
        if steps is None:
            raise InputFormatError("powerlaw rho schedule needs --steps")
        k = float(spec.split(":", 1)[1])
        return [1.0 / t ** k for t in range(1, steps + 1)]
    if spec.startswith("@"):
        try:
            with open(spec[1:]) as fh:
                return [float(line) for line in fh.read().split()]
        except (OSError, ValueError) as exc:
            raise InputFormatError(f"cannot read rho schedule {spec[1:]!r}: {exc}") from exc
    try:
        return [float(tok) for tok in spec.split(",")]
    except ValueError as exc:
        raise InputFormatError(f"cannot parse rho schedule {spec!r}") from exc


def _parse_floats(text: str) -> list[float]:
    try:
        return [float(tok) for tok in text.split(",")]
    except ValueError as exc:
        raise InputFormatError(f"cannot parse number list {text!r}") from exc


def _cmd_pabi(args) -> int:
    if (args.rho is None) == (args.shifts is None):
        raise InputFormatError("give exactly one of --rho or --shifts")

    if args.shifts is not None:
        shifts = _parse_floats(args.shifts)
        if args.allocations == "naive":
            alloc = allocation_naive(shifts)
        elif args.allocations == "uniform":
            alloc = allocation_global_uniform(shifts)
        elif args.allocations.startswith("tail:"):
            alloc = allocation_tail_uniform(shifts, int(args.allocations.split(":", 1)[1]))
        else:
            alloc = tuple(_parse_floats(args.allocations))
        noise = gaussian_noise(args.noise_sigma, 1)
        schedule = PabiSchedule(tuple(shifts), alloc, (noise,), args.alpha)
        payload = {"bound": pabi_bound(schedule),
                   "residual_shift": schedule.residual_shift,
                   "alpha": args.alpha}
        _emit(payload, args.out)
        return EXIT_OK

    rho = _parse_rho(args.rho, args.steps)
    params = SgdParams(L=args.lipschitz, eta=args.eta, sigma=args.sigma,
                       beta_smooth=args.beta, c_sup=args.c_sup,
                       diff_ab=(args.diff_norm,))
    curve = privacy_loss_curve(rho, params, args.alpha, mode=args.mode)
    if args.format == "json":
        _emit({"mode": args.mode, "alpha": args.alpha,
               "curve": [{"T": t, "loss": loss} for t, loss in curve]}, args.out)
    else:
        lines = ["T,loss"] + [f"{t},{loss!r}" for t, loss in curve]
        _emit("\n".join(lines), args.out)
    return EXIT_OK


# ---------------------------------------------------------------- apply

def _cmd_apply(args) -> int:
    try:
        with open(args.mechanism) as fh:
            mech = mechanism_from_dict(json.load(fh))
    except (OSError, json.JSONDecodeError) as exc:
        raise InputFormatError(f"cannot read mechanism file: {exc}") from exc
    value = _parse_floats(args.value)
    if mech.noise is not None and len(value) != mech.noise.dim:
        raise InputFormatError(
            f"value has dimension {len(value)}, mechanism expects {mech.noise.dim}")
    noised = apply(mech, value, args.seed)
    _emit({"value": [float(v) for v in noised], "seed": args.seed}, args.out)
    return EXIT_OK


# ---------------------------------------------------------------- plumbing

def _env_cap() -> int | None:
    raw = os.environ.get(ATOM_CAP_ENV)
    if raw is None:
        return None
    try:
        return int(raw)
    except ValueError as exc:
        raise InputFormatError(f"{ATOM_CAP_ENV} must be an integer, got {raw!r}") from exc


def _expand_config(argv: list[str]) -> list[str]:
    """Splice `--config file` key=value pairs in as flags (before the explicit
    ones, which therefore win)."""
    if "--config" not in argv:
        return argv
    i = argv.index("--config")
    if i + 1 >= len(argv):
        raise InputFormatError("--config needs a file path")
    path = argv[i + 1]
    try:
        with open(path) as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise InputFormatError(f"cannot read config {path!r}: {exc}") from exc
    tokens = []
    for lineno, line in enumerate(lines, start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise InputFormatError(f"{path}:{lineno}: expected key=value, got {line!r}")
        key, value = line.split("=", 1)
        tokens += [f"--{key.strip().replace('_', '-')}", value.strip()]
    head, tail = argv[:i], argv[i + 2:]
    sub = head[:1]  # subcommand stays first
    return sub + tokens + head[1:] + tail


def build_parser() -> _Parser:
    parser = _Parser(prog="pfkit", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analyze", help="CSV conditional-sensitivity analysis")
    p.add_argument("--input", required=True)
    p.add_argument("--value-col", required=True)
    p.add_argument("--secret-col", required=True)
    p.add_argument("--norm", choices=("l1", "l2"), default="l2")
    p.add_argument("--delta", type=float, default=None)
    p.add_argument("--wp", default=None, help="comma list of p values")
    p.add_argument("--delimiter", default=",")
    p.add_argument("--value-min", type=float, default=None)
    p.add_argument("--value-max", type=float, default=None)
    p.add_argument("--dagwm-family", choices=("gaussian", "laplace", "gcauchy"), default=None)
    p.add_argument("--dagwm-sigma", type=float, default=None)
    p.add_argument("--dagwm-scale", type=float, default=None)
    p.add_argument("--dagwm-k", type=float, default=None)
    p.add_argument("--dagwm-lambda", type=float, default=None)
    p.add_argument("--dagwm-q", type=float, default=None)
    p.add_argument("--dagwm-alpha", type=float, default=None)
    p.add_argument("--output", choices=("json", "table"), default="json")
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_analyze)

    p = sub.add_parser("calibrate", help="calibrate an additive mechanism")
    p.add_argument("--mechanism", required=True,
                   choices=("gwm-gauss", "gwm-laplace", "gawm-gauss", "gawm-laplace", "cauchy"))
    p.add_argument("--sensitivity", type=float, default=None)
    p.add_argument("--report", default=None, help="JSON report from `analyze`")
    p.add_argument("--field", default="delta_g",
                   help="report field: delta_g, delta, delta_g_delta, or wp:<p>")
    p.add_argument("--alpha", type=float, default=None)
    p.add_argument("--epsilon", type=float, default=None)
    p.add_argument("--delta", type=float, default=None)
    p.add_argument("--scale", type=float, default=None)
    p.add_argument("--k", type=float, default=None)
    p.add_argument("--lam", "--lambda", type=float, default=None, dest="lam")
    p.add_argument("--q", type=float, default=None)
    p.add_argument("--dim", type=int, default=1)
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_calibrate)

    p = sub.add_parser("pabi", help="iteration privacy-loss curves and bounds")
    p.add_argument("--rho", default=None,
                   help="correlation schedule: const:C, powerlaw:K, a comma list, or @file")
    p.add_argument("--steps", type=int, default=None)
    p.add_argument("--mode", choices=("per_step", "improved"), default="per_step")
    p.add_argument("--lipschitz", type=float, default=1.0)
    p.add_argument("--eta", type=float, default=1.0)
    p.add_argument("--sigma", type=float, default=1.0)
    p.add_argument("--beta", type=float, default=1.0)
    p.add_argument("--c-sup", type=float, default=1.0)
    p.add_argument("--diff-norm", type=float, default=1.0)
    p.add_argument("--alpha", type=float, default=2.0)
    p.add_argument("--shifts", default=None, help="explicit comma list of shifts")
    p.add_argument("--allocations", default="naive",
                   help="naive, uniform, tail:<i>, or a comma list")
    p.add_argument("--noise-sigma", type=float, default=1.0)
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_pabi)

    p = sub.add_parser("apply", help="noise a query value with a mechanism file")
    p.add_argument("--mechanism", required=True)
    p.add_argument("--value", required=True, help="comma list of coordinates")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_apply)

    return parser


def main(argv: Sequence[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        argv = _expand_config(argv)
        args = build_parser().parse_args(argv)
        return args.func(args)
    except InfeasibleCalibration as exc:
        print(f"pfkit: infeasible calibration: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except AtomCapExceeded as exc:
        print(f"pfkit: {exc}", file=sys.stderr)
        return EXIT_CAP
    except (InputFormatError, ValueError) as exc:
        print(f"pfkit: {exc}", file=sys.stderr)
        return EXIT_INPUT


def console_entry():
    raise SystemExit(main())
