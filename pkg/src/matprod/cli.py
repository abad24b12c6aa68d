"""Command-line entry point: ``matprod <command> [options]``.

Every run writes one JSON object (keys sorted, with the effective
parameters under "parameters") or one CSV table preceded by '#' comment
lines carrying the same parameters.  Failures print a JSON error object on
stderr and exit with 2 (bad input) or 3 (numerical failure).
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import re
import sys
from fractions import Fraction
from pathlib import Path

import jsonschema
import numpy as np

from .errors import ConfigError, InputError, MatprodError

COMMANDS = ("simulate", "bernoulli", "gibbs", "counterexample", "factorize", "triangular", "curve")

CONFIG_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["command"],
    "properties": {
        "command": {"enum": list(COMMANDS)},
        "action": {"type": "string"},
        "family": {"type": ["string", "object"]},
        "word": {"type": "string"},
        "preperiod": {"type": "string"},
        "period": {"type": "string"},
        "random": {"type": "boolean"},
        "depth": {"type": "integer", "minimum": 1},
        "start": {"type": "array", "items": {"type": ["number", "string"]}},
        "k": {"type": "integer", "minimum": 1},
        "p": {"type": "array", "items": {"type": ["number", "string"]}},
        "h": {"type": "integer", "minimum": 0},
        "beta_case": {"type": "boolean"},
        "mode": {"type": "string"},
        "n_max": {"type": "integer", "minimum": 1},
        "tail_depth": {"type": "integer", "minimum": 1},
        "level": {"type": "integer", "minimum": 1},
        "q_grid": {"type": "array", "items": {"type": "number"}},
        "tol": {"type": "number", "exclusiveMinimum": 0},
        "K": {"type": "integer", "minimum": 1},
        "checks": {"type": "boolean"},
        "growth": {"type": "boolean"},
        "alpha_cap": {"type": "integer", "minimum": 1},
        "factors": {"type": ["string", "array"]},
        "n": {"type": "integer", "minimum": 1},
        "horizon": {"type": "integer", "minimum": 8},
        "coeffs": {"type": "array", "items": {"type": ["number", "string"]}},
        "x": {"type": "array", "items": {"type": ["number", "string"]}},
        "grid": {"type": "integer", "minimum": 1},
        "seed": {"type": "integer", "minimum": 0},
        "out": {"type": "string"},
        "format": {"enum": ["json", "csv"]},
    },
    "additionalProperties": False,
}


# ---------------------------------------------------------------------------
# small parsers


def expand_word(text: str) -> list[int]:
    """Expand repetition groups: "(012)^3" -> 012012012, groups may nest."""
    text = re.sub(r"\s+", "", text)
    pos = 0

    def seq() -> list[int]:
        nonlocal pos
        out: list[int] = []
        while pos < len(text) and text[pos] != ")":
            ch = text[pos]
            if ch == "(":
                pos += 1
                inner = seq()
                if pos >= len(text) or text[pos] != ")":
                    raise InputError(f"unbalanced parenthesis in word {text!r}")
                pos += 1
                m = re.match(r"\^(\d+)", text[pos:])
                if not m:
                    raise InputError(f"group without ^count in word {text!r}")
                pos += m.end()
                out.extend(inner * int(m.group(1)))
            elif ch.isdigit():
                out.append(int(ch))
                pos += 1
            else:
                raise InputError(f"unexpected character {ch!r} in word {text!r}")
        return out

    word = seq()
    if pos != len(text):
        raise InputError(f"unbalanced parenthesis in word {text!r}")
    return word


def _scalar_list(values) -> list:
    if isinstance(values, str):
        values = [v for v in values.split(",") if v.strip()]
    out = []
    for v in values:
        if isinstance(v, str) and "/" in v:
            out.append(v.strip())
        else:
            out.append(float(v))
    return out


def _load_json_arg(value):
    if isinstance(value, (dict, list)):
        return value
    if not value.lstrip().startswith(("[", "{")):
        path = Path(value)
        if path.exists():
            return json.loads(path.read_text())
    try:
        return json.loads(value)
    except json.JSONDecodeError as exc:
        raise InputError(f"neither a file nor inline JSON: {value!r}") from exc


def load_family(source):
    from .bernoulli import beta_representation, thm23_family
    from .counterexamples import ce12_family, ce13_family
    from .linalg import as_matrix
    from .trajectory import MatrixFamily

    builtins = {"thm23": thm23_family, "beta": lambda: beta_representation().to_family(),
                "ce12": ce12_family, "ce13": ce13_family}
    if isinstance(source, str) and source in builtins:
        return builtins[source]()
    data = _load_json_arg(source)
    if not isinstance(data, dict) or "matrices" not in data:
        raise InputError("family JSON needs a 'matrices' list")
    exact = bool(data.get("exact", False))
    mats = tuple(as_matrix(M, exact=exact) for M in data["matrices"])
    rows = None
    if data.get("row_vectors") is not None:
        rows = tuple(as_matrix(r, exact=exact).reshape(-1) for r in data["row_vectors"])
    term = None
    if data.get("terminal") is not None:
        term = as_matrix(data["terminal"], exact=exact).reshape(-1)
    return MatrixFamily(mats, rows, term, name=data.get("name", "custom"))


def _sequence(args, alphabet: int):
    from .trajectory import SymbolSequence

    if args.word:
        word = expand_word(args.word)
        return SymbolSequence.explicit(word, alphabet), len(word)
    if args.period:
        pre = expand_word(args.preperiod or "")
        return SymbolSequence.eventually_periodic(pre, expand_word(args.period), alphabet), None
    if args.random:
        return SymbolSequence.random(alphabet, args.seed), None
    raise InputError("give --word, --period (with optional --preperiod) or --random")


def _jsonable(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, Fraction):
        return str(obj)
    if isinstance(obj, (set, frozenset, tuple)):
        return list(obj)
    raise TypeError(f"not JSON serializable: {type(obj).__name__}")


def _params(args) -> dict:
    return {k: v for k, v in sorted(vars(args).items()) if k not in ("func", "config") and v is not None}


# ---------------------------------------------------------------------------
# commands; each returns ("json", dict) or ("csv", (header, rows))


def cmd_simulate(args):
    from .trajectory import limit_image, rank_one_diagnostic, run_trajectory
    from .errors import NotConverged

    fam = load_family(args.family)
    seq, length = _sequence(args, fam.alphabet_size)
    depth = args.depth or length
    if depth is None:
        raise InputError("--depth is required for periodic or random sequences")
    start = None if args.start is None else [float(Fraction(str(s))) for s in _scalar_list(args.start)]
    traj = run_trajectory(fam, seq, depth, start_vector=start)
    if args.format == "csv":
        return "csv", (traj.csv_header(), traj.csv_rows())
    report = rank_one_diagnostic(traj)
    out = {"depth": depth, "log_norm": float(traj.log_norms[-1]), "rank_one": report.verdict,
           "singular_values": traj.singular_values[-1].tolist()}
    if traj.images is not None:
        out["final_image"] = traj.images[-1].tolist()
        try:
            lim = limit_image(traj)
            out["limit_image"] = {"vector": lim.vector.tolist(), "achieved_at": lim.achieved_at}
        except NotConverged:
            out["limit_image"] = None
    return "json", out


def cmd_bernoulli(args):
    from .bernoulli import beta_cylinder_measure, build_representation, cylinder_measure

    if args.beta_case:
        if args.word is None:
            raise InputError("--word is required with --beta-case")
        return "json", {"measure": float(beta_cylinder_measure(expand_word(args.word)))}
    if args.k is None or args.p is None:
        raise InputError("--k and --p are required")
    law = build_representation(args.k, _scalar_list(args.p))
    out = {"representation": law.to_dict()}
    if args.word is not None:
        out["measure"] = float(cylinder_measure(law, expand_word(args.word), h=args.h))
    return "json", out


def cmd_gibbs(args):
    from . import gibbs
    from .bernoulli import beta_representation, build_representation

    if args.beta_case:
        source = "beta"
        law = None
    else:
        if args.k is None or args.p is None:
            raise InputError("--k and --p are required unless --beta-case")
        law = build_representation(args.k, _scalar_list(args.p))
    mode = args.mode
    if mode == "spectrum":
        q_grid = args.q_grid or [-2, -1, 0, 1, 2, 3]
        rep = gibbs.scale_spectrum_and_legendre(law if law is not None else source,
                                                _scalar_list(q_grid), args.level, h=args.h)
        if args.format == "csv":
            return "csv", (["q", "tau"], [[float(a), float(b)] for a, b in zip(rep.q_grid, rep.tau)])
        return "json", rep.to_dict()
    if law is None:
        fam = beta_representation().to_family()
    else:
        fam = law.to_family(args.h)
    if mode == "ratio":
        seq, _ = _sequence(args, fam.alphabet_size)
        rep = gibbs.potential_and_ratio(fam, seq, tail_depth=args.tail_depth, n_max=args.n_max)
        if args.format == "csv":
            return "csv", (["n", "ratio_root"], [[int(n), float(r)] for n, r in zip(rep.n_values, rep.ratio_root)])
        return "json", rep.to_dict()
    if mode == "check":
        return "json", gibbs.weak_gibbs_check(fam, tol=args.tol, seed=args.seed).to_dict()
    if mode == "probe":
        if law is None:
            raise InputError("the cylinder ratio probe needs --k and --p")
        rep = gibbs.cylinder_ratio_probe(law, args.n_max, h=args.h)
        if args.format == "csv":
            return "csv", (["n", "g"], [[int(n), float(g)] for n, g in zip(rep.n_values, rep.g)])
        return "json", rep.to_dict()
    raise InputError(f"unknown gibbs mode {mode!r}")


def cmd_counterexample(args):
    from . import counterexamples as ce

    if args.action == "ce12":
        return "json", ce.ce12_build_and_verify(K=args.K).to_dict()
    if args.action == "ce13":
        rep = ce.ce13_verify(k=args.k or 5)
        return "json", rep.__dict__ if not hasattr(rep, "to_dict") else rep.to_dict()
    if args.action == "ce22":
        p = _scalar_list(args.p) if args.p else (0.4, 0.1, 0.2, 0.3)
        return "json", ce.ce22_limits(tuple(float(Fraction(str(x))) for x in p)).to_dict()
    raise InputError(f"unknown counterexample {args.action!r}")


def cmd_factorize(args):
    from . import factorize as fz

    out = {}
    if args.word is not None:
        res = fz.tokenize(args.word)
        out["factorization"] = res.to_dict()
    if args.checks:
        out["structure"] = fz.structure_checks().to_dict()
    if args.growth:
        out["growth"] = fz.growth_and_bounds(alpha_cap=args.alpha_cap, seed=args.seed).to_dict()
    if not out:
        raise InputError("give --word, --checks or --growth")
    return "json", out


def cmd_triangular(args):
    from . import triangular as tri

    if args.factors is None:
        raise InputError("--factors is required")
    factors = _load_json_arg(args.factors)
    if args.action == "detect":
        return "json", tri.block_form_detect(factors, horizon=args.horizon).to_dict()
    if args.action == "classify":
        series = tri.series3x3(factors, n=args.n)
        rep = tri.classify3x3_and_predict(series)
        out = rep.to_dict()
        out["series"] = series.to_dict()
        return "json", out
    raise InputError(f"unknown triangular action {args.action!r}")


def cmd_curve(args):
    from .curves import build_refinement_matrices, residual_checks, sample_curve

    if args.coeffs is None:
        raise InputError("--coeffs is required")
    system = build_refinement_matrices(args.k or 2, _scalar_list(args.coeffs))
    if args.x is not None:
        xs = [Fraction(str(x)) for x in _scalar_list(args.x)]
    else:
        xs = [Fraction(i, args.grid) for i in range(args.grid)]
    depth = args.depth or 40
    samples = sample_curve(system, xs, depth)
    if args.format == "csv":
        header = ["x"] + [f"psi{j + 1}" for j in range(system.order)] + ["gap"]
        return "csv", (header, samples.csv_rows())
    res = residual_checks(system, xs, depth)
    return "json", {"system": system.to_dict(), "x": [str(x) for x in xs], "psi": samples.psi.tolist(),
                    "gap": samples.gap.tolist(), "residuals": res.to_dict()}


HANDLERS = {"simulate": cmd_simulate, "bernoulli": cmd_bernoulli, "gibbs": cmd_gibbs,
            "counterexample": cmd_counterexample, "factorize": cmd_factorize,
            "triangular": cmd_triangular, "curve": cmd_curve}


# ---------------------------------------------------------------------------
# argument parsing


def _default_seed() -> int:
    env = os.environ.get("MATPROD_SEED")
    if env is None:
        return 0
    try:
        return int(env)
    except ValueError:
        raise ConfigError(f"MATPROD_SEED is not an integer: {env!r}")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", help="output path (default: stdout)")
    common.add_argument("--format", choices=["json", "csv"], default="json")
    common.add_argument("--seed", type=int, default=None,
                        help="random seed (default: $MATPROD_SEED or 0)")

    seqopts = argparse.ArgumentParser(add_help=False)
    seqopts.add_argument("--word", help='finite word, e.g. "(012)^40"')
    seqopts.add_argument("--preperiod", default="")
    seqopts.add_argument("--period")
    seqopts.add_argument("--random", action="store_true", help="seeded uniform random sequence")
    seqopts.add_argument("--depth", type=int)

    bern = argparse.ArgumentParser(add_help=False)
    bern.add_argument("--k", type=int)
    bern.add_argument("--p", help="comma-separated probabilities, fractions like 1/4 allowed")
    bern.add_argument("--h", type=int, default=0)
    bern.add_argument("--beta-case", action="store_true")

    parser = argparse.ArgumentParser(prog="matprod", description=__doc__.splitlines()[0])
    parser.add_argument("--config", help="JSON config file (validated against the published schema)")
    sub = parser.add_subparsers(dest="command")

    p = sub.add_parser("simulate", parents=[common, seqopts], help="multiply out a product trajectory")
    p.add_argument("--family", default="thm23", help="builtin name (thm23, beta, ce12, ce13), JSON file or inline JSON")
    p.add_argument("--start", help="comma-separated positive start vector")

    p = sub.add_parser("bernoulli", parents=[common, bern], help="representation and cylinder measures")
    p.add_argument("--word")

    p = sub.add_parser("gibbs", parents=[common, bern, seqopts], help="weak-Gibbs diagnostics and scale spectrum")
    p.add_argument("--mode", choices=["ratio", "check", "probe", "spectrum"], default="ratio")
    p.add_argument("--n-max", type=int, default=40)
    p.add_argument("--tail-depth", type=int, default=64)
    p.add_argument("--level", type=int, default=10)
    p.add_argument("--q-grid", help="comma-separated q values")
    p.add_argument("--tol", type=float, default=1e-3)

    p = sub.add_parser("counterexample", parents=[common], help="the explicit counterexamples")
    p.add_argument("action", choices=["ce12", "ce13", "ce22"])
    p.add_argument("--K", type=int, default=4)
    p.add_argument("--k", type=int)
    p.add_argument("--p")

    p = sub.add_parser("factorize", parents=[common], help="tokenize words over {0,1,2}, structure checks")
    p.add_argument("--word")
    p.add_argument("--checks", action="store_true")
    p.add_argument("--growth", action="store_true")
    p.add_argument("--alpha-cap", type=int, default=40)

    p = sub.add_parser("triangular", parents=[common], help="block form detection and 3x3 classification")
    p.add_argument("action", choices=["detect", "classify"])
    p.add_argument("--factors", help="JSON file or inline JSON list of matrices")
    p.add_argument("--n", type=int)
    p.add_argument("--horizon", type=int, default=400)

    p = sub.add_parser("curve", parents=[common], help="sample a refinement curve")
    p.add_argument("--k", type=int, default=2)
    p.add_argument("--coeffs", help="comma-separated coefficients c_0..c_N")
    p.add_argument("--x", help="comma-separated points in [0,1)")
    p.add_argument("--grid", type=int, default=16)
    p.add_argument("--depth", type=int, default=40)
    return parser


def _apply_config(parser: argparse.ArgumentParser, path: str) -> argparse.Namespace:
    try:
        cfg = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}")
    try:
        jsonschema.validate(cfg, CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        raise ConfigError(f"config does not match the schema: {exc.message}")
    argv = [cfg["command"]]
    if cfg["command"] in ("counterexample", "triangular"):
        if "action" not in cfg:
            raise ConfigError(f"command {cfg['command']} needs an 'action'")
        argv.append(cfg["action"])
    args = parser.parse_args(argv)
    list_keys = {"p", "coeffs", "x", "start", "q_grid"}
    for key, value in cfg.items():
        if key in ("command", "action"):
            continue
        if key in list_keys and isinstance(value, list):
            value = ",".join(str(v) for v in value)
        if key == "family" and isinstance(value, dict):
            value = json.dumps(value)
        if key == "factors" and isinstance(value, list):
            value = json.dumps(value)
        if not hasattr(args, key):
            raise ConfigError(f"key {key!r} does not apply to command {cfg['command']}")
        setattr(args, key, value)
    return args


def _emit(kind: str, payload, args) -> str:
    params = _params(args)
    if kind == "json":
        body = dict(payload)
        body["parameters"] = params
        return json.dumps(body, sort_keys=True, default=_jsonable, indent=1) + "\n"
    header, rows = payload
    buf = io.StringIO()
    for key, value in params.items():
        buf.write(f"# {key}: {json.dumps(value, default=_jsonable)}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


def main(argv=None) -> int:
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
        args = _apply_config(parser, ns.config) if ns.config else ns
        if args.command is None:
            parser.print_help(sys.stderr)
            return 2
        if args.seed is None:
            args.seed = _default_seed()
        kind, payload = HANDLERS[args.command](args)
        text = _emit(kind, payload, args)
        if args.out:
            Path(args.out).write_text(text)
        else:
            sys.stdout.write(text)
        return 0
    except MatprodError as exc:
        sys.stderr.write(json.dumps(exc.to_dict(), sort_keys=True) + "\n")
        return exc.exit_code
    except SystemExit as exc:        # argparse usage errors
        return int(exc.code) if isinstance(exc.code, int) else 2


if __name__ == "__main__":
    sys.exit(main())
