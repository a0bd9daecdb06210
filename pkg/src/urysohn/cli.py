"""Command-line entry point.

Subcommands: ``validate``, ``eval``, ``gen-approx``, ``gen-space``,
``experiment theorem23``, ``experiment zeroone``, ``bound``.  Experiment
outputs (series.csv, result.json, manifest.json) land in one directory per
run; re-running with the manifest's config reproduces the CSV byte for byte.
Exit codes: 0 success, 1 I/O failure, 2 invalid input or domain error.

The worker count for experiment trials comes from the URYSOHN_THREADS
environment variable (default 1); results do not depend on it.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from typing import Union

from . import __version__
from .experiments import (
    ConcentrationResult,
    ExperimentConfig,
    ZeroOneResult,
    config_to_dict,
    holdout_bound,
    result_to_dict,
    run_concentration_experiment,
    run_zero_one_experiment,
)
from .generate import ApproximationParams, build_approximation, sequential_random_space
from .logic import (
    ExtensionAxiomSpec,
    Sup,
    classify,
    evaluate,
    evaluate_on_sample,
    make_extension_axiom,
    parse_sentence,
)
from .rng import derive_seed
from .spaces import dumps_fms, loads_fms, read_fms, validate_space, write_fms

_HOST_STREAM = 0


def _workers() -> int:
    raw = os.environ.get("URYSOHN_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def _atomic_write(path: str, text: str) -> None:
    tmp = path + ".tmp"
    with open(tmp, "w") as fh:
        fh.write(text)
    os.replace(tmp, path)


def _read_sentence_arg(arg: str) -> str:
    if arg.startswith("@"):
        with open(arg[1:], "r") as fh:
            return fh.read()
    return arg


# --------------------------------------------------------------------------
# Subcommand implementations
# --------------------------------------------------------------------------


def _cmd_validate(args) -> int:
    with open(args.path, "r") as fh:
        text = fh.read()
    try:
        space = loads_fms(text, pseudometric=args.pseudometric)
    except ValueError as exc:
        violations = getattr(exc, "violations", None)
        if violations is None:
            print(f"INVALID: {exc}")
        else:
            print(f"INVALID: {len(violations)} violation(s)")
            for v in violations:
                print(f"  {v}")
        return 2
    print(f"OK n={space.size}")
    return 0


def _cmd_eval(args) -> int:
    sentence = parse_sentence(_read_sentence_arg(args.sentence))
    space = read_fms(args.space, pseudometric=args.pseudometric)
    if args.sampled is None:
        value = evaluate(sentence, space)
        print(f"{value!r} exact")
    else:
        sv = evaluate_on_sample(sentence, space, args.sampled, args.seed)
        prefix = "≥" if isinstance(sentence, Sup) else "~"
        print(f"{prefix} {sv.value!r} sampled s={sv.sample_size} seed={sv.seed}")
    return 0


def _write_space(space, out: Union[str, None]) -> None:
    if out is None:
        sys.stdout.write(dumps_fms(space))
    else:
        write_fms(space, out)


def _cmd_gen_approx(args) -> int:
    params = ApproximationParams(
        target_size=args.target_size, max_base=args.max_base, grid=args.grid, seed=args.seed
    )
    _write_space(build_approximation(params), args.out)
    return 0


def _cmd_gen_space(args) -> int:
    _write_space(sequential_random_space(args.size, grid=args.grid, seed=args.seed), args.out)
    return 0


def _cmd_bound(args) -> int:
    print(repr(holdout_bound(args.m, args.n, args.k, args.p)))
    return 0


# --------------------------------------------------------------------------
# Experiment configs (strict JSON: unknown keys are rejected)
# --------------------------------------------------------------------------

_HOST_KEYS = {"target_size", "max_base", "grid", "seed"}
_COMMON_KEYS = {"epsilon", "m_values", "trials", "host", "seed", "eval_mode", "sample_size"}
_THEOREM23_KEYS = _COMMON_KEYS | {"sentence", "extension_axiom", "p_trials"}
_ZEROONE_KEYS = _COMMON_KEYS | {"sentence"}
_AXIOM_KEYS = {"target", "distances", "slack"}


def _reject_unknown(d: dict, allowed: set, what: str) -> None:
    unknown = sorted(set(d) - allowed)
    if unknown:
        raise ValueError(f"unknown {what} key(s): {', '.join(unknown)}")


def _load_experiment_config(path: str, kind: str, seed_override: Union[int, None]) -> ExperimentConfig:
    with open(path, "r") as fh:
        raw = json.load(fh)
    if not isinstance(raw, dict):
        raise ValueError("experiment config must be a JSON object")
    allowed = _THEOREM23_KEYS if kind == "theorem23" else _ZEROONE_KEYS
    _reject_unknown(raw, allowed, "config")

    seed = int(raw.get("seed", 0)) if seed_override is None else int(seed_override)

    host_raw = raw.get("host")
    if not isinstance(host_raw, dict):
        raise ValueError("config needs a 'host' object")
    _reject_unknown(host_raw, _HOST_KEYS, "host")
    host = ApproximationParams(
        target_size=int(host_raw["target_size"]),
        max_base=int(host_raw.get("max_base", 4)),
        grid=int(host_raw.get("grid", 0)),
        seed=int(host_raw.get("seed", derive_seed(seed, _HOST_STREAM))),
    )

    if kind == "theorem23":
        has_sentence = "sentence" in raw
        has_axiom = "extension_axiom" in raw
        if has_sentence == has_axiom:
            raise ValueError("give exactly one of 'sentence' or 'extension_axiom'")
        if has_axiom:
            ax = raw["extension_axiom"]
            if not isinstance(ax, dict):
                raise ValueError("'extension_axiom' must be an object")
            _reject_unknown(ax, _AXIOM_KEYS, "extension_axiom")
            base = validate_space(ax["target"])
            sentence = make_extension_axiom(
                ExtensionAxiomSpec(
                    base=base,
                    distances=tuple(float(v) for v in ax["distances"]),
                    slack=float(ax.get("slack", 2.0)),
                )
            )
        else:
            sentence = parse_sentence(raw["sentence"])
        if not classify(sentence).is_kind:
            raise ValueError("the theorem23 experiment needs a kind sentence")
    else:
        sentence = parse_sentence(raw["sentence"])

    return ExperimentConfig(
        sentence=sentence,
        epsilon=float(raw["epsilon"]),
        m_values=tuple(int(m) for m in raw["m_values"]),
        trials=int(raw["trials"]),
        host=host,
        seed=seed,
        eval_mode=str(raw.get("eval_mode", "exact")),
        sample_size=None if raw.get("sample_size") is None else int(raw["sample_size"]),
        p_trials=int(raw.get("p_trials", 2000)),
    )


def _cmd_experiment(args) -> int:
    kind = args.kind
    config = _load_experiment_config(args.config, kind, args.seed)
    out_dir = args.out_dir or f"{kind}-seed{config.seed}"
    os.makedirs(out_dir, exist_ok=True)

    started = time.strftime("%Y-%m-%dT%H:%M:%S%z")
    if kind == "theorem23":
        result: Union[ConcentrationResult, ZeroOneResult] = run_concentration_experiment(
            config, workers=_workers()
        )
    else:
        result = run_zero_one_experiment(config, workers=_workers())
    finished = time.strftime("%Y-%m-%dT%H:%M:%S%z")

    csv_path = os.path.join(out_dir, "series.csv")
    json_path = os.path.join(out_dir, "result.json")
    manifest_path = os.path.join(out_dir, "manifest.json")
    _atomic_write(csv_path, result.series.to_csv_text())
    _atomic_write(json_path, json.dumps(result_to_dict(result), indent=2) + "\n")
    manifest = {
        "subcommand": f"experiment {kind}",
        "config": config_to_dict(config),
        "seed": config.seed,
        "version": __version__,
        "started": started,
        "finished": finished,
        "outputs": ["series.csv", "result.json"],
    }
    _atomic_write(manifest_path, json.dumps(manifest, indent=2) + "\n")

    if isinstance(result, ConcentrationResult):
        est = result.estimate
        print(f"p_hat={est.p_hat:.6g} ci=[{est.ci_lo:.6g}, {est.ci_hi:.6g}] (n={est.n}, k={est.k})")
    else:
        print(f"r_hat={result.r_hat:.6g} ({result.r_hat_mode})")
    for r in result.series.rows:
        bound = "" if r.bound is None else f" bound={r.bound:.6g}"
        print(f"m={r.m} good={r.good}/{r.trials} fraction={r.fraction:.4f}{bound}")
    print(f"wrote {csv_path}, {json_path}, {manifest_path}")
    return 0


# --------------------------------------------------------------------------
# Argument parsing
# --------------------------------------------------------------------------


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="urysohn",
        description="Finite metric spaces, continuous-logic sentences, and concentration experiments.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check a .fms distance matrix file")
    p.add_argument("path")
    p.add_argument("--pseudometric", action="store_true", help="allow zero distances")
    p.set_defaults(func=_cmd_validate)

    p = sub.add_parser("eval", help="evaluate a sentence on a .fms space")
    p.add_argument("sentence", help="sentence text, or @file to read it from a file")
    p.add_argument("space", help=".fms file")
    p.add_argument("--sampled", type=int, default=None, metavar="S",
                   help="restrict quantifiers to S random points")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--pseudometric", action="store_true")
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("gen-approx", help="generate a Urysohn-sphere approximation")
    p.add_argument("--target-size", type=int, required=True)
    p.add_argument("--max-base", type=int, default=4)
    p.add_argument("--grid", type=int, default=0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None, help=".fms output path (default stdout)")
    p.set_defaults(func=_cmd_gen_approx)

    p = sub.add_parser("gen-space", help="generate a random metric space")
    p.add_argument("--size", type=int, required=True)
    p.add_argument("--grid", type=int, default=0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_gen_space)

    p = sub.add_parser("bound", help="failure bound C(m,n)*(1-p)^floor((m-n)/k)")
    p.add_argument("m", type=int)
    p.add_argument("n", type=int)
    p.add_argument("k", type=int)
    p.add_argument("p", type=float)
    p.set_defaults(func=_cmd_bound)

    p = sub.add_parser("experiment", help="run a Monte Carlo experiment from a JSON config")
    psub = p.add_subparsers(dest="kind", required=True)
    for kind, blurb in (
        ("theorem23", "concentration of a kind sentence below epsilon"),
        ("zeroone", "concentration of any sentence around its host value"),
    ):
        pk = psub.add_parser(kind, help=blurb)
        pk.add_argument("config", help="JSON config path")
        pk.add_argument("--out-dir", default=None)
        pk.add_argument("--seed", type=int, default=None, help="override the config seed")
        pk.set_defaults(func=_cmd_experiment)

    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (ValueError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
