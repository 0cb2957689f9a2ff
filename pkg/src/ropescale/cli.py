"""ropescale command line.

Exit codes: 0 success, 2 usage error, 3 domain error. Data goes to stdout (or
``--output``); diagnostics go to stderr.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from dataclasses import replace

from . import diagnostics, scaling_laws, variants
from .rope_core import ConfigurationError, RopeConfig, rotary_angles

EXIT_USAGE = 2
EXIT_DOMAIN = 3

DEFAULTS = {
    "d": 128,
    "base": 10000.0,
    "train_len": 4096,
    "tune_len": None,
    "variants": None,
    "format": "json",
    "output": None,
    "seed": 42,
    "stride": 256,
    "max_len": None,
    "sample_count": 16,
    "context_len": None,
    "lengths": None,
    "threads": 1,
}

FLAG_NAMES = {
    "d": "--d",
    "base": "--base",
    "train_len": "--train-len",
    "tune_len": "--tune-len",
    "context_len": "--context-len",
    "stride": "--stride",
    "sample_count": "--samples",
    "max_len": "--max-len",
    "threads": "--threads",
}

VARIANT_HELP = """\
variant shorthand: kind[:param[,param]], stack with '+'
  vanilla | base:B | linear-pi:LAMBDA | ntk-fixed:ALPHA | ntk-dynamic[:T_REF]
  log-scaled[:T_REF] | xpos[:GAMMA[,T_REF]] | truncated:KEEP | position-clamp:INDEX
  e.g. ntk-fixed:8, truncated:92, linear-pi:4, base:500+log-scaled
"""


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _length(text: str) -> int:
    """Token count; ``K`` and ``M`` suffixes are decimal (128K = 128000)."""
    t = text.strip().upper()
    mult = 1
    if t.endswith("K"):
        mult, t = 1000, t[:-1]
    elif t.endswith("M"):
        mult, t = 1000000, t[:-1]
    try:
        value = float(t) * mult
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid length {text!r}") from None
    if not value.is_integer():
        raise argparse.ArgumentTypeError(f"length must be a whole number of tokens: {text!r}")
    return int(value)


def _lengths(text: str) -> list[int]:
    return [_length(p) for p in text.split(",") if p.strip()]


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    g = common.add_argument_group("configuration")
    g.add_argument("--config", help="JSON run-config file; flags override its values")
    g.add_argument("--d", type=int, help="head dimension (default 128)")
    g.add_argument("--base", type=float, help="rotary base (default 10000)")
    g.add_argument("--train-len", dest="train_len", type=_length, help="training length (default 4096)")
    g.add_argument("--tune-len", dest="tune_len", type=_length, help="tuning length (default: train length)")
    g.add_argument("--format", choices=("json", "csv", "table"), help="output format (default json)")
    g.add_argument("--output", "-o", help="write data here instead of stdout")

    parser = _Parser(
        prog="ropescale",
        description="RoPE extrapolation scaling laws and attention-logit diagnostics.",
        epilog=VARIANT_HELP,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    sub.add_parser("predict", parents=[common], help="critical dimension, bases and extrapolation bound")
    sub.add_parser("angles", parents=[common], help="per-pair angle and period table")
    p = sub.add_parser("coverage", parents=[common], help="phase coverage of each pair within a context")
    p.add_argument("--context-len", dest="context_len", type=_length, help="context length (default: train length)")

    p = sub.add_parser("trace", parents=[common], help="reliable/OOD logit trace over distance",
                       epilog=VARIANT_HELP, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--variant", dest="variants", action="append", help="variant shorthand (default vanilla)")
    p.add_argument("--max-len", dest="max_len", type=_length, help="largest distance (default 8x train length)")
    p.add_argument("--stride", type=int, help="distance step (default 256)")
    p.add_argument("--seed", type=int, help="probe seed; 0 = all-ones probe (default 42 or $ROPESCALE_SEED)")
    p.add_argument("--samples", dest="sample_count", type=int, help="probe pairs per distance (default 16)")
    p.add_argument("--threads", type=int, help="worker threads (output does not depend on this)")

    p = sub.add_parser("compare", parents=[common], help="predicted bounds and verdicts for several variants",
                       epilog=VARIANT_HELP, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--variants", dest="variants", nargs="+", help="variant shorthands")
    p.add_argument("--lengths", type=_lengths, nargs="+", help="context lengths, e.g. 16K 128K 256K")
    return parser


# -- option resolution -------------------------------------------------------


def load_config_file(path: str) -> dict:
    try:
        with open(path) as fh:
            data = json.load(fh)
    except OSError as exc:
        raise UsageError(f"--config: cannot read {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise UsageError(f"--config: {path} is not valid JSON: {exc}") from None
    if not isinstance(data, dict):
        raise UsageError(f"--config: {path} must hold a JSON object")
    unknown = sorted(set(data) - set(DEFAULTS))
    if unknown:
        raise UsageError(f"--config: unknown key {unknown[0]!r} in {path}")
    return data


def resolve_options(args: argparse.Namespace) -> dict:
    """Defaults, then $ROPESCALE_SEED, then the config file, then flags."""
    opts = dict(DEFAULTS)
    env_seed = os.environ.get("ROPESCALE_SEED")
    if env_seed is not None:
        try:
            opts["seed"] = int(env_seed)
        except ValueError:
            raise UsageError(f"ROPESCALE_SEED must be an integer, got {env_seed!r}") from None
    if getattr(args, "config", None):
        opts.update(load_config_file(args.config))
    for key in DEFAULTS:
        value = getattr(args, key, None)
        if value is not None:
            opts[key] = value
    if opts["lengths"] is not None:
        flat = []
        for item in opts["lengths"]:
            if isinstance(item, list):
                flat.extend(item)
            elif isinstance(item, str):
                flat.extend(_lengths(item))
            else:
                flat.append(int(item))
        opts["lengths"] = flat
    return opts


def make_config(opts: dict) -> RopeConfig:
    d, base, train, tune = opts["d"], opts["base"], opts["train_len"], opts["tune_len"]
    if not isinstance(d, int) or isinstance(d, bool) or d < 2 or d % 2:
        raise UsageError(f"--d: head dimension must be an even integer >= 2, got {d}")
    if not isinstance(base, (int, float)) or not base > 1 or not math.isfinite(base):
        raise UsageError(f"--base: rotary base must be a finite number > 1, got {base}")
    if not isinstance(train, int) or train < 1:
        raise UsageError(f"--train-len: must be a positive integer, got {train}")
    if tune is not None and (not isinstance(tune, int) or tune < train):
        raise UsageError(f"--tune-len: must be an integer >= train length ({train}), got {tune}")
    for key in ("context_len", "stride", "sample_count", "max_len", "threads"):
        v = opts[key]
        if v is not None and (not isinstance(v, int) or v < 1):
            raise UsageError(f"{FLAG_NAMES[key]}: must be a positive integer, got {v}")
    return RopeConfig(head_dim=d, base=float(base), train_len=train, tune_len=tune)


def parse_variant_list(items) -> list[tuple[str, tuple]]:
    out = []
    for item in items or ["vanilla"]:
        try:
            if isinstance(item, dict):
                stack = (variants.VariantSpec.from_dict(item),)
                name = variants.to_shorthand(stack[0])
            else:
                stack = variants.parse_variant(str(item))
                name = str(item)
        except (variants.SpecificationError, TypeError) as exc:
            raise UsageError(f"--variant: {exc}") from None
        out.append((name, stack))
    return out


# -- rendering ---------------------------------------------------------------


def _text(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return f"{v:.6g}"
    if v is None:
        return "-"
    return str(v)


def render_table(header, rows) -> str:
    cells = [[str(h) for h in header]] + [[_text(v) for v in row] for row in rows]
    widths = [max(len(r[i]) for r in cells) for i in range(len(header))]
    lines = ["  ".join(c.rjust(w) for c, w in zip(r, widths)).rstrip() for r in cells]
    lines.insert(1, "  ".join("-" * w for w in widths))
    return "\n".join(lines) + "\n"


def render(payload: dict, header, rows, fmt: str) -> str:
    if fmt == "json":
        return diagnostics.dumps_json(payload)
    if fmt == "csv":
        return diagnostics.rows_to_csv([dict(zip(header, r)) for r in rows], header)
    return render_table(header, rows)


# -- commands ----------------------------------------------------------------


def cmd_predict(config: RopeConfig, opts: dict) -> str:
    report = scaling_laws.extended_law(config)
    payload = report.to_dict()
    flat = {
        "d": config.head_dim,
        "base": config.base,
        "train_len": config.train_len,
        "tune_len": config.effective_tune_len,
        "critical_dim": report.critical_dim,
        "critical_dim_updated": report.critical_dim_updated,
        "critical_base": report.critical_base,
        "pivot_quarter": report.pivots.quarter,
        "pivot_half": report.pivots.half,
        "pivot_full": report.pivots.full,
        "pivot_flag_quarter": report.pivot_flags[0],
        "pivot_flag_half": report.pivot_flags[1],
        "pivot_flag_full": report.pivot_flags[2],
        "extrapolation_bound": report.extrapolation_bound,
        "branch": report.branch.value,
    }
    if opts["format"] == "table":
        return render_table(("quantity", "value"), list(flat.items()))
    return render(payload, tuple(flat), [tuple(flat.values())], opts["format"])


ANGLE_COLUMNS = ("n", "theta", "period", "covered")


def cmd_angles(config: RopeConfig, opts: dict) -> str:
    angles = rotary_angles(config)
    coverage = diagnostics.phase_coverage(config, config.train_len)
    rows = [
        (n, float(angles.theta[n]), float(angles.period[n]),
         c is diagnostics.PhaseClass.FULL_PERIOD)
        for n, c in enumerate(coverage.per_dim_class)
    ]
    payload = {
        "d": config.head_dim,
        "base": config.base,
        "train_len": config.train_len,
        "rows": [dict(zip(ANGLE_COLUMNS, r)) for r in rows],
    }
    return render(payload, ANGLE_COLUMNS, rows, opts["format"])


def cmd_coverage(config: RopeConfig, opts: dict) -> str:
    context = opts["context_len"] or config.train_len
    report = diagnostics.phase_coverage(config, context)
    if opts["format"] == "csv":
        return diagnostics.coverage_to_csv(report)
    rows = [tuple(r[c] for c in diagnostics.COVERAGE_COLUMNS) for r in report.rows()]
    if opts["format"] == "table":
        return (
            f"context_len={context} covered_count={report.covered_count} "
            f"first_uncovered_pair={_text(report.first_uncovered_pair)}\n"
            + render_table(diagnostics.COVERAGE_COLUMNS, rows)
        )
    return diagnostics.dumps_json(report.to_dict())


def cmd_trace(config: RopeConfig, opts: dict) -> str:
    chosen = parse_variant_list(opts["variants"])
    if len(chosen) != 1:
        raise UsageError("--variant: trace takes one variant (stack with '+')")
    name, stack = chosen[0]
    trace = diagnostics.score_trace(
        config,
        stack,
        max_len=opts["max_len"] or 8 * config.train_len,
        stride=opts["stride"],
        sample_count=opts["sample_count"],
        seed=opts["seed"],
        threads=opts["threads"],
    )
    if opts["format"] == "csv":
        return diagnostics.trace_to_csv(trace)
    if opts["format"] == "table":
        rows = [tuple(r[c] for c in diagnostics.TRACE_COLUMNS) for r in trace.rows()]
        return render_table(diagnostics.TRACE_COLUMNS, rows)
    payload = {"variant": name, "seed": opts["seed"], "sample_count": opts["sample_count"],
               **trace.to_dict()}
    return diagnostics.dumps_json(payload)


NO_BOUND = "no-bound (smaller-base branch)"


def variant_bound(config: RopeConfig, stack) -> tuple[float, scaling_laws.ScalingReport]:
    """Predicted bound for a variant, from its effective base at training time.

    Fixed NTK enlarges the base; linear interpolation stretches positions by
    its ratio. Other kinds keep the base and bound of the underlying config.
    """
    base = config.base
    stretch = 1.0
    for spec in stack:
        if spec.base is not None:
            base = spec.base
        if spec.kind is variants.Kind.NTK_FIXED:
            base *= spec.alpha
        elif spec.kind is variants.Kind.LINEAR_PI:
            stretch *= spec.lam
    report = scaling_laws.extended_law(replace(config, base=base))
    return report.extrapolation_bound * stretch, report


def cmd_compare(config: RopeConfig, opts: dict) -> str:
    chosen = parse_variant_list(opts["variants"])
    lengths = opts["lengths"] or [config.effective_tune_len]
    out_rows = []
    for name, stack in chosen:
        bound, report = variant_bound(config, stack)
        if report.branch is scaling_laws.Branch.SMALLER_OR_EQUAL_BASE:
            verdicts = [NO_BOUND] * len(lengths)
        else:
            verdicts = ["in-bound" if L <= bound else "out-of-bound" for L in lengths]
        out_rows.append({
            "variant": name,
            "base": report.config.base,
            "branch": report.branch.value,
            "extrapolation_bound": bound,
            "verdicts": verdicts,
        })
    payload = {
        "d": config.head_dim,
        "train_len": config.train_len,
        "tune_len": config.effective_tune_len,
        "lengths": lengths,
        "rows": out_rows,
    }
    header = ("variant", "base", "branch", "extrapolation_bound") + tuple(str(L) for L in lengths)
    rows = [
        (r["variant"], r["base"], r["branch"], r["extrapolation_bound"], *r["verdicts"])
        for r in out_rows
    ]
    return render(payload, header, rows, opts["format"])


COMMANDS = {
    "predict": cmd_predict,
    "angles": cmd_angles,
    "coverage": cmd_coverage,
    "trace": cmd_trace,
    "compare": cmd_compare,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        opts = resolve_options(args)
        config = make_config(opts)
        text = COMMANDS[args.command](config, opts)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except (ConfigurationError, variants.SpecificationError, ValueError) as exc:
        print(f"ropescale: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    if opts["output"]:
        with open(opts["output"], "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0


def entry():
    sys.exit(main())


if __name__ == "__main__":
    entry()
