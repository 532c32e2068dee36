"""Command-line entry point: ``wavediv <command> [--config FILE] [--key value ...]``.

Exit status is 0 on success, 1 on a usage error and 2 on a runtime error.
"""

import argparse
import json
import sys
from dataclasses import fields, replace

from .harness import StudyConfig, _coerce, load_config, run_study

COMMANDS = {
    "estimate": "estimate",
    "test": "test",
    "mc-study": "mc-normality",
    "rate-study": "rate-study",
    "density": "density-dump",
    "oracle": "oracle",
}

_HELP = {
    "estimate": "estimate a divergence from two samples, with a plug-in confidence interval",
    "test": "standardized statistic and p-value against a reference value (default 0)",
    "mc-study": "Monte Carlo normality and coverage study against the oracle reference",
    "rate-study": "error and sup-norm rate study over a list of sample sizes",
    "density": "fit the wavelet density estimator and dump it on a grid",
    "oracle": "closed-form and quadrature reference values",
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.format_usage()}{self.prog}: error: {message}")


def build_parser():
    parser = _Parser(prog="wavediv", description="Wavelet plug-in divergence estimation and inference.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name, help_text in _HELP.items():
        p = sub.add_parser(name, help=help_text, description=help_text)
        p.add_argument("--config", help="flat key = value configuration file")
        p.add_argument("--out", help="write the JSON report here instead of standard output")
        if name == "mc-study":
            p.add_argument("--mode", choices=("mc-normality", "mc-coverage"), default=None)
        for fld in fields(StudyConfig):
            if fld.name in ("mode", "output"):
                continue
            p.add_argument("--" + fld.name.replace("_", "-"), dest=fld.name, default=None, metavar="VALUE")
    return parser


def _config(args):
    overrides = {f.name: getattr(args, f.name) for f in fields(StudyConfig) if getattr(args, f.name, None) is not None}
    overrides["mode"] = getattr(args, "mode", None) or COMMANDS[args.command]
    if args.command == "oracle" and "epsilon" not in overrides and args.config is None:
        overrides["epsilon"] = "0"
    cfg = load_config(args.config, overrides)
    if args.out:
        cfg = replace(cfg, output=_coerce("output", args.out))
    return cfg


def main(argv=None):
    argv = sys.argv[1:] if argv is None else argv
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return 1
    except SystemExit as exc:  # --help
        return 0 if not exc.code else 1
    try:
        cfg = _config(args)
        report = run_study(cfg)
    except Exception as exc:  # every failure after parsing is a runtime error
        print(f"wavediv {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    text = json.dumps(report, indent=2, sort_keys=True) + "\n"
    if cfg.output:
        with open(cfg.output, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    if args.command == "test" and report.get("error"):
        print(f"wavediv test: {report['error']['type']}: {report['error']['message']}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
