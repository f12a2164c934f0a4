from __future__ import annotations

import argparse
import json
import logging
import sys
from collections.abc import Callable
from dataclasses import replace
from typing import Any, NoReturn

from src.cli.documents import MatrixDocument, read_document
from src.cli.error_handler import UsageError, VerificationFailed
from src.config.settings import Settings, validate_settings
from src.core.canonical import (
    PARAMETER_SAMPLES,
    CanonicalClass,
    ClassificationReport,
    UnknownClassTag,
    canonical_matrix,
    classify,
    format_param,
    parse_tag,
)
from src.core.closure_graph import (
    Direction,
    Level,
    export,
    graph_for,
    reach_set,
    sorted_tags,
)
from src.core.deformation import codimension, miniversal_pattern
from src.services.verification import Suite, VerifyConfig, run_suite

logger = logging.getLogger(__name__)

Handler = Callable[[argparse.Namespace], int]


class CongruaArgumentParser(argparse.ArgumentParser):
    def error(self, message: str) -> NoReturn:
        self.print_usage(sys.stderr)
        raise UsageError(message)


def parse_param(text: str) -> complex:
    """``re,im`` or a single complex token such as ``2``, ``0.5i`` or ``1+1i``."""
    parts = [part.strip() for part in text.split(",")]
    try:
        if len(parts) == 2:
            return complex(float(parts[0]), float(parts[1]))
        if len(parts) == 1:
            return complex(parts[0].replace("i", "j"))
    except ValueError as error:
        raise UsageError(f"cannot read parameter {text!r}") from error
    raise UsageError(f"cannot read parameter {text!r}; expected re,im")


def _write(text: str) -> None:
    sys.stdout.write(text if text.endswith("\n") else text + "\n")


def _dump(payload: Any) -> str:
    return json.dumps(payload, indent=2, sort_keys=True, ensure_ascii=False) + "\n"


def _format_matrix(matrix: Any) -> list[str]:
    return ["  ".join(format_param(value) for value in row) for row in matrix]


class CliHandlers:
    def __init__(self, settings: Settings) -> None:
        self._settings = settings

    @property
    def settings(self) -> Settings:
        return self._settings

    def _json(self, args: argparse.Namespace) -> bool:
        return (args.output_format or self._settings.output_format) == "json"

    def _class_from(self, text: str, param_text: str | None) -> CanonicalClass:
        tag = parse_tag(text)
        param: complex | None = None
        if tag.is_family:
            param = parse_param(param_text) if param_text else PARAMETER_SAMPLES[1]
        elif param_text:
            raise UsageError(f"class {tag.label} takes no parameter")
        return CanonicalClass(tag, param)

    # ── classify ─────────────────────────────────────────────────────────────
    def classify(self, args: argparse.Namespace) -> int:
        document = read_document(args.input)
        tol = self._settings.tolerance()
        report = classify(document.entries, tol)
        codim = codimension(canonical_matrix(report.cls), tol)
        pattern = miniversal_pattern(report.cls).render().splitlines()
        if self._json(args):
            _write(_dump({**report.to_dict(), "codim": codim, "pattern": pattern}))
        else:
            _write(_classification_text(report, codim, pattern))
        return 0

    # ── catalog ──────────────────────────────────────────────────────────────
    def canonical(self, args: argparse.Namespace) -> int:
        c = self._class_from(args.tag, args.param)
        matrix = canonical_matrix(c)
        if self._json(args):
            payload = MatrixDocument(n=c.n, entries=matrix).to_dict()
            _write(_dump({**payload, "class": c.label, "param": _param_pair(c.param)}))
        else:
            _write("\n".join(_format_matrix(matrix)))
        return 0

    def codim(self, args: argparse.Namespace) -> int:
        tol = self._settings.tolerance()
        try:
            c = self._class_from(args.target, args.param)
            value = codimension(canonical_matrix(c), tol)
            subject = c.label
        except UnknownClassTag:
            value = codimension(read_document(args.target).entries, tol)
            subject = "matrix"
        if self._json(args):
            _write(_dump({"subject": subject, "codim": value}))
        else:
            _write(str(value))
        return 0

    def pattern(self, args: argparse.Namespace) -> int:
        c = self._class_from(args.tag, args.param)
        pattern = miniversal_pattern(c)
        if self._json(args):
            stars = [[row + 1, column + 1] for row, column in pattern.stars]
            payload = {"class": c.label, "stars": stars, "pattern": pattern.render().splitlines()}
            _write(_dump(payload))
        else:
            _write(pattern.render())
        return 0

    # ── graphs ───────────────────────────────────────────────────────────────
    def graph(self, args: argparse.Namespace) -> int:
        _write(export(graph_for(args.level, args.n), args.format))
        return 0

    def reach(self, args: argparse.Namespace) -> int:
        g = graph_for(args.level, args.n)
        tags = sorted_tags(g, reach_set(g, args.tag, args.direction))
        labels = [g.vertex(tag).label for tag in tags]
        if self._json(args):
            payload = {
                "tag": g.vertex(args.tag).label,
                "direction": args.direction,
                "level": args.level,
                "n": args.n,
                "reach": labels,
            }
            _write(_dump(payload))
        else:
            _write("\n".join(labels))
        return 0

    # ── verification ─────────────────────────────────────────────────────────
    def verify(self, args: argparse.Namespace) -> int:
        settings = validate_settings(
            replace(
                self._settings,
                trials=args.trials if args.trials is not None else self._settings.trials,
                epsilon=args.eps if args.eps is not None else self._settings.epsilon,
                seed=args.seed if args.seed is not None else self._settings.seed,
            )
        )
        config = VerifyConfig(
            trials=settings.trials,
            eps=settings.epsilon,
            rng=settings.rng(),
            tol=settings.tolerance(),
        )
        report = run_suite(args.suite, config)
        if self._json(args):
            _write(_dump(report.to_dict()))
        else:
            lines = [
                f"{check.status.value:8} {check.name}  {check.detail}".rstrip()
                for check in report.checks
            ]
            lines.append(
                f"suite={report.suite} checks={len(report.checks)} violations={report.violations}"
            )
            _write("\n".join(lines))
        if not report.ok:
            raise VerificationFailed(report.suite, report.violations)
        return 0


def _param_pair(param: complex | None) -> list[float] | None:
    return None if param is None else [param.real, param.imag]


def _classification_text(report: ClassificationReport, codim: int, pattern: list[str]) -> str:
    profile = report.profile
    spectrum = "-"
    if report.spectrum is not None:
        spectrum = ", ".join(format_param(value) for value in report.spectrum)
    lines = [
        f"class: {report.cls.label}",
        f"param: {'-' if report.cls.param is None else format_param(report.cls.param)}",
        f"codim: {codim}",
        "pattern:",
        *(f"  {row}" for row in pattern),
        f"rank: {profile.rank}  sym_rank: {profile.sym_rank}  skew_rank: {profile.skew_rank}",
        f"spectrum: {spectrum}",
        f"warnings: {', '.join(report.warnings) if report.warnings else 'none'}",
    ]
    return "\n".join(lines)


def _common_options() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument(
        "--json",
        dest="output_format",
        action="store_const",
        const="json",
        default=None,
        help="machine-readable output",
    )
    common.add_argument("--rank-tol", type=float, default=None)
    common.add_argument("--eig-tol", type=float, default=None)
    return common


def build_parser() -> CongruaArgumentParser:
    parser = CongruaArgumentParser(
        prog="congrua",
        description="Congruence canonical forms and closure graphs of small complex matrices.",
    )
    commands = parser.add_subparsers(dest="command", required=True)
    common = _common_options()

    classify_cmd = commands.add_parser("classify", parents=[common], help="classify a matrix")
    classify_cmd.add_argument("input", help="matrix file, literal matrix text, or - for stdin")

    for name, help_text in (
        ("canonical", "print the canonical matrix of a class"),
        ("pattern", "print the miniversal deformation pattern of a class"),
    ):
        command = commands.add_parser(name, parents=[common], help=help_text)
        command.add_argument("tag")
        command.add_argument("--param", help="family parameter as re,im")

    codim_cmd = commands.add_parser(
        "codim", parents=[common], help="codimension of a class or matrix"
    )
    codim_cmd.add_argument("target", help="class tag, matrix file, literal matrix text, or -")
    codim_cmd.add_argument("--param", help="family parameter as re,im")

    graph_cmd = commands.add_parser("graph", parents=[common], help="export a closure graph")
    graph_cmd.add_argument("level", choices=[level.value for level in Level])
    graph_cmd.add_argument("--n", type=int, choices=(2, 3), required=True)
    graph_cmd.add_argument("--format", choices=("dot", "json"), default="json")

    reach_cmd = commands.add_parser(
        "reach", parents=[common], help="up-set or down-set of a vertex"
    )
    reach_cmd.add_argument("tag")
    reach_cmd.add_argument("--direction", choices=[d.value for d in Direction], default="up")
    reach_cmd.add_argument("--level", choices=[level.value for level in Level], default="classes")
    reach_cmd.add_argument("--n", type=int, choices=(2, 3), required=True)

    verify_cmd = commands.add_parser("verify", parents=[common], help="run an acceptance suite")
    verify_cmd.add_argument("suite", choices=[suite.value for suite in Suite])
    verify_cmd.add_argument("--trials", type=int, default=None)
    verify_cmd.add_argument("--eps", type=float, default=None)
    verify_cmd.add_argument("--seed", type=int, default=None)

    return parser


def register_commands(handlers: CliHandlers) -> dict[str, Handler]:
    return {
        "classify": handlers.classify,
        "canonical": handlers.canonical,
        "codim": handlers.codim,
        "pattern": handlers.pattern,
        "graph": handlers.graph,
        "reach": handlers.reach,
        "verify": handlers.verify,
    }


def apply_overrides(settings: Settings, args: argparse.Namespace) -> Settings:
    """CLI flags win over environment settings, field by field."""
    overrides: dict[str, Any] = {}
    if args.rank_tol is not None:
        overrides["rank_tol"] = args.rank_tol
    if args.eig_tol is not None:
        overrides["eig_tol"] = args.eig_tol
    if args.output_format is not None:
        overrides["output_format"] = args.output_format
    return validate_settings(replace(settings, **overrides)) if overrides else settings


def run(settings: Settings, argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    handlers = CliHandlers(apply_overrides(settings, args))
    logger.info("cli_command command=%s", args.command)
    return register_commands(handlers)[args.command](args)

