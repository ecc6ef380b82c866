"""Command line front end: validate, translate, check.

Exit codes: 0 success/consistent, 1 invalid input or inconsistent test
cases, 2 I/O and usage errors (missing files, unbound diagrams), 3
inconclusive analysis (search bounds hit).
"""

from __future__ import annotations

import argparse
import hashlib
import itertools
import os
import sys

from . import export, integrate, model, parser, translate

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_USAGE = 2
EXIT_INCONCLUSIVE = 3


def _want_color(stream) -> bool:
    mode = os.environ.get("VIRTINT_COLOR", "auto")
    if mode in ("always", "1"):
        return True
    if mode in ("never", "0"):
        return False
    return hasattr(stream, "isatty") and stream.isatty()


class _Printer:
    def __init__(self, stream=None):
        self.stream = stream or sys.stdout
        self.color = _want_color(self.stream)

    def _paint(self, text, code):
        if self.color:
            return "\x1b[%sm%s\x1b[0m" % (code, text)
        return text

    def line(self, text=""):
        print(text, file=self.stream)

    def good(self, text):
        self.line(self._paint(text, "32"))

    def bad(self, text):
        self.line(self._paint(text, "31"))

    def warn(self, text):
        self.line(self._paint(text, "33"))


def _read(path: str) -> str:
    with open(path, "r", encoding="utf-8") as fp:
        return fp.read()


def _sha256(path: str) -> str:
    with open(path, "rb") as fp:
        return hashlib.sha256(fp.read()).hexdigest()


def _load_tcsd(path: str):
    """Parse and validate one diagram file; returns (result, violations)."""
    text = _read(path)
    parsed = parser.parse_tcsd(text, filename=path)
    checked = model.validate(parsed.tcsd)
    return parsed, checked


def _print_violations(out: _Printer, path: str, parsed, checked):
    for violation in checked.violations:
        span = None
        for element in violation.elements:
            if element in parsed.spans:
                span = parsed.spans[element]
                break
        where = str(span) if span else path
        out.bad("%s: %s" % (where, violation))


def cmd_validate(args, out: _Printer) -> int:
    status = EXIT_OK
    for path in args.files:
        try:
            parsed, checked = _load_tcsd(path)
        except OSError as exc:
            out.bad("%s: %s" % (path, exc.strerror or exc))
            return EXIT_USAGE
        except parser.ParseError as exc:
            out.bad(str(exc))
            status = max(status, EXIT_FAIL)
            continue
        if checked.ok:
            out.good("ok %s (%s)" % (path, parsed.tcsd.base.name))
        else:
            _print_violations(out, path, parsed, checked)
            status = max(status, EXIT_FAIL)
    return status


def _check_output_paths(args, inputs, out: _Printer):
    outputs = [p for p in (getattr(args, "dot", None), getattr(args, "tapaal", None),
                           getattr(args, "report", None)) if p]
    for path in outputs:
        if os.path.abspath(path) in {os.path.abspath(i) for i in inputs}:
            out.bad("output path %s would overwrite an input" % path)
            return False
    return True


def cmd_translate(args, out: _Printer) -> int:
    if not _check_output_paths(args, [args.file], out):
        return EXIT_USAGE
    try:
        parsed, checked = _load_tcsd(args.file)
    except OSError as exc:
        out.bad("%s: %s" % (args.file, exc.strerror or exc))
        return EXIT_USAGE
    except parser.ParseError as exc:
        out.bad(str(exc))
        return EXIT_FAIL
    if not checked.ok:
        _print_violations(out, args.file, parsed, checked)
        return EXIT_FAIL
    unit = translate.translate(checked.tcsd)
    if args.dot:
        with open(args.dot, "w", encoding="utf-8") as fp:
            fp.write(export.to_dot(unit.net, unit.m0))
        out.line("wrote %s" % args.dot)
    if args.tapaal:
        with open(args.tapaal, "w", encoding="utf-8") as fp:
            fp.write(export.to_tapaal_xml(unit))
        out.line("wrote %s" % args.tapaal)
    if not args.dot and not args.tapaal:
        out.line(export.to_dot(unit.net, unit.m0))
    return EXIT_OK


def _human_status(status: str) -> str:
    return status.replace("-", " ")


def _run_check(units, imap, args, out: _Printer):
    report = integrate.check_consistency(
        units, imap,
        policy=args.policy,
        require_all=args.require_all,
        max_states=args.max_states,
        max_total_delay=args.max_delay,
        max_matchings=args.max_matchings,
    )
    for n, v in enumerate(report.verdicts):
        line = "[%d] %s" % (n, _human_status(v.status))
        if v.blocking:
            line += "  blocking: %s" % ", ".join(v.blocking)
        if v.status == integrate.CONSISTENT and v.witness is not None:
            line += "  witness: %s" % " ".join(
                "+%d %s" % (s.delay, s.label or s.transition) for s in v.witness
            )
        (out.good if v.status == integrate.CONSISTENT else out.bad)(line)
    if report.matchings_truncated:
        out.warn("matching enumeration truncated at --max-matchings=%d"
                 % args.max_matchings)
    summary = "overall: %s" % report.overall
    classes = report.failure_classes
    if report.overall == "inconsistent" and classes:
        summary += " (%s)" % ", ".join(_human_status(c) for c in classes)
    (out.good if report.overall == "consistent" else out.bad)(summary)
    return report


def cmd_check(args, out: _Printer) -> int:
    inputs = [args.arch] + list(args.files)
    if not _check_output_paths(args, inputs, out):
        return EXIT_USAGE
    try:
        arch = parser.parse_architecture(_read(args.arch), filename=args.arch)
        loaded = []
        for path in args.files:
            parsed, checked = _load_tcsd(path)
            if not checked.ok:
                _print_violations(out, path, parsed, checked)
                return EXIT_USAGE
            loaded.append(checked.tcsd)
    except OSError as exc:
        out.bad("%s" % exc)
        return EXIT_USAGE
    except parser.ParseError as exc:
        out.bad(str(exc))
        return EXIT_USAGE

    try:
        imap = integrate.build_instance_map(arch, loaded)
    except integrate.IntegrationError as exc:
        out.bad(str(exc))
        return EXIT_USAGE
    units = [translate.translate(t) for t in loaded]

    by_component: dict[str, list] = {}
    for u in units:
        by_component.setdefault(imap.sut_components[u.name], []).append(u)
    multi = {c: us for c, us in by_component.items() if len(us) > 1}

    if multi and not args.cross_product:
        out.bad("two diagrams test the same component: %s (use --cross-product)"
                % ", ".join(sorted(multi)))
        return EXIT_USAGE

    if not multi:
        try:
            report = _run_check(units, imap, args, out)
        except integrate.IntegrationError as exc:
            out.bad(str(exc))
            return EXIT_USAGE
        if args.report:
            doc = export.to_report_json(
                report, [(p, _sha256(p)) for p in inputs])
            with open(args.report, "w", encoding="utf-8") as fp:
                fp.write(doc)
            out.line("wrote %s" % args.report)
        if report.overall == "consistent":
            return EXIT_OK
        return EXIT_INCONCLUSIVE if report.overall == "inconclusive" else EXIT_FAIL

    if args.report:
        out.bad("--report is not supported together with --cross-product")
        return EXIT_USAGE
    components = sorted(by_component)
    overall = EXIT_OK
    for selection in itertools.product(*(by_component[c] for c in components)):
        out.line("== selection: %s" % ", ".join(u.name for u in selection))
        try:
            report = _run_check(list(selection), imap, args, out)
        except integrate.IntegrationError as exc:
            out.bad(str(exc))
            return EXIT_USAGE
        if report.overall == "inconsistent":
            overall = EXIT_FAIL
        elif report.overall == "inconclusive" and overall == EXIT_OK:
            overall = EXIT_INCONCLUSIVE
    return overall


def build_arg_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="virtint",
        description="Virtual integration analysis for timed test-case "
                    "sequence diagrams.")
    sub = ap.add_subparsers(dest="command", required=True)

    p_val = sub.add_parser("validate", help="check .tcsd files for well-formedness")
    p_val.add_argument("files", nargs="+", metavar="FILE.tcsd")

    p_tr = sub.add_parser("translate", help="compile one .tcsd into a timed net")
    p_tr.add_argument("file", metavar="FILE.tcsd")
    p_tr.add_argument("--dot", metavar="OUT.dot", help="write a graphviz drawing")
    p_tr.add_argument("--tapaal", metavar="OUT.xml", help="write interchange XML")

    p_chk = sub.add_parser("check", help="merge diagrams and decide consistency")
    p_chk.add_argument("files", nargs="+", metavar="FILE.tcsd")
    p_chk.add_argument("--arch", required=True, metavar="FILE.arch")
    p_chk.add_argument("--policy", choices=["maximal", "strict"], default="maximal")
    p_chk.add_argument("--require-all", action="store_true",
                       help="demand that every synchronization combination passes")
    p_chk.add_argument("--cross-product", action="store_true",
                       help="iterate runs over multiple diagrams per component")
    p_chk.add_argument("--max-states", type=int, default=1_000_000)
    p_chk.add_argument("--max-delay", type=int, default=None,
                       help="cap on the total delay along one path (default: unlimited)")
    p_chk.add_argument("--max-matchings", type=int, default=64)
    p_chk.add_argument("--report", metavar="OUT.json")
    return ap


def main(argv=None) -> int:
    args = build_arg_parser().parse_args(argv)
    out = _Printer()
    for name in ("max_states", "max_matchings"):
        if getattr(args, name, 1) is not None and getattr(args, name, 1) < 1:
            out.bad("--%s must be positive" % name.replace("_", "-"))
            return EXIT_USAGE
    if getattr(args, "max_delay", None) is not None and args.max_delay < 0:
        out.bad("--max-delay must be >= 0")
        return EXIT_USAGE
    try:
        if args.command == "validate":
            return cmd_validate(args, out)
        if args.command == "translate":
            return cmd_translate(args, out)
        return cmd_check(args, out)
    except translate.TranslationError as exc:
        out.bad("translation failed: %s" % exc)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
