"""layerpm command-line interface.

Exit codes: 0 ok, 1 unknown package / bad request, 2 cycle or unknown dep,
3 missing external or lock conflict, 4 build failure, 5 manifest or probe
parse error, 6 state corrupt or locked.

Human output goes to stdout, diagnostics to stderr; --porcelain switches
stdout to the canonical line-oriented serializations. In dependency-path
and graph output an edge `a -> b` reads "a depends on b".
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

from layerpm import executor, planner, resolver, store
from layerpm.errors import LayerpmError, MissingExternalError
from layerpm.pkgmap import Diagnostic, PackageMap, parse_map, validate_map
from layerpm.resolver import POLICIES, Request, ResolutionReport, SystemProbe

EXIT_CODES = {
    "E_UNKNOWN_PKG": 1,
    "E_NOT_ENABLED": 1,
    "E_DISABLED_REQUIRED": 1,
    "E_CYCLE": 2,
    "E_UNKNOWN_DEP": 2,
    "E_MISSING_EXTERNAL": 3,
    "E_LOCK_CONFLICT": 3,
    "E_SYNTAX": 5,
    "E_DUP": 5,
    "E_SELF": 5,
    "E_CORE_DEFAULT": 5,
    "E_PROBE": 5,
    "E_STATE_CORRUPT": 6,
    "E_STATE_LOCKED": 6,
}


class _DiagFailure(Exception):
    """Manifest diagnostics that should be printed and mapped to an exit
    code without a traceback."""

    def __init__(self, diags: list[Diagnostic], exit_code: int):
        super().__init__(f"{len(diags)} diagnostic(s)")
        self.diags = diags
        self.exit_code = exit_code


def _positive_int(value: str) -> int:
    number = int(value)
    if number < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return number


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--map", default="packagemap.txt", metavar="FILE",
                        help="package map manifest (default: packagemap.txt)")
    common.add_argument("--state", default=None, metavar="DIR",
                        help="state directory (default: $LAYERPM_STATE or .layerpm)")
    common.add_argument("--probe", default=None, metavar="FILE",
                        help="system probe file: NAME<TAB>provenance per line")
    common.add_argument("--porcelain", action="store_true",
                        help="machine-readable output")

    res_opts = argparse.ArgumentParser(add_help=False)
    res_opts.add_argument("--no-defaults", action="store_true",
                          help="do not enable default-on packages")
    res_opts.add_argument("--disable", action="append", default=[], metavar="PKG",
                          help="fail if PKG ends up in the enabled closure")
    res_opts.add_argument("--policy", choices=POLICIES, default="system_first",
                          help="external resolution policy (default: system_first)")

    build_opts = argparse.ArgumentParser(add_help=False)
    build_opts.add_argument("--jobs", type=_positive_int, default=1, metavar="N",
                            help="concurrent builds within a layer")
    build_opts.add_argument("--dry-run", action="store_true",
                            help="print the plan and resolutions; change nothing")
    build_opts.add_argument("--fail-fast", action="store_true",
                            help="stop scheduling after the first failure")
    build_opts.add_argument("--relock", action="store_true",
                            help="ignore the lockfile and re-resolve externals")

    parser = argparse.ArgumentParser(
        prog="layerpm",
        description="Layered, lazy-install package manager over a declarative package map.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("validate", parents=[common], help="parse and validate the package map")

    p = sub.add_parser("resolve", parents=[common, res_opts],
                       help="print the enabled closure and build order")
    p.add_argument("packages", nargs="*", metavar="PKG")

    p = sub.add_parser("plan", parents=[common, res_opts],
                       help="print the incremental build plan")
    p.add_argument("packages", nargs="*", metavar="PKG")

    p = sub.add_parser("build", parents=[common, res_opts, build_opts],
                       help="plan and execute")
    p.add_argument("packages", nargs="*", metavar="PKG")

    p = sub.add_parser("add", parents=[common, res_opts, build_opts],
                       help="lazy-install: build exactly the named packages (and deps)")
    p.add_argument("packages", nargs="+", metavar="PKG")

    p = sub.add_parser("why", parents=[common],
                       help="show dependency paths from the given request to a package")
    p.add_argument("package", metavar="PKG")
    p.add_argument("--given", nargs="+", required=True, metavar="PKG",
                   help="the requested packages")

    p = sub.add_parser("graph", parents=[common, res_opts],
                       help="export the enabled closure as Graphviz DOT")
    p.add_argument("packages", nargs="*", metavar="PKG")
    p.add_argument("--out", default=None, metavar="FILE", help="write DOT here instead of stdout")

    sub.add_parser("list", parents=[common], help="list built packages from the state")
    return parser


# ---------------------------------------------------------------------------
# shared plumbing

def _state_dir(args: argparse.Namespace) -> Path:
    if args.state:
        return Path(args.state)
    env = os.environ.get("LAYERPM_STATE")
    return Path(env) if env else Path(".layerpm")


def _print_diags(args: argparse.Namespace, diags: list[Diagnostic]) -> None:
    for diag in diags:
        if args.porcelain:
            print(f"{diag.severity}\t{diag.code}\t{diag.line}\t{diag.message}", file=sys.stderr)
        else:
            print(diag.render(), file=sys.stderr)


def _load_valid_map(args: argparse.Namespace) -> PackageMap:
    path = Path(args.map)
    if not path.exists():
        raise _DiagFailure(
            [Diagnostic("error", "E_SYNTAX", f"map file not found: {path}", 0)], 5
        )
    pkg_map, diags = parse_map(path.read_text(encoding="utf-8"))
    if pkg_map is None:
        raise _DiagFailure(diags, 5)
    vdiags = validate_map(pkg_map)
    if any(d.severity == "error" for d in vdiags):
        raise _DiagFailure(diags + vdiags, 2)
    return pkg_map


def _probe(args: argparse.Namespace) -> SystemProbe:
    if args.probe is None:
        return SystemProbe({})
    path = Path(args.probe)
    if not path.exists():
        raise _DiagFailure(
            [Diagnostic("error", "E_PROBE", f"probe file not found: {path}", 0)], 5
        )
    return SystemProbe.parse(path.read_text(encoding="utf-8"))


def _resolve(
    args: argparse.Namespace,
    enable: list[str],
    include_defaults: bool,
    relock: bool = False,
) -> ResolutionReport:
    pkg_map = _load_valid_map(args)
    probe = _probe(args)
    lock = None
    if not relock:
        lock = store.read_lockfile(_state_dir(args)).resolutions or None
    request = Request(
        enable=frozenset(enable),
        disable=frozenset(args.disable) if hasattr(args, "disable") else frozenset(),
        include_defaults=include_defaults,
    )
    policy = getattr(args, "policy", "system_first")
    return resolver.resolve(pkg_map, request, probe, policy, lock=lock)


def _print_report(args: argparse.Namespace, report: ResolutionReport) -> None:
    if args.porcelain:
        sys.stdout.write(resolver.render_report(report))
        return
    print("enabled: " + " ".join(sorted(report.enabled)))
    print("order: " + " ".join(report.order))
    for name in sorted(report.externals):
        res = report.externals[name]
        print(f"external {res.name}: {res.source} {res.provenance}".rstrip())


# ---------------------------------------------------------------------------
# commands

def _cmd_validate(args: argparse.Namespace) -> int:
    path = Path(args.map)
    if not path.exists():
        raise _DiagFailure([Diagnostic("error", "E_SYNTAX", f"map file not found: {path}", 0)], 5)
    pkg_map, diags = parse_map(path.read_text(encoding="utf-8"))
    if pkg_map is None:
        raise _DiagFailure(diags, 5)
    vdiags = validate_map(pkg_map)
    _print_diags(args, diags + vdiags)
    if any(d.severity == "error" for d in vdiags):
        return 2
    if not args.porcelain:
        print(f"ok: {len(pkg_map.packages)} package(s)")
    return 0


def _cmd_resolve(args: argparse.Namespace) -> int:
    try:
        report = _resolve(args, args.packages, not args.no_defaults)
    except MissingExternalError as err:
        if err.report is not None:
            _print_report(args, err.report)
        print(f"error: {err.code}: {err}", file=sys.stderr)
        return EXIT_CODES[err.code]
    _print_report(args, report)
    return 0


def _cmd_plan(args: argparse.Namespace) -> int:
    report = _resolve(args, args.packages, not args.no_defaults)
    state = store.load_state(_state_dir(args))
    build_plan = planner.plan(report, state)
    text = planner.serialize_plan(build_plan)
    if text:
        sys.stdout.write(text)
    elif not args.porcelain:
        print("nothing to build")
    return 0


def _run_build(args: argparse.Namespace, enable: list[str], include_defaults: bool) -> int:
    report = _resolve(args, enable, include_defaults, relock=args.relock)
    state_dir = _state_dir(args)
    state = store.load_state(state_dir)
    build_plan = planner.plan(report, state)

    if args.dry_run:
        sys.stdout.write(executor.dry_run(build_plan))
        return 0

    resolved = {
        name: (res.source, res.provenance) for name, res in report.externals.items()
    }
    lock = store.read_lockfile(state_dir).merged_with(resolved)
    store.write_lockfile(state_dir, lock)

    if build_plan.is_empty:
        print("nothing to build")
        return 0

    exec_report = executor.execute(
        build_plan,
        executor.ShellRunner(state_dir),
        state,
        jobs=args.jobs,
        fail_fast=args.fail_fast,
    )
    for name in build_plan.packages():
        result = exec_report.results[name]
        if args.porcelain:
            print(f"{result.outcome} {name}")
        elif result.outcome == "skipped":
            print(f"skipped {name}")
        else:
            print(f"{result.outcome} {name} ({result.wall_time:.2f}s)")
        if result.outcome == "failed" and result.log.strip():
            print(f"--- log for {name} ---\n{result.log.rstrip()}", file=sys.stderr)
    if not args.porcelain:
        built = len(exec_report.names("built"))
        failed = len(exec_report.names("failed"))
        skipped = len(exec_report.names("skipped"))
        print(f"built {built}, failed {failed}, skipped {skipped}")
    return 0 if exec_report.ok else 4


def _cmd_build(args: argparse.Namespace) -> int:
    return _run_build(args, args.packages, not args.no_defaults)


def _cmd_add(args: argparse.Namespace) -> int:
    # lazy-install: exactly the named packages plus their closure; already
    # up-to-date packages make this a successful no-op
    return _run_build(args, args.packages, include_defaults=False)


def _cmd_why(args: argparse.Namespace) -> int:
    try:
        report = _resolve(args, args.given, include_defaults=False)
    except MissingExternalError as err:
        report = err.report  # paths do not depend on external availability
        if report is None:
            raise
    pkg_map = report.pkgmap
    result = resolver.why(pkg_map, report, args.package)
    _print_diags(args, list(result.diagnostics))
    for path in result.paths:
        print(" -> ".join(path))
    return 0


def _cmd_graph(args: argparse.Namespace) -> int:
    try:
        report = _resolve(args, args.packages, not args.no_defaults)
    except MissingExternalError as err:
        report = err.report
        if report is None:
            raise
    dot = resolver.export_dot(report)
    if args.out:
        Path(args.out).write_text(dot, encoding="utf-8")
    else:
        sys.stdout.write(dot)
    return 0


def _cmd_list(args: argparse.Namespace) -> int:
    state = store.load_state(_state_dir(args))
    for name, entry in sorted(state.entries.items()):
        print(f"{name} {entry.manifest_hash} {entry.built_at}")
    return 0


_COMMANDS = {
    "validate": _cmd_validate,
    "resolve": _cmd_resolve,
    "plan": _cmd_plan,
    "build": _cmd_build,
    "add": _cmd_add,
    "why": _cmd_why,
    "graph": _cmd_graph,
    "list": _cmd_list,
}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except _DiagFailure as failure:
        _print_diags(args, failure.diags)
        return failure.exit_code
    except LayerpmError as err:
        print(f"error: {err.code}: {err}", file=sys.stderr)
        return EXIT_CODES.get(err.code, 1)


def main_entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    main_entry()
