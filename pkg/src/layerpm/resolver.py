"""Resolution: which packages a request enables, in what order, and how
each external dependency is satisfied.

Core packages are unconditional roots of the closure; `requested` records
only what the caller asked for (explicit enables plus default-on packages
when defaults are included). `disable` never shrinks the closure, it is an
assertion: a disabled package showing up in the closure is an error that
names the dependency path pulling it in.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field as dataclass_field
from collections.abc import Iterable, Mapping
from typing import Literal

from layerpm import graph
from layerpm.errors import (
    CycleError,
    DisabledRequiredError,
    LockConflictError,
    MissingExternalError,
    NotEnabledError,
    ProbeError,
    UnknownPackageError,
)
from layerpm.pkgmap import IDENT_RE, Diagnostic, PackageMap

Policy = Literal["system_first", "builtin_first", "system_only"]
Source = Literal["system", "builtin", "missing"]

POLICIES = ("system_first", "builtin_first", "system_only")

WHY_PATH_LIMIT = 1000


@dataclass(frozen=True)
class Request:
    enable: frozenset[str] = frozenset()
    disable: frozenset[str] = frozenset()
    include_defaults: bool = True


@dataclass(frozen=True)
class SystemProbe:
    """Externals the host system provides, with free-text provenance."""

    available: Mapping[str, str] = dataclass_field(default_factory=dict)

    @classmethod
    def parse(cls, text: str) -> "SystemProbe":
        """One external per line: `NAME<TAB>provenance-text`. Blank lines
        and `#` comments are ignored."""
        available: dict[str, str] = {}
        for lineno, raw in enumerate(text.splitlines(), start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            name, _, provenance = line.partition("\t")
            name = name.strip()
            if IDENT_RE.match(name) is None or re.search(r"\s", name):
                raise ProbeError(f"probe line {lineno}: malformed external name '{name}'")
            available[name] = provenance.strip()
        return cls(available)


@dataclass(frozen=True)
class ExternalResolution:
    name: str
    source: Source
    provenance: str


@dataclass(frozen=True)
class ResolutionReport:
    requested: frozenset[str]
    enabled: frozenset[str]
    order: tuple[str, ...]
    edges: frozenset[tuple[str, str]]
    externals: Mapping[str, ExternalResolution]
    pkgmap: PackageMap

    def missing_externals(self) -> list[str]:
        return sorted(n for n, r in self.externals.items() if r.source == "missing")

    def dep_adjacency(self) -> dict[str, list[str]]:
        adj: dict[str, list[str]] = {name: [] for name in self.enabled}
        for frm, to in sorted(self.edges):
            adj[frm].append(to)
        return adj


@dataclass(frozen=True)
class WhyResult:
    paths: tuple[tuple[str, ...], ...]
    diagnostics: tuple[Diagnostic, ...] = ()

    @property
    def truncated(self) -> bool:
        return bool(self.diagnostics)


def resolve(
    pkg_map: PackageMap,
    request: Request,
    probe: SystemProbe | None = None,
    policy: Policy = "system_first",
    lock: Mapping[str, tuple[str, str]] | None = None,
) -> ResolutionReport:
    """Compute the enabled closure, a deterministic build order, and one
    resolution per distinct external.

    `lock` (external name -> (source, provenance), normally a
    Lockfile.resolutions mapping) pins previously recorded resolutions; a
    pinned source that is no longer satisfiable raises LockConflictError.
    Raises MissingExternalError with the report attached when any external
    stays unsatisfied.
    """
    if policy not in POLICIES:
        raise ValueError(f"unknown policy '{policy}'")
    probe = probe or SystemProbe()
    unknown = sorted((request.enable | request.disable) - set(pkg_map.packages))
    if unknown:
        raise UnknownPackageError("unknown package(s): " + ", ".join(unknown))

    cores = {n for n, d in pkg_map.packages.items() if d.kind == "core"}
    defaults = (
        {n for n, d in pkg_map.packages.items() if d.default} if request.include_defaults else set()
    )
    requested = frozenset(request.enable | defaults)
    roots = requested | cores

    dep_graph = graph.DepGraph(pkg_map.packages.keys(), pkg_map.dep_edges())
    enabled = frozenset(dep_graph.closure(roots))

    blocked = sorted(request.disable & enabled)
    if blocked:
        adj = {n: sorted(pkg_map.packages[n].deps) for n in enabled}
        path = graph.shortest_path(adj, roots & enabled, blocked[0]) or [blocked[0]]
        raise DisabledRequiredError(
            f"package '{blocked[0]}' is disabled but required: " + " -> ".join(path),
            path=tuple(path),
        )

    edges = frozenset(
        (name, dep) for name in enabled for dep in pkg_map.packages[name].deps
    )
    order = tuple(topo_order(enabled, edges))
    externals = _resolve_externals(pkg_map, enabled, probe, policy, lock or {})

    report = ResolutionReport(
        requested=requested,
        enabled=enabled,
        order=order,
        edges=edges,
        externals=externals,
        pkgmap=pkg_map,
    )
    missing = report.missing_externals()
    if missing:
        raise MissingExternalError("unresolved external(s): " + ", ".join(missing), report=report)
    return report


def _builtin_providers(pkg_map: PackageMap, enabled: Iterable[str], external: str) -> list[str]:
    return sorted(p for p in enabled if external in pkg_map.packages[p].builtins)


def _resolve_externals(
    pkg_map: PackageMap,
    enabled: frozenset[str],
    probe: SystemProbe,
    policy: Policy,
    lock: Mapping[str, tuple[str, str]],
) -> dict[str, ExternalResolution]:
    wanted = sorted({ext for name in enabled for ext in pkg_map.packages[name].externals})
    resolutions: dict[str, ExternalResolution] = {}
    for ext in wanted:
        if ext in lock:
            resolutions[ext] = _locked_resolution(pkg_map, enabled, probe, ext, lock[ext])
            continue
        providers = _builtin_providers(pkg_map, enabled, ext)
        as_system = (
            ExternalResolution(ext, "system", probe.available[ext]) if ext in probe.available else None
        )
        as_builtin = ExternalResolution(ext, "builtin", providers[0]) if providers else None
        if policy == "system_first":
            chosen = as_system or as_builtin
        elif policy == "builtin_first":
            chosen = as_builtin or as_system
        else:  # system_only
            chosen = as_system
        resolutions[ext] = chosen or ExternalResolution(ext, "missing", "")
    return resolutions


def _locked_resolution(
    pkg_map: PackageMap,
    enabled: frozenset[str],
    probe: SystemProbe,
    ext: str,
    locked: tuple[str, str],
) -> ExternalResolution:
    source, provenance = locked
    if source == "system":
        if ext not in probe.available:
            raise LockConflictError(
                f"lockfile pins external '{ext}' to system but the probe no longer provides it"
                " (use --relock to re-resolve)"
            )
        return ExternalResolution(ext, "system", provenance)
    if source == "builtin":
        providers = _builtin_providers(pkg_map, enabled, ext)
        if not providers:
            raise LockConflictError(
                f"lockfile pins external '{ext}' to builtin but no enabled package provides it"
                " (use --relock to re-resolve)"
            )
        host = provenance if provenance in providers else providers[0]
        return ExternalResolution(ext, "builtin", host)
    raise LockConflictError(f"lockfile has invalid source '{source}' for external '{ext}'")


def topo_order(enabled: Iterable[str], edges: Iterable[tuple[str, str]]) -> list[str]:
    """Kahn order of `enabled` under `edges` ((dependent, dependency)
    pairs): dependencies first, lexicographic among simultaneously ready
    packages. Deterministic; raises CycleError on cyclic input (cannot
    happen for a validated map)."""
    nodes = set(enabled)
    edge_list = list(edges)
    for frm, to in edge_list:
        if frm not in nodes or to not in nodes:
            raise UnknownPackageError(f"edge ({frm}, {to}) leaves the enabled set")
    try:
        return graph.DepGraph(nodes, edge_list).lex_topo()
    except CycleError:
        raise CycleError("enabled set contains a dependency cycle") from None


def why(pkg_map: PackageMap, report: ResolutionReport, target: str, limit: int = WHY_PATH_LIMIT) -> WhyResult:
    """Every simple dependency path from a requested package to `target`,
    lexicographically sorted; truncated (with a warning diagnostic) past
    `limit` paths."""
    if target not in pkg_map.packages:
        raise UnknownPackageError(f"unknown package '{target}'")
    if target not in report.enabled:
        raise NotEnabledError(f"package '{target}' is not in the enabled set")
    paths, truncated = graph.simple_paths(report.dep_adjacency(), report.requested, target, limit)
    diags = ()
    if truncated:
        diags = (
            Diagnostic("warning", "W_TRUNCATED", f"path enumeration truncated at {limit} paths", 0),
        )
    return WhyResult(tuple(tuple(p) for p in paths), diags)


def export_dot(report: ResolutionReport) -> str:
    """Graphviz digraph: nodes and edges sorted, requested nodes bold,
    edges pointing dependent -> dependency."""
    lines = ["digraph packages {"]
    for name in sorted(report.enabled):
        attr = " [style=bold]" if name in report.requested else ""
        lines.append(f'  "{name}"{attr};')
    for frm, to in sorted(report.edges):
        lines.append(f'  "{frm}" -> "{to}";')
    lines.append("}")
    return "\n".join(lines) + "\n"


def render_report(report: ResolutionReport) -> str:
    """Canonical line-oriented serialization (the --porcelain output):
    byte-identical for equal resolutions."""
    lines = [f"requested {name}" for name in sorted(report.requested)]
    lines += [f"enabled {name}" for name in sorted(report.enabled)]
    lines += [f"order {i} {name}" for i, name in enumerate(report.order)]
    lines += [f"edge {frm} {to}" for frm, to in sorted(report.edges)]
    for name in sorted(report.externals):
        res = report.externals[name]
        lines.append(f"external {res.name} {res.source} {res.provenance}".rstrip())
    return "".join(line + "\n" for line in lines)
