"""Incremental build planning.

A plan contains only packages that need work: never built, stale (their
canonical declaration hash changed), or downstream of one of those. The
layers are Kahn antichains, so everything inside one layer can build
concurrently once earlier layers are done.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from collections.abc import Iterable, Mapping

from layerpm import graph
from layerpm.errors import UnknownPackageError
from layerpm.pkgmap import PackageDecl, PackageMap, decl_block
from layerpm.resolver import ResolutionReport
from layerpm.store import InstallState
from typing import Literal

Reason = Literal["new", "invalidated", "dependent"]


@dataclass(frozen=True)
class BuildPlan:
    layers: tuple[tuple[str, ...], ...]
    reasons: Mapping[str, Reason]
    plan_digest: str
    # plumbing for the executor: current per-package hashes to record on
    # success, and the resolution the plan was derived from
    hashes: Mapping[str, str]
    report: ResolutionReport

    def packages(self) -> list[str]:
        return [name for layer in self.layers for name in layer]

    @property
    def is_empty(self) -> bool:
        return not self.layers


def decl_hash(decl: PackageDecl, extra: str = "") -> str:
    """Invalidation hash: SHA-256 of the canonical declaration block, plus
    an opaque extra input the caller may mix in (build-input hashes etc.)."""
    text = decl_block(decl)
    if extra:
        text += "\x00" + extra
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def plan(
    report: ResolutionReport,
    state: InstallState,
    extra_inputs: Mapping[str, str] | None = None,
) -> BuildPlan:
    """Minimal layered plan extending `state` to cover `report.enabled`.

    Planned set: unbuilt packages (reason `new`), packages whose recorded
    hash differs from the current declaration hash (`invalidated`), and
    their transitive dependents within the enabled set (`dependent`).
    Built, unaffected packages never appear.
    """
    state.verify()
    extra_inputs = extra_inputs or {}
    current = {
        name: decl_hash(report.pkgmap.packages[name], extra_inputs.get(name, ""))
        for name in report.enabled
    }
    new = {name for name in report.enabled if name not in state.entries}
    invalidated = {
        name
        for name in report.enabled
        if name in state.entries and state.entries[name].manifest_hash != current[name]
    }
    seeds = new | invalidated

    enabled_graph = graph.DepGraph(report.enabled, report.edges)
    planned = enabled_graph.reverse_closure(seeds) if seeds else set()

    reasons: dict[str, Reason] = {}
    for name in planned:
        if name in new:
            reasons[name] = "new"
        elif name in invalidated:
            reasons[name] = "invalidated"
        else:
            reasons[name] = "dependent"

    layers = tuple(tuple(layer) for layer in enabled_graph.layers(planned)) if planned else ()
    hashes = {name: current[name] for name in planned}
    digest = hashlib.sha256(_plan_text(layers, reasons).encode("utf-8")).hexdigest()
    return BuildPlan(layers=layers, reasons=reasons, plan_digest=digest, hashes=hashes, report=report)


def affected(pkg_map: PackageMap, changed: Iterable[str]) -> set[str]:
    """`changed` plus every package transitively depending on one of them."""
    changed = set(changed)
    unknown = sorted(changed - set(pkg_map.packages))
    if unknown:
        raise UnknownPackageError("unknown package(s): " + ", ".join(unknown))
    dep_graph = graph.DepGraph(pkg_map.packages.keys(), pkg_map.dep_edges())
    return dep_graph.reverse_closure(changed)


def _plan_text(layers: tuple[tuple[str, ...], ...], reasons: Mapping[str, str]) -> str:
    return "".join(
        f"{index}\t{name}\t{reasons[name]}\n"
        for index, layer in enumerate(layers)
        for name in layer
    )


def serialize_plan(build_plan: BuildPlan) -> str:
    """Canonical plan listing: `<layer>\\t<name>\\t<reason>` per package;
    `plan_digest` is the SHA-256 of exactly this text."""
    return _plan_text(build_plan.layers, build_plan.reasons)
