"""layerpm: a layered, lazy-install package manager.

Decomposes a monolithic meta-package into sub-packages driven by a
declarative package map, resolves internal/builtin/external dependencies,
and plans minimal incremental builds so an existing installation can be
extended without rebuilding from scratch.
"""

from layerpm.pkgmap import (
    Diagnostic,
    PackageDecl,
    PackageMap,
    canonical_serialize,
    decl_block,
    parse_map,
    validate_map,
)
from layerpm.resolver import (
    ExternalResolution,
    Request,
    ResolutionReport,
    SystemProbe,
    export_dot,
    resolve,
    topo_order,
    why,
)
from layerpm.planner import BuildPlan, affected, decl_hash, plan, serialize_plan
from layerpm.executor import ExecutionReport, ShellRunner, dry_run, execute
from layerpm.store import (
    InstallState,
    Lockfile,
    load_state,
    read_lockfile,
    record_built,
    write_lockfile,
)

__version__ = "0.1.0"

__all__ = [
    "BuildPlan",
    "Diagnostic",
    "ExecutionReport",
    "ExternalResolution",
    "InstallState",
    "Lockfile",
    "PackageDecl",
    "PackageMap",
    "Request",
    "ResolutionReport",
    "ShellRunner",
    "SystemProbe",
    "affected",
    "canonical_serialize",
    "decl_block",
    "decl_hash",
    "dry_run",
    "execute",
    "export_dot",
    "load_state",
    "parse_map",
    "plan",
    "read_lockfile",
    "record_built",
    "resolve",
    "serialize_plan",
    "topo_order",
    "validate_map",
    "why",
    "write_lockfile",
]
