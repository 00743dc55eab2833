"""Package-map manifest: data model, parser, validation, canonical form.

The manifest is a line-oriented package database. One block per
sub-package:

    package io {          # '#' starts a comment anywhere
    kind: feature
    libraries: libRIO
    deps: core
    builtins: zlib
    default: off
    }

Rules the parser enforces:
  * keys are exactly kind, libraries, deps, builtins, externals, default,
    build; value lists are comma-separated
  * the opening line may carry the first field after '{', and a field line
    may end with the closing '}' (a lone '}' also closes)
  * a `build:` line takes the rest of the line verbatim as a shell command
    and therefore can neither close a block nor contain '#'
  * package names are lowercase `[a-z][a-z0-9_-]*`; library/builtin/
    external identifiers additionally allow uppercase and `.+`

The canonical form (and the interchange format) is `canonical_serialize`:
blocks sorted by name, fixed field order, set-valued fields sorted, empty
fields omitted, `default` always explicit, LF endings. `source_digest` is
the SHA-256 of that text.
"""

from __future__ import annotations

import hashlib
import re
from dataclasses import dataclass, field
from collections.abc import Iterable, Mapping
from typing import Literal

from layerpm import graph

Kind = Literal["core", "feature"]
Severity = Literal["error", "warning"]

PKG_NAME_RE = re.compile(r"[a-z][a-z0-9_-]*\Z")
IDENT_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_.+-]*\Z")

_FIELD_KEYS = ("kind", "libraries", "deps", "builtins", "externals", "default", "build")
_LIST_KEYS = ("libraries", "deps", "builtins", "externals")


@dataclass(frozen=True)
class Diagnostic:
    severity: Severity
    code: str
    message: str
    line: int

    def render(self) -> str:
        return f"line {self.line}: {self.severity}: {self.code}: {self.message}"


def _error(code: str, message: str, line: int) -> Diagnostic:
    return Diagnostic("error", code, message, line)


@dataclass(frozen=True)
class PackageDecl:
    """One sub-package declaration from the map."""

    name: str
    kind: Kind = "feature"
    libraries: tuple[str, ...] = ()
    deps: frozenset[str] = frozenset()
    builtins: frozenset[str] = frozenset()
    externals: frozenset[str] = frozenset()
    default: bool = False
    build: str | None = None
    line: int = field(default=0, compare=False)


@dataclass(frozen=True)
class PackageMap:
    """Validated collection of package declarations plus the content hash
    of its canonical serialization."""

    packages: Mapping[str, PackageDecl]
    source_digest: str

    @classmethod
    def from_decls(cls, decls: Iterable[PackageDecl]) -> "PackageMap":
        packages = {d.name: d for d in sorted(decls, key=lambda d: d.name)}
        text = _canonical_text(packages)
        return cls(packages, hashlib.sha256(text.encode("utf-8")).hexdigest())

    def dep_edges(self) -> set[tuple[str, str]]:
        """(dependent, dependency) pairs, restricted to known packages."""
        return {
            (name, dep)
            for name, decl in self.packages.items()
            for dep in decl.deps
            if dep in self.packages
        }


# ---------------------------------------------------------------------------
# canonical serialization

def decl_block(decl: PackageDecl) -> str:
    """Canonical manifest block for one package (also the invalidation-hash
    input used by the planner)."""
    lines = [f"package {decl.name} {{", f"kind: {decl.kind}"]
    if decl.libraries:
        lines.append("libraries: " + ", ".join(decl.libraries))
    for key in ("deps", "builtins", "externals"):
        values = getattr(decl, key)
        if values:
            lines.append(f"{key}: " + ", ".join(sorted(values)))
    lines.append(f"default: {'on' if decl.default else 'off'}")
    if decl.build:
        lines.append(f"build: {decl.build}")
    lines.append("}")
    return "\n".join(lines) + "\n"


def _canonical_text(packages: Mapping[str, PackageDecl]) -> str:
    return "".join(decl_block(packages[name]) for name in sorted(packages))


def canonical_serialize(pkg_map: PackageMap) -> str:
    """Byte-identical for semantically equal maps; parseable by parse_map."""
    return _canonical_text(pkg_map.packages)


# ---------------------------------------------------------------------------
# parsing

class _Block:
    def __init__(self, name: str, line: int):
        self.name = name
        self.line = line
        self.fields: dict[str, tuple[object, int]] = {}


def parse_map(text: str) -> tuple[PackageMap | None, list[Diagnostic]]:
    """Parse manifest source. Returns (map, diagnostics); the map is None
    iff any diagnostic is an error."""
    diags: list[Diagnostic] = []
    decls: dict[str, PackageDecl] = {}
    block: _Block | None = None

    def close_block(current: _Block) -> None:
        decl, block_diags = _finish_block(current)
        diags.extend(block_diags)
        if decl is None:
            return
        if decl.name in decls:
            diags.append(_error("E_DUP", f"duplicate package name '{decl.name}'", current.line))
            return
        decls[decl.name] = decl

    def open_block(content: str, lineno: int) -> _Block | None:
        match = re.match(r"package\s+(\S+)\s*\{(.*)\Z", content)
        if match is None:
            diags.append(_error("E_SYNTAX", "expected 'package NAME {'", lineno))
            return None
        name, rest = match.group(1), match.group(2).strip()
        if PKG_NAME_RE.match(name) is None:
            diags.append(_error("E_SYNTAX", f"malformed package name '{name}'", lineno))
        opened = _Block(name, lineno)
        if rest and _block_line(opened, rest, lineno, diags):
            close_block(opened)
            return None
        return opened

    for lineno, raw in enumerate(text.splitlines(), start=1):
        content = raw.split("#", 1)[0].strip()
        if not content:
            continue
        if block is None:
            block = open_block(content, lineno)
            continue
        if content.startswith("package ") or content == "package":
            # resync: a new block opener while the previous never closed
            diags.append(
                _error("E_SYNTAX", f"unbalanced braces: block '{block.name}' never closed", block.line)
            )
            close_block(block)
            block = open_block(content, lineno)
            continue
        if _block_line(block, content, lineno, diags):
            close_block(block)
            block = None

    if block is not None:
        diags.append(
            _error("E_SYNTAX", f"unbalanced braces: block '{block.name}' never closed", block.line)
        )
        close_block(block)

    if any(d.severity == "error" for d in diags):
        return None, diags
    return PackageMap.from_decls(decls.values()), diags


def _block_line(block: _Block, content: str, lineno: int, diags: list[Diagnostic]) -> bool:
    """Process one in-block line; returns True when the block closes."""
    if content == "}":
        return True
    key_part, colon, value_part = content.partition(":")
    key = key_part.strip()
    if not colon:
        diags.append(_error("E_SYNTAX", f"expected 'key: value' or '}}', got '{content}'", lineno))
        return False
    closes = False
    value = value_part.strip()
    if key != "build" and value.endswith("}"):
        closes = True
        value = value[:-1].rstrip()
    if key not in _FIELD_KEYS:
        diags.append(_error("E_SYNTAX", f"unknown field key '{key}'", lineno))
        return closes
    if key in block.fields:
        diags.append(_error("E_SYNTAX", f"duplicate field '{key}'", lineno))
        return closes

    parsed: object
    if key == "kind":
        if value not in ("core", "feature"):
            diags.append(_error("E_SYNTAX", f"kind must be 'core' or 'feature', got '{value}'", lineno))
            return closes
        parsed = value
    elif key == "default":
        if value not in ("on", "off"):
            diags.append(_error("E_SYNTAX", f"default must be 'on' or 'off', got '{value}'", lineno))
            return closes
        parsed = value == "on"
    elif key == "build":
        if not value:
            diags.append(_error("E_SYNTAX", "empty build command", lineno))
            return closes
        parsed = value
    else:
        items = [item.strip() for item in value.split(",")] if value else []
        grammar = PKG_NAME_RE if key == "deps" else IDENT_RE
        ok = True
        seen = set()
        for item in items:
            if not item or grammar.match(item) is None:
                diags.append(_error("E_SYNTAX", f"malformed identifier '{item}' in '{key}'", lineno))
                ok = False
            elif item in seen:
                diags.append(_error("E_SYNTAX", f"duplicate value '{item}' in '{key}'", lineno))
                ok = False
            seen.add(item)
        if not ok:
            return closes
        parsed = tuple(items)
    block.fields[key] = (parsed, lineno)
    return closes


def _finish_block(block: _Block) -> tuple[PackageDecl | None, list[Diagnostic]]:
    diags: list[Diagnostic] = []
    fields = block.fields
    kind: Kind = fields["kind"][0] if "kind" in fields else "feature"  # type: ignore[assignment]
    if "default" in fields:
        default, default_line = fields["default"]
        if kind == "core" and default is False:
            diags.append(
                _error("E_CORE_DEFAULT", f"core package '{block.name}' cannot set 'default: off'", default_line)
            )
    else:
        default = kind == "core"
    deps_value: tuple[str, ...] = fields["deps"][0] if "deps" in fields else ()  # type: ignore[assignment]
    if block.name in deps_value:
        diags.append(
            _error("E_SELF", f"package '{block.name}' depends on itself", fields["deps"][1])
        )
    if any(d.severity == "error" for d in diags):
        return None, diags
    decl = PackageDecl(
        name=block.name,
        kind=kind,
        libraries=fields["libraries"][0] if "libraries" in fields else (),  # type: ignore[arg-type]
        deps=frozenset(deps_value),
        builtins=frozenset(fields["builtins"][0]) if "builtins" in fields else frozenset(),  # type: ignore[arg-type]
        externals=frozenset(fields["externals"][0]) if "externals" in fields else frozenset(),  # type: ignore[arg-type]
        default=bool(default),
        build=fields["build"][0] if "build" in fields else None,  # type: ignore[arg-type]
        line=block.line,
    )
    return decl, diags


# ---------------------------------------------------------------------------
# validation

def validate_map(pkg_map: PackageMap) -> list[Diagnostic]:
    """Full invariant check; empty result means the map is valid.

    parse_map already rejects syntactic violations, so on parsed maps this
    reports referential problems (E_UNKNOWN_DEP) and dependency cycles
    (E_CYCLE). Programmatically built maps get the declaration-level checks
    re-run as well.
    """
    diags: list[Diagnostic] = []
    for name in sorted(pkg_map.packages):
        decl = pkg_map.packages[name]
        diags.extend(_check_decl(decl))
        for dep in sorted(decl.deps):
            if dep not in pkg_map.packages:
                diags.append(
                    _error("E_UNKNOWN_DEP", f"package '{name}' depends on unknown package '{dep}'", decl.line)
                )
    deps = {name: sorted(d for d in decl.deps if d in pkg_map.packages)
            for name, decl in pkg_map.packages.items()}
    for cycle in graph.canonical_cycles(deps):
        decl = pkg_map.packages[cycle[0]]
        diags.append(
            _error("E_CYCLE", "dependency cycle: " + " -> ".join(cycle), decl.line)
        )
    diags.sort(key=lambda d: (d.line, d.code, d.message))
    return diags


def _check_decl(decl: PackageDecl) -> list[Diagnostic]:
    diags: list[Diagnostic] = []
    if PKG_NAME_RE.match(decl.name) is None:
        diags.append(_error("E_SYNTAX", f"malformed package name '{decl.name}'", decl.line))
    if decl.kind not in ("core", "feature"):
        diags.append(_error("E_SYNTAX", f"invalid kind '{decl.kind}' for '{decl.name}'", decl.line))
    if decl.kind == "core" and not decl.default:
        diags.append(_error("E_CORE_DEFAULT", f"core package '{decl.name}' cannot set 'default: off'", decl.line))
    if decl.name in decl.deps:
        diags.append(_error("E_SELF", f"package '{decl.name}' depends on itself", decl.line))
    if len(set(decl.libraries)) != len(decl.libraries):
        diags.append(_error("E_SYNTAX", f"duplicate value in 'libraries' of '{decl.name}'", decl.line))
    for lib in decl.libraries:
        if IDENT_RE.match(lib) is None:
            diags.append(_error("E_SYNTAX", f"malformed identifier '{lib}' in 'libraries'", decl.line))
    for key, grammar in (("deps", PKG_NAME_RE), ("builtins", IDENT_RE), ("externals", IDENT_RE)):
        for item in sorted(getattr(decl, key)):
            if grammar.match(item) is None:
                diags.append(_error("E_SYNTAX", f"malformed identifier '{item}' in '{key}'", decl.line))
    if decl.build is not None and ("#" in decl.build or "\n" in decl.build or not decl.build.strip()):
        diags.append(_error("E_SYNTAX", f"invalid build command for '{decl.name}'", decl.line))
    return diags
