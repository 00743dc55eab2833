"""Plan execution: layer by layer, keep-going, state committed per package.

The runner is pluggable; the executor is the only thing that touches the
install state. Within a layer up to `jobs` packages run concurrently; a
layer starts only once the previous layer has fully settled. When a
package fails, everything that transitively depends on it is skipped while
independent packages keep building (`fail_fast` flips that to stop
scheduling anything new after the first failure).
"""

from __future__ import annotations

import os
import subprocess
import time
import traceback
from concurrent.futures import ThreadPoolExecutor
from contextlib import nullcontext
from dataclasses import dataclass
from collections.abc import Mapping
from pathlib import Path
from typing import Literal, Protocol

from layerpm.pkgmap import PackageDecl
from layerpm.planner import BuildPlan, decl_hash, serialize_plan
from layerpm.resolver import ExternalResolution
from layerpm.store import InstallState, cache_dir, record_built, state_guard

Outcome = Literal["built", "failed", "skipped"]


class Runner(Protocol):
    """Build one package; return (ok, captured log). Must not touch the
    install state: recording successes is the executor's job."""

    def __call__(
        self, name: str, decl: PackageDecl, externals: Mapping[str, ExternalResolution]
    ) -> tuple[bool, str]: ...


@dataclass
class PackageResult:
    outcome: Outcome
    wall_time: float
    log: str


@dataclass
class ExecutionReport:
    results: dict[str, PackageResult]

    @property
    def ok(self) -> bool:
        return not any(r.outcome == "failed" for r in self.results.values())

    def names(self, outcome: Outcome) -> list[str]:
        return sorted(n for n, r in self.results.items() if r.outcome == outcome)


class ShellRunner:
    """Default runner: executes the package's `build:` command through the
    shell inside the package's cache directory, or, without a command,
    touches a witness file there."""

    def __init__(self, state_dir: Path | str):
        self.state_dir = Path(state_dir)

    def __call__(
        self, name: str, decl: PackageDecl, externals: Mapping[str, ExternalResolution]
    ) -> tuple[bool, str]:
        workdir = cache_dir(self.state_dir, decl_hash(decl))
        workdir.mkdir(parents=True, exist_ok=True)
        if decl.build is None:
            (workdir / "witness.txt").write_text(name + "\n", encoding="utf-8")
            return True, f"touched witness for {name}\n"
        env = dict(os.environ, LAYERPM_PACKAGE=name, LAYERPM_CACHE_DIR=str(workdir))
        proc = subprocess.run(
            decl.build, shell=True, cwd=workdir, env=env, capture_output=True, text=True
        )
        return proc.returncode == 0, proc.stdout + proc.stderr


def execute(
    build_plan: BuildPlan,
    runner: Runner,
    state: InstallState,
    jobs: int = 1,
    fail_fast: bool = False,
) -> ExecutionReport:
    """Run the plan. Successful packages are recorded into `state` (and its
    file, atomically, one commit per package) before this returns, so an
    abort at any point resumes with exactly the remainder."""
    if jobs < 1:
        raise ValueError("jobs must be >= 1")
    state.verify()
    packages = build_plan.report.pkgmap.packages
    planned = set(build_plan.packages())
    plan_deps = {
        name: sorted(packages[name].deps & planned) for name in planned
    }
    results: dict[str, PackageResult] = {}
    guard = state_guard(state.directory) if state.directory is not None else nullcontext()

    def run_one(name: str) -> tuple[bool, str, float]:
        start = time.monotonic()
        try:
            ok, log = runner(name, packages[name], build_plan.report.externals)
        except Exception:
            ok, log = False, "E_RUNNER_PANIC: runner crashed:\n" + traceback.format_exc()
        return ok, log, time.monotonic() - start

    def settle(name: str, ok: bool, log: str, wall: float) -> None:
        if ok:
            record_built(state, name, build_plan.hashes[name])
            results[name] = PackageResult("built", wall, log)
        else:
            results[name] = PackageResult("failed", wall, log)

    with guard:
        stop = False
        for layer in build_plan.layers:
            ready: list[str] = []
            for name in layer:
                if stop:
                    results[name] = PackageResult("skipped", 0.0, "skipped: fail-fast\n")
                    continue
                bad = [d for d in plan_deps[name] if results[d].outcome != "built"]
                if bad:
                    results[name] = PackageResult(
                        "skipped", 0.0, f"skipped: dependency '{bad[0]}' did not build\n"
                    )
                else:
                    ready.append(name)
            if stop or not ready:
                continue
            if jobs == 1:
                for name in ready:
                    if stop:
                        results[name] = PackageResult("skipped", 0.0, "skipped: fail-fast\n")
                        continue
                    settle(name, *run_one(name))
                    if fail_fast and results[name].outcome == "failed":
                        stop = True
            else:
                with ThreadPoolExecutor(max_workers=jobs) as pool:
                    futures = {name: pool.submit(run_one, name) for name in ready}
                    # single-writer: results and state commits happen here
                    for name in ready:
                        settle(name, *futures[name].result())
                if fail_fast and any(results[n].outcome == "failed" for n in ready):
                    stop = True
    return ExecutionReport(results)


def dry_run(build_plan: BuildPlan) -> str:
    """What `execute` would do, plus the external resolutions in play.
    Mutates nothing."""
    text = serialize_plan(build_plan)
    if not text:
        text = "nothing to build\n"
    for name in sorted(build_plan.report.externals):
        res = build_plan.report.externals[name]
        text += f"external {res.name} {res.source} {res.provenance}".rstrip() + "\n"
    return text
