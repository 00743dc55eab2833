import random
import threading
import time

import pytest

from conftest import FIXTURE_MANIFEST, parse_ok
from layerpm.errors import StateLockedError
from layerpm.executor import ShellRunner, dry_run, execute
from layerpm.pkgmap import PackageDecl, PackageMap
from layerpm.planner import decl_hash, plan, serialize_plan
from layerpm.resolver import Request, SystemProbe, resolve
from layerpm.store import InstallState, load_state, record_built, state_guard


def resolved(pkg_map, *enable):
    return resolve(
        pkg_map, Request(frozenset(enable), frozenset(), include_defaults=False),
        SystemProbe({"gsl": "x"}),
    )


def ok_runner(name, decl, externals):
    return True, f"built {name}\n"


class RecordingRunner:
    """Thread-safe start/finish ledger, with optional failures and jitter."""

    def __init__(self, fail=(), jitter=0.0):
        self.fail = set(fail)
        self.jitter = jitter
        self.events = {}
        self._lock = threading.Lock()
        self.sequence = []

    def __call__(self, name, decl, externals):
        start = time.monotonic_ns()
        with self._lock:
            self.sequence.append(name)
        if self.jitter:
            time.sleep(random.random() * self.jitter)
        finish = time.monotonic_ns()
        with self._lock:
            self.events[name] = (start, finish)
        return name not in self.fail, f"ran {name}\n"


def fresh_plan(pkg_map, *enable, state=None):
    return plan(resolved(pkg_map, *enable), state if state is not None else InstallState())


# ---------------------------------------------------------------------------
# execute

def test_empty_plan_executes_to_empty_report(fixture_map):
    report = resolved(fixture_map, "tmva")
    state = InstallState()
    for name in report.enabled:
        record_built(state, name, decl_hash(fixture_map.packages[name]))
    exec_report = execute(plan(report, state), ok_runner, state)
    assert exec_report.results == {}
    assert exec_report.ok


def test_fresh_chain_records_three(fixture_map, tmp_path):
    state = load_state(tmp_path)
    exec_report = execute(fresh_plan(fixture_map, "mathmore", state=state), ok_runner, state)
    assert exec_report.names("built") == ["core", "mathcore", "mathmore"]
    entry_lines = [
        l for l in (tmp_path / "state.txt").read_text().splitlines() if not l.startswith("#")
    ]
    assert len(entry_lines) == 3


def test_failure_skips_exactly_dependents(fixture_map):
    # plan covers all six; fail io -> only tmva is skipped
    state = InstallState()
    runner = RecordingRunner(fail={"io"})
    exec_report = execute(fresh_plan(fixture_map, "tmva", "mathmore", "graf"), runner, state)
    assert not exec_report.ok
    assert exec_report.names("failed") == ["io"]
    assert exec_report.names("skipped") == ["tmva"]
    assert exec_report.names("built") == ["core", "graf", "mathcore", "mathmore"]
    assert set(state.entries) == {"core", "graf", "mathcore", "mathmore"}


def test_invalidation_failure_leaves_state_unchanged(fixture_map):
    everything = resolved(fixture_map, "tmva", "mathmore", "graf")
    state = InstallState()
    for name in everything.enabled:
        record_built(state, name, decl_hash(fixture_map.packages[name]))
    before = {n: e.manifest_hash for n, e in state.entries.items()}
    build_plan = plan(everything, state, extra_inputs={"mathcore": "edit"})
    exec_report = execute(build_plan, RecordingRunner(fail={"mathcore"}), state)
    assert exec_report.names("failed") == ["mathcore"]
    assert exec_report.names("skipped") == ["mathmore", "tmva"]
    after = {n: e.manifest_hash for n, e in state.entries.items()}
    assert after == before  # nothing recorded for any of the three


def test_skip_propagates_transitively():
    decls = [
        PackageDecl(name="a"),
        PackageDecl(name="b", deps=frozenset({"a"})),
        PackageDecl(name="c", deps=frozenset({"b"})),
        PackageDecl(name="d"),
    ]
    pkg_map = PackageMap.from_decls(decls)
    exec_report = execute(fresh_plan(pkg_map, "c", "d"), RecordingRunner(fail={"a"}), InstallState())
    assert exec_report.names("failed") == ["a"]
    assert exec_report.names("skipped") == ["b", "c"]
    assert exec_report.names("built") == ["d"]


def test_fail_fast_stops_scheduling(fixture_map):
    runner = RecordingRunner(fail={"core"})
    exec_report = execute(
        fresh_plan(fixture_map, "tmva", "mathmore", "graf"), runner, InstallState(), fail_fast=True
    )
    assert exec_report.names("failed") == ["core"]
    assert exec_report.names("built") == []
    assert set(exec_report.names("skipped")) == {"graf", "io", "mathcore", "mathmore", "tmva"}
    assert runner.sequence == ["core"]


def test_runner_exception_is_package_failure(fixture_map):
    def panicking(name, decl, externals):
        if name == "mathcore":
            raise RuntimeError("boom")
        return True, ""

    exec_report = execute(fresh_plan(fixture_map, "mathmore"), panicking, InstallState())
    assert exec_report.names("failed") == ["mathcore"]
    assert "E_RUNNER_PANIC" in exec_report.results["mathcore"].log
    assert "boom" in exec_report.results["mathcore"].log
    assert exec_report.names("skipped") == ["mathmore"]


def test_jobs_must_be_positive(fixture_map):
    with pytest.raises(ValueError):
        execute(fresh_plan(fixture_map, "core"), ok_runner, InstallState(), jobs=0)


def test_jobs_one_runs_in_serialized_plan_order(fixture_map):
    runner = RecordingRunner()
    build_plan = fresh_plan(fixture_map, "tmva", "mathmore", "graf")
    execute(build_plan, runner, InstallState(), jobs=1)
    expected = [line.split("\t")[1] for line in serialize_plan(build_plan).splitlines()]
    assert runner.sequence == expected


def test_state_guard_blocks_concurrent_executor(fixture_map, tmp_path):
    state = load_state(tmp_path)
    with state_guard(tmp_path):
        with pytest.raises(StateLockedError):
            execute(fresh_plan(fixture_map, "core", state=state), ok_runner, state)


def test_wall_times_recorded(fixture_map):
    exec_report = execute(fresh_plan(fixture_map, "mathcore"), ok_runner, InstallState())
    assert all(r.wall_time >= 0 for r in exec_report.results.values())


# ---------------------------------------------------------------------------
# concurrency safety

def random_map(rng, n, density=0.3):
    names = [f"p{i:02d}" for i in range(n)]
    decls = []
    for i, name in enumerate(names):
        deps = {names[j] for j in range(i) if rng.random() < density}
        decls.append(PackageDecl(name=name, deps=frozenset(deps)))
    return PackageMap.from_decls(decls)


def test_deps_always_finish_before_dependents_start():
    rng = random.Random(77)
    for trial in range(30):
        pkg_map = random_map(rng, rng.randint(3, 12))
        names = sorted(pkg_map.packages)
        enable = rng.sample(names, rng.randint(1, len(names)))
        jobs = rng.choice([1, 2, 8])
        runner = RecordingRunner(jitter=0.002)
        build_plan = fresh_plan(pkg_map, *enable)
        execute(build_plan, runner, InstallState(), jobs=jobs)
        planned = set(build_plan.packages())
        for name in planned:
            for dep in pkg_map.packages[name].deps & planned:
                assert runner.events[dep][1] <= runner.events[name][0], (
                    f"{dep} still running when {name} started (jobs={jobs}, trial={trial})"
                )


# ---------------------------------------------------------------------------
# dry run

def test_dry_run_empty(fixture_map):
    report = resolved(fixture_map, "tmva")
    state = InstallState()
    for name in report.enabled:
        record_built(state, name, decl_hash(fixture_map.packages[name]))
    assert dry_run(plan(report, state)) == "nothing to build\n"


def test_dry_run_lists_plan_and_externals(fixture_map):
    text = dry_run(fresh_plan(fixture_map, "mathmore"))
    lines = text.splitlines()
    assert lines[:3] == ["0\tcore\tnew", "1\tmathcore\tnew", "2\tmathmore\tnew"]
    assert lines[3] == "external gsl system x"


def test_dry_run_mutates_nothing(fixture_map, tmp_path):
    state = load_state(tmp_path)
    dry_run(fresh_plan(fixture_map, "mathmore", state=state))
    assert not (tmp_path / "state.txt").exists()
    assert state.entries == {}


# ---------------------------------------------------------------------------
# shell runner

def test_shell_runner_witness_without_command(tmp_path):
    decl = PackageDecl(name="core")
    runner = ShellRunner(tmp_path)
    ok, log = runner("core", decl, {})
    assert ok
    witness = tmp_path / "cache" / decl_hash(decl) / "witness.txt"
    assert witness.read_text() == "core\n"


def test_shell_runner_runs_build_command(tmp_path):
    decl = PackageDecl(name="io", build="echo out-$LAYERPM_PACKAGE && touch artifact.o")
    ok, log = ShellRunner(tmp_path)("io", decl, {})
    assert ok
    assert "out-io" in log
    assert (tmp_path / "cache" / decl_hash(decl) / "artifact.o").exists()


def test_shell_runner_reports_failure(tmp_path):
    decl = PackageDecl(name="io", build="echo bad >&2; exit 3")
    ok, log = ShellRunner(tmp_path)("io", decl, {})
    assert not ok
    assert "bad" in log


def test_shell_runner_through_execute(tmp_path):
    pkg_map = parse_ok(
        "package core {\nkind: core\nbuild: echo hello > hello.txt\n}\n"
    )
    state = load_state(tmp_path)
    exec_report = execute(fresh_plan(pkg_map, state=state), ShellRunner(tmp_path), state)
    assert exec_report.ok
    decl = pkg_map.packages["core"]
    assert (tmp_path / "cache" / decl_hash(decl) / "hello.txt").read_text() == "hello\n"
    assert load_state(tmp_path).entries["core"].manifest_hash == decl_hash(decl)
