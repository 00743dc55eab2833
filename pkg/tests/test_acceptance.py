"""Acceptance suite: one test per criterion, one PASS/FAIL line each
(visible with `pytest tests/test_acceptance.py -v -s`)."""

import random
import subprocess
import sys
import time
from contextlib import contextmanager

import pytest

import oracles
from conftest import FIXTURE_MANIFEST, parse_ok
from layerpm.cli import main
from layerpm.errors import MissingExternalError
from layerpm.executor import execute
from layerpm.pkgmap import PackageDecl, PackageMap
from layerpm.planner import decl_hash, plan, serialize_plan
from layerpm.resolver import Request, SystemProbe, export_dot, render_report, resolve
from layerpm.store import InstallState, load_state, read_lockfile, record_built


@contextmanager
def criterion(number, title):
    try:
        yield
    except BaseException:
        print(f"ACCEPTANCE {number:02d} {title}: FAIL")
        raise
    print(f"ACCEPTANCE {number:02d} {title}: PASS")


def req(*enable, defaults=False):
    return Request(frozenset(enable), frozenset(), include_defaults=defaults)


def random_map(rng, n, density=0.3):
    names = [f"p{i:03d}" for i in range(n)]
    decls = []
    for i, name in enumerate(names):
        deps = {names[j] for j in range(i) if rng.random() < density}
        decls.append(PackageDecl(name=name, deps=frozenset(deps)))
    return PackageMap.from_decls(decls)


def ok_runner(name, decl, externals):
    return True, ""


# ---------------------------------------------------------------------------

def test_01_closure_oracle_equivalence():
    with criterion(1, "closure matches brute-force reachability on 200 random DAGs"):
        rng = random.Random(20260810)
        started = time.perf_counter()
        for _ in range(200):
            n = rng.randint(1, 50)
            pkg_map = random_map(rng, n, density=min(0.3, rng.random()))
            names = sorted(pkg_map.packages)
            enable = set(rng.sample(names, rng.randint(1, n)))
            report = resolve(pkg_map, req(*enable))
            deps = {name: set(d.deps) for name, d in pkg_map.packages.items()}
            assert report.enabled == oracles.reachable(deps, enable)
        elapsed = time.perf_counter() - started
        assert elapsed < 10.0, f"took {elapsed:.2f}s"


def test_02_layering_chain_scenario(fixture_map, gsl_probe):
    with criterion(2, "mathmore request yields the core->mathcore->mathmore chain"):
        report = resolve(fixture_map, req("mathmore"), gsl_probe)
        assert report.enabled == {"core", "mathcore", "mathmore"}
        assert list(report.order) == ["core", "mathcore", "mathmore"]


def test_03_minimal_enablement(fixture_map):
    with criterion(3, "tmva enables exactly its closure, stable under unrelated additions"):
        expected = {"core", "io", "mathcore", "tmva"}
        report = resolve(fixture_map, Request(frozenset({"tmva"})))  # CLI-default semantics
        assert report.enabled == expected

        unrelated = (
            "package extras {\ndeps: core\ndefault: off\n}\n"
            "package webtools {\ndeps: extras\n}\n"
            "package standalone {\n}\n"
        )
        bigger = parse_ok(FIXTURE_MANIFEST + unrelated)
        assert resolve(bigger, Request(frozenset({"tmva"}))).enabled == expected


def test_04_delayed_build(fixture_map, gsl_probe):
    with criterion(4, "extending a built base plans exactly the new package, then nothing"):
        state = InstallState()
        base = resolve(fixture_map, req("mathcore"))
        execute(plan(base, state), ok_runner, state)
        assert set(state.entries) == {"core", "mathcore"}

        extended = resolve(fixture_map, req("mathmore"), gsl_probe)
        build_plan = plan(extended, state)
        assert build_plan.packages() == ["mathmore"]
        assert build_plan.reasons == {"mathmore": "new"}
        execute(build_plan, ok_runner, state)
        assert plan(extended, state).is_empty


def test_05_invalidation_exactness(fixture_map, gsl_probe):
    with criterion(5, "editing mathcore invalidates exactly {mathcore, mathmore, tmva}"):
        everything = resolve(fixture_map, req("tmva", "mathmore", "graf"), gsl_probe)
        state = InstallState()
        execute(plan(everything, state), ok_runner, state)

        edited_map = parse_ok(
            FIXTURE_MANIFEST.replace("libraries: libMathCore", "libraries: libMathCore, libExtra")
        )
        edited = resolve(edited_map, req("tmva", "mathmore", "graf"), gsl_probe)
        build_plan = plan(edited, state)
        assert build_plan.reasons == {
            "mathcore": "invalidated",
            "mathmore": "dependent",
            "tmva": "dependent",
        }
        untouched = {"core", "graf", "io"}
        assert untouched & set(build_plan.packages()) == set()
        for name in untouched:
            assert state.entries[name].manifest_hash == decl_hash(fixture_map.packages[name])


def test_06_external_fallback(tmp_path, capsys):
    with criterion(6, "missing gsl exits 3; builtin provider + builtin_first succeeds and locks"):
        (tmp_path / "packagemap.txt").write_text(FIXTURE_MANIFEST)
        (tmp_path / "empty-probe.txt").write_text("")
        base_args = [
            "--map", str(tmp_path / "packagemap.txt"),
            "--state", str(tmp_path / "state"),
            "--probe", str(tmp_path / "empty-probe.txt"),
        ]
        code = main(["build", "mathmore", "--no-defaults", *base_args])
        capsys.readouterr()
        assert code == 3

        (tmp_path / "packagemap.txt").write_text(
            FIXTURE_MANIFEST.replace("externals: gsl", "externals: gsl\nbuiltins: gsl")
        )
        code = main(["build", "mathmore", "--no-defaults", "--policy", "builtin_first", *base_args])
        capsys.readouterr()
        assert code == 0
        lock = read_lockfile(tmp_path / "state")
        assert lock.resolutions["gsl"] == ("builtin", "mathmore")


def test_07_concurrency_safety():
    with criterion(7, "100 randomized executions never start a package before its deps finish"):
        rng = random.Random(1234)
        trial = 0
        while trial < 100:
            pkg_map = random_map(rng, rng.randint(3, 14))
            names = sorted(pkg_map.packages)
            enable = rng.sample(names, rng.randint(1, len(names)))
            for jobs in (1, 2, 8):
                if trial >= 100:
                    break
                trial += 1
                events = {}
                import threading

                guard = threading.Lock()

                def stamping(name, decl, externals):
                    start = time.monotonic_ns()
                    time.sleep(rng.random() * 0.001)
                    finish = time.monotonic_ns()
                    with guard:
                        events[name] = (start, finish)
                    return True, ""

                build_plan = plan(resolve(pkg_map, req(*enable)), InstallState())
                execute(build_plan, stamping, InstallState(), jobs=jobs)
                planned = set(build_plan.packages())
                for name in planned:
                    for dep in pkg_map.packages[name].deps & planned:
                        assert events[dep][1] <= events[name][0], f"jobs={jobs}: {dep} vs {name}"


def test_08_determinism(tmp_path, capsys):
    with criterion(8, "resolve/plan/graph output byte-identical across runs and jobs settings"):
        (tmp_path / "packagemap.txt").write_text(FIXTURE_MANIFEST)
        (tmp_path / "probe.txt").write_text("gsl\tlibgsl\n")

        # API level: 10 repeated renders collapse to one byte string each
        pkg_map = parse_ok(FIXTURE_MANIFEST)
        probe = SystemProbe({"gsl": "libgsl"})
        request = req("tmva", "mathmore", "graf")
        renders = {render_report(resolve(pkg_map, request, probe)) for _ in range(10)}
        plans = {serialize_plan(plan(resolve(pkg_map, request, probe), InstallState())) for _ in range(10)}
        dots = {export_dot(resolve(pkg_map, request, probe)) for _ in range(10)}
        assert len(renders) == len(plans) == len(dots) == 1

        # CLI level: identical state content regardless of --jobs
        entries = []
        for jobs in ("1", "8"):
            state_dir = tmp_path / f"state-j{jobs}"
            code = main([
                "build", "tmva", "mathmore", "graf", "--jobs", jobs,
                "--map", str(tmp_path / "packagemap.txt"),
                "--state", str(state_dir),
                "--probe", str(tmp_path / "probe.txt"),
            ])
            capsys.readouterr()
            assert code == 0
            state = load_state(state_dir)
            entries.append({n: e.manifest_hash for n, e in state.entries.items()})
        assert entries[0] == entries[1]


def test_09_crash_consistency(tmp_path):
    with criterion(9, "abort mid-plan leaves loadable state; resume plan is the remainder"):
        crashing = FIXTURE_MANIFEST.replace(
            "package mathcore {\ndeps: core\n",
            "package mathcore {\ndeps: core\nbuild: kill -9 $PPID\n",
        )
        (tmp_path / "packagemap.txt").write_text(crashing)
        (tmp_path / "probe.txt").write_text("gsl\tlibgsl\n")
        args = [
            "--map", str(tmp_path / "packagemap.txt"),
            "--state", str(tmp_path / "state"),
            "--probe", str(tmp_path / "probe.txt"),
        ]
        proc = subprocess.run(
            [sys.executable, "-m", "layerpm", "build", "mathmore", "--no-defaults", *args],
            capture_output=True,
            text=True,
        )
        assert proc.returncode != 0  # the executor process was killed mid-plan

        state = load_state(tmp_path / "state")  # loadable, not corrupt
        assert set(state.entries) == {"core"}

        pkg_map = parse_ok(crashing)
        resume = plan(resolve(pkg_map, req("mathmore"), SystemProbe({"gsl": "libgsl"})), state)
        assert resume.packages() == ["mathcore", "mathmore"]


def test_10_scale_sanity():
    with criterion(10, "1,000-node resolution + planning under one second"):
        rng = random.Random(99)
        names = [f"n{i:04d}" for i in range(1000)]
        decls = []
        for i, name in enumerate(names):
            k = min(i, rng.randint(0, 4))
            deps = {names[rng.randrange(i)] for _ in range(k)} if k else set()
            decls.append(PackageDecl(name=name, deps=frozenset(deps)))
        pkg_map = PackageMap.from_decls(decls)
        enable = set(rng.sample(names, 50))
        state = InstallState()
        for name in rng.sample(names, 300):
            record_built(state, name, decl_hash(pkg_map.packages[name]))

        started = time.perf_counter()
        report = resolve(pkg_map, req(*enable))
        build_plan = plan(report, state)
        elapsed = time.perf_counter() - started
        assert elapsed < 1.0, f"took {elapsed:.3f}s"
        assert set(build_plan.packages()) <= report.enabled
