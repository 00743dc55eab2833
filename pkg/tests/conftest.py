import pytest

from layerpm.pkgmap import parse_map, validate_map

# the six-package desk fixture used throughout the suite:
#   io -> core, mathcore -> core, mathmore -> mathcore,
#   tmva -> {mathcore, io}, graf -> core (default off)
FIXTURE_MANIFEST = """\
# desk fixture
package core {
kind: core
libraries: libCore
}
package io {
deps: core
builtins: zlib
libraries: libRIO
}
package mathcore {
deps: core
libraries: libMathCore
}
package mathmore {
deps: mathcore
externals: gsl
libraries: libMathMore
}
package tmva {
deps: mathcore, io
libraries: libTMVA
}
package graf {
deps: core
libraries: libGraf
default: off
}
"""

FIXTURE_EDGES = {
    ("io", "core"),
    ("mathcore", "core"),
    ("mathmore", "mathcore"),
    ("tmva", "mathcore"),
    ("tmva", "io"),
    ("graf", "core"),
}


def parse_ok(text):
    """Parse a manifest that must be clean; fail loudly otherwise."""
    pkg_map, diags = parse_map(text)
    assert pkg_map is not None, [d.render() for d in diags]
    errors = [d for d in validate_map(pkg_map) if d.severity == "error"]
    assert not errors, [d.render() for d in errors]
    return pkg_map


@pytest.fixture
def fixture_map():
    return parse_ok(FIXTURE_MANIFEST)


@pytest.fixture
def gsl_probe():
    from layerpm.resolver import SystemProbe

    return SystemProbe({"gsl": "libgsl-2.7 via probe"})
