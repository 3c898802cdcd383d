import pytest

CRITERIA = {
    1: "exact identities",
    2: "oracle equivalence",
    3: "local-law scaling",
    4: "rigidity & delocalization",
    5: "edge universality",
    6: "Green-function comparison",
    7: "flow & bulk",
}

_outcomes: dict[int, list[tuple[str, str, list]]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n): acceptance criterion number")


def pytest_runtest_logreport(report):
    if report.when != "call" and not (report.when == "setup" and report.outcome != "passed"):
        return
    n = dict(report.user_properties).get("criterion")
    if n is None:
        return
    _outcomes.setdefault(n, []).append((report.nodeid.split("::")[-1], report.outcome,
                                        [p for p in report.user_properties if p[0] != "criterion"]))


@pytest.fixture(autouse=True)
def _tag_criterion(request, record_property):
    m = request.node.get_closest_marker("criterion")
    if m is not None:
        record_property("criterion", m.args[0])


def pytest_terminal_summary(terminalreporter):
    if not _outcomes:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for n in sorted(_outcomes):
        runs = _outcomes[n]
        ok = all(o == "passed" for _, o, _ in runs)
        tr.write_line(f"criterion {n} ({CRITERIA.get(n, '?')}): {'PASS' if ok else 'FAIL'}")
        for name, outcome, props in runs:
            detail = ", ".join(f"{k}={v}" for k, v in props)
            tr.write_line(f"    {outcome.upper():7s} {name}" + (f"  [{detail}]" if detail else ""))
