import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


# -- one summary line per acceptance criterion ---------------------------------

_criteria: dict[str, dict] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(key, title): acceptance criterion this test decides")


def pytest_runtest_logreport(report):
    marker = dict(report.user_properties).get("criterion")
    if marker is None:
        return
    key, title = marker
    entry = _criteria.setdefault(key, {"title": title, "outcome": "passed", "detail": "", "seconds": 0.0})
    if report.when == "call":
        entry["seconds"] += report.duration
        details = [v for k, v in report.user_properties if k == "detail"]
        entry["detail"] = "; ".join(filter(None, [entry["detail"], *details]))
    if report.failed:
        entry["outcome"] = "failed"
    elif report.skipped and entry["outcome"] != "failed":
        entry["outcome"] = "skipped"
        reason = str(report.longrepr[-1]) if isinstance(report.longrepr, tuple) else ""
        entry["detail"] = "; ".join(filter(None, [entry["detail"], reason.removeprefix("Skipped: ")]))


@pytest.fixture(autouse=True)
def _tag_criterion(request):
    marker = request.node.get_closest_marker("criterion")
    if marker is not None:
        request.node.user_properties.append(("criterion", tuple(marker.args)))


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    word = {"passed": "PASS", "failed": "FAIL", "skipped": "SKIP"}
    for key in sorted(_criteria, key=lambda k: (len(k), k)):
        e = _criteria[key]
        line = f"criterion {key:<6} {word[e['outcome']]:<4}  {e['title']}  ({e['seconds']:.1f} s)"
        if e["detail"]:
            line += f"  | {e['detail']}"
        terminalreporter.write_line(line)
