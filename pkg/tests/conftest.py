import pytest

from amdl.corpus import REFERENCE_MODELS, corpus_path, load_corpus_model


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")


@pytest.fixture
def biology():
    return load_corpus_model("biology")


@pytest.fixture
def employee():
    return load_corpus_model("employee")


@pytest.fixture
def reference_models():
    return {name: load_corpus_model(name) for name in REFERENCE_MODELS}


@pytest.fixture
def corpus_file():
    return lambda name: str(corpus_path(name))


_criteria: dict[int, tuple[str, list[str]]] = {}


def pytest_collection_modifyitems(items):
    for item in items:
        marker = item.get_closest_marker("criterion")
        if marker is not None:
            number, title = marker.args
            _criteria.setdefault(number, (title, []))[1].append(item.nodeid)


_outcomes: dict[str, str] = {}


def pytest_runtest_logreport(report):
    if report.when == "call" or report.outcome != "passed":
        previous = _outcomes.get(report.nodeid)
        if previous != "failed":
            _outcomes[report.nodeid] = report.outcome


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_criteria):
        title, nodeids = _criteria[number]
        results = [_outcomes.get(n) for n in nodeids]
        if any(r is None for r in results):
            status = "NOT RUN"
        elif all(r == "passed" for r in results):
            status = "PASS"
        else:
            status = "FAIL"
        terminalreporter.write_line(f"AC{number:>2} {status:<7} {title}")
