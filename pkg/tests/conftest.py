import pytest

from urbanscale import cli

_verdicts = []


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is None or not marker.args:
        return
    if rep.when == "call" or (rep.when == "setup" and not rep.passed):
        _verdicts.append((marker.args[0], "PASS" if rep.passed else "FAIL"))


def pytest_terminal_summary(terminalreporter):
    if not _verdicts:
        return
    terminalreporter.section("acceptance criteria")
    for name, verdict in _verdicts:
        terminalreporter.write_line(f"{verdict}  {name}")


@pytest.fixture(scope="session")
def preset_dir(tmp_path_factory):
    """The two-country synthetic fixture written by the ``synth`` subcommand."""
    out = tmp_path_factory.mktemp("preset")
    assert cli.main(["synth", "--preset", "two-country", "--out-dir", str(out)]) == 0
    return out
