import pytest

_VERDICTS = "acceptance_verdicts"
_TITLES = "acceptance_titles"


def pytest_configure(config):
    setattr(config, _VERDICTS, {})
    setattr(config, _TITLES, {})


@pytest.fixture
def criterion(request):
    """Record ``(number, ok, detail)`` for the acceptance summary."""
    verdicts = getattr(request.config, _VERDICTS)

    def record(number, ok, detail=""):
        verdicts[number] = (bool(ok), detail)
        return ok

    return record


def pytest_collection_finish(session):
    # runs after -m/-k deselection, so only selected criteria are reported
    titles = getattr(session.config, _TITLES)
    for item in session.items:
        mark = item.get_closest_marker("criterion")
        if mark:
            titles[mark.args[0]] = mark.args[1]


def pytest_terminal_summary(terminalreporter, config):
    titles = getattr(config, _TITLES)
    if not titles:
        return
    verdicts = getattr(config, _VERDICTS)
    terminalreporter.section("acceptance criteria")
    for number in sorted(titles):
        ok, detail = verdicts.get(number, (False, "not evaluated"))
        line = f"criterion {number:>2} {'PASS' if ok else 'FAIL'}  {titles[number]}"
        terminalreporter.write_line(line + (f"  [{detail}]" if detail else ""))
