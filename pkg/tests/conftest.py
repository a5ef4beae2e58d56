_CRITERIA: dict[int, dict] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion checked by the test")


def pytest_runtest_makereport(item, call):
    mark = item.get_closest_marker("criterion")
    if mark is None or call.when != "call":
        return
    number, title = mark.args
    _CRITERIA[number] = {"title": title, "item": item, "outcome": "FAIL" if call.excinfo else "PASS"}


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        entry = _CRITERIA[number]
        detail = dict(entry["item"].user_properties).get("detail", "")
        terminalreporter.write_line(f"criterion {number}: {entry['outcome']}  {entry['title']}  [{detail}]")
