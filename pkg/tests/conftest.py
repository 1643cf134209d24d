import hypothesis

# Monte-Carlo-heavy properties run in pure Python; the default deadline is
# too twitchy for them.
hypothesis.settings.register_profile(
    "qpplab", deadline=None, max_examples=60, print_blob=True
)
hypothesis.settings.load_profile("qpplab")

_acceptance_results = []


def pytest_runtest_logreport(report):
    if report.when == "call" and "test_acceptance" in report.nodeid:
        _acceptance_results.append((report.nodeid.split("::")[-1], report.outcome))


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _acceptance_results:
        return
    terminalreporter.write_sep("-", "acceptance criteria")
    for name, outcome in _acceptance_results:
        status = "PASS" if outcome == "passed" else "FAIL"
        terminalreporter.write_line(f"{status}  {name}")
