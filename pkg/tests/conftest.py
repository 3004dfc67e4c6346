from __future__ import annotations

import pytest

_KEY = pytest.StashKey[dict]()


class AcceptanceRecorder:
    """Collects one verdict per acceptance criterion; repeated records are AND-ed together."""

    def __init__(self):
        self.entries: dict[int, dict] = {}

    def record(self, criterion: int, title: str, passed: bool | None, detail: str = "") -> None:
        entry = self.entries.setdefault(criterion, {"title": title, "passed": True, "details": []})
        if passed is None:
            entry["passed"] = None
        elif entry["passed"] is not None:
            entry["passed"] = entry["passed"] and bool(passed)
        if detail:
            entry["details"].append(detail)


def pytest_configure(config):
    config.stash[_KEY] = {"recorder": AcceptanceRecorder()}


@pytest.fixture(scope="session")
def acceptance(request) -> AcceptanceRecorder:
    return request.config.stash[_KEY]["recorder"]


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    entries = config.stash[_KEY]["recorder"].entries
    if not entries:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(entries):
        e = entries[k]
        verdict = {True: "PASS", False: "FAIL", None: "SKIP"}[e["passed"]]
        terminalreporter.write_line(f"ACCEPTANCE [{verdict}] {k:>2} {e['title']}")
        for d in e["details"]:
            terminalreporter.write_line(f"      {d}")
