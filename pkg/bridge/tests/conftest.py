"""Shared fixtures and the contract summary hook."""

from __future__ import annotations

import pathlib
import sys

import pytest

SRC = pathlib.Path(__file__).resolve().parent.parent / "src"
if str(SRC) not in sys.path:
    sys.path.insert(0, str(SRC))

FIXTURES = pathlib.Path(__file__).resolve().parent.parent / "fixtures"


@pytest.fixture(scope="session")
def fixture_articles() -> list[dict]:
    from scorer_bridge.files import read_corpus_jsonl

    return read_corpus_jsonl(FIXTURES / "articles_50.jsonl")


# --- contract summary --------------------------------------------------------
# test_bridge_contract.py holds one test per bridge-level guarantee; print
# a stable one-line verdict for each after the run.

_CONTRACT_PREFIX = "tests/test_bridge_contract.py::"
_contract_results: dict[str, str] = {}


def pytest_runtest_logreport(report):
    nodeid = report.nodeid.replace("\\", "/")
    if _CONTRACT_PREFIX not in nodeid:
        return
    name = nodeid.split("::", 1)[1]
    if report.when == "call":
        _contract_results[name] = "PASS" if report.passed else "FAIL"
    elif report.when == "setup" and report.failed:
        _contract_results[name] = "FAIL (setup)"


def pytest_terminal_summary(terminalreporter):
    if not _contract_results:
        return
    terminalreporter.section("bridge contract summary")
    for name, verdict in _contract_results.items():
        terminalreporter.write_line(f"{verdict}: {name}")
