from pathlib import Path

import pytest

from sessiongas.parser import load_files

ROOT = Path(__file__).resolve().parent.parent
CORPUS = ROOT / "corpus"
SCENARIOS = CORPUS / "scenarios"

PROGRAMS = ["auction", "bank", "erc20", "escrow", "insurance", "puzzle", "voting", "voting_aa",
            "wallet"]
# contracts with a transaction file and a scenario
SCENARIO_NAMES = ["auction", "erc20", "escrow", "puzzle", "voting", "wallet"]


def program_path(name: str) -> Path:
    return CORPUS / f"{name}.nom"


def scenario_files(name: str) -> tuple:
    return [str(program_path(name)), str(SCENARIOS / f"{name}_tx.nom")], SCENARIOS / f"{name}.scn"


def load(name: str):
    return load_files([str(program_path(name))])


def load_with_tx(name: str):
    return load_files(scenario_files(name)[0])


@pytest.fixture(scope="session")
def auction():
    return load_with_tx("auction")


# PASS/FAIL lines written by test_acceptance.py
ACCEPTANCE: list = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in sorted(ACCEPTANCE, key=lambda l: int(l.split()[1][:-1])):
            terminalreporter.write_line(line)
