import pathlib

import pytest

from virtint import model, parser

ROOT = pathlib.Path(__file__).resolve().parent.parent
FIXTURES = ROOT / "fixtures"


def load_tcsd(path):
    """Parse and validate a fixture file, asserting it is well-formed."""
    text = pathlib.Path(path).read_text(encoding="utf-8")
    parsed = parser.parse_tcsd(text, filename=str(path))
    checked = model.validate(parsed.tcsd)
    assert checked.ok, checked.violations
    return checked.tcsd


def load_arch(path):
    text = pathlib.Path(path).read_text(encoding="utf-8")
    return parser.parse_architecture(text, filename=str(path))


@pytest.fixture
def fixtures_dir():
    return FIXTURES


@pytest.fixture
def bscu():
    tcsds = [
        load_tcsd(FIXTURES / "bscu" / name)
        for name in ("tc_command1.tcsd", "tc_monitor1.tcsd", "tc_switch.tcsd")
    ]
    return tcsds, load_arch(FIXTURES / "bscu" / "bscu.arch")


@pytest.fixture
def bscu_repaired():
    tcsds = [
        load_tcsd(FIXTURES / "bscu_repaired" / name)
        for name in ("tc_command1.tcsd", "tc_monitor1.tcsd", "tc_switch.tcsd")
    ]
    return tcsds, load_arch(FIXTURES / "bscu_repaired" / "bscu.arch")
