import os
import xml.etree.ElementTree as ET

import pytest

from conftest import FIXTURES
from virtint import cli


def run_cli(capsys, *args, env=None):
    old = {}
    env = env or {}
    for key, value in env.items():
        old[key] = os.environ.get(key)
        os.environ[key] = value
    try:
        code = cli.main(list(args))
    finally:
        for key, value in old.items():
            if value is None:
                os.environ.pop(key, None)
            else:
                os.environ[key] = value
    out = capsys.readouterr().out
    return code, out


BSCU = [str(FIXTURES / "bscu" / n)
        for n in ("tc_command1.tcsd", "tc_monitor1.tcsd", "tc_switch.tcsd")]
BSCU_ARCH = str(FIXTURES / "bscu" / "bscu.arch")
REPAIRED = [str(FIXTURES / "bscu_repaired" / n)
            for n in ("tc_command1.tcsd", "tc_monitor1.tcsd", "tc_switch.tcsd")]
REPAIRED_ARCH = str(FIXTURES / "bscu_repaired" / "bscu.arch")


def test_validate_ok(capsys):
    code, out = run_cli(capsys, "validate", *BSCU)
    assert code == 0
    assert out.count("ok ") == 3


def test_validate_rejects_with_clause_name(capsys):
    path = str(FIXTURES / "invalid" / "double_partition.tcsd")
    code, out = run_cli(capsys, "validate", path)
    assert code == 1
    assert "uniqueness" in out


def test_validate_reports_cut_fragment(capsys):
    path = str(FIXTURES / "invalid" / "partition_in_fragment.tcsd")
    code, out = run_cli(capsys, "validate", path)
    assert code == 1
    assert "no-fragment-cutting" in out


def test_validate_missing_file_is_io_error(capsys):
    code, out = run_cli(capsys, "validate", str(FIXTURES / "nope.tcsd"))
    assert code == 2


def test_translate_writes_deterministic_dot(tmp_path, capsys):
    out1 = tmp_path / "a.dot"
    out2 = tmp_path / "b.dot"
    code, _ = run_cli(capsys, "translate", BSCU[0], "--dot", str(out1))
    assert code == 0
    code, _ = run_cli(capsys, "translate", BSCU[0], "--dot", str(out2))
    assert code == 0
    assert out1.read_bytes() == out2.read_bytes()


def test_translate_writes_tapaal_xml(tmp_path, capsys):
    out = tmp_path / "net.xml"
    code, _ = run_cli(capsys, "translate", BSCU[2], "--tapaal", str(out))
    assert code == 0
    ET.parse(out)


def test_translate_refuses_invalid_input(tmp_path, capsys):
    path = str(FIXTURES / "invalid" / "double_partition.tcsd")
    code, out = run_cli(capsys, "translate", path, "--dot", str(tmp_path / "x.dot"))
    assert code == 1
    assert "uniqueness" in out
    assert not (tmp_path / "x.dot").exists()


def test_translate_refuses_overwriting_input(capsys):
    code, out = run_cli(capsys, "translate", BSCU[0], "--dot", BSCU[0])
    assert code == 2
    assert "overwrite" in out


def test_check_bscu_reports_ordering_deadlock(capsys):
    code, out = run_cli(capsys, "check", *BSCU, "--arch", BSCU_ARCH)
    assert code == 1
    assert "ordering deadlock" in out
    for label in ("Status", "CMD1m", "AntiSkid1m", "CMD1", "AntiSkid1"):
        assert label in out


def test_check_repaired_bscu_consistent(tmp_path, capsys):
    report = tmp_path / "report.json"
    code, out = run_cli(capsys, "check", *REPAIRED, "--arch", REPAIRED_ARCH,
                        "--report", str(report))
    assert code == 0
    assert "overall: consistent" in out
    assert report.exists()


def test_check_timing_conflict(capsys):
    files = [str(FIXTURES / "timing" / "window_a.tcsd"),
             str(FIXTURES / "timing" / "window_b.tcsd")]
    code, out = run_cli(capsys, "check", *files, "--arch",
                        str(FIXTURES / "timing" / "windows.arch"))
    assert code == 1
    assert "timing conflict" in out


def test_check_unbound_diagram(capsys):
    code, out = run_cli(capsys, "check", *BSCU, "--arch",
                        str(FIXTURES / "timing" / "windows.arch"))
    assert code == 2
    assert "TC_Command1" in out


def test_check_require_all_flips_verdict(capsys):
    files = [str(FIXTURES / "require_all" / "tc_twice_a.tcsd"),
             str(FIXTURES / "require_all" / "tc_twice_b.tcsd")]
    arch = str(FIXTURES / "require_all" / "twice.arch")
    code, _ = run_cli(capsys, "check", *files, "--arch", arch)
    assert code == 0
    code, _ = run_cli(capsys, "check", *files, "--arch", arch, "--require-all")
    assert code == 1


def test_check_inconclusive_with_tiny_bounds(capsys):
    code, out = run_cli(capsys, "check", *BSCU, "--arch", BSCU_ARCH,
                        "--max-states", "5")
    assert code == 3
    assert "inconclusive" in out


def test_check_duplicate_diagram_usage_error(capsys):
    path = str(FIXTURES / "require_all" / "tc_twice_a.tcsd")
    code, out = run_cli(capsys, "check", path, path, "--arch",
                        str(FIXTURES / "require_all" / "twice.arch"))
    assert code == 2


def test_check_strict_policy_unmatched_occurrences(tmp_path, capsys):
    lean = tmp_path / "tc_lean.tcsd"
    lean.write_text("tcsd TC_TwiceB { sut R test C "
                    "msg C -> R : ping msg C -> R : done }")
    files = [str(FIXTURES / "require_all" / "tc_twice_a.tcsd"), str(lean)]
    arch = str(FIXTURES / "require_all" / "twice.arch")
    code, out = run_cli(capsys, "check", *files, "--arch", arch,
                        "--policy", "strict")
    assert code == 2
    assert "unmatched" in out and "ping" in out
    # The surplus occurrence is tolerated under the default policy.
    code, _ = run_cli(capsys, "check", *files, "--arch", arch)
    assert code == 0


def test_cross_product_mode(tmp_path, capsys):
    # Two alternative diagrams for CompA against one for CompB.
    alt = tmp_path / "tc_alt.tcsd"
    alt.write_text("tcsd TC_TwiceC { sut S test B "
                   "msg S -> B : ping msg S -> B : done msg S -> B : ping }")
    arch = tmp_path / "cross.arch"
    arch.write_text(
        "architecture X { components CompA, CompB "
        "bind TC_TwiceA { sut = CompA B -> CompB } "
        "bind TC_TwiceC { sut = CompA B -> CompB } "
        "bind TC_TwiceB { sut = CompB C -> CompA } }")
    files = [str(FIXTURES / "require_all" / "tc_twice_a.tcsd"), str(alt),
             str(FIXTURES / "require_all" / "tc_twice_b.tcsd")]
    code, out = run_cli(capsys, "check", *files, "--arch", str(arch))
    assert code == 2
    assert "--cross-product" in out
    code, out = run_cli(capsys, "check", *files, "--arch", str(arch),
                        "--cross-product")
    assert code == 0
    assert out.count("== selection:") == 2


def test_color_env_toggle(capsys):
    code, plain = run_cli(capsys, "validate", BSCU[0], env={"VIRTINT_COLOR": "never"})
    assert "\x1b[" not in plain
    code, colored = run_cli(capsys, "validate", BSCU[0], env={"VIRTINT_COLOR": "always"})
    assert "\x1b[32m" in colored


def test_bad_bounds_rejected(capsys):
    code, out = run_cli(capsys, "check", *BSCU, "--arch", BSCU_ARCH,
                        "--max-states", "0")
    assert code == 2
