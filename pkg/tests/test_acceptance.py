"""
Acceptance battery.

Each criterion runs once per session with seed 7 and prints one line of the
form ``criterion k: PASS|FAIL  name  (metrics)``.  Assertions use the
tolerances built into the suite; nothing is relaxed here.
"""
import time

import pytest

from gifkit import cli
from gifkit.suite import CRITERIA

SEED = 7
TIME_LIMIT = 60.0


@pytest.fixture(scope="module")
def results():
    out = {}
    for key, fn in CRITERIA.items():
        t0 = time.perf_counter()
        res = fn(SEED)
        out[key] = (res, time.perf_counter() - t0)
    return out


def _report(capsys, line):
    with capsys.disabled():
        print("\n" + line)


@pytest.mark.parametrize("key", list(CRITERIA))
def test_criterion(key, results, capsys):
    res, elapsed = results[key]
    verdict = "PASS" if res.passed else "FAIL"
    _report(capsys, f"criterion {key}: {verdict}  {res.name}  ({res.summary()}; seconds={elapsed:.2f})")
    assert elapsed < TIME_LIMIT
    assert res.passed, res.summary()


def test_criterion_9_determinism(tmp_path, capsys):
    t0 = time.perf_counter()
    codes = [cli.main(["suite", "--seed", str(SEED), "--out", str(tmp_path / d)]) for d in ("a", "b")]
    capsys.readouterr()
    names = ("suite.json", "suite.csv")
    same = all((tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes() for f in names)
    verdict = "PASS" if same else "FAIL"
    _report(capsys, f"criterion 9: {verdict}  byte-identical suite reports  "
                    f"(exit_codes={codes}; seconds={time.perf_counter() - t0:.2f})")
    assert same
