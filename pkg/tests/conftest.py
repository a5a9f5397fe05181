import pytest

CRITERIA = {
    1: "Hoffman-Singleton reproduction",
    2: "Moore-bound gap",
    3: "Diameter-3 count percentages",
    4: "Balanced parameters",
    5: "Deadlock freedom",
    6: "Worst-case MIN bound",
    7: "Routing ordering on uniform traffic",
    8: "Full-scale spot check",
    9: "Cost and power table",
    10: "Resiliency at desk scale",
    11: "Bisection oracle equivalence",
    12: "Determinism",
}

_lines: dict[int, list[str]] = {}


@pytest.fixture
def criterion():
    """Record one pass/fail line for an acceptance criterion and return ``ok``."""

    def record(num: int, ok: bool, detail: str = "") -> bool:
        line = f"criterion {num:>2} {'PASS' if ok else 'FAIL'}  {CRITERIA[num]}: {detail}"
        _lines.setdefault(num, []).append(line)
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if not _lines:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(CRITERIA):
        if num not in _lines:
            terminalreporter.write_line(f"criterion {num:>2} NOT RUN  {CRITERIA[num]}: not selected (slow tier needs -m slow)")
            continue
        lines = _lines[num]
        # a criterion split over several tests passes only if all parts pass
        status = "PASS" if all(" PASS " in l for l in lines) else "FAIL"
        terminalreporter.write_line(f"criterion {num:>2} {status}  {CRITERIA[num]}")
        for l in lines:
            terminalreporter.write_line(f"    {l}")
