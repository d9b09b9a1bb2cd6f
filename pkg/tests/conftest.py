"""Pytest wiring for the acceptance battery.

test_acceptance.py splits some numbered gates into several functions
named ``test_criterion_NN_<phase>``.  The terminal-summary hook below
folds the phases back into one PASS/FAIL line per gate so a run ends
with a compact scoreboard.  The hook stays silent when no acceptance
test ran, so the rest of the suite is unaffected.
"""

import re

_CRITERION = re.compile(r"::test_criterion_(\d{2})")

_LABELS = {
    1: "distance chain CW1 <= AW1 <= 2AV0 <= C*TV0 <= C*sqrt(KL/2)",
    2: "robustness bounds for P&L and AVaR objectives",
    3: "flow prior invertibility, log-det, and normalization",
    4: "autodiff gradients vs finite differences",
    5: "bit-level causality of encoder, decoder, reconstruction",
    6: "BS generator quality: realized vol and metric orderings",
    7: "sliced adapted W1 separates fake from control",
    8: "LSMC stopping values: closed form and real-vs-fake overlap",
    9: "log-utility: Merton optimum and cross-value band",
    10: "stylized facts of extended conditional generations",
    11: "nested AW1 and discrete OT against exact oracles",
}


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    outcomes = {}
    for status in ("passed", "failed", "error", "skipped"):
        for rep in terminalreporter.stats.get(status, []):
            m = _CRITERION.search(getattr(rep, "nodeid", ""))
            if m:
                outcomes.setdefault(int(m.group(1)), []).append(status)
    if not outcomes:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(outcomes):
        ok = all(s == "passed" for s in outcomes[num])
        word = "PASS" if ok else "FAIL"
        terminalreporter.write_line(
            f"criterion {num:2d}: {word}  {_LABELS.get(num, '')}")
