import os
import sys

import pytest
import torch

sys.path.insert(0, os.path.dirname(__file__))

torch.set_num_threads(1)

# criterion number -> (status, title, detail)
ACCEPTANCE = {}


@pytest.fixture
def report():
    def record(number, title, ok, detail=""):
        status = ok if isinstance(ok, str) else "PASS" if ok else "FAIL"
        ACCEPTANCE[number] = (status, title, detail)
        print(f"\nACCEPTANCE {number:>2} {status}: {title} {detail}")
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        status, title, detail = ACCEPTANCE[number]
        terminalreporter.write_line(f"[{status}] {number:>2}. {title} {detail}".rstrip())
