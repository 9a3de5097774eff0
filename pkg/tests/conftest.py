import pytest
from hypothesis import HealthCheck, settings

from mqmqe.corpus import ErrorSpan, QESample, Severity, tokenize

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

# sample record with two annotated error spans
REF_SRC = "Government pulls 15 more senior tax officials over graft charges"
REF_MT = "Regierung zieht 15 weitere leitende Steuerbeamte wegen Graft-Vorwürfen zurück"
REF_SPANS = (ErrorSpan(10, 15, Severity.MAJOR), ErrorSpan(55, 70, Severity.MINOR))
REF_TAGS = tuple("OK BAD OK OK OK OK OK BAD OK".split())


@pytest.fixture
def ref_sample():
    return QESample("t1", REF_SRC, tokenize(REF_MT), REF_TAGS, 1 / 3, REF_SPANS)


def pytest_terminal_summary(terminalreporter):
    import sys

    module = sys.modules.get("test_acceptance")
    results = getattr(module, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(results):
        terminalreporter.write_line(results[number])
