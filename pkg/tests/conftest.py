import pytest

from boundcorr.features import default_schema
from boundcorr.labels import default_phoneset
from boundcorr.sim import BiasRule

# acceptance outcomes collected by test_acceptance.py, printed at the end
ACCEPTANCE_RESULTS: dict[str, tuple[bool, str]] = {}

FOUR_BIASES = [
    BiasRule({"cur_phone_class": "vowel", "syllable_stressed": "true"}, 0.03),
    BiasRule({"cur_phone_class": "vowel", "syllable_stressed": "false"}, -0.02),
    BiasRule({"cur_phone_class": "consonant", "syllable_stressed": "true"}, 0.015),
    BiasRule({"cur_phone_class": "consonant", "syllable_stressed": "false"}, -0.01),
]


@pytest.fixture(scope="session")
def phoneset():
    return default_phoneset()


@pytest.fixture(scope="session")
def schema(phoneset):
    return default_schema(phoneset)


@pytest.fixture(scope="session")
def four_biases():
    return list(FOUR_BIASES)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_RESULTS):
        ok, detail = ACCEPTANCE_RESULTS[key]
        terminalreporter.write_line(f"{key}: {'PASS' if ok else 'FAIL'}  {detail}")
