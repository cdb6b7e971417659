import pytest

from specpot.errors import ConfigError
from specpot.verify import SUITE_ORDER, SUITES, run_suite, suite_gap_critical


def test_registry_names():
    expected = {"thm11", "thm12", "circle-critical", "no-local-min-λ2",
                "gap-critical", "gap-no-min"}
    assert expected <= set(SUITES)
    assert "no-local-min-l2" in SUITES  # ascii alias
    assert set(SUITE_ORDER) == expected


def test_unknown_suite_rejected():
    with pytest.raises(ConfigError, match="thm99"):
        run_suite("thm99", 0)


def test_suite_result_shape():
    out = suite_gap_critical(3)
    assert out["suite"] == "gap-critical"
    assert isinstance(out["passed"], bool)
    for check in out["checks"]:
        assert {"name", "passed", "measured", "tolerance"} <= set(check)


def test_suite_deterministic_in_seed():
    import json

    a = suite_gap_critical(5)
    b = suite_gap_critical(5)
    assert json.dumps(a, sort_keys=True) == json.dumps(b, sort_keys=True)
