"""Pinned seed-1 results of the default run, to catch unintended numeric drift."""

import pytest

from fbhebb import harness
from fbhebb.config import RunConfig


@pytest.fixture(scope="module")
def summary():
    return harness.run(RunConfig()).summary


def test_final_peak(summary):
    pk = summary["peak_weight"]["20"]
    assert pk["max_abs"] == pytest.approx(1.1653093249243014, rel=1e-12)
    assert (pk["role"], pk["layer"]) == ("feedback", 2)


def test_retention_values(summary):
    fwd = [s["value"] for s in summary["retention"]["forward_output"]["sites"]]
    fb = [s["value"] for s in summary["retention"]["feedback_input"]["sites"]]
    assert fwd == pytest.approx([16.135767537867753, 1.9056562729379873, -1.6175517478059114, -3.653915175175143], rel=1e-9)
    assert fb == pytest.approx([0.42904851693232876, 0.3255742609455284], rel=1e-9)
