import pytest

from fbhebb.config import ConfigError, RunConfig, load_or_default
from fbhebb.core import Architecture
from fbhebb.plasticity import RuleVariant


def test_defaults():
    c = RunConfig()
    assert (c.seed, c.arch, c.variant, c.epochs) == (1, Architecture.FF2_FB2, RuleVariant.FULL, 10)
    assert (c.params.lr, c.params.beta, c.params.alpha) == (0.001, 1.0, 0.01)
    assert c.run_name == "2ff2fb_full_sequential_s1"


def test_round_trip(tmp_path):
    c = RunConfig(seed=7, arch="3ff3fb", variant="no-cov", regime="interleaved", epochs=3,
                  injection="preactivation", lr=0.0025, input_noise=0.01)
    assert RunConfig.loads(c.dumps()) == c
    p = tmp_path / "c.ini"
    p.write_text(c.dumps())
    assert load_or_default(p) == c
    assert load_or_default(None) == RunConfig()


def test_partial_file_keeps_defaults():
    c = RunConfig.loads("[run]\nseed = 4\n[rule]\nbeta = 0.5\n")
    assert c.seed == 4 and c.params.beta == 0.5 and c.arch is Architecture.FF2_FB2


@pytest.mark.parametrize("text,field", [
    ("[run]\narch = 4ff\n", "arch"),
    ("[run]\nseed = one\n", "seed"),
    ("[run]\nepochs = -1\n", "epochs"),
    ("[run]\nsnapshots = some\n", "snapshots"),
    ("[rule]\nalpha = 0\n", "alpha"),
    ("[rule]\nlr = -1\n", "lr"),
    ("[run]\ncolour = red\n", "colour"),
    ("[other]\nseed = 1\n", "other"),
])
def test_errors_name_the_field(text, field):
    with pytest.raises(ConfigError, match=field):
        RunConfig.loads(text)


def test_overrides_skip_none():
    c = RunConfig().with_overrides(seed=None, arch="2ff")
    assert c.seed == 1 and c.arch is Architecture.FF2_ONLY
