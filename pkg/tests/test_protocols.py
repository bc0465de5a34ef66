import json

import numpy as np
import pytest

from fbhebb.core import Network, network_to_dict
from fbhebb.plasticity import Granularity, RuleParams, RuleVariant, train_step
from fbhebb.protocols import (
    PAIR_A,
    PAIR_B,
    PAIRS,
    Phase,
    ProtocolError,
    ProtocolSpec,
    Regime,
    make_sample,
    pair_counts,
    presentations,
    run_protocol,
)


def test_pairs():
    assert (PAIR_A.input_site, PAIR_A.target_sites) == (3, {8, 9})
    assert (PAIR_B.input_site, PAIR_B.target_sites) == (7, {5, 6})
    assert set(PAIRS) == {"A", "B"}


@pytest.mark.parametrize("pair,inp,tgt", [(PAIR_A, 3, [8, 9]), (PAIR_B, 7, [5, 6])])
def test_make_sample(pair, inp, tgt):
    x, t = make_sample(pair)
    assert np.flatnonzero(x).tolist() == [inp - 1]
    assert np.flatnonzero(t).tolist() == [s - 1 for s in tgt]
    assert set(np.unique(np.concatenate([x, t]))) <= {0.0, 1.0}
    x2, t2 = make_sample(pair)
    assert np.array_equal(x, x2) and np.array_equal(t, t2)


def test_sequential_schedule():
    spec = ProtocolSpec.sequential()
    seq = list(presentations(spec))
    assert len(seq) == 1000
    assert all(lbl == "A" for _, e, _, lbl in seq if e <= 10)
    assert all(lbl == "B" for _, e, _, lbl in seq if e > 10)
    assert spec.phase_end_epochs == [10, 20]


def test_interleaved_schedule():
    spec = ProtocolSpec.interleaved()
    seq = list(presentations(spec))
    assert len(seq) == 1000
    for e in range(1, 11):
        labels = [lbl for _, ep, _, lbl in seq if ep == e]
        assert labels == ["A", "B"] * 50


def test_sample_count_parity():
    assert pair_counts(ProtocolSpec.sequential()) == pair_counts(ProtocolSpec.interleaved()) == {"A": 500, "B": 500}


def test_schedule_is_pure_function_of_spec():
    assert list(presentations(ProtocolSpec.interleaved())) == list(presentations(ProtocolSpec.interleaved()))


@pytest.mark.parametrize("regime,expected", [(Regime.SEQUENTIAL, list(range(21))), (Regime.INTERLEAVED, list(range(11)))])
def test_recorder_epochs(regime, expected):
    fired = []
    steps = []

    def rec(e, n):
        fired.append(e)
        steps.append(n.step)

    run_protocol(Network.build("2ff2fb", 1), ProtocolSpec.for_regime(regime), recorder=rec)
    assert fired == expected
    per_epoch = 50 if regime is Regime.SEQUENTIAL else 100
    assert steps == [e * per_epoch for e in expected]


def test_zero_epochs_only_baseline():
    n = Network.build("2ff2fb", 1)
    before = json.dumps(network_to_dict(n))
    fired = []
    run_protocol(n, ProtocolSpec.sequential(epochs=0), recorder=lambda e, _: fired.append(e))
    assert fired == [0]
    assert json.dumps(network_to_dict(n)) == before


def test_phase_state_persists():
    spec = ProtocolSpec.sequential(epochs=2)
    whole = Network.build("2ff2fb", 3)
    run_protocol(whole, spec)
    split = Network.build("2ff2fb", 3)
    run_protocol(split, ProtocolSpec(None, spec.phases[:1]))
    assert split.step == 100 and split.context[1].any()
    run_protocol(split, ProtocolSpec(None, spec.phases[1:]))
    assert json.dumps(network_to_dict(whole)) == json.dumps(network_to_dict(split))


def test_run_matches_manual_train_steps():
    spec = ProtocolSpec(None, (Phase(("A", "B"), 4, 2),))
    a = Network.build("2ff2fb", 5)
    run_protocol(a, spec)
    b = Network.build("2ff2fb", 5)
    for label in ["A", "B"] * 4:
        train_step(b, *make_sample(PAIRS[label]), RuleParams())
    assert json.dumps(network_to_dict(a)) == json.dumps(network_to_dict(b))


def test_epoch_mean_applies_average_once_per_epoch():
    spec = ProtocolSpec(None, (Phase(("A",), 5, 1),))
    n = Network.build("2ff2fb", 2)
    ref = n.copy()
    deltas = []
    for _ in range(5):
        tr = train_step(ref, *make_sample(PAIR_A), RuleParams(), apply=False)
        deltas.append(tr.forward_deltas[1])
    w_before = n.forward[1].w.copy()
    run_protocol(n, spec, granularity=Granularity.EPOCH_MEAN)
    np.testing.assert_allclose(n.forward[1].w, w_before + sum(deltas) / 5, rtol=0, atol=1e-15)


def test_inner_error_carries_coordinate():
    n = Network.build("2ff2fb", 1)
    n.forward[1].w[0, 0] = np.nan
    with pytest.raises(ProtocolError) as info:
        run_protocol(n, ProtocolSpec.sequential())
    assert (info.value.phase, info.value.epoch, info.value.sample) == (1, 1, 0)
    assert "forward layer 2" in str(info.value)


def test_runs_deterministic():
    a, b = Network.build("3ff3fb", 8), Network.build("3ff3fb", 8)
    for n in (a, b):
        run_protocol(n, ProtocolSpec.interleaved(epochs=2), variant=RuleVariant.NO_DECAY)
    for (_, _, x), (_, _, y) in zip(a.matrices(), b.matrices()):
        assert x.w.tobytes() == y.w.tobytes()


def test_noise_hook_off_by_default_and_seeded():
    spec = ProtocolSpec.sequential(epochs=1)
    clean, noisy1, noisy2 = (Network.build("2ff2fb", 1) for _ in range(3))
    run_protocol(clean, spec)
    run_protocol(noisy1, spec, input_noise=0.05, noise_seed=4)
    run_protocol(noisy2, spec, input_noise=0.05, noise_seed=4)
    assert not np.array_equal(clean.forward[0].w, noisy1.forward[0].w)
    assert np.array_equal(noisy1.forward[0].w, noisy2.forward[0].w)
