import json

import pytest
from tomaru.tomaru_math import np
from tomaru.prior import BetaPrior, TabulatedPrior
from tomaru.policy import backward_solve
from tomaru.policy_io import (
    SCHEMA_VERSION,
    input_hash,
    policy_to_dict,
    policy_from_dict,
    save_policy,
    load_policy,
    SessionState,
    save_state,
    load_state
)
from tomaru.errors import SchemaError, LatticeError

UNIFORM = BetaPrior.symmetric(1)
POLICY = backward_solve(UNIFORM, 0.1, 1e-3, horizon=150)
STOP_NOW = backward_solve(UNIFORM, 0.1, 1., horizon=10)


def test_round_trip(tmp_path):
    path = save_policy(POLICY, tmp_path / 'policy.json')
    loaded = load_policy(path)
    expected = POLICY.truncated()

    assert loaded.horizon == expected.horizon == POLICY.t_up
    assert (loaded.t_lo, loaded.t_up) == (POLICY.t_lo, POLICY.t_up)
    assert (loaded.h, loaded.c, loaded.prior) == (POLICY.h, POLICY.c, POLICY.prior)
    for t in range(loaded.horizon + 1):
        np.testing.assert_array_equal(loaded.grid.sampling[t], expected.grid.sampling[t])
        np.testing.assert_array_equal(loaded.grid.values[t], expected.grid.values[t])
        np.testing.assert_array_equal(loaded.estimates[t], expected.estimates[t])
        np.testing.assert_array_equal(loaded.coverage.comp_coverage[t], expected.coverage.comp_coverage[t])
        np.testing.assert_allclose(loaded.grid.continue_values[t], expected.grid.continue_values[t],
                                   rtol=1e-15, atol=1e-15)


def test_round_trip_tabulated(tmp_path):
    prior = TabulatedPrior.from_density([0, 0.5, 1], [1, 3, 1])
    policy = backward_solve(prior, 0.1, 1e-2, horizon=12)
    loaded = load_policy(save_policy(policy, tmp_path / 'tabulated.json'))

    assert loaded.prior == prior
    assert loaded.value == policy.value


def test_provenance():
    data = policy_to_dict(POLICY)

    assert data['schema_version'] == SCHEMA_VERSION
    assert data['provenance']['solve_horizon'] == 150
    assert data['provenance']['input_hash'] == input_hash(UNIFORM, 0.1, 1e-3, 150)
    assert data['regions'][0] == 'all-sampling'
    assert data['regions'][-1] == 'all-stopping'


def test_input_hash():
    assert input_hash(UNIFORM, 0.1, 1e-3, 150) == input_hash(BetaPrior(1, 1), 0.1, 1e-3, 150)
    assert input_hash(UNIFORM, 0.1, 1e-3, 150) != input_hash(UNIFORM, 0.1, 2e-3, 150)


def test_deterministic_output():
    first, second = policy_to_dict(POLICY), policy_to_dict(POLICY)
    del first['provenance']['timestamp'], second['provenance']['timestamp']

    assert json.dumps(first, sort_keys=True) == json.dumps(second, sort_keys=True)


def test_schema_version_checked():
    data = policy_to_dict(POLICY)
    data['schema_version'] = SCHEMA_VERSION + 1

    with pytest.raises(SchemaError):
        policy_from_dict(data)


def test_missing_key():
    data = policy_to_dict(POLICY)
    del data['values']

    with pytest.raises(SchemaError):
        policy_from_dict(data)


def test_malformed_region():
    data = policy_to_dict(POLICY)
    data['regions'][3] = 'sometimes'

    with pytest.raises(SchemaError):
        policy_from_dict(data)


def test_inconsistent_limits():
    data = policy_to_dict(POLICY)
    data['t_lo'] += 1

    with pytest.raises(SchemaError):
        policy_from_dict(data)


def test_invalid_json(tmp_path):
    path = tmp_path / 'broken.json'
    path.write_text('{"schema_version": 1,')

    with pytest.raises(SchemaError):
        load_policy(path)


def test_session_observe():
    state = SessionState('policy.json')

    assert not state.verdict(POLICY).stop
    for bit in [1, 0, 0, 1]:
        verdict = state.observe(POLICY, bit)

    assert (state.t, state.s) == (4, 2)
    assert not verdict.stop


def test_session_rejects_non_bits():
    state = SessionState('policy.json')

    with pytest.raises(LatticeError):
        state.observe(POLICY, 2)
    assert state.transcript == []


def test_session_refuses_after_stop():
    state = SessionState('policy.json')
    verdict = state.verdict(STOP_NOW)

    assert verdict.stop
    np.testing.assert_allclose([verdict.lower, verdict.upper], [0.4, 0.6])
    with pytest.raises(LatticeError):
        state.observe(STOP_NOW, 1)


def test_session_runs_to_stop():
    state = SessionState('policy.json')
    verdict = state.verdict(POLICY)
    while not verdict.stop:
        verdict = state.observe(POLICY, state.t % 3 == 0)

    assert POLICY.t_lo <= state.t <= POLICY.t_up


def test_session_round_trip(tmp_path):
    state = SessionState('policy.json', [1, 1, 0])
    loaded = load_state(save_state(state, tmp_path / 'state.json'), horizon=POLICY.horizon)

    assert loaded == state
    assert loaded.verdict(POLICY) == state.verdict(POLICY)


def test_session_beyond_horizon(tmp_path):
    path = save_state(SessionState('policy.json', [0] * 20), tmp_path / 'state.json')

    with pytest.raises(SchemaError):
        load_state(path, horizon=10)


def test_session_bad_transcript(tmp_path):
    path = tmp_path / 'state.json'
    path.write_text(json.dumps({'schema_version': SCHEMA_VERSION, 'policy': 'p.json', 'transcript': [0, 3]}))

    with pytest.raises(SchemaError):
        load_state(path)
