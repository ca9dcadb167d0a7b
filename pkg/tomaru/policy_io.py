"""JSON persistence of solved policies and of live stepping sessions"""
import hashlib
import json
import logging
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

from . import __version__
from .tomaru_math import np
from .prior import prior_from_dict, predictive_grid
from .midpoint import CoverageGrid
from .policy import (
    PolicyGrid,
    StoppingPolicy,
    ALL_SAMPLING,
    ALL_STOPPING,
    decide,
    extract_limits,
    thresholds
)
from .errors import SchemaError, LatticeError

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1
POLICY_KEYS = ('schema_version', 'prior', 'h', 'c', 'horizon', 'regions', 'estimates',
               'comp_coverage', 'values', 't_lo', 't_up', 'provenance')


def input_hash(prior, h, c, horizon):
    """sha256 of the canonical JSON of the solve inputs"""
    canonical = json.dumps({'prior': prior.to_dict(), 'h': h, 'c': c, 'horizon': horizon},
                           sort_keys=True, separators=(',', ':'))
    return hashlib.sha256(canonical.encode('utf-8')).hexdigest()


def _encode_regions(grid):
    regions = []
    for t in range(grid.horizon + 1):
        r_lo, r_hi, marker = thresholds(grid, t)
        regions.append(marker if marker is not None else [r_lo, r_hi])

    return regions


def _decode_regions(regions, horizon):
    if len(regions) != horizon + 1:
        raise SchemaError(f'expected {horizon + 1} regions, found {len(regions)}')

    sampling = []
    for t, region in enumerate(regions):
        s = np.arange(t + 1)
        if region == ALL_SAMPLING:
            sampling.append(np.ones(t + 1, dtype=bool))
        elif region == ALL_STOPPING:
            sampling.append(np.zeros(t + 1, dtype=bool))
        elif isinstance(region, list) and len(region) == 2:
            sampling.append((s > region[0]) & (s < region[1]))
        else:
            raise SchemaError(f'malformed region at t={t}: {region!r}')

    return sampling


def _decode_triangle(rows, horizon, name):
    if len(rows) != horizon + 1 or any(len(row) != t + 1 for t, row in enumerate(rows)):
        raise SchemaError(f'{name} is not a triangular array of horizon {horizon}')

    return [np.asarray(row, dtype=float) for row in rows]


def policy_to_dict(policy, solve_horizon=None):
    """JSON-ready form of a policy, truncated at t_up

    Parameters
    ----------
    policy : StoppingPolicy
        solved policy
    solve_horizon : int, optional
        horizon the policy was solved on, recorded in the provenance. By
        default the policy's own horizon

    Returns
    -------
    dict
    """

    if solve_horizon is None:
        solve_horizon = policy.horizon
    policy = policy.truncated()

    return {'schema_version': SCHEMA_VERSION,
            'prior': policy.prior.to_dict(),
            'h': policy.h,
            'c': policy.c,
            'horizon': policy.horizon,
            'regions': _encode_regions(policy.grid),
            'estimates': [row.tolist() for row in policy.coverage.estimates],
            'comp_coverage': [row.tolist() for row in policy.coverage.comp_coverage],
            'values': [row.tolist() for row in policy.grid.values],
            't_lo': policy.t_lo,
            't_up': policy.t_up,
            'provenance': {'version': __version__,
                           'timestamp': datetime.now(timezone.utc).isoformat(),
                           'input_hash': input_hash(policy.prior, policy.h, policy.c, solve_horizon),
                           'solve_horizon': solve_horizon}}


def policy_from_dict(data):
    """rebuild a StoppingPolicy from `policy_to_dict` output

    Continuation values are recomputed from the stored values, which
    reproduces them exactly.
    """

    if data.get('schema_version') != SCHEMA_VERSION:
        raise SchemaError(f'unsupported policy schema version {data.get("schema_version")!r}')
    missing = [key for key in POLICY_KEYS if key not in data]
    if missing:
        raise SchemaError(f'policy file lacks {", ".join(missing)}')

    prior = prior_from_dict(data['prior'])
    h, c, horizon = float(data['h']), float(data['c']), int(data['horizon'])

    sampling = _decode_regions(data['regions'], horizon)
    estimates = _decode_triangle(data['estimates'], horizon, 'estimates')
    comp = _decode_triangle(data['comp_coverage'], horizon, 'comp_coverage')
    values = _decode_triangle(data['values'], horizon, 'values')

    predictive = predictive_grid(prior, horizon)
    continue_values = [predictive[t] * values[t + 1][1:] + (1 - predictive[t]) * values[t + 1][:-1]
                       for t in range(horizon)]
    continue_values.append(np.ones(horizon + 1))

    grid = PolicyGrid(values, continue_values, sampling, horizon)
    t_lo, t_up = extract_limits(grid)
    if (t_lo, t_up) != (data['t_lo'], data['t_up']):
        raise SchemaError(f'stored limits ({data["t_lo"]}, {data["t_up"]}) disagree with the regions')

    coverage = CoverageGrid(prior, h, horizon, estimates, comp)

    return StoppingPolicy(prior, h, c, horizon, grid, coverage, t_lo, t_up)


def save_policy(policy, path, solve_horizon=None):
    """write a policy as sorted, indented JSON and return the path"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open('w', encoding='utf-8', newline='\n') as handle:
        json.dump(policy_to_dict(policy, solve_horizon), handle, indent=1, sort_keys=True)
        handle.write('\n')

    logger.info('wrote policy to %s', path)
    return path


def load_policy(path):
    """read a policy written by `save_policy`"""
    path = Path(path)
    try:
        with path.open('r', encoding='utf-8') as handle:
            data = json.load(handle)
    except json.JSONDecodeError as err:
        raise SchemaError(f'{path} is not valid JSON: {err}') from None

    return policy_from_dict(data)


@dataclass
class SessionState:
    """observations fed to a stepping session so far

    Attributes
    ----------
    policy_path : str
        policy file the session runs against
    transcript : list of int
        observed bits in order
    """
    policy_path: str
    transcript: list = field(default_factory=list)

    @property
    def t(self):
        return len(self.transcript)

    @property
    def s(self):
        return sum(self.transcript)

    def verdict(self, policy):
        """the stopping rule at the current cell"""
        return decide(policy, self.t, self.s)

    def observe(self, policy, bit):
        """record one observation and return the verdict after it

        Parameters
        ----------
        policy : StoppingPolicy
            the session's policy
        bit : int
            0 or 1

        Returns
        -------
        Verdict
        """

        if bit not in (0, 1):
            raise LatticeError(f'observation must be 0 or 1, got {bit!r}')
        if self.verdict(policy).stop:
            raise LatticeError(f'the rule already stopped at t={self.t}, no further observations')

        self.transcript.append(bit)
        return self.verdict(policy)

    def to_dict(self):
        return {'schema_version': SCHEMA_VERSION,
                'policy': self.policy_path,
                'transcript': list(self.transcript)}


def save_state(state, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open('w', encoding='utf-8', newline='\n') as handle:
        json.dump(state.to_dict(), handle, sort_keys=True)
        handle.write('\n')

    return path


def load_state(path, horizon=None):
    """read a session written by `save_state`

    Parameters
    ----------
    path : str or pathlib.Path
        state file
    horizon : int, optional
        horizon of the session's policy, checked against the transcript length

    Returns
    -------
    SessionState
    """

    with Path(path).open('r', encoding='utf-8') as handle:
        data = json.load(handle)

    if data.get('schema_version') != SCHEMA_VERSION:
        raise SchemaError(f'unsupported session schema version {data.get("schema_version")!r}')

    transcript = data.get('transcript')
    if not isinstance(transcript, list) or any(bit not in (0, 1) for bit in transcript):
        raise SchemaError('session transcript must be a list of 0/1 observations')
    if horizon is not None and len(transcript) > horizon:
        raise SchemaError(f'session holds {len(transcript)} observations, beyond the horizon {horizon}')

    return SessionState(str(data.get('policy')), transcript)
