"""Command-line interface: ``tomaru <command> [options]``

Commands
--------
solve      solve the optimal policy for a cost per sample, write policy JSON and region CSV
calibrate  find the cost per sample meeting a coverage target
evaluate   exact E[T | theta] and coverage of a stored policy over a theta grid
compare    optimal policy against fixed-sample-size, conditional and Frey schemes, by Bayes miss
           target, by cost, or per theta at a common worst-case miss
step       apply a stored policy to observations read from stdin
simulate   Monte Carlo check of a stored policy
bounds     closed-form horizons and limits, optionally with solved limits over costs
"""
import argparse
import csv
import json
import logging
import os
import sys
from pathlib import Path

from . import __version__
from .tomaru_math import np
from .prior import BetaPrior, prior_from_dict, predictive_grid
from .midpoint import coverage_grid
from .policy import backward_solve, thresholds, default_horizon
from .policy_io import save_policy, load_policy, SessionState, save_state, load_state
from .bounds import bounds_table, risk_horizon
from .performance import (
    evaluate,
    simulate,
    expected_samples_given_theta,
    expected_samples_bayes,
    miss_prob_given_theta,
    miss_prob_bayes,
    worst_case_miss
)
from .schemes import (
    FREY_TABLE,
    FreyConfig,
    C_FLOOR,
    BAYES,
    WORST_CASE,
    frey_scheme,
    fss_scheme,
    fss_sample_size,
    conditional_scheme,
    conditional_horizon,
    calibrate_c,
    calibrate_scalar,
    lagrangian_frontier,
    worst_case_comparison
)
from .errors import TomaruError, DomainError, SchemaError

logger = logging.getLogger('tomaru')

OUTPUT_DIR_ENV = 'TOMARU_OUTPUT_DIR'


def _prior(args):
    if args.prior_file is not None:
        with open(args.prior_file, 'r', encoding='utf-8') as handle:
            return prior_from_dict(json.load(handle))
    if args.prior_p is not None or args.prior_q is not None:
        if args.prior_p is None or args.prior_q is None:
            raise DomainError('--prior-p and --prior-q must be given together')
        return BetaPrior(args.prior_p, args.prior_q)

    return BetaPrior.symmetric(args.prior_a)


def _output_dir(args):
    out = args.out if args.out is not None else os.environ.get(OUTPUT_DIR_ENV)
    return None if out is None else Path(out)


def _emit(args, name, rows, summary=None):
    """write rows as CSV or JSON to stdout, or to <out>/<name> when an output directory is set"""
    out = _output_dir(args)
    handle = sys.stdout
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        path = out / f'{name}.{args.format}'
        handle = path.open('w', encoding='utf-8', newline='')

    try:
        if args.format == 'json':
            payload = rows if summary is None else {**summary, 'rows': rows}
            json.dump(payload, handle, indent=1, sort_keys=True)
            handle.write('\n')
        elif rows:
            writer = csv.DictWriter(handle, fieldnames=list(rows[0]), lineterminator='\n')
            writer.writeheader()
            writer.writerows(rows)
    finally:
        if handle is not sys.stdout:
            handle.close()
            logger.info('wrote %s', path)


def _theta_grid(args, parser):
    if args.theta_grid < 1:
        parser.error('--theta-grid needs at least one node')
    if args.theta_grid == 1:
        return np.array([0.5])

    return np.linspace(0., 1., args.theta_grid)


def cmd_solve(args, parser):
    prior = _prior(args)
    policy = backward_solve(prior, args.h, args.c, args.horizon)
    solve_horizon = policy.horizon
    policy = policy.truncated()

    rows = []
    for t in range(policy.horizon + 1):
        r_lo, r_hi, marker = thresholds(policy.grid, t)
        rows.append({'t': t,
                     'r_lo': '' if r_lo is None else r_lo,
                     'r_hi': '' if r_hi is None else r_hi,
                     'marker': marker or ''})

    out = _output_dir(args)
    if out is not None:
        save_policy(policy, out / 'policy.json', solve_horizon)

    summary = {'c': policy.c, 'h': policy.h, 'prior': prior.to_dict(), 'horizon': solve_horizon,
               't_lo': policy.t_lo, 't_up': policy.t_up, 'value': policy.value}
    print(json.dumps(summary, sort_keys=True), file=sys.stderr)
    _emit(args, 'regions', rows)

    return 0


def cmd_calibrate(args, parser):
    prior = _prior(args)
    horizon = args.horizon if args.horizon is not None else risk_horizon(args.alpha, args.h)

    if args.mode == BAYES:
        result = calibrate_c(prior, args.h, args.alpha, horizon)
        summary = {'mode': BAYES,
                   'alpha': args.alpha,
                   'c_star': result.c_star,
                   'randomization_p': result.randomization_p,
                   'achieved_miss': result.achieved_miss,
                   'expected_n': result.achieved_n,
                   'c_lo': result.policy_lo.c,
                   'c_hi': result.policy_hi.c,
                   't_lo': [result.policy_lo.t_lo, result.policy_hi.t_lo],
                   't_up': [result.policy_lo.t_up, result.policy_hi.t_up]}
        policies = {'policy_lo': result.policy_lo, 'policy_hi': result.policy_hi}
    else:
        theta = _theta_grid(args, parser)
        coverage = coverage_grid(prior, args.h, horizon)
        predictive = predictive_grid(prior, horizon)
        solved = {}

        def family(c):
            solved[c] = backward_solve(prior, args.h, c, horizon, coverage, predictive)
            return solved[c].truncated().to_scheme()

        found = calibrate_scalar(family, args.alpha, (C_FLOOR, 1.), mode=WORST_CASE,
                                 log_scale=True, theta_grid=theta)
        policy = solved[found.parameter]
        theta_star, _ = worst_case_miss(found.scheme, theta)
        summary = {'mode': WORST_CASE,
                   'alpha': args.alpha,
                   'c_star': found.parameter,
                   'randomization_p': 1.,
                   'achieved_miss': found.achieved_miss,
                   'worst_theta': theta_star,
                   'expected_n': expected_samples_bayes(found.scheme, prior, predictive),
                   't_lo': policy.t_lo,
                   't_up': policy.t_up}
        policies = {'policy': policy}

    out = _output_dir(args)
    if out is not None:
        for name, policy in policies.items():
            save_policy(policy, out / f'{name}.json')

    print(json.dumps(summary, indent=1, sort_keys=True))

    return 0


def cmd_evaluate(args, parser):
    theta = _theta_grid(args, parser)
    policy = load_policy(args.policy)
    report = evaluate(policy.to_scheme(), policy.prior, theta)

    rows = [{'theta': float(th), 'expected_n': float(n), 'coverage': float(1 - m), 'miss_prob': float(m)}
            for th, n, m in zip(report.theta, report.expected_n_given_theta, report.miss_given_theta)]
    summary = {'expected_n': report.expected_n, 'coverage': report.coverage_bayes}
    _emit(args, 'evaluation', rows, summary)

    return 0


def _row(scheme_name, target, parameter, expected_n, miss):
    return {'scheme': scheme_name, 'target': target, 'parameter': parameter,
            'coverage': 1 - miss, 'expected_n': expected_n}


def _competitors(prior, h, alpha, coverage, comp_0):
    """fixed-sample-size and conditional schemes calibrated to a miss target"""
    n = fss_sample_size(prior, h, alpha, coverage=coverage)
    fss = fss_scheme(prior, h, n, coverage)
    rows = [_row('fss', alpha, n, float(n), miss_prob_bayes(fss, prior))]

    if alpha < comp_0:
        found = calibrate_scalar(lambda beta: conditional_scheme(prior, h, beta, coverage=coverage),
                                 alpha, (alpha, comp_0), mode=BAYES, prior=prior)
        rows.append(_row('conditional', alpha, found.parameter,
                         expected_samples_bayes(found.scheme, prior), found.achieved_miss))

    return rows


def _compare_worst_case(args, parser, prior):
    """per-theta rows of every scheme calibrated to the same worst-case miss"""
    if args.c is not None:
        parser.error('--mode worst-case calibrates to --alpha targets, not --c')
    theta = _theta_grid(args, parser)

    rows = []
    for alpha in sorted(args.alpha):
        for entry in worst_case_comparison(prior, args.h, alpha, theta, args.horizon):
            report = entry.report
            for th, n, m in zip(report.theta, report.expected_n_given_theta, report.miss_given_theta):
                rows.append({'scheme': entry.name, 'target': alpha, 'parameter': entry.parameter,
                             'theta': float(th), 'expected_n': float(n),
                             'coverage': float(1 - m), 'miss_prob': float(m)})

    _emit(args, 'comparison', rows)

    return 0


def cmd_compare(args, parser):
    prior = _prior(args)
    if args.mode == WORST_CASE:
        return _compare_worst_case(args, parser, prior)
    h = args.h

    solved = []
    if args.c is None:
        targets = sorted(args.alpha)
        depth = max(risk_horizon(targets[0], h), conditional_horizon(prior, h, targets[0]))
    else:
        # each cost's optimal miss becomes the target of the competitors
        horizon = args.horizon
        if horizon is None:
            horizon = default_horizon(prior, h, min(args.c))
        grid = coverage_grid(prior, h, horizon)
        predictive = predictive_grid(prior, horizon)
        for c in sorted(args.c, reverse=True):
            scheme = backward_solve(prior, h, c, horizon, grid, predictive).to_scheme()
            miss = miss_prob_bayes(scheme, prior, predictive)
            solved.append(_row('optimal', miss, c, expected_samples_bayes(scheme, prior, predictive), miss))
        targets = [row['target'] for row in solved]
        depth = max(horizon, risk_horizon(min(targets), h), conditional_horizon(prior, h, min(targets)))

    coverage = coverage_grid(prior, h, depth)
    comp_0 = float(coverage.comp_coverage[0][0])

    rows = []
    for i, alpha in enumerate(targets):
        if args.c is None:
            result = calibrate_c(prior, h, alpha, risk_horizon(alpha, h), coverage)
            rows.append(_row('optimal', alpha, result.c_star, result.achieved_n, result.achieved_miss))
        else:
            rows.append(solved[i])
        rows.extend(_competitors(prior, h, alpha, coverage, comp_0))

    frey = sorted((nominal, k, gamma) for (table_h, nominal), (k, gamma) in FREY_TABLE.items() if table_h == h)
    if not frey:
        logger.warning('no published Frey configuration for h=%g', h)
    for nominal, k, gamma in frey:
        scheme = frey_scheme(FreyConfig(k, gamma, h), prior)
        rows.append(_row('frey', 1 - nominal, gamma,
                         expected_samples_bayes(scheme, prior), miss_prob_bayes(scheme, prior)))

    _emit(args, 'comparison', rows)

    return 0


def _verdict_line(t, s, verdict):
    if not verdict.stop:
        return f'CONTINUE t={t} s={s}'

    return (f'STOP t={t} s={s} estimate={verdict.estimate:.12g} '
            f'interval=[{verdict.lower:.12g}, {verdict.upper:.12g}]')


def cmd_step(args, parser):
    policy = load_policy(args.policy)

    state_path = Path(args.state) if args.state is not None else None
    if state_path is not None and state_path.exists():
        state = load_state(state_path, policy.horizon)
        if Path(state.policy_path).resolve() != Path(args.policy).resolve():
            raise SchemaError(f'session {state_path} belongs to policy {state.policy_path}, not {args.policy}')
    else:
        state = SessionState(str(Path(args.policy).resolve()))

    verdict = state.verdict(policy)
    print(_verdict_line(state.t, state.s, verdict), flush=True)

    status = 0
    for line in sys.stdin:
        token = line.strip()
        if not token:
            continue
        if verdict.stop:
            print(f'error: the rule stopped at t={state.t}, observation {token!r} refused', file=sys.stderr)
            status = 1
            break
        if token not in ('0', '1'):
            print(f'error: observation must be 0 or 1, got {token!r}', file=sys.stderr)
            status = 1
            continue

        verdict = state.observe(policy, int(token))
        print(_verdict_line(state.t, state.s, verdict), flush=True)

    if state_path is not None:
        save_state(state, state_path)

    return status


def cmd_simulate(args, parser):
    policy = load_policy(args.policy)
    scheme = policy.to_scheme()

    rows = []
    for theta in args.theta:
        summary = simulate(scheme, theta, args.reps, args.seed)
        rows.append({'theta': theta, **summary._asdict(),
                     'exact_expected_n': expected_samples_given_theta(scheme, theta),
                     'exact_miss': miss_prob_given_theta(scheme, theta)})

    _emit(args, 'simulation', rows)

    return 0


def cmd_bounds(args, parser):
    prior = _prior(args)
    if prior.kind != 'beta':
        raise DomainError('closed-form bounds need a Beta prior')
    a = (prior.p + prior.q) / 2

    rows = [bounds_table(c, a, args.h) for c in args.c]

    if args.series:
        horizon = args.horizon
        if horizon is None:
            horizon = default_horizon(prior, args.h, min(args.c))
        for row, point in zip(rows, lagrangian_frontier(prior, args.h, args.c, horizon)):
            row.update({'t_lo': point.t_lo, 'expected_n': point.expected_n,
                        't_up': point.t_up, 'coverage': point.coverage})

    _emit(args, 'bounds', rows)

    return 0


def _add_prior_args(parser):
    group = parser.add_argument_group('prior')
    group.add_argument('--prior-a', type=float, default=1., help='shape of a Beta(a, a) prior (default 1, uniform)')
    group.add_argument('--prior-p', type=float, default=None, help='first shape of a Beta(p, q) prior')
    group.add_argument('--prior-q', type=float, default=None, help='second shape of a Beta(p, q) prior')
    group.add_argument('--prior-file', default=None, help='JSON prior, beta or tabulated')


def _add_output_args(parser):
    parser.add_argument('--out', default=None,
                        help=f'output directory, defaults to ${OUTPUT_DIR_ENV} or stdout')
    parser.add_argument('--format', choices=('csv', 'json'), default='csv', help='table format')


def build_parser():
    parser = argparse.ArgumentParser(prog='tomaru',
                                     description='optimal sequential fixed-width intervals for a binomial proportion')
    parser.add_argument('--version', action='version', version=f'%(prog)s {__version__}')
    parser.add_argument('-v', '--verbose', action='count', default=0, help='-v for INFO, -vv for DEBUG')
    commands = parser.add_subparsers(dest='command', required=True)

    solve = commands.add_parser('solve', help='solve the optimal policy for a cost per sample')
    _add_prior_args(solve)
    solve.add_argument('--h', type=float, required=True, help='interval half-width')
    solve.add_argument('--c', type=float, required=True, help='cost per sample')
    solve.add_argument('--horizon', type=int, default=None, help='horizon, defaults to the logarithmic bound')
    _add_output_args(solve)
    solve.set_defaults(handler=cmd_solve)

    calibrate = commands.add_parser('calibrate', help='cost per sample meeting a miss probability target')
    _add_prior_args(calibrate)
    calibrate.add_argument('--h', type=float, required=True)
    calibrate.add_argument('--alpha', type=float, required=True, help='target miss probability')
    calibrate.add_argument('--mode', choices=(BAYES, WORST_CASE), default=BAYES)
    calibrate.add_argument('--horizon', type=int, default=None)
    calibrate.add_argument('--theta-grid', type=int, default=1001, help='theta nodes for worst-case mode')
    _add_output_args(calibrate)
    calibrate.set_defaults(handler=cmd_calibrate)

    evaluate_ = commands.add_parser('evaluate', help='exact performance of a stored policy')
    evaluate_.add_argument('--policy', required=True, help='policy JSON written by solve')
    evaluate_.add_argument('--theta-grid', type=int, default=1001, help='number of equispaced theta nodes')
    _add_output_args(evaluate_)
    evaluate_.set_defaults(handler=cmd_evaluate)

    compare = commands.add_parser('compare', help='calibrated schemes side by side')
    _add_prior_args(compare)
    compare.add_argument('--h', type=float, required=True)
    points = compare.add_mutually_exclusive_group()
    points.add_argument('--alpha', type=float, nargs='+', default=[0.1, 0.05],
                        help='target miss probabilities')
    points.add_argument('--c', type=float, nargs='+', default=None,
                        help='costs per sample, each setting the miss target of the competitors')
    compare.add_argument('--mode', choices=(BAYES, WORST_CASE), default=BAYES,
                         help='bayes rows per target, or worst-case rows per scheme and theta')
    compare.add_argument('--horizon', type=int, default=None,
                         help='shared horizon of the --c solves, or of the optimal policy in worst-case mode')
    compare.add_argument('--theta-grid', type=int, default=1001, help='theta nodes for worst-case mode')
    _add_output_args(compare)
    compare.set_defaults(handler=cmd_compare)

    step = commands.add_parser('step', help='apply a stored policy to 0/1 lines from stdin')
    step.add_argument('--policy', required=True)
    step.add_argument('--state', default=None, help='session file, resumed when it exists and updated on exit')
    step.set_defaults(handler=cmd_step)

    simulate_ = commands.add_parser('simulate', help='Monte Carlo check of a stored policy')
    simulate_.add_argument('--policy', required=True)
    simulate_.add_argument('--theta', type=float, nargs='+', default=[0.1, 0.3, 0.5])
    simulate_.add_argument('--reps', type=int, default=100000, help='replications per theta')
    simulate_.add_argument('--seed', type=int, default=0)
    _add_output_args(simulate_)
    simulate_.set_defaults(handler=cmd_simulate)

    bounds = commands.add_parser('bounds', help='closed-form horizons and limits')
    _add_prior_args(bounds)
    bounds.add_argument('--h', type=float, required=True)
    bounds.add_argument('--c', type=float, nargs='+', required=True, help='costs per sample')
    bounds.add_argument('--series', action='store_true', help='also solve t_lo, E[T] and t_up for every cost')
    bounds.add_argument('--horizon', type=int, default=None, help='shared horizon of the --series solves')
    _add_output_args(bounds)
    bounds.set_defaults(handler=cmd_bounds)

    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)

    level = {0: logging.WARNING, 1: logging.INFO}.get(args.verbose, logging.DEBUG)
    logging.basicConfig(level=level, stream=sys.stderr, format='%(name)s %(levelname)s: %(message)s')

    try:
        return args.handler(args, parser)
    except (TomaruError, OSError) as err:
        print(f'tomaru: error: {err}', file=sys.stderr)
        return 1
