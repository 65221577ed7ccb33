"""
main.py - Command line front door: simulate, estimate, run experiments and rate sweeps
"""

import argparse
import json
import logging
import sys
import time
from pathlib import Path

import numpy as np
import pandas as pd

from estimators import (LinearSpec, NL1Spec, NL2Spec, linear_galerkin, nl1_estimate,
                        nl2_estimate, select_level_for)
from experiment_data import (PRESETS, get_preset, load_config, signal_from_params,
                             with_overrides)
from harness import fit_rate, rmse, run_monte_carlo
from operators import KernelSpec, SingularOperatorError, build_operator
from reporting import emit_report, rank_methods
from simulate import load_observation, observe, save_observation, synthesize_signal
from wavelet import MultiIndex, get_filter


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--seed', type=int, default=None,
                        help='Random seed (base seed for experiments)')
    common.add_argument('--out', type=str, default=None,
                        help='Output file or directory')
    common.add_argument('--format', type=str, choices=['csv', 'json'], default='csv',
                        help='Report format')
    common.add_argument('--verbose', action='store_true',
                        help='Enable debug logging')

    parser = argparse.ArgumentParser(
        description='Wavelet estimators for inverse problems with a noisy operator')
    subparsers = parser.add_subparsers(dest='command', required=True)

    sim = subparsers.add_parser('simulate', parents=[common],
                                help='Draw one observation and write it as a bundle')
    sim.add_argument('--kernel', choices=['log_potential', 'diagonal'], default='log_potential')
    sim.add_argument('--kernel-t', type=float, default=1.0,
                     help='Decay exponent of the diagonal kernel')
    sim.add_argument('--signal', choices=['tent', 'single_wavelet', 'smooth', 'power_law'],
                     default='tent')
    sim.add_argument('--frequency', type=int, default=1)
    sim.add_argument('--smoothness', type=float, default=1.5)
    sim.add_argument('--level', type=int, default=0, help='Level of a single wavelet')
    sim.add_argument('--position', type=int, default=0, help='Position of a single wavelet')
    sim.add_argument('--max-level', type=int, default=10)
    sim.add_argument('--wavelet', choices=['daubechies', 'haar'], default='daubechies')
    sim.add_argument('--order', type=int, default=8)
    sim.add_argument('--delta', type=float, default=1e-3)
    sim.add_argument('--epsilon', type=float, default=1e-5)

    est = subparsers.add_parser('estimate', parents=[common],
                                help='Estimate the signal of an observation bundle')
    est.add_argument('--bundle', type=str, required=True)
    est.add_argument('--method', choices=['linear', 'nl1', 'nl2'], default='nl2')
    est.add_argument('--j', type=int, default=None, help='Linear projection level')
    est.add_argument('--j0', type=int, default=3)
    est.add_argument('--j1', type=int, default=None)
    est.add_argument('--J', type=int, default=None)
    est.add_argument('--kappa', type=float, default=0.4)
    est.add_argument('--kappa-op', type=float, default=1.5)
    est.add_argument('--kappa-data', type=float, default=1.5)
    est.add_argument('--tau', type=float, default=None)
    est.add_argument('--t', type=float, default=1.0)
    est.add_argument('--rule-c', type=float, default=5.0)
    est.add_argument('--sqrt-dim', action='store_true')
    est.add_argument('--threshold-mode', choices=['theoretical', 'empirical_decay'],
                     default='empirical_decay')

    exp = subparsers.add_parser('experiment', parents=[common],
                                help='Run a Monte Carlo experiment')
    source = exp.add_mutually_exclusive_group(required=True)
    source.add_argument('--config', type=str, help='JSON experiment config')
    source.add_argument('--preset', choices=sorted(PRESETS))
    exp.add_argument('--replications', type=int, default=None)

    rates = subparsers.add_parser('rates', parents=[common],
                                  help='Sweep noise levels and fit the RMSE rate')
    rates.add_argument('--config', type=str, default=None)
    rates.add_argument('--method', type=str, default='linear_oracle')
    rates.add_argument('--replications', type=int, default=None)
    rates.add_argument('--smoothness', type=float, default=None,
                       help='Smoothness s for the theoretical exponent')

    return parser


def run_simulate(args):
    print(f"Simulating {args.signal} signal under the {args.kernel} operator "
          f"(J_max={args.max_level}, delta={args.delta}, epsilon={args.epsilon})")
    seed = 0 if args.seed is None else args.seed
    out = Path(args.out or 'observation')

    print("\n1. Building operator and signal...")
    start_time = time.time()
    wavelet_filter = get_filter(args.wavelet, args.order)
    kernel = KernelSpec(kind=args.kernel, t=args.kernel_t)
    operator = build_operator(kernel, args.max_level, wavelet_filter)
    signal = signal_from_params(args.signal, {
        'level': args.level, 'position': args.position,
        'frequency': args.frequency, 'smoothness': args.smoothness,
    })
    truth = synthesize_signal(signal, args.max_level, wavelet_filter)
    print(f"   Completed in {time.time() - start_time:.2f} seconds")

    print("\n2. Drawing noisy observation...")
    observation = observe(truth, operator, args.delta, args.epsilon, seed)
    save_observation(observation, out, metadata={
        'kernel': args.kernel, 'kernel_t': args.kernel_t, 'signal': args.signal,
        'wavelet': args.wavelet, 'wavelet_order': args.order,
    })
    print(f"   Bundle written to {out}")
    return 0


def run_estimate(args):
    observation, metadata = load_observation(args.bundle)
    print(f"Estimating with {args.method} (delta={observation.delta}, "
          f"epsilon={observation.epsilon}, J_max={observation.max_level})")

    chosen_level = None
    if args.method == 'linear':
        if args.j is None:
            raise ValueError("The linear estimator needs --j")
        estimate = linear_galerkin(observation, LinearSpec(j=args.j, t=args.t, tau=args.tau))
    else:
        level = args.j1 if args.method == 'nl1' else args.J
        if level is None:
            chosen_level = select_level_for(observation, c=args.rule_c, sqrt_dim=args.sqrt_dim)
            level = chosen_level
            print(f"   Level rule chose J = {level}")
        if args.method == 'nl1':
            spec = NL1Spec(j0=min(args.j0, level - 1), j1=level, kappa=args.kappa, t=args.t,
                           tau=args.tau, threshold_mode=args.threshold_mode)
            estimate = nl1_estimate(observation, spec)
        else:
            spec = NL2Spec(J=level, kappa_op=args.kappa_op, kappa_data=args.kappa_data,
                           t=args.t, tau=args.tau)
            estimate = nl2_estimate(observation, spec)

    diagnostics = dict(estimate.diagnostics)
    diagnostics.update({'method': args.method, 'chosen_level': chosen_level,
                        'cutoff_triggered': estimate.cutoff_triggered,
                        'kernel': metadata.get('kernel'), 'signal': metadata.get('signal')})
    if observation.truth is not None:
        diagnostics['rmse'] = rmse(estimate.f, observation.truth)
        print(f"   RMSE against truth: {diagnostics['rmse']:.5f}")

    out = Path(args.out or Path(args.bundle) / 'estimate')
    out.mkdir(parents=True, exist_ok=True)
    pd.DataFrame({
        'index': np.arange(estimate.f.values.size),
        'level': estimate.f.levels,
        'position': [MultiIndex.from_flat(i).position for i in range(estimate.f.values.size)],
        'estimate': estimate.f.values,
    }).to_csv(out / 'estimate.csv', index=False, float_format='%.17g')
    with open(out / 'diagnostics.json', 'w') as f:
        json.dump(diagnostics, f, indent=2)
    print(f"   Estimate written to {out}")
    return 0


def _load_experiment(args, preset_default=None):
    if args.config:
        config = load_config(args.config)
    else:
        config = get_preset(getattr(args, 'preset', None) or preset_default)
    return with_overrides(config, replications=args.replications, base_seed=args.seed)


def _report_path(args, name):
    return Path(args.out or f"{name}_report.{args.format}")


def run_experiment(args):
    config = _load_experiment(args)
    print(f"Running experiment '{config.name}' with {config.replications} replications "
          f"over {len(config.cells())} noise cells")

    print("\n1. Running Monte Carlo replications...")
    start_time = time.time()
    result = run_monte_carlo(config, progress=True)
    print(f"   Completed in {time.time() - start_time:.2f} seconds")

    print("\n2. Ranking methods...")
    ranking = rank_methods(result)
    print("\n==== RECOMMENDATION ====")
    print(ranking['recommendation'])
    for cell in ranking['rankings']:
        print(f"\ndelta={cell['delta']:g}, epsilon={cell['epsilon']:g} (lower RMSE is better):")
        for entry in cell['ranked_methods']:
            mean = entry['rmse_mean']
            mean_text = 'n/a' if mean is None else f"{mean:.5f}"
            print(f"   {entry['method']}: RMSE = {mean_text}, "
                  f"wins = {100 * entry['win_fraction']:.0f}%, "
                  f"cutoff rate = {entry['cutoff_rate']:.2f}, failures = {entry['failure_count']}")

    for cell in result.cells:
        if cell['level_errors']:
            errors = ', '.join(f"j={k}: {'n/a' if v is None else f'{v:.5f}'}"
                               for k, v in cell['level_errors'].items())
            print(f"   {cell['method']} level sweep: {errors}")
        if len(cell['chosen_j_histogram']) > 0 and cell['method'] != 'linear':
            print(f"   {cell['method']} chosen levels: {cell['chosen_j_histogram']}")

    path = emit_report(result, _report_path(args, config.name), args.format)
    print(f"\n3. Report written to {path}")
    return 0


def run_rates(args):
    config = _load_experiment(args, preset_default='rates')
    s = args.smoothness if args.smoothness is not None else config.smoothness
    t = config.kernel.t
    print(f"Running rate sweep '{config.name}' over {len(config.cells())} noise levels")

    print("\n1. Running Monte Carlo replications...")
    start_time = time.time()
    result = run_monte_carlo(config, progress=True)
    print(f"   Completed in {time.time() - start_time:.2f} seconds")

    print("\n2. Fitting log RMSE against log noise level...")
    fit = fit_rate(result, args.method, s=s, t=t)
    print(f"   Method: {args.method}")
    print(f"   Fitted slope: {fit.slope:.4f} (r^2 = {fit.r_squared:.3f}, {fit.n_points} points)")
    print(f"   Theoretical exponent r(s={s}, t={t}, d=1): {fit.theoretical_exponent:.4f}")
    if fit.is_degenerate:
        print("WARNING: The fit is degenerate; the RMSE barely depends on the noise level.")

    path = emit_report(result, _report_path(args, config.name), args.format)
    print(f"\n3. Report written to {path}")
    return 0


COMMANDS = {
    'simulate': run_simulate,
    'estimate': run_estimate,
    'experiment': run_experiment,
    'rates': run_rates,
}


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)

    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format='%(levelname)s %(name)s: %(message)s')

    try:
        return COMMANDS[args.command](args)
    except (ValueError, OSError, KeyError, SingularOperatorError) as e:
        print(f"ERROR: {args.command} failed: {str(e)}")
        return 1


if __name__ == "__main__":
    sys.exit(main())
