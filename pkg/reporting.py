"""
reporting.py - Plot-ready reports and method rankings for experiment results
"""

import json
import logging
from pathlib import Path

import numpy as np
import pandas as pd

from harness import ExperimentResult

logger = logging.getLogger(__name__)

CSV_COLUMNS = ['delta', 'epsilon', 'method', 'rmse_mean', 'rmse_std', 'cutoff_rate',
               'chosen_j_mode', 'wall_ms', 'seed']
REPORT_FORMATS = ('csv', 'json')


def summary_table(result):
    """
    One row per cell with the report columns.

    Args:
        result (ExperimentResult): experiment output

    Returns:
        pd.DataFrame: columns CSV_COLUMNS
    """
    rows = [{column: cell.get(column) for column in CSV_COLUMNS} for cell in result.cells]
    return pd.DataFrame(rows, columns=CSV_COLUMNS)


def emit_report(result, path, fmt='csv'):
    """
    Write a report file.

    Args:
        result (ExperimentResult): experiment output
        path (str or Path): destination file
        fmt (str): 'csv' (summary rows) or 'json' (full records)

    Returns:
        Path: the written file
    """
    if fmt not in REPORT_FORMATS:
        raise ValueError(f"Unknown report format '{fmt}', expected one of {REPORT_FORMATS}")
    path = Path(path)

    if fmt == 'csv':
        summary_table(result).to_csv(path, index=False)
    else:
        with open(path, 'w') as f:
            json.dump(result.to_dict(), f, indent=2)

    logger.info("Wrote %s report with %d cells to %s", fmt, len(result.cells), path)
    return path


def load_report(path):
    """Read a JSON report back into an ExperimentResult."""
    with open(path) as f:
        return ExperimentResult.from_dict(json.load(f))


def _per_seed_wins(cells):
    """Fraction of replications each method has the smallest error in."""
    names = [cell['method'] for cell in cells]
    errors = np.array([[np.inf if e is None else e for e in cell['rmse_per_replication']]
                       for cell in cells])
    wins = dict.fromkeys(names, 0)
    valid = np.isfinite(errors).any(axis=0)
    for column in np.flatnonzero(valid):
        wins[names[int(np.argmin(errors[:, column]))]] += 1
    total = int(valid.sum())
    return {name: (count / total if total else 0.0) for name, count in wins.items()}


def rank_methods(result):
    """
    Rank the methods of every noise cell by mean RMSE.

    Args:
        result (ExperimentResult): experiment output

    Returns:
        dict: per-cell rankings (lower RMSE is better) and a recommendation
    """
    groups = {}
    for cell in result.cells:
        groups.setdefault((cell['delta'], cell['epsilon']), []).append(cell)

    rankings = []
    for (delta, epsilon), cells in groups.items():
        wins = _per_seed_wins(cells)
        evaluations = [{
            'method': cell['method'],
            'rmse_mean': cell['rmse_mean'],
            'cutoff_rate': cell['cutoff_rate'],
            'failure_count': cell['failure_count'],
            'win_fraction': wins[cell['method']],
        } for cell in cells]
        ranked = sorted(evaluations, key=lambda e: np.inf if e['rmse_mean'] is None
                        else e['rmse_mean'])
        rankings.append({'delta': delta, 'epsilon': epsilon, 'ranked_methods': ranked,
                         'best_method': ranked[0]['method'] if ranked[0]['rmse_mean']
                         is not None else None})

    best = [r['best_method'] for r in rankings if r['best_method'] is not None]
    if not best:
        recommendation = "No method produced an estimate. Check the failure counts."
    elif len(set(best)) == 1:
        recommendation = f"Method '{best[0]}' has the smallest RMSE in every noise cell."
    else:
        counts = pd.Series(best).value_counts()
        recommendation = (f"Method '{counts.index[0]}' has the smallest RMSE in "
                          f"{counts.iloc[0]} of {len(best)} noise cells.")

    return {'rankings': rankings, 'recommendation': recommendation}
