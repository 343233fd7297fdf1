"""
Report analyses over an EvalRecord table.

    fig1     mean and std ROC AUC per dim_c2 and method, plus a line plot
    fig2     Moran's I, dispersion R and AUC difference per dataset, plus scatter plots
    tables   regressions of the AUC difference on |dim_c1 - dim_c2|, R and Moran's I
    ranks    Friedman average ranks, Nemenyi critical distance, CD diagram
    runtime  mean seconds per run and method
"""
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import pandas as pd
from django.db import models
from django.template.loader import render_to_string
from django.utils.translation import gettext_lazy as _

from outliers.detectors import Detector

from .evaluation import RankSummary, friedman_nemenyi, ols_regression
from .exceptions import EvaluationError, IncompleteGridError

logger = logging.getLogger(__name__)

ORACLE = 'Oracle'
BASELINES = (Detector.KNN, Detector.LOF, Detector.SLOF)
PALETTE = ('#1f77b4', '#d62728', '#2ca02c', '#ff7f0e', '#9467bd', '#8c564b', '#e377c2', '#17becf')

WIDTH, HEIGHT = 640, 420
MARGIN = {'left': 70, 'right': 150, 'top': 40, 'bottom': 60}


class Analysis(models.TextChoices):
    FIG1 = 'fig1', _('AUC against dim_c2')
    FIG2 = 'fig2', _("Moran's I and dispersion against AUC difference")
    TABLES = 'tables', _('regressions of AUC difference')
    RANKS = 'ranks', _('Friedman-Nemenyi ranks')
    RUNTIME = 'runtime', _('runtime per run')


EXPLANATORY = {
    'dim_gap': '|dim_c1 - dim_c2|',
    'dispersion_R': 'dispersion R',
    'morans_I': "Moran's I",
}


@dataclass(frozen=True)
class Axis:
    """Linear map from data values onto a pixel interval."""
    low: float
    high: float
    start: float
    stop: float

    @classmethod
    def fit(cls, values, start, stop, pad=0.05):
        values = np.asarray(values, dtype=float)
        values = values[np.isfinite(values)]
        low, high = (float(values.min()), float(values.max())) if values.size else (0.0, 1.0)
        if low == high:
            low, high = low - 0.5, high + 0.5
        span = high - low
        return cls(low - pad * span, high + pad * span, start, stop)

    def __call__(self, value) -> float:
        return round(self.start + (value - self.low) / (self.high - self.low) * (self.stop - self.start), 2)

    def ticks(self, count=5, integer=False) -> list[dict]:
        values = np.linspace(self.low, self.high, count)
        if integer:
            values = np.unique(np.round(values))
        return [{'at': self(v), 'label': f"{v:.0f}" if integer else f"{v:.3g}"} for v in values]


def _plot_box():
    return {
        'width': WIDTH, 'height': HEIGHT,
        'left': MARGIN['left'], 'right': WIDTH - MARGIN['right'],
        'top': MARGIN['top'], 'bottom': HEIGHT - MARGIN['bottom'],
    }


def _write_svg(template: str, context: dict, path: Path) -> Path:
    path.write_text(render_to_string(f"benchmark/{template}", context))
    return path


def _write_csv(frame: pd.DataFrame, path: Path) -> Path:
    frame.to_csv(path, index=False, float_format='%.17g', lineterminator='\n')
    return path


def methods_of(frame: pd.DataFrame) -> list[str]:
    return list(pd.unique(frame['method']))


def check_grid(frame: pd.DataFrame, analysis: str, methods=None) -> None:
    """Every dataset must carry exactly one record for each method."""
    methods = methods_of(frame) if methods is None else list(methods)
    duplicated = frame.duplicated(['dataset', 'method'])
    if duplicated.any():
        first = frame[duplicated].iloc[0]
        raise EvaluationError(f"{analysis}: duplicate record for ({first['dataset']}, {first['method']})")
    present = set(zip(frame['dataset'], frame['method']))
    missing = [
        (dataset, method)
        for dataset in pd.unique(frame['dataset']) for method in methods
        if (dataset, method) not in present
    ]
    if missing:
        raise IncompleteGridError(analysis, missing)


def auc_table(frame: pd.DataFrame, analysis: str = 'ranks') -> pd.DataFrame:
    """datasets x methods ROC AUC, rows and columns in order of appearance."""
    check_grid(frame, analysis)
    table = frame.pivot(index='dataset', columns='method', values='roc_auc')
    return table.loc[pd.unique(frame['dataset']), methods_of(frame)]


def dao_method(frame: pd.DataFrame, method: str | None = None) -> str:
    methods = methods_of(frame)
    if method is not None:
        if method not in methods:
            raise EvaluationError(f"no records for {method}")
        return method
    for candidate in methods:
        if candidate.startswith(Detector.DAO):
            return candidate
    raise EvaluationError("no DAO records to compare against")


def fig1_table(frame: pd.DataFrame) -> pd.DataFrame:
    if frame['dim_c2'].isna().any():
        raise EvaluationError("fig1: every record needs dim_c2 (synthetic datasets only)")
    check_grid(frame, Analysis.FIG1)
    methods = methods_of(frame)
    grouped = frame.groupby(['dim_c2', 'method'])['roc_auc']
    summary = pd.DataFrame({
        'mean_auc': grouped.mean(),
        'std_auc': grouped.std(ddof=0),
        'datasets': grouped.size(),
    }).reset_index()
    summary['dim_c2'] = summary['dim_c2'].astype(int)
    summary['method'] = pd.Categorical(summary['method'], categories=methods, ordered=True)
    summary = summary.sort_values(['dim_c2', 'method']).reset_index(drop=True)
    summary['method'] = summary['method'].astype(str)
    return summary[['dim_c2', 'method', 'mean_auc', 'std_auc', 'datasets']]


def fig1_svg(summary: pd.DataFrame, path: Path) -> Path:
    box = _plot_box()
    x = Axis.fit(summary['dim_c2'], box['left'], box['right'])
    y = Axis.fit(np.concatenate([summary['mean_auc'] - summary['std_auc'],
                                 summary['mean_auc'] + summary['std_auc']]), box['bottom'], box['top'])
    series = []
    for position, method in enumerate(pd.unique(summary['method'])):
        rows = summary[summary['method'] == method]
        points = [
            {'x': x(d), 'y': y(m), 'low': y(m - s), 'high': y(m + s)}
            for d, m, s in zip(rows['dim_c2'], rows['mean_auc'], rows['std_auc'])
        ]
        series.append({
            'name': method,
            'color': PALETTE[position % len(PALETTE)],
            'polyline': ' '.join(f"{p['x']},{p['y']}" for p in points),
            'points': points,
            'legend_y': box['top'] + 18 * position,
        })
    return _write_svg('fig1.svg', {
        'box': box, 'series': series,
        'xticks': [{'at': x(d), 'label': str(d)} for d in pd.unique(summary['dim_c2'])],
        'yticks': y.ticks(),
        'title': 'ROC AUC against dim_c2 (mean and standard deviation)',
        'xlabel': 'dim_c2', 'ylabel': 'ROC AUC',
    }, path)


def competitors(frame: pd.DataFrame) -> list[str]:
    present = [str(method) for method in BASELINES if method in set(frame['method'])]
    return present + [ORACLE] if present else []


def auc_differences(frame: pd.DataFrame, analysis: str, method: str | None = None) -> pd.DataFrame:
    """Per dataset and competitor: the DAO AUC minus the competitor AUC.

    R and Moran's I come from the DAO record. Oracle is the best of the
    baselines present on each dataset.
    """
    dao = dao_method(frame, method)
    rivals = competitors(frame)
    if not rivals:
        raise EvaluationError(f"{analysis}: no kNN, LOF or SLOF records to compare against")
    check_grid(frame, analysis, [dao] + rivals[:-1])
    table = auc_table(frame[frame['method'].isin([dao] + rivals[:-1])], analysis).copy()
    table[ORACLE] = table[rivals[:-1]].max(axis=1)
    dao_rows = frame[frame['method'] == dao].set_index('dataset')
    rows = []
    for dataset in table.index:
        record = dao_rows.loc[dataset]
        dim_gap = np.nan
        if pd.notna(record['dim_c1']) and pd.notna(record['dim_c2']):
            dim_gap = abs(float(record['dim_c1']) - float(record['dim_c2']))
        for rival in rivals:
            rows.append({
                'dataset': dataset,
                'pair': f"{dao}:{rival}",
                'competitor': rival,
                'dim_gap': dim_gap,
                'dispersion_R': record['dispersion_R'],
                'morans_I': record['morans_I'],
                'auc_diff': table.at[dataset, dao] - table.at[dataset, rival],
            })
    return pd.DataFrame(rows)


def fig2_svg(differences: pd.DataFrame, competitor: str, path: Path) -> Path:
    rows = differences[(differences['competitor'] == competitor) & differences['morans_I'].notna()]
    box = _plot_box()
    x = Axis.fit(rows['morans_I'], box['left'], box['right'])
    y = Axis.fit(rows['dispersion_R'], box['bottom'], box['top'])
    scale = max(float(rows['auc_diff'].abs().max()) if len(rows) else 0.0, 1e-12)
    dots = []
    for _, row in rows.iterrows():
        share = min(1.0, abs(row['auc_diff']) / scale)
        # blue where DAO wins, red where the competitor wins
        channel = int(round(255 * (1 - share)))
        color = f"rgb({channel},{channel},255)" if row['auc_diff'] >= 0 else f"rgb(255,{channel},{channel})"
        dots.append({'x': x(row['morans_I']), 'y': y(row['dispersion_R']), 'color': color,
                     'title': f"{row['dataset']}: {row['auc_diff']:+.4f}"})
    return _write_svg('fig2.svg', {
        'box': box, 'dots': dots, 'xticks': x.ticks(), 'yticks': y.ticks(),
        'title': f"AUC difference {rows['pair'].iloc[0] if len(rows) else competitor}",
        'xlabel': "Moran's I", 'ylabel': 'dispersion R', 'scale': f"{scale:.3g}",
    }, path)


def regression_tables(differences: pd.DataFrame) -> dict[str, pd.DataFrame]:
    """One {pair, m, p, rho} table per explanatory variable with usable values."""
    tables = {}
    for variable in EXPLANATORY:
        usable = differences[differences[variable].notna()]
        if usable.empty:
            logger.warning(f"tables: no values for {EXPLANATORY[variable]}, skipped")
            continue
        rows = []
        try:
            for pair, group in usable.groupby('pair', sort=False):
                result = ols_regression(group[variable], group['auc_diff'])
                rows.append({'pair': pair, 'm': result.slope, 'p': result.p_value, 'rho': result.pearson_rho})
        except EvaluationError as e:
            logger.warning(f"tables: {EXPLANATORY[variable]} skipped, {e}")
            continue
        tables[variable] = pd.DataFrame(rows, columns=['pair', 'm', 'p', 'rho'])
    if not tables:
        raise EvaluationError("tables: no explanatory variable available")
    return tables


def cd_svg(summary: RankSummary, path: Path) -> Path:
    ranks = summary.average_ranks.sort_values(kind='stable')
    methods = len(ranks)
    box = _plot_box()
    box['right'] = WIDTH - 90
    box['left'] = 90
    axis = Axis(1.0, float(methods), box['left'], box['right'])
    labels = []
    half = (methods + 1) // 2
    for position, (method, rank) in enumerate(ranks.items()):
        left = position < half
        row = position if left else methods - 1 - position
        labels.append({
            'name': method, 'rank': f"{rank:.2f}", 'x': axis(rank),
            'y': box['top'] + 70 + 22 * row,
            'text_x': box['left'] - 10 if left else box['right'] + 10,
            'anchor': 'end' if left else 'start',
        })
    # groups of methods whose rank spread stays below the critical distance
    values = ranks.to_numpy()
    cliques, reach = [], -1
    for i in range(methods):
        j = i
        while j + 1 < methods and values[j + 1] - values[i] < summary.critical_distance:
            j += 1
        if j > i and j > reach:
            cliques.append({'x1': axis(values[i]) - 3, 'x2': axis(values[j]) + 3,
                            'y': box['top'] + 45 + 6 * len(cliques)})
            reach = j
    return _write_svg('cd.svg', {
        'box': box, 'labels': labels, 'cliques': cliques,
        'ticks': axis.ticks(count=methods, integer=True),
        'cd': {'x1': axis(1.0), 'x2': axis(min(1.0 + summary.critical_distance, methods + 1.0)),
               'label': f"CD = {summary.critical_distance:.3f} (alpha = {summary.alpha:g})"},
        'title': f"Average ranks over {summary.datasets} datasets",
    }, path)


def _rank_text(summary: RankSummary) -> str:
    lines = [f"Friedman-Nemenyi over {summary.datasets} datasets, {len(summary.average_ranks)} methods"]
    for method, rank in summary.average_ranks.sort_values(kind='stable').items():
        lines.append(f"  {method:<12} {rank:.4f}")
    lines.append(f"critical distance (alpha={summary.alpha:g}): {summary.critical_distance:.4f}")
    lines.append(f"Friedman chi2 = {summary.friedman_statistic:.4f}, p = {summary.friedman_p_value:.4g}")
    return '\n'.join(lines) + '\n'


def _tables_text(tables: dict[str, pd.DataFrame]) -> str:
    lines = []
    for variable, table in tables.items():
        lines.append(f"AUC difference regressed on {EXPLANATORY[variable]}")
        for row in table.itertuples(index=False):
            lines.append(f"  {row.pair:<20} m={row.m:+.4g}  p={row.p:.3g}  rho={row.rho:+.3f}")
        lines.append('')
    return '\n'.join(lines)


def runtime_table(frame: pd.DataFrame) -> pd.DataFrame:
    timed = frame[frame['runtime_mean'].notna()]
    if timed.empty:
        raise EvaluationError("runtime: no timings recorded, rerun with --timing")
    check_grid(timed, Analysis.RUNTIME, methods_of(frame))
    summary = timed.groupby('method', sort=False).agg(
        mean_seconds=('runtime_mean', 'mean'),
        std_seconds=('runtime_std', 'mean'),
        datasets=('runtime_mean', 'size'),
    ).reset_index()
    reference = summary.loc[summary['method'] == Detector.SLOF, 'mean_seconds']
    summary['ratio_to_SLOF'] = summary['mean_seconds'] / reference.iloc[0] if len(reference) else np.nan
    return summary


def report(frame: pd.DataFrame, analysis: str, output_dir, alpha: float | None = None,
           method: str | None = None) -> list[Path]:
    """Run one analysis over a records table; returns the files written."""
    output_dir = Path(output_dir)
    output_dir.mkdir(parents=True, exist_ok=True)
    if frame.empty:
        raise EvaluationError(f"{analysis}: no records")
    written = []
    if analysis == Analysis.FIG1:
        summary = fig1_table(frame)
        written.append(_write_csv(summary, output_dir / 'fig1.csv'))
        written.append(fig1_svg(summary, output_dir / 'fig1.svg'))
    elif analysis == Analysis.FIG2:
        differences = auc_differences(frame, Analysis.FIG2, method)
        written.append(_write_csv(
            differences[['dataset', 'competitor', 'morans_I', 'dispersion_R', 'auc_diff']],
            output_dir / 'fig2.csv'))
        for rival in pd.unique(differences['competitor']):
            written.append(fig2_svg(differences, rival, output_dir / f"fig2_{rival}.svg"))
    elif analysis == Analysis.TABLES:
        tables = regression_tables(auc_differences(frame, Analysis.TABLES, method))
        for variable, table in tables.items():
            written.append(_write_csv(table, output_dir / f"tables_{variable}.csv"))
        text = output_dir / 'tables.txt'
        text.write_text(_tables_text(tables))
        written.append(text)
    elif analysis == Analysis.RANKS:
        summary = friedman_nemenyi(auc_table(frame), alpha)
        ranks = summary.average_ranks.rename_axis('method').reset_index()
        written.append(_write_csv(ranks, output_dir / 'ranks.csv'))
        text = output_dir / 'ranks.txt'
        text.write_text(_rank_text(summary))
        written.append(text)
        written.append(cd_svg(summary, output_dir / 'cd.svg'))
    elif analysis == Analysis.RUNTIME:
        summary = runtime_table(frame)
        written.append(_write_csv(summary, output_dir / 'runtime.csv'))
    else:
        raise EvaluationError(f"unknown analysis {analysis!r}, choose from {Analysis.values}")
    for path in written:
        logger.info(f"{analysis}: wrote {path}")
    return written
