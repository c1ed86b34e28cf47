"""
heatprof.reporting

"""

import os
import json
import glob
from hashlib import md5
from dataclasses import dataclass, asdict
import numpy as np
import pandas as pd
import matplotlib
matplotlib.use('Agg')
import matplotlib.pyplot as plt
from matplotlib.tri import Triangulation
from tabulate import tabulate

from .errors import ParseError

SCHEMA_VERSION = '1.0'
#Keys every JSON report must carry
REPORT_KEYS = ('schema_version', 'experiment', 'config_hash', 'mesh',
               'checks', 'results')
CHECK_KEYS = ('name', 'value', 'lower', 'upper', 'passed')


@dataclass
class Check:
    '''One invariant check {name, value, lower, upper, passed}'''
    name: str
    value: float
    lower: float = None
    upper: float = None
    passed: bool = None

    def __post_init__(self):
        if self.passed is None:
            self.passed = evaluate_check(self.value, self.lower, self.upper)


def evaluate_check(value, lower=None, upper=None):
    '''True when value is finite and lies in [lower, upper]'''
    if value is None or not np.isfinite(value):
        return False
    if lower is not None and value < lower:
        return False
    if upper is not None and value > upper:
        return False
    return True


def config_hash(config):
    '''md5 of the canonical (sorted-key) JSON text of a config document'''
    text = json.dumps(config, sort_keys=True, default=_to_builtin)
    return md5(text.encode('utf-8')).hexdigest()


def _to_builtin(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, Check):
        return asdict(obj)
    raise TypeError('{} is not JSON serializable'.format(type(obj).__name__))


def _clean(obj):
    #NaN and inf are not JSON; they are written as null
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (float, np.floating)) and not np.isfinite(obj):
        return None
    return obj


class Report:
    '''JSON report of one experiment

    Parameters
    ----------
        experiment : str
            Experiment name, also the file stem
        config_hash : str
            Hash of the run-config
        mesh_stats : dict, optional
            Output of Mesh.stats, Default is None
    '''

    def __init__(self, experiment, config_hash, mesh_stats=None):
        self.experiment = experiment
        self.config_hash = config_hash
        self.mesh = mesh_stats or {}
        self.checks = []
        self.results = {}
        self.tables = []

    def check(self, name, value, lower=None, upper=None):
        value = None if value is None else float(value)
        entry = Check(name, value, lower, upper)
        self.checks.append(entry)
        return entry

    def add(self, **results):
        self.results.update(results)

    @property
    def passed(self):
        return all(c.passed for c in self.checks)

    def to_dict(self):
        return {'schema_version': SCHEMA_VERSION,
                'experiment': self.experiment,
                'config_hash': self.config_hash,
                'mesh': self.mesh,
                'checks': [asdict(c) for c in self.checks],
                'results': self.results,
                'tables': list(self.tables)}

    def write(self, out_dir):
        fn = os.path.join(out_dir, '{}.json'.format(self.experiment))
        write_json(self.to_dict(), fn)
        return fn


def write_json(doc, filename):
    with open(filename, 'w') as f:
        json.dump(_clean(json.loads(json.dumps(doc, default=_to_builtin))),
                  f, indent=2, sort_keys=True)


def write_csv(frame, out_dir, name, report=None):
    '''Writes a DataFrame as <name>.csv and records it on the report'''
    fn = os.path.join(out_dir, '{}.csv'.format(name))
    frame.to_csv(fn, index=False, float_format='%.17g')
    if report is not None:
        report.tables.append(os.path.basename(fn))
    return fn


def nodal_frame(mesh, values, label='value'):
    '''Per-node table: node, x, y, slit side, value'''
    return pd.DataFrame({'node': np.arange(mesh.n_nodes),
                         'x': mesh.nodes[:, 0], 'y': mesh.nodes[:, 1],
                         'side': mesh.slit_side,
                         label: np.asarray(values, float)})


def plot_nodal(mesh, values, filename, title=None, log=False):
    '''Heatmap of a nodal field (tripcolor, Gouraud shading) saved as SVG'''
    values = np.asarray(values, float)
    if log:
        values = np.log10(np.maximum(values, np.max(values)*1e-16))
    tri = Triangulation(mesh.nodes[:, 0], mesh.nodes[:, 1], mesh.triangles)
    f, ax = plt.subplots(1)
    im = ax.tripcolor(tri, values, shading='gouraud', cmap='viridis')
    f.colorbar(im, ax=ax)
    ax.set_aspect('equal')
    if title:
        ax.set_title(title)
    f.savefig(filename, format='svg')
    plt.close(f)
    return filename


def plot_decay(times, deviation, filename, window=None, rate=None):
    '''Semilog plot of the deviation D(t) with the fitted tail'''
    f, ax = plt.subplots(1)
    ax.semilogy(times, deviation, 'o-', ms=3, label='D(t)')
    if window is not None:
        ax.axvspan(window[0], window[1], alpha=0.15, color='grey')
    if rate is not None and window is not None:
        sel = (times >= window[0]) & (times <= window[1])
        if np.any(sel):
            t0, d0 = times[sel][0], deviation[sel][0]
            ax.semilogy(times[sel], d0*np.exp(-rate*(times[sel] - t0)), '--',
                        label='rate {:.4g}'.format(rate))
    ax.set_xlabel('t')
    ax.set_ylabel('max deviation')
    ax.legend()
    f.savefig(filename, format='svg')
    plt.close(f)
    return filename


def write_workbook(out_dir, filename='reports.xlsx'):
    '''Collects every CSV table of a report directory into one workbook'''
    tables = sorted(glob.glob(os.path.join(out_dir, '*.csv')))
    fn = os.path.join(out_dir, filename)
    if not tables:
        return None
    with pd.ExcelWriter(fn, engine='openpyxl') as writer:
        for t in tables:
            sheet = os.path.splitext(os.path.basename(t))[0][:31]
            pd.read_csv(t).to_excel(writer, sheet_name=sheet, index=False)
    return fn


def write_manifest(out_dir, failures, config_hash):
    '''failures.json: one entry per failed experiment or check'''
    fn = os.path.join(out_dir, 'failures.json')
    write_json({'schema_version': SCHEMA_VERSION, 'config_hash': config_hash,
                'failures': failures}, fn)
    return fn


def print_checks(checks, title=None):
    '''Console table of checks'''
    if title:
        print(title)
    rows = [[c.name, _fmt(c.value), _fmt(c.lower), _fmt(c.upper),
             'pass' if c.passed else 'FAIL'] for c in checks]
    print(tabulate(rows, headers=['Check', 'Value', 'Lower', 'Upper',
                                  'Status']))


def _fmt(x):
    return '' if x is None else '{:.6g}'.format(x)


#CSV invariants re-checked by verify_dir, keyed on the file stem
def _csv_checks(stem, frame):
    out = []
    if stem.startswith('weighted_volume'):
        ratio = (frame['V_2r']/frame['V_r']).to_numpy()
        out.append(('{}: V_2r >= V_r'.format(stem), float(ratio.min()), 1.0,
                    None))
        out.append(('{}: V_r > 0'.format(stem), float(frame['V_r'].min()),
                    np.finfo(float).tiny, None))
    elif stem == 'ultracontractivity':
        gap = (frame['A3'] - frame['a3']).to_numpy()
        out.append(('{}: A3 >= a3'.format(stem), float(gap.min()), 0.0,
                    None))
        out.append(('{}: a3 > 0'.format(stem), float(frame['a3'].min()),
                    np.finfo(float).tiny, None))
    elif stem == 'uniformity':
        out.append(('{}: c > 0'.format(stem), float(frame['c'].min()),
                    np.finfo(float).tiny, None))
        out.append(('{}: C >= 1'.format(stem), float(frame['C'].min()),
                    1 - 1e-9, None))
    elif stem == 'eigenvalues':
        lam = frame['lambda'].to_numpy()
        out.append(('{}: sorted'.format(stem),
                    float(np.min(np.diff(lam))) if len(lam) > 1 else 0.0,
                    -1e-10, None))
    elif stem == 'phi':
        out.append(('{}: phi >= 0'.format(stem), float(frame['phi'].min()),
                    0.0, None))
    return out


def verify_dir(out_dir, verbose=True):
    '''Re-evaluates stored checks and CSV invariants without re-solving

    Every JSON report must carry the schema keys; each stored check is
    recomputed from its value and bounds.

    Returns
    -------
        checks : list of Check
            Re-evaluated checks; a stored pass flag that disagrees with its
            bounds appears as a failed "consistent" check
    '''
    if not os.path.isdir(out_dir):
        raise ParseError('Parse Error: {} is not a report directory'
                         .format(out_dir))
    checks = []
    for fn in sorted(glob.glob(os.path.join(out_dir, '*.json'))):
        stem = os.path.splitext(os.path.basename(fn))[0]
        if stem in ('failures', 'config', 'domain'):
            continue
        with open(fn, 'r') as f:
            try:
                doc = json.load(f)
            except json.JSONDecodeError as err:
                raise ParseError('Parse Error: {} is not valid JSON\n{}'
                                 .format(fn, err))
        missing = [k for k in REPORT_KEYS if k not in doc]
        checks.append(Check('{}: schema'.format(stem), float(len(missing)),
                            0.0, 0.0))
        for c in doc.get('checks', []):
            if any(k not in c for k in CHECK_KEYS):
                checks.append(Check('{}: check schema'.format(stem), 1.0,
                                    0.0, 0.0))
                continue
            value = np.nan if c['value'] is None else c['value']
            ok = evaluate_check(value, c['lower'], c['upper'])
            checks.append(Check('{}: {}'.format(stem, c['name']), value,
                                c['lower'], c['upper'], ok))
            if ok != c['passed']:
                checks.append(Check('{}: {} consistent'.format(
                    stem, c['name']), 1.0, 0.0, 0.0))
    for fn in sorted(glob.glob(os.path.join(out_dir, '*.csv'))):
        stem = os.path.splitext(os.path.basename(fn))[0]
        for name, value, lower, upper in _csv_checks(stem, pd.read_csv(fn)):
            checks.append(Check(name, value, lower, upper))
    if verbose:
        print_checks(checks, 'Verified {}'.format(out_dir))
    return checks
