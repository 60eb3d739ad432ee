"""
Slit Tomography File Formats

JSON and CSV codecs for the artifacts exchanged by the command line tools:
- States and density matrices: {"dim", "kind", "re", "im"}, row-major
- Tomography sets: dimension, rng seed, per-basis seeds, condition number
- Probability tables: CSV (rows = settings, columns = outcomes) plus a JSON
  sidecar with counts and the reference hash of the tomography set
- Interference patterns: CSV "x_m,intensity" plus a JSON sidecar
"""

import csv
import json
import logging
import os
from typing import Optional, Union

import numpy as np

from .bases import TomographySet
from .errors import ValidationError
from .optics import InterferencePattern, envelope_factors, multiplex_positions, pattern_power_diagnostic
from .qudit import DensityMatrix, QuditState
from .tomography import ProbabilityTable


def encode_complex(array) -> dict:
    array = np.asarray(array, dtype=complex)
    return {'re': array.real.tolist(), 'im': array.imag.tolist()}


def decode_complex(data: dict) -> np.ndarray:
    return np.asarray(data['re'], dtype=float) + 1j * np.asarray(data['im'], dtype=float)


def sidecar_path(path) -> str:
    base, _ = os.path.splitext(path)
    return f"{base}.meta.json"


def write_json(path, payload: dict):
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    with open(path, 'w', encoding='utf-8') as f:
        json.dump(payload, f, indent=2, sort_keys=True)
        f.write("\n")


def read_json(path) -> dict:
    try:
        with open(path, 'r', encoding='utf-8') as f:
            return json.load(f)
    except (OSError, json.JSONDecodeError) as e:
        raise ValidationError(f"Cannot read JSON file {path}: {e}")


def state_to_dict(state: Union[QuditState, DensityMatrix]) -> dict:
    if isinstance(state, QuditState):
        return {'dim': state.dim, 'kind': 'state', **encode_complex(state.amplitudes)}
    return {'dim': state.dim, 'kind': 'density', **encode_complex(state.elements)}


def state_from_dict(data: dict) -> Union[QuditState, DensityMatrix]:
    """Decode a state file; one-dimensional data is a pure state, square data a density matrix"""
    try:
        values = decode_complex(data)
        dim = int(data['dim'])
    except (KeyError, TypeError, ValueError) as e:
        raise ValidationError(f"Malformed state document: {e}")
    kind = data.get('kind', 'state' if values.ndim == 1 else 'density')
    if values.shape[0] != dim:
        raise ValidationError(f"State document declares dim={dim} but holds shape {values.shape}")
    if kind == 'state':
        return QuditState(values)
    return DensityMatrix(values)


def save_state(path, state):
    write_json(path, state_to_dict(state))


def load_state(path):
    return state_from_dict(read_json(path))


def save_tomography_set(path, tomography_set: TomographySet):
    write_json(path, tomography_set.to_dict())


def load_tomography_set(path) -> TomographySet:
    try:
        return TomographySet.from_dict(read_json(path))
    except (KeyError, TypeError) as e:
        raise ValidationError(f"Malformed tomography set file {path}: {e}")


def save_table(path, table: ProbabilityTable, tomography_set: Optional[TomographySet] = None):
    """Write the table CSV and its JSON sidecar"""
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    with open(path, 'w', newline='', encoding='utf-8') as f:
        writer = csv.writer(f)
        writer.writerow(['basis'] + [f"p{m}" for m in range(table.dim)])
        for label, row in enumerate(table.rows):
            writer.writerow([label] + [repr(float(p)) for p in row])
    write_json(sidecar_path(path), {
        'dim': table.dim,
        'method': table.method,
        'settings': table.settings,
        'counts': None if table.counts is None else table.counts.tolist(),
        'set_reference': None if tomography_set is None else tomography_set.reference_hash(),
        'vec_ordering': 'row-major (i, j) -> i*d + j',
    })


def load_table(path, tomography_set: Optional[TomographySet] = None) -> ProbabilityTable:
    """
    Read a table CSV, renormalizing every setting to unit sum

    When a tomography set is given and the sidecar names a different set, a
    warning is logged; the table is still returned.
    """
    try:
        with open(path, 'r', newline='', encoding='utf-8') as f:
            reader = csv.reader(f)
            next(reader)
            rows = np.array([[float(v) for v in row[1:]] for row in reader if row])
    except (OSError, StopIteration, ValueError) as e:
        raise ValidationError(f"Cannot read probability table {path}: {e}")

    meta = {}
    if os.path.exists(sidecar_path(path)):
        meta = read_json(sidecar_path(path))
    if tomography_set is not None and meta.get('set_reference') not in (None, tomography_set.reference_hash()):
        logging.warning(f"[Formats] Table {path} was measured with a different tomography set")
    table = ProbabilityTable.from_intensities(rows, settings=meta.get('settings'),
                                              method=meta.get('method', 'multiplexed'))
    if meta.get('counts') is not None:
        table = ProbabilityTable(rows=table.rows, counts=meta['counts'], settings=table.settings, method=table.method)
    return table


def save_pattern(path, pattern: InterferencePattern):
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    with open(path, 'w', newline='', encoding='utf-8') as f:
        writer = csv.writer(f)
        writer.writerow(['x_m', 'intensity'])
        for x, value in zip(pattern.x_grid, pattern.intensities):
            writer.writerow([repr(float(x)), repr(float(value))])
    write_json(sidecar_path(path), {
        'dim': pattern.config.dim,
        'multiplex_positions': multiplex_positions(pattern.config).tolist(),
        'multiplex_indices': pattern.multiplex_indices.tolist(),
        'multiplex_intensities': pattern.multiplex_intensities.tolist(),
        'envelope_factors': envelope_factors(pattern.config).tolist(),
        'diagnostic': pattern_power_diagnostic(pattern),
    })


def load_pattern_csv(path):
    """Return (x_grid, intensities) arrays from a pattern CSV"""
    data = np.loadtxt(path, delimiter=',', skiprows=1, ndmin=2)
    return data[:, 0], data[:, 1]
