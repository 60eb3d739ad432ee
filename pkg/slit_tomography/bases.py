"""
Slit Tomography Bases Module

Generation of self-multiplexing measurement bases and of informationally
complete sets of d+1 bases:
- |Phi_m> = sum_l b_l omega^{m l} |l> from a flat-amplitude seed b
- Canonical basis B_0 plus d flat-seed bases, the best conditioned of
  several random draws
- Measurement matrix M with p = M vec(rho), vec row-major over (i, j)
"""

import hashlib
import json
import logging
import os
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy import linalg

from .errors import (
    DimensionMismatchError,
    InvalidSeedError,
    NotInformationallyCompleteError,
    ValidationError,
)

FLATNESS_TOLERANCE = 1e-9
RANK_CUTOFF = 1e-14
DEFAULT_TRIALS = 100
PAPER_BASES_FILE = os.path.join(os.path.dirname(__file__), "data", "paper_bases_d6.json")


def root_of_unity_powers(dim) -> np.ndarray:
    """omega^{m l} for m, l in 0 .. d-1, exponents reduced mod d"""
    ell = np.arange(dim)
    return np.exp(2j * np.pi * (np.outer(ell, ell) % dim) / dim)


@dataclass(frozen=True, eq=False)
class MeasurementBasis:
    """One basis B_J; row m of vectors is |Phi_m^(J)>"""
    label: int
    seed: np.ndarray
    vectors: np.ndarray

    @property
    def dim(self) -> int:
        return int(self.vectors.shape[0])

    @property
    def is_canonical(self) -> bool:
        return bool(np.array_equal(self.vectors, np.eye(self.dim)))

    @property
    def is_flat(self) -> bool:
        return is_flat_seed(self.seed)

    def gram(self) -> np.ndarray:
        return self.vectors.conj() @ self.vectors.T


def is_flat_seed(seed, tolerance=FLATNESS_TOLERANCE) -> bool:
    seed = np.asarray(seed, dtype=complex)
    return bool(np.all(np.abs(np.abs(seed) ** 2 - 1.0 / seed.size) <= tolerance))


def generate_basis(seed, label: int) -> MeasurementBasis:
    """
    Complete a flat-amplitude seed into an orthonormal basis

    Args:
        seed: Complex d-vector b with |b_l|^2 = 1/d
        label: Basis index J

    Returns:
        MeasurementBasis whose row 0 equals the seed

    Raises:
        InvalidSeedError: If the seed amplitudes are not flat
    """
    seed = np.asarray(seed, dtype=complex)
    if seed.ndim != 1 or seed.size < 2:
        raise InvalidSeedError(f"Seed must be a complex vector with d >= 2, got shape {seed.shape}")
    if not is_flat_seed(seed):
        worst = np.max(np.abs(np.abs(seed) ** 2 - 1.0 / seed.size))
        raise InvalidSeedError(f"Seed for basis {label} violates |b_l|^2 = 1/d (off by {worst:.3e})")
    vectors = root_of_unity_powers(seed.size) * seed[np.newaxis, :]
    return MeasurementBasis(label=label, seed=seed.copy(), vectors=vectors)


def random_flat_seed(dim, rng) -> np.ndarray:
    """(1/sqrt(d)) exp(i theta_l) with theta_l uniform on [0, 2 pi)"""
    theta = rng.uniform(0.0, 2.0 * np.pi, dim)
    return np.exp(1j * theta) / np.sqrt(dim)


def uniform_seed(dim) -> np.ndarray:
    return np.full(dim, 1.0 / np.sqrt(dim), dtype=complex)


def reflatten_seed(seed) -> np.ndarray:
    """Rescale every component to modulus 1/sqrt(d), keeping its phase"""
    seed = np.asarray(seed, dtype=complex)
    if np.any(seed == 0):
        raise InvalidSeedError("Cannot re-flatten a seed with a zero component")
    return seed / np.abs(seed) / np.sqrt(seed.size)


def canonical_basis(dim) -> MeasurementBasis:
    identity = np.eye(dim, dtype=complex)
    return MeasurementBasis(label=0, seed=identity[0].copy(), vectors=identity)


def measurement_matrix(bases: Sequence[MeasurementBasis]) -> np.ndarray:
    """
    Stack one row per (J, m): M_{(J,m),(i,j)} = (b_m^J)_j (b_m^J)_i*

    Columns follow the row-major flattening of rho, column index i*d + j, so
    that M @ rho.ravel() gives Tr(rho |Phi_m^J><Phi_m^J|).
    """
    if not bases:
        raise ValidationError("Need at least one basis")
    dim = bases[0].dim
    rows = []
    for basis in bases:
        if basis.dim != dim:
            raise DimensionMismatchError(f"Basis {basis.label} has d={basis.dim}, expected {dim}")
        for vector in basis.vectors:
            rows.append(np.outer(vector.conj(), vector).ravel())
    return np.array(rows)


def condition_number(matrix) -> float:
    """sigma_max / sigma_min, or inf when sigma_min < 1e-14 sigma_max"""
    singular = linalg.svdvals(np.asarray(matrix))
    if singular.size == 0 or singular[0] == 0.0:
        raise ValidationError("Condition number of a zero matrix is undefined")
    smallest = singular[-1]
    if smallest < RANK_CUTOFF * singular[0]:
        return float('inf')
    return float(singular[0] / smallest)


@dataclass(frozen=True, eq=False)
class TomographySet:
    """Informationally complete set {B_0 .. B_d} with its measurement matrix"""
    bases: Tuple[MeasurementBasis, ...]
    matrix: np.ndarray
    condition_number: float
    rng_seed: Optional[int] = None
    source: str = "generated"
    trial_log: Tuple[float, ...] = field(default=())
    selected_trial: int = 0

    def __post_init__(self):
        dim = self.bases[0].dim
        if len(self.bases) != dim + 1:
            raise ValidationError(f"A tomography set needs d+1 = {dim + 1} bases, got {len(self.bases)}")
        if not np.isfinite(self.condition_number):
            raise NotInformationallyCompleteError("Measurement matrix does not have full column rank")

    @property
    def dim(self) -> int:
        return self.bases[0].dim

    @property
    def singular_values(self) -> np.ndarray:
        return linalg.svdvals(self.matrix)

    def to_dict(self) -> dict:
        bases = []
        for basis in self.bases:
            entry = {'label': basis.label}
            if basis.is_canonical:
                entry['kind'] = 'canonical'
                entry['seed'] = None
            else:
                entry['kind'] = 'multiplexed'
                entry['seed'] = {'re': basis.seed.real.tolist(), 'im': basis.seed.imag.tolist()}
            bases.append(entry)
        return {
            'dim': self.dim,
            'source': self.source,
            'rng_seed': self.rng_seed,
            'condition_number': self.condition_number,
            'selected_trial': self.selected_trial,
            'trial_log': list(self.trial_log),
            'bases': bases,
        }

    def reference_hash(self) -> str:
        """SHA-256 over the basis seeds, identifying the set a table was measured with"""
        payload = json.dumps({'dim': self.dim, 'bases': self.to_dict()['bases']}, sort_keys=True)
        return hashlib.sha256(payload.encode()).hexdigest()

    @classmethod
    def from_bases(cls, bases: Sequence[MeasurementBasis], **kwargs):
        matrix = measurement_matrix(bases)
        return cls(bases=tuple(bases), matrix=matrix, condition_number=condition_number(matrix), **kwargs)

    @classmethod
    def from_dict(cls, data: dict):
        dim = int(data['dim'])
        bases = []
        for entry in data['bases']:
            if entry.get('kind') == 'canonical' or entry.get('seed') is None:
                bases.append(canonical_basis(dim))
            else:
                seed = np.asarray(entry['seed']['re'], dtype=float) + 1j * np.asarray(entry['seed']['im'], dtype=float)
                if seed.size != dim:
                    raise DimensionMismatchError(f"Seed of basis {entry['label']} has {seed.size} components, expected {dim}")
                bases.append(generate_basis(seed, int(entry['label'])))
        return cls.from_bases(
            bases,
            rng_seed=data.get('rng_seed'),
            source=data.get('source', 'generated'),
            trial_log=tuple(data.get('trial_log', ())),
            selected_trial=int(data.get('selected_trial', 0)),
        )


def _candidate_bases(dim, rng) -> List[MeasurementBasis]:
    bases = [canonical_basis(dim), generate_basis(uniform_seed(dim), 1)]
    for label in range(2, dim + 1):
        bases.append(generate_basis(random_flat_seed(dim, rng), label))
    return bases


def trial_rng(rng_seed: int, trial: int):
    """Independent stream per trial so the selection does not depend on evaluation order"""
    return np.random.default_rng(np.random.SeedSequence([int(rng_seed), int(trial)]))


def build_tomography_set(dim, trials: int = DEFAULT_TRIALS, rng_seed: int = 0) -> TomographySet:
    """
    Draw `trials` candidate sets and keep the best conditioned one

    B_0 is canonical, B_1 comes from the uniform seed and B_2 .. B_d from
    random flat seeds. Equal condition numbers resolve to the lowest trial.

    Raises:
        NotInformationallyCompleteError: If every candidate is singular
    """
    if trials < 1:
        raise ValidationError(f"Need at least one trial, got {trials}")
    if int(dim) != dim or dim < 2:
        raise ValidationError(f"Dimension must be an integer >= 2, got {dim}")

    log = []
    best = None
    for trial in range(trials):
        bases = _candidate_bases(dim, trial_rng(rng_seed, trial))
        kappa = condition_number(measurement_matrix(bases))
        log.append(kappa)
        if best is None or kappa < best[0]:
            best = (kappa, trial, bases)

    kappa, selected, bases = best
    if not np.isfinite(kappa):
        raise NotInformationallyCompleteError(f"All {trials} candidate sets for d={dim} are singular")
    logging.info(f"[Bases] d={dim}: selected trial {selected} of {trials}, condition number {kappa:.6g}")
    return TomographySet.from_bases(
        bases,
        rng_seed=int(rng_seed),
        source="generated",
        trial_log=tuple(log),
        selected_trial=selected,
    )


def load_paper_seeds_d6() -> np.ndarray:
    """The six tabulated first vectors (three decimals), shape (6, 6)"""
    with open(PAPER_BASES_FILE, 'r', encoding='utf-8') as f:
        data = json.load(f)
    seeds = [np.asarray(entry['re'], dtype=float) + 1j * np.asarray(entry['im'], dtype=float)
             for entry in data['seeds']]
    return np.array(seeds)


def load_paper_bases_d6() -> TomographySet:
    """Bundled d=6 set: canonical basis plus the six tabulated seeds, re-flattened"""
    raw = load_paper_seeds_d6()
    bases = [canonical_basis(6)]
    for label, seed in enumerate(raw, start=1):
        bases.append(generate_basis(reflatten_seed(seed), label))
    result = TomographySet.from_bases(bases, rng_seed=None, source="paper-d6")
    logging.debug(f"[Bases] Loaded bundled d=6 set, condition number {result.condition_number:.6g}")
    return result
