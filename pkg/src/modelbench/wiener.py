"""Circulant Wiener filter and its exact expected squared error."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from modelbench.errors import DomainError, SingularFilterError
from modelbench.signal1d import CirculantSpec, Dataset1D, SignalModel1D, from_multiplier

DENOM_FLOOR = 1e-14


@dataclass(frozen=True)
class WienerFilter:
    W: CirculantSpec
    source_model: SignalModel1D = field(repr=False)
    mult: np.ndarray = field(repr=False, compare=False)

    @property
    def D(self) -> int:
        return self.W.D

    def __call__(self, phi_data):
        return apply(self, phi_data)


def dft_matrix(D: int) -> np.ndarray:
    """Unitary DFT, entry (k, l) = exp(-2 pi i k l / D) / sqrt(D)."""
    if D < 1:
        raise DomainError("D must be positive")
    k = np.arange(D)
    return np.exp(-2j * np.pi * np.outer(k, k) / D) / np.sqrt(D)


def _spectra(model: SignalModel1D):
    mR = model.R_phi.multiplier().astype(np.complex128)
    mH = model.H.multiplier().astype(np.complex128)
    denom = np.abs(mH) ** 2 * mR + model.sigma_n**2
    bad = np.flatnonzero(np.abs(denom) <= DENOM_FLOOR)
    if bad.size:
        raise SingularFilterError(int(bad[0]), float(abs(denom[bad[0]])))
    return mR, mH, denom


def build_wiener(model: SignalModel1D) -> WienerFilter:
    mR, mH, denom = _spectra(model)
    mW = mR * np.conj(mH) / denom
    W = from_multiplier(mW)
    # cache the multiplier of the stored (real) row so apply matches W.dense()
    return WienerFilter(W, model, W.multiplier())


def build_wiener_dense(model: SignalModel1D) -> np.ndarray:
    """R H^T (H R H^T + R_n)^-1 by dense linear algebra (test oracle)."""
    R = model.R_phi.dense()
    H = model.H.dense()
    S = H @ R @ H.T + model.sigma_n**2 * np.eye(model.D)
    # W S = R H^T  <=>  S^T W^T = (R H^T)^T
    return np.linalg.solve(S.T, (R @ H.T).T).T


def apply(filt: WienerFilter, phi_data) -> np.ndarray:
    x = np.asarray(phi_data, dtype=np.float64)
    if x.shape[-1:] != (filt.D,):
        raise DomainError(f"expected trailing length {filt.D}, got shape {x.shape}")
    return np.fft.ifft(filt.mult * np.fft.fft(x, axis=-1), axis=-1).real


def analytic_ese(model: SignalModel1D) -> float:
    """trace(R_phi - W H R_phi), summed per frequency."""
    mR, _, denom = _spectra(model)
    return float(np.sum((mR * model.sigma_n**2 / denom).real))


def linear_ese(model: SignalModel1D, M: CirculantSpec) -> float:
    """Exact E||M phi_data - phi||^2 for any circulant estimator M."""
    mR = model.R_phi.multiplier().real
    mH = model.H.multiplier()
    mM = M.multiplier()
    return float(np.sum(np.abs(mM * mH - 1.0) ** 2 * mR + np.abs(mM) ** 2 * model.sigma_n**2))


def _as_dataset(pairs) -> Dataset1D:
    if isinstance(pairs, Dataset1D):
        return pairs
    return Dataset1D.from_pairs(pairs)


def squared_errors(estimator: Callable, pairs, vectorized: bool = True) -> np.ndarray:
    """Per-sample ||estimator(phi_data) - phi||^2."""
    ds = _as_dataset(pairs)
    if vectorized:
        est = np.asarray(estimator(ds.phi_data))
    else:
        est = np.stack([np.asarray(estimator(x)) for x in ds.phi_data])
    return np.sum((est - ds.phi) ** 2, axis=1)


def empirical_mse(estimator: Callable, pairs, vectorized: bool = True) -> float:
    """Mean squared Euclidean error over the pairs (not divided by D).

    ``estimator`` maps an (N, D) batch to (N, D) when ``vectorized``; otherwise
    it is called on one vector at a time.
    """
    if len(pairs) == 0:
        raise DomainError("empirical_mse needs at least one pair")
    return float(np.mean(squared_errors(estimator, pairs, vectorized)))


def standard_error(errors: np.ndarray) -> float:
    errors = np.asarray(errors)
    return float(np.std(errors, ddof=1) / np.sqrt(errors.size)) if errors.size > 1 else float("inf")
