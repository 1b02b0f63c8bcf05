"""Cyclostationary Gaussian signals observed through a circulant blur plus noise.

Circulant convention
--------------------
A :class:`CirculantSpec` with first row ``c`` stands for the matrix
``C[i, j] = c[(j - i) mod D]``: row ``i`` is the first row cyclically shifted
right by ``i``. For D = 4 and ``c = [a, b, c, d]``::

    [[a, b, c, d],
     [d, a, b, c],
     [c, d, a, b],
     [b, c, d, a]]

so ``(C x)_i = sum_m c[m] x[(i + m) mod D]``. In the Fourier domain this is a
pointwise product with the multiplier ``conj(fft(c))``. The same convention is
used by the Wiener filter and by the convolution layers of the networks.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator

import numpy as np

from modelbench.errors import DomainError, ModelError
from modelbench.streams import stream

PSD_TOL = 1e-12

#: Samples per random substream in :func:`generate_dataset`.
CHUNK = 1024

# Default benchmark model: 3-tap blur scaled to unit DC gain, noise variance
# 0.1. Wiener error 1.7418 (unit taps with noise std 0.1 would give 0.304).
DEFAULT_RHO = 0.95
DEFAULT_DIM = 32
DEFAULT_NOISE_VAR = 0.1
DEFAULT_SIGMA_N = float(np.sqrt(DEFAULT_NOISE_VAR))


@dataclass(frozen=True)
class CirculantSpec:
    first_row: np.ndarray

    def __post_init__(self):
        row = np.asarray(self.first_row, dtype=np.float64)
        if row.ndim != 1 or row.size < 1:
            raise DomainError("circulant first row must be a nonempty vector")
        row = row.copy()
        row.setflags(write=False)
        object.__setattr__(self, "first_row", row)

    @property
    def D(self) -> int:
        return self.first_row.size

    def dense(self) -> np.ndarray:
        D = self.D
        idx = (np.arange(D)[None, :] - np.arange(D)[:, None]) % D
        return self.first_row[idx]

    def multiplier(self) -> np.ndarray:
        """Eigenvalues in FFT order: ``C x = ifft(multiplier * fft(x))``."""
        return np.conj(np.fft.fft(self.first_row))

    def transpose(self) -> CirculantSpec:
        return CirculantSpec(np.roll(self.first_row[::-1], 1))

    def apply(self, x):
        return apply_circulant(self, x)


def from_multiplier(mult: np.ndarray) -> CirculantSpec:
    """Inverse of :meth:`CirculantSpec.multiplier` (imaginary residue dropped)."""
    return CirculantSpec(np.fft.ifft(np.conj(mult)).real)


def make_autocorrelation(rho: float, D: int) -> CirculantSpec:
    if not 0.0 < rho < 1.0:
        raise DomainError(f"rho must lie in (0, 1), got {rho}")
    if D < 1:
        raise DomainError(f"D must be positive, got {D}")
    k = np.arange(D)
    return CirculantSpec(rho ** np.minimum(k, D - k))


def make_blur(D: int, normalize: bool = False) -> CirculantSpec:
    """Local smoothing ``[1, 1, 0, ..., 0, 1]``; ``normalize`` scales it to unit sum."""
    if D < 3:
        raise DomainError(f"blur needs D >= 3, got {D}")
    row = np.zeros(D)
    row[[0, 1, D - 1]] = 1.0
    if normalize:
        row /= 3.0
    return CirculantSpec(row)


def identity(D: int) -> CirculantSpec:
    row = np.zeros(D)
    row[0] = 1.0
    return CirculantSpec(row)


def apply_circulant(C: CirculantSpec, x) -> np.ndarray:
    """Spectral product ``C @ x``; ``x`` may carry leading batch axes."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1:] != (C.D,):
        raise DomainError(f"expected trailing length {C.D}, got shape {x.shape}")
    mult = np.conj(np.fft.rfft(C.first_row))
    return np.fft.irfft(mult * np.fft.rfft(x, axis=-1), n=C.D, axis=-1)


def apply_circulant_naive(C: CirculantSpec, x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    D = C.D
    y = np.zeros(D)
    for i in range(D):
        for j in range(D):
            y[i] += C.first_row[(j - i) % D] * x[j]
    return y


@dataclass(frozen=True)
class SignalModel1D:
    """``phi ~ N(0, signal_var * R_rho)``, observed as ``H phi + n``, ``n ~ N(0, sigma_n^2 I)``."""

    D: int
    rho: float
    H: CirculantSpec
    sigma_n: float
    signal_var: float = 1.0
    R_phi: CirculantSpec = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.H.D != self.D:
            raise DomainError(f"H has size {self.H.D}, model has D={self.D}")
        if self.sigma_n < 0 or self.signal_var < 0:
            raise DomainError("sigma_n and signal_var must be nonnegative")
        R = make_autocorrelation(self.rho, self.D)
        R = CirculantSpec(self.signal_var * R.first_row)
        object.__setattr__(self, "R_phi", R)
        self.spectrum()  # validates PSD

    def spectrum(self) -> np.ndarray:
        """Nonnegative eigenvalues of R_phi in rfft order."""
        lam = np.fft.rfft(self.R_phi.first_row).real
        if lam.min() < -PSD_TOL:
            raise ModelError(f"autocorrelation is not PSD (min eigenvalue {lam.min():.3e})")
        return np.maximum(lam, 0.0)


def default_model() -> SignalModel1D:
    return SignalModel1D(DEFAULT_DIM, DEFAULT_RHO, make_blur(DEFAULT_DIM, normalize=True), DEFAULT_SIGMA_N)


@dataclass(frozen=True)
class SamplePair1D:
    phi: np.ndarray
    phi_data: np.ndarray


@dataclass(frozen=True)
class Dataset1D:
    """Stacked pairs: ``phi`` and ``phi_data`` have shape (N, D)."""

    phi: np.ndarray
    phi_data: np.ndarray

    def __post_init__(self):
        if self.phi.shape != self.phi_data.shape or self.phi.ndim != 2:
            raise DomainError("phi and phi_data must be equal-shape (N, D) arrays")

    def __len__(self) -> int:
        return self.phi.shape[0]

    @property
    def D(self) -> int:
        return self.phi.shape[1]

    def __getitem__(self, i: int) -> SamplePair1D:
        return SamplePair1D(self.phi[i], self.phi_data[i])

    def __iter__(self) -> Iterator[SamplePair1D]:
        for i in range(len(self)):
            yield self[i]

    @classmethod
    def from_pairs(cls, pairs) -> Dataset1D:
        pairs = list(pairs)
        if not pairs:
            raise DomainError("empty pair list")
        return cls(np.stack([p.phi for p in pairs]), np.stack([p.phi_data for p in pairs]))


def sample_signal(model: SignalModel1D, rng: np.random.Generator, size: int | None = None) -> np.ndarray:
    """Exact draw(s) from N(0, R_phi) through the circulant square root."""
    shape = (model.D,) if size is None else (size, model.D)
    z = rng.standard_normal(shape)
    root = np.sqrt(model.spectrum())
    return np.fft.irfft(root * np.fft.rfft(z, axis=-1), n=model.D, axis=-1)


def _observe(model: SignalModel1D, phi: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    noise = rng.standard_normal(phi.shape)
    return apply_circulant(model.H, phi) + model.sigma_n * noise


def degrade(model: SignalModel1D, phi, rng: np.random.Generator) -> SamplePair1D:
    phi = np.asarray(phi, dtype=np.float64)
    if phi.shape != (model.D,):
        raise DomainError(f"expected a length-{model.D} signal, got shape {phi.shape}")
    return SamplePair1D(phi, _observe(model, phi, rng))


def generate_dataset(model: SignalModel1D, n: int, seed: int, tag: str = "dataset", *index: int) -> Dataset1D:
    """``n`` independent pairs.

    Samples are produced in blocks of :data:`CHUNK`; block ``b`` draws from
    ``stream(seed, tag, *index, b)``, so any block can be regenerated on its
    own and a parallel build is bit-identical to a serial one.
    """
    if n < 1:
        raise DomainError(f"dataset size must be >= 1, got {n}")
    phis, datas = [], []
    for b, start in enumerate(range(0, n, CHUNK)):
        m = min(CHUNK, n - start)
        rng = stream(seed, tag, *index, b)
        phi = sample_signal(model, rng, m)
        phis.append(phi)
        datas.append(_observe(model, phi, rng))
    return Dataset1D(np.concatenate(phis), np.concatenate(datas))


# -- file format -----------------------------------------------------------
# header: magic "MVD1", version u16, D u32, N u64 (little endian), then N
# records of 2*D float64: phi followed by phi_data.
_MAGIC = b"MVD1"
_VERSION = 1
_HEADER = struct.Struct("<4sHIQ")


def write_dataset(path, ds: Dataset1D) -> None:
    body = np.concatenate([ds.phi, ds.phi_data], axis=1).astype("<f8")
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(_MAGIC, _VERSION, ds.D, len(ds)))
        fh.write(body.tobytes())


def read_dataset(path) -> Dataset1D:
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise DomainError(f"{path}: truncated header")
    magic, version, D, N = _HEADER.unpack_from(raw)
    if magic != _MAGIC or version != _VERSION:
        raise DomainError(f"{path}: not an MVD1 v{_VERSION} file")
    body = np.frombuffer(raw, dtype="<f8", offset=_HEADER.size)
    if body.size != N * 2 * D:
        raise DomainError(f"{path}: expected {N} records of {2 * D} floats")
    body = body.reshape(N, 2 * D).astype(np.float64)
    return Dataset1D(body[:, :D].copy(), body[:, D:].copy())
