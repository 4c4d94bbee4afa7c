"""Complex Gabor wavelet bank and FFT-based magnitude responses."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import fft as sp_fft

from .dataset import Image, save_pgm
from .errors import DataError

# half-width of the automatic support, in standard deviations of the
# coarsest Gaussian envelope (sigma / k_min)
ENVELOPE_SPAN = 6.5
MAX_FFT_SIDE = 1 << 14


@dataclass(frozen=True)
class GaborParams:
    """Parameters of the wavelet family.

    ``kernel_size=None`` selects the smallest odd support whose half-width
    covers ``ENVELOPE_SPAN`` envelope deviations at the coarsest scale
    (209 pixels for the defaults); the kernels are only DC-free to 1e-6 once
    the envelope is captured that completely.
    """

    sigma: float = 2.0 * math.pi
    k_max: float = math.pi / 2.0
    f: float = math.sqrt(2.0)
    n_scales: int = 5
    n_orientations: int = 8
    kernel_size: int | None = None

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError("sigma must be positive")
        if not self.k_max > 0:
            raise ValueError("k_max must be positive")
        if not self.f > 1:
            raise ValueError("spacing factor f must exceed 1")
        if self.n_scales < 1 or self.n_orientations < 1:
            raise ValueError("n_scales and n_orientations must be >= 1")
        if self.kernel_size is None:
            object.__setattr__(self, "kernel_size", auto_kernel_size(self))
        if self.kernel_size < 1 or self.kernel_size % 2 == 0:
            raise ValueError(f"kernel_size must be a positive odd integer, got {self.kernel_size}")

    def wave_number(self, nu: int) -> float:
        return self.k_max / self.f**nu

    def angle(self, mu: int) -> float:
        # pi*mu/8 for the default eight orientations
        return math.pi * mu / self.n_orientations


def auto_kernel_size(p: GaborParams) -> int:
    k_min = p.k_max / p.f ** (p.n_scales - 1)
    half = math.ceil(ENVELOPE_SPAN * p.sigma / k_min - 1e-9)
    return 2 * half + 1


def make_kernel(mu: int, nu: int, p: GaborParams) -> np.ndarray:
    """Sample the DC-compensated Gabor wavelet on a centered square lattice.

    Returns a complex array of shape ``(kernel_size, kernel_size)`` indexed
    ``[y, x]`` with the origin at the center.
    """
    if not 0 <= mu < p.n_orientations:
        raise IndexError(f"orientation index {mu} out of range [0, {p.n_orientations})")
    if not 0 <= nu < p.n_scales:
        raise IndexError(f"scale index {nu} out of range [0, {p.n_scales})")
    half = p.kernel_size // 2
    y, x = np.mgrid[-half : half + 1, -half : half + 1].astype(np.float64)
    k = p.wave_number(nu)
    phi = p.angle(mu)
    kx, ky = k * math.cos(phi), k * math.sin(phi)
    s2 = p.sigma**2
    envelope = (k * k / s2) * np.exp(-(k * k) * (x * x + y * y) / (2.0 * s2))
    carrier = np.exp(1j * (kx * x + ky * y)) - math.exp(-s2 / 2.0)
    return envelope * carrier


@dataclass(frozen=True, eq=False)
class GaborBank:
    params: GaborParams
    # (n_scales * n_orientations, size, size), scale-major
    kernels: np.ndarray
    _spectra: dict = field(default_factory=dict, repr=False, compare=False)

    def __len__(self):
        return self.kernels.shape[0]

    def index(self, nu: int, mu: int) -> int:
        return nu * self.params.n_orientations + mu

    def kernel(self, nu: int, mu: int) -> np.ndarray:
        return self.kernels[self.index(nu, mu)]

    def spectra(self, shape) -> np.ndarray:
        """Kernel FFTs zero-padded to ``shape``; cached per shape."""
        shape = tuple(shape)
        spec = self._spectra.get(shape)
        if spec is None:
            spec = sp_fft.fft2(self.kernels, s=shape, axes=(-2, -1), workers=-1)
            self._spectra[shape] = spec
        return spec


def make_bank(p: GaborParams | None = None) -> GaborBank:
    p = p or GaborParams()
    kernels = np.stack(
        [make_kernel(mu, nu, p) for nu in range(p.n_scales) for mu in range(p.n_orientations)]
    )
    kernels.setflags(write=False)
    return GaborBank(p, kernels)


def _workspace(img_shape, ker_shape):
    full = tuple(a + b - 1 for a, b in zip(img_shape, ker_shape))
    if max(full) > MAX_FFT_SIDE:
        raise DataError(f"convolution workspace {full} exceeds {MAX_FFT_SIDE} per axis")
    return full, tuple(sp_fft.next_fast_len(n) for n in full)


def _crop(full: np.ndarray, img_shape, ker_shape) -> np.ndarray:
    r0, c0 = ker_shape[0] // 2, ker_shape[1] // 2
    return full[..., r0 : r0 + img_shape[0], c0 : c0 + img_shape[1]]


def convolve_fft(img, kernel: np.ndarray) -> np.ndarray:
    """Linear convolution of an image with a kernel via zero-padded FFTs.

    The output has the image's shape; entry ``[y, x]`` is the full linear
    convolution evaluated with the kernel center placed on pixel ``(y, x)``.
    """
    pixels = img.pixels if isinstance(img, Image) else np.asarray(img, dtype=np.float64)
    kernel = np.asarray(kernel)
    if pixels.ndim != 2 or kernel.ndim != 2 or 0 in pixels.shape or 0 in kernel.shape:
        raise DataError("convolve_fft needs non-empty 2-D image and kernel")
    _, padded = _workspace(pixels.shape, kernel.shape)
    spec = sp_fft.fft2(pixels, s=padded) * sp_fft.fft2(kernel, s=padded)
    return _crop(sp_fft.ifft2(spec), pixels.shape, kernel.shape)


@dataclass(frozen=True, eq=False)
class ResponseStack:
    """Magnitudes of all bank responses, shape ``(n_responses, height, width)``.

    Response ``i * n_orientations + j`` belongs to scale ``i`` and
    orientation ``j``.
    """

    magnitudes: np.ndarray
    n_scales: int
    n_orientations: int

    def __len__(self):
        return self.magnitudes.shape[0]

    @property
    def shape(self):
        return self.magnitudes.shape[1:]

    def response(self, scale: int, orientation: int) -> np.ndarray:
        return self.magnitudes[scale * self.n_orientations + orientation]


def complex_responses(img, bank: GaborBank) -> np.ndarray:
    """Complex convolution outputs for every kernel in the bank."""
    pixels = img.pixels if isinstance(img, Image) else np.asarray(img, dtype=np.float64)
    ker_shape = bank.kernels.shape[1:]
    _, padded = _workspace(pixels.shape, ker_shape)
    spec = sp_fft.fft2(pixels, s=padded)[None] * bank.spectra(padded)
    full = sp_fft.ifft2(spec, axes=(-2, -1), workers=-1)
    return _crop(full, pixels.shape, ker_shape)


def magnitude_responses(img, bank: GaborBank) -> ResponseStack:
    # phase is discarded
    mags = np.abs(complex_responses(img, bank))
    mags.setflags(write=False)
    p = bank.params
    return ResponseStack(mags, p.n_scales, p.n_orientations)


def dump_responses(stack: ResponseStack, directory, prefix: str = "response") -> list[Path]:
    """Write every response as an 8-bit PGM, min-max normalized per response."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = []
    for i, mag in enumerate(stack.magnitudes):
        lo, hi = float(mag.min()), float(mag.max())
        norm = (mag - lo) / (hi - lo) if hi > lo else np.zeros_like(mag)
        scale, orient = divmod(i, stack.n_orientations)
        path = directory / f"{prefix}_s{scale}_o{orient}.pgm"
        save_pgm(Image(norm), path)
        paths.append(path)
    return paths
