"""
Mutual-information patch registration of thermal images against rescaled
optical grayscale images.

Three search variants share one scoring core:

* exhaustive  -- every offset of the thermal-sized window over the optical
  image, row-major.
* reduced     -- the central quarter window (half the offset range per axis)
  with an early stop once three consecutive full rows bring no improvement
  to the running maximum.
* trimmed     -- the reduced search run on the interior of the thermal image
  (a fixed margin removed from all four edges, which also drops the thermal
  color band on the right); the reported offset locates that interior patch
  in the optical frame, so the final crop subtracts the margin again.

MI is computed from 256-bin intensity histograms in nats. Entropy sums run
over bin counts sorted ascending, which makes MI bitwise invariant under
relabeling of intensity values and bitwise symmetric in its arguments.
The per-candidate scoring loop is JIT-compiled (numba) and parallelizes
over rows of the search range; every candidate is scored in isolation, so
results do not depend on the thread count.
"""

from __future__ import annotations

import csv
import time
from dataclasses import dataclass

import numba
import numpy as np
from numba import njit, prange

from .image import GrayImage, RgbImage

EXHAUSTIVE = "exhaustive"
REDUCED = "reduced"
TRIMMED = "trimmed"

DEFAULT_TRIM = 30


class RegistrationError(ValueError):
    """Raised when a pair cannot be registered (size or crop-bound violation)."""


def set_thread_count(n: int) -> None:
    """Cap the number of worker threads used by the search kernels."""
    if n < 1:
        raise ValueError("thread count must be >= 1")
    numba.set_num_threads(min(n, numba.config.NUMBA_NUM_THREADS))


# ---------------------------------------------------------------------------
# Histograms, entropy, mutual information
# ---------------------------------------------------------------------------


def _pixels(img) -> np.ndarray:
    return img.pixels if isinstance(img, GrayImage) else np.asarray(img)


def histogram256(img) -> np.ndarray:
    """256-bin intensity histogram of a grayscale image; int64 counts."""
    return np.bincount(_pixels(img).ravel(), minlength=256).astype(np.int64)


def joint_histogram(a, b) -> np.ndarray:
    """256x256 joint intensity histogram; row marginal is a's histogram."""
    pa, pb = _pixels(a), _pixels(b)
    if pa.shape != pb.shape:
        raise ValueError(f"shape mismatch {pa.shape} vs {pb.shape}")
    codes = pa.ravel().astype(np.int32) * 256 + pb.ravel()
    return np.bincount(codes, minlength=65536).astype(np.int64).reshape(256, 256)


def entropy(counts: np.ndarray) -> float:
    """Shannon entropy in nats of a histogram given as bin counts.

    Nonzero counts are summed in ascending order, so the result depends only
    on the multiset of counts (not on bin labels).
    """
    counts = np.asarray(counts)
    total = int(counts.sum())
    if total <= 0:
        raise ValueError("entropy of an empty histogram")
    nz = np.sort(counts[counts > 0]).astype(np.float64)
    p = nz / total
    return float(-(p * np.log(p)).sum())


def mutual_information(a, b) -> float:
    """MI(a, b) = H(a) + H(b) - H(a, b) in nats, clamped at 0."""
    joint = joint_histogram(a, b)
    h_a = entropy(joint.sum(axis=1))
    h_b = entropy(joint.sum(axis=0))
    h_ab = entropy(joint.ravel())
    return max(h_a + h_b - h_ab, 0.0)


# ---------------------------------------------------------------------------
# Search ranges
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SearchRange:
    """Half-open offset ranges [x_lo, x_hi) x [y_lo, y_hi); x indexes rows."""

    x_lo: int
    x_hi: int
    y_lo: int
    y_hi: int

    def __post_init__(self):
        if not (0 <= self.x_lo < self.x_hi and 0 <= self.y_lo < self.y_hi):
            raise ValueError(f"invalid search range {self}")

    @property
    def size(self) -> int:
        return (self.x_hi - self.x_lo) * (self.y_hi - self.y_lo)

    def contains(self, x: int, y: int) -> bool:
        return self.x_lo <= x < self.x_hi and self.y_lo <= y < self.y_hi


def _check_fits(thermal_hw, optical_hw):
    (a, b), (x, y) = thermal_hw, optical_hw
    if a > x or b > y:
        raise RegistrationError(
            f"thermal {a}x{b} exceeds optical {x}x{y} in at least one axis"
        )


def full_search_range(thermal_hw, optical_hw) -> SearchRange:
    """Every admissible offset: [0, x-a] x [0, y-b], inclusive."""
    _check_fits(thermal_hw, optical_hw)
    (a, b), (x, y) = thermal_hw, optical_hw
    return SearchRange(0, x - a + 1, 0, y - b + 1)


def _reduced_axis(d: int) -> tuple[int, int]:
    # central window [d/2 - d/4, d/2 + d/4], floor division; collapses to the
    # single central offset when d < 4
    lo = d // 2 - d // 4
    hi = d // 2 + d // 4
    return max(lo, 0), min(hi, d) + 1


def reduced_search_range(thermal_hw, optical_hw) -> SearchRange:
    """The central quarter window of the full range (half per axis)."""
    _check_fits(thermal_hw, optical_hw)
    (a, b), (x, y) = thermal_hw, optical_hw
    x_lo, x_hi = _reduced_axis(x - a)
    y_lo, y_hi = _reduced_axis(y - b)
    return SearchRange(x_lo, x_hi, y_lo, y_hi)


# ---------------------------------------------------------------------------
# Scoring kernels
# ---------------------------------------------------------------------------


@njit(cache=True)
def _mi_span(tcode, opt, r, c_start, c_stop, out, base_c, lut, s_t, log_n, inv_n):
    """Score candidates (r, c) for c in [c_start, c_stop) into out[c - base_c].

    tcode holds thermal * 256; joint codes are tcode + optical value. Touched
    joint bins are recorded so only they are reset between candidates.
    """
    a, b = tcode.shape
    npix = a * b
    joint = np.zeros(65536, dtype=np.int32)
    marg = np.zeros(256, dtype=np.int32)
    touched = np.empty(npix, dtype=np.int32)
    for c in range(c_start, c_stop):
        n = 0
        for i in range(a):
            trow = tcode[i]
            orow = opt[r + i]
            for j in range(b):
                code = trow[j] + orow[c + j]
                joint[code] += 1
                marg[code & 255] += 1
                touched[n] = code
                n += 1
        s_p = 0.0
        for v in range(256):
            cv = marg[v]
            if cv > 0:
                s_p += lut[cv]
                marg[v] = 0
        s_j = 0.0
        for k in range(n):
            code = touched[k]
            cj = joint[code]
            if cj > 0:
                s_j += lut[cj]
                joint[code] = 0
        # MI = H(T) + H(P) - H(T,P) with H = log N - S/N
        mi = log_n + (s_j - s_t - s_p) * inv_n
        out[c - base_c] = mi if mi > 0.0 else 0.0


@njit(cache=True, parallel=True)
def _mi_grid(tcode, opt, r_lo, r_hi, c_lo, c_hi, lut, s_t):
    a, b = tcode.shape
    npix = a * b
    log_n = np.log(np.float64(npix))
    inv_n = 1.0 / npix
    out = np.empty((r_hi - r_lo, c_hi - c_lo), dtype=np.float64)
    for ri in prange(r_hi - r_lo):
        _mi_span(tcode, opt, r_lo + ri, c_lo, c_hi, out[ri], c_lo, lut, s_t, log_n, inv_n)
    return out


@njit(cache=True, parallel=True)
def _mi_row(tcode, opt, r, c_lo, c_hi, lut, s_t, n_chunks):
    a, b = tcode.shape
    npix = a * b
    log_n = np.log(np.float64(npix))
    inv_n = 1.0 / npix
    nc = c_hi - c_lo
    out = np.empty(nc, dtype=np.float64)
    for ch in prange(n_chunks):
        start = c_lo + ch * nc // n_chunks
        stop = c_lo + (ch + 1) * nc // n_chunks
        _mi_span(tcode, opt, r, start, stop, out, c_lo, lut, s_t, log_n, inv_n)
    return out


def _kernel_inputs(thermal_arr, optical_arr):
    tcode = thermal_arr.astype(np.int32) * 256
    opt = optical_arr.astype(np.int32)
    npix = thermal_arr.size
    lut = np.zeros(npix + 1, dtype=np.float64)
    counts = np.arange(1, npix + 1, dtype=np.float64)
    lut[1:] = counts * np.log(counts)
    tc = np.bincount(thermal_arr.ravel(), minlength=256)
    s_t = float(lut[tc[tc > 0]].sum())
    return tcode, opt, lut, s_t


# ---------------------------------------------------------------------------
# Registration drivers
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RegistrationResult:
    """Best patch offset (row, col), its MI score and search statistics."""

    offset_x: int
    offset_y: int
    mi_score: float
    candidates_evaluated: int
    elapsed: float
    algorithm: str


def _patch(optical_arr, r, c, a, b):
    return optical_arr[r : r + a, c : c + b]


def register_exhaustive(thermal: GrayImage, optical_gray: GrayImage) -> RegistrationResult:
    """Score every admissible offset; first maximum in row-major order wins."""
    t0 = time.perf_counter()
    ta, oa = _pixels(thermal), _pixels(optical_gray)
    rng = full_search_range(ta.shape, oa.shape)
    tcode, opt, lut, s_t = _kernel_inputs(ta, oa)
    grid = _mi_grid(tcode, opt, rng.x_lo, rng.x_hi, rng.y_lo, rng.y_hi, lut, s_t)
    flat = int(np.argmax(grid))  # first occurrence = strict-improvement winner
    nc = rng.y_hi - rng.y_lo
    off_x = rng.x_lo + flat // nc
    off_y = rng.y_lo + flat % nc
    mi = mutual_information(ta, _patch(oa, off_x, off_y, *ta.shape))
    return RegistrationResult(
        off_x, off_y, mi, grid.size, time.perf_counter() - t0, EXHAUSTIVE
    )


def _reduced_scan(ta, oa):
    """Reduced-window scan with the 3-silent-row early stop.

    Rows are committed in order (candidates within a row may be scored in
    parallel); returns (offset, candidates evaluated, search range).
    """
    rng = reduced_search_range(ta.shape, oa.shape)
    tcode, opt, lut, s_t = _kernel_inputs(ta, oa)
    nc = rng.y_hi - rng.y_lo
    n_chunks = max(1, min(nc, numba.get_num_threads()))
    best = -np.inf
    best_rc = (rng.x_lo, rng.y_lo)
    silent = 0
    rows_scanned = 0
    for r in range(rng.x_lo, rng.x_hi):
        vals = _mi_row(tcode, opt, r, rng.y_lo, rng.y_hi, lut, s_t, n_chunks)
        rows_scanned += 1
        row_best = float(vals.max())
        if best < row_best:
            best = row_best
            best_rc = (r, rng.y_lo + int(np.argmax(vals)))
            silent = 0
        else:
            silent += 1
            if silent >= 3:
                break
    return best_rc, rows_scanned * nc, rng


def register_reduced(thermal: GrayImage, optical_gray: GrayImage) -> RegistrationResult:
    """Central-window search with the 3-row early stop."""
    t0 = time.perf_counter()
    ta, oa = _pixels(thermal), _pixels(optical_gray)
    (off_x, off_y), candidates, _ = _reduced_scan(ta, oa)
    mi = mutual_information(ta, _patch(oa, off_x, off_y, *ta.shape))
    return RegistrationResult(
        off_x, off_y, mi, candidates, time.perf_counter() - t0, REDUCED
    )


def register_trimmed(
    thermal: GrayImage, optical_gray: GrayImage, trim: int = DEFAULT_TRIM
) -> RegistrationResult:
    """Reduced search on the thermal interior (trim stripped from all edges).

    The offset locates the interior patch in the optical frame; subtract the
    same trim (see crop_registered) to place the full thermal frame.
    """
    t0 = time.perf_counter()
    ta, oa = _pixels(thermal), _pixels(optical_gray)
    if trim < 0:
        raise ValueError("trim must be >= 0")
    if ta.shape[0] <= 2 * trim or ta.shape[1] <= 2 * trim:
        raise RegistrationError(
            f"trim {trim} leaves no interior for thermal {ta.shape[0]}x{ta.shape[1]}"
        )
    interior = ta[trim : ta.shape[0] - trim, trim : ta.shape[1] - trim]
    (off_x, off_y), candidates, _ = _reduced_scan(interior, oa)
    mi = mutual_information(interior, _patch(oa, off_x, off_y, *interior.shape))
    return RegistrationResult(
        off_x, off_y, mi, candidates, time.perf_counter() - t0, TRIMMED
    )


def crop_registered(
    optical: RgbImage, result: RegistrationResult, a: int, b: int, trim: int
) -> RgbImage:
    """Cut the a x b registered region out of the rescaled optical image.

    The window starts at (offset_x - trim, offset_y - trim); offsets too
    close to the border are a registration failure, not a clamp.
    """
    r0 = result.offset_x - trim
    c0 = result.offset_y - trim
    h, w = optical.pixels.shape[:2]
    if r0 < 0 or c0 < 0 or r0 + a > h or c0 + b > w:
        raise RegistrationError(
            f"crop window ({r0}:{r0 + a}, {c0}:{c0 + b}) exceeds optical {h}x{w}"
        )
    return RgbImage(optical.pixels[r0 : r0 + a, c0 : c0 + b])


# ---------------------------------------------------------------------------
# Benchmark harness
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BenchRow:
    pair_id: str
    algorithm: str
    offset_x: int
    offset_y: int
    mi_nats: float
    candidates: int
    elapsed_s: float


@dataclass(frozen=True)
class BenchReport:
    rows: tuple
    mean_elapsed: dict
    mean_candidates: dict
    agreement: dict
    ratio_reduced_vs_exhaustive: float
    ratio_trimmed_vs_reduced: float


def bench_registration(pairs, trim: int = DEFAULT_TRIM) -> BenchReport:
    """Run all three algorithms on (pair_id, thermal, optical_gray) pairs.

    Agreement compares crop origins against the exhaustive result (the
    trimmed offset is shifted back by the trim before comparing).
    """
    pairs = list(pairs)
    if not pairs:
        raise ValueError("benchmark needs at least one pair")
    rows = []
    agree = {REDUCED: 0, TRIMMED: 0}
    for pair_id, thermal, optical in pairs:
        res_e = register_exhaustive(thermal, optical)
        res_r = register_reduced(thermal, optical)
        res_t = register_trimmed(thermal, optical, trim=trim)
        for res in (res_e, res_r, res_t):
            rows.append(
                BenchRow(
                    str(pair_id),
                    res.algorithm,
                    res.offset_x,
                    res.offset_y,
                    res.mi_score,
                    res.candidates_evaluated,
                    res.elapsed,
                )
            )
        if (res_r.offset_x, res_r.offset_y) == (res_e.offset_x, res_e.offset_y):
            agree[REDUCED] += 1
        if (res_t.offset_x - trim, res_t.offset_y - trim) == (
            res_e.offset_x,
            res_e.offset_y,
        ):
            agree[TRIMMED] += 1
    n = len(pairs)
    mean_elapsed = {}
    mean_candidates = {}
    for alg in (EXHAUSTIVE, REDUCED, TRIMMED):
        sel = [r for r in rows if r.algorithm == alg]
        mean_elapsed[alg] = sum(r.elapsed_s for r in sel) / n
        mean_candidates[alg] = sum(r.candidates for r in sel) / n
    return BenchReport(
        rows=tuple(rows),
        mean_elapsed=mean_elapsed,
        mean_candidates=mean_candidates,
        agreement={alg: agree[alg] / n for alg in agree},
        ratio_reduced_vs_exhaustive=mean_elapsed[REDUCED] / mean_elapsed[EXHAUSTIVE],
        ratio_trimmed_vs_reduced=mean_elapsed[TRIMMED] / mean_elapsed[REDUCED],
    )


def write_bench_csv(report: BenchReport, path) -> None:
    """CSV rows per pair/algorithm plus a '#'-prefixed summary block."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["pair_id", "algorithm", "offset_x", "offset_y", "mi_nats", "candidates", "elapsed_s"]
        )
        for r in report.rows:
            writer.writerow(
                [r.pair_id, r.algorithm, r.offset_x, r.offset_y,
                 f"{r.mi_nats:.12f}", r.candidates, f"{r.elapsed_s:.6f}"]
            )
        fh.write(f"# mean_elapsed_exhaustive_s = {report.mean_elapsed[EXHAUSTIVE]:.6f}\n")
        fh.write(f"# mean_elapsed_reduced_s = {report.mean_elapsed[REDUCED]:.6f}\n")
        fh.write(f"# mean_elapsed_trimmed_s = {report.mean_elapsed[TRIMMED]:.6f}\n")
        fh.write(f"# t_reduced_over_t_exhaustive = {report.ratio_reduced_vs_exhaustive:.4f}\n")
        fh.write(f"# t_trimmed_over_t_reduced = {report.ratio_trimmed_vs_reduced:.4f}\n")
        fh.write(f"# offset_agreement_reduced = {report.agreement[REDUCED]:.4f}\n")
        fh.write(f"# offset_agreement_trimmed = {report.agreement[TRIMMED]:.4f}\n")
