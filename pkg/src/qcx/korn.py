"""Korn-type ratios for divergence-free periodic fields.

For divergence-free fields the full gradient is controlled by its
antisymmetric part; the ratio of the two integrals is a lower bound for the
constant in that inequality.  At p = 2 the ratio is exactly 2 for every
admissible field (a mode-by-mode spectral identity), which doubles as a
golden regression oracle for the whole spectral stack.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from . import fields as F
from .errors import DegenerateFieldError, ParameterRangeError
from .kernels import weighted_sq
from .rng import child_rng

_DIV_FREE_RTOL = 1e-10


@dataclass
class KornEstimate:
    """Empirical lower bound for a Korn constant from an optimized sample set."""

    dim: int
    p: float
    mu: float
    mode: str
    samples: int
    max_ratio: float
    seed: int
    grid_n: int
    degenerate_skipped: int = 0
    argmax_field: F.VectorField | None = field(default=None, repr=False)

    def to_dict(self, field_path=None):
        d = {
            "schema": "qcx/korn-estimate/1",
            "dim": self.dim, "p": self.p, "mu": self.mu, "mode": self.mode,
            "samples": self.samples, "max_ratio": self.max_ratio,
            "seed": self.seed, "grid_n": self.grid_n,
            "degenerate_skipped": self.degenerate_skipped,
            "argmax_field": field_path,
        }
        return d

    def to_json(self, field_path=None) -> str:
        return json.dumps(self.to_dict(field_path), sort_keys=True)


def _gradient_parts(psi: F.VectorField):
    jac = F.jacobian(psi)
    return jac, F.sym_part(jac), F.antisym_part(jac)


def _check_div_free(psi: F.VectorField):
    norm = F.l2_norm(psi)
    if F.l2_norm(F.divergence(psi)) > _DIV_FREE_RTOL * max(norm, 1e-300):
        raise ParameterRangeError("field is not divergence-free")


def _frob_sq(values):
    return np.sum(values * values, axis=(-2, -1))


def korn_ratio(psi: F.VectorField, p) -> float:
    """integral |grad psi|^p / integral |antisym grad psi|^p.

    Equals 2 exactly at p = 2 for every divergence-free field.
    """
    if not p > 1:
        raise ParameterRangeError(f"p must be > 1, got {p}")
    _check_div_free(psi)
    jac, _, anti = _gradient_parts(psi)
    num = float(np.mean(_frob_sq(jac.values) ** (p / 2)))
    den = float(np.mean(_frob_sq(anti.values) ** (p / 2)))
    if den <= 1e-300 * max(num, 1.0):
        raise DegenerateFieldError(
            "antisymmetric gradient part vanishes; on the torus a "
            "divergence-free field with antisym part zero has zero gradient")
    return num / den


def weighted_korn_ratio(psi: F.VectorField, p, mu) -> float:
    """Ratio of mu-weighted square integrals, symmetric over antisymmetric part."""
    if not p > 1:
        raise ParameterRangeError(f"p must be > 1, got {p}")
    if mu < 0:
        raise ParameterRangeError(f"mu must be >= 0, got {mu}")
    _check_div_free(psi)
    _, sym, anti = _gradient_parts(psi)
    num = float(np.mean(weighted_sq(_frob_sq(sym.values), mu, p)))
    den = float(np.mean(weighted_sq(_frob_sq(anti.values), mu, p)))
    if den <= 1e-300 * max(num, 1.0):
        raise DegenerateFieldError("antisymmetric gradient part vanishes")
    return num / den


def identity_residual(psi: F.VectorField) -> float:
    """Relative residual of laplacian(psi) = 2 div(antisym grad psi).

    The identity holds exactly for divergence-free fields and guards the
    projection before any ratio is trusted.
    """
    lap = F.vector_laplacian(psi)
    _, _, anti = _gradient_parts(psi)
    twice = F.matrix_divergence(anti)
    res = F.VectorField(psi.grid, lap.values - 2.0 * twice.values)
    return F.l2_norm(res) / max(F.l2_norm(psi), 1e-300)


# ---------------------------------------------------------------------------
# ratio ascent
# ---------------------------------------------------------------------------

def _project_div_free(grid, values, kmax):
    """Spectral projection: band-limit, kill the mean, remove the k-parallel part."""
    k = grid.wavevectors()
    ks = np.sum(k * k, axis=-1)
    safe = np.where(ks == 0.0, 1.0, ks)
    coeffs = np.stack(
        [F._fft(grid, values[..., i]) for i in range(grid.dim)], axis=-1)
    dot = np.sum(coeffs * k, axis=-1)
    coeffs = coeffs - k * (dot / safe)[..., None]
    mask = np.all(np.abs(k) <= kmax, axis=-1) & (ks > 0)
    coeffs = coeffs * mask[..., None]
    out = np.empty_like(values)
    for i in range(grid.dim):
        out[..., i] = F._ifft(grid, coeffs[..., i])
    return out


def _ratio_parts(psi_values, grid, p, mu, weighted):
    jac = F.jacobian(F.VectorField(grid, psi_values))
    sym = 0.5 * (jac.values + np.swapaxes(jac.values, -1, -2))
    anti = jac.values - sym
    if weighted:
        num_field = weighted_sq(_frob_sq(sym), mu, p)
        den_field = weighted_sq(_frob_sq(anti), mu, p)
    else:
        num_field = _frob_sq(jac.values) ** (p / 2)
        den_field = _frob_sq(anti) ** (p / 2)
    return float(np.mean(num_field)), float(np.mean(den_field)), jac, sym, anti


def _integral_gradient(grid, matrix_weight):
    """L2 gradient of psi -> mean(W(grad psi)) given dW/d(grad) as a matrix field."""
    div = F.matrix_divergence(F.MatrixField(grid, matrix_weight))
    return -div.values


def _ratio_gradient(psi_values, grid, p, mu, weighted):
    """Nodal ascent direction for the (weighted) Korn ratio."""
    num, den, jac, sym, anti = _ratio_parts(psi_values, grid, p, mu, weighted)
    if den <= 1e-300 * max(num, 1.0):
        raise DegenerateFieldError("antisymmetric gradient part vanishes")
    if weighted:
        def dW(mat_sq):
            base = mu * mu + mat_sq
            with np.errstate(divide="ignore", invalid="ignore"):
                out = ((p - 2) / 2) * base ** ((p - 4) / 2) * mat_sq \
                    + base ** ((p - 2) / 2)
            return np.where(base == 0.0, 0.0, out)
        dnum = 2.0 * dW(_frob_sq(sym))[..., None, None] * sym
        dden = 2.0 * dW(_frob_sq(anti))[..., None, None] * anti
    else:
        def halfp(mat, mat_sq):
            with np.errstate(divide="ignore", invalid="ignore"):
                w = mat_sq ** (p / 2 - 1)
            w = np.where(mat_sq == 0.0, 0.0, w)
            return p * w[..., None, None] * mat
        dnum = halfp(sym + anti, _frob_sq(jac.values))
        dden = halfp(anti, _frob_sq(anti))
    g_num = _integral_gradient(grid, dnum)
    g_den = _integral_gradient(grid, dden)
    ratio = num / den
    return ratio, (g_num - ratio * g_den) / den


def _ascend_ratio(psi, p, mu, weighted, steps, kmax):
    grid = psi.grid
    values = psi.values.copy()
    ratio, grad = _ratio_gradient(values, grid, p, mu, weighted)
    step = 0.1
    for _ in range(steps):
        direction = _project_div_free(grid, grad, kmax)
        gnorm = float(np.sqrt(np.mean(np.sum(direction ** 2, axis=-1))))
        if gnorm < 1e-12:
            break
        improved = False
        for _ in range(25):
            trial = values + step * direction / gnorm
            trial = _project_div_free(grid, trial, kmax)
            r_new, g_new = _ratio_gradient(trial, grid, p, mu, weighted)
            if r_new > ratio + 1e-14:
                values, ratio, grad = trial, r_new, g_new
                step = min(step * 2.0, 10.0)
                improved = True
                break
            step *= 0.5
        if not improved:
            break
    return F.VectorField(grid, values), ratio


def estimate_constant(dim, p, mu=0.0, mode="lemma1", samples=20,
                      max_wavenumber=None, optimizer_steps=30,
                      grid_n=32, seed=0) -> KornEstimate:
    """Maximize the (weighted) ratio over random divergence-free fields.

    Each restart draws a band-limited field, verifies the laplacian identity
    residual, then refines by projected gradient ascent.  The running maximum
    is a lower bound for the true constant; it is monotone in samples and in
    optimizer_steps for a fixed seed.
    """
    if samples < 1:
        raise ParameterRangeError("samples must be >= 1")
    if mode not in ("lemma1", "lemma5"):
        raise ParameterRangeError(f"mode must be lemma1 or lemma5, got {mode!r}")
    weighted = mode == "lemma5"
    grid = F.PeriodicGrid(dim, grid_n)
    kmax = max_wavenumber or grid.max_band
    best_ratio = -np.inf
    best_field = None
    skipped = 0
    for idx in range(samples):
        rng = child_rng(seed, idx)
        psi = F.random_field(grid, "divfree-vector", kmax, rng)
        if identity_residual(psi) > 1e-10:
            skipped += 1
            continue
        try:
            refined, ratio = _ascend_ratio(psi, p, mu, weighted,
                                           optimizer_steps, kmax)
        except DegenerateFieldError:
            skipped += 1
            continue
        if ratio > best_ratio:
            best_ratio, best_field = ratio, refined
    if best_field is None:
        raise DegenerateFieldError("all sampled fields were degenerate")
    return KornEstimate(dim=dim, p=p, mu=mu, mode=mode, samples=samples,
                        max_ratio=best_ratio, seed=seed, grid_n=grid_n,
                        degenerate_skipped=skipped, argmax_field=best_field)
