"""Physical constants of the array and the two distortion mechanisms.

Two parasitics dominate a pulse-driven floating-gate crossbar:

* Capacitive crosstalk from an *adjacent* active wordline lowers the
  drain-to-gate coupling of a cell, attenuating its subthreshold current
  by a factor

      alpha = exp(V_REF * (k0 - k_xt) / (eta * V_T))  <= 1.

  The array layout makes consecutive wordline pairs alternate between a
  physically close and a physically far spacing, so two distinct k_xt
  values exist.  Non-adjacent wordlines do not interact.

* Finite amplifier transconductance lets the bitline sag below its
  reference when it must sink current.  The sag dV_BL solves

      -g_m * dV_BL = I_REF * exp(k_coupl * dV_BL / (eta * V_T))

  and reduces the effective column current by a relative error

      eps_r = exp(k_coupl * dV_BL / (eta * V_T)) - 1  in (-1, 0].

Both mechanisms are pure functions of immutable inputs; DeviceParams and
BlDropLut are safe to share across threads.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field, fields, replace

import numpy as np

from .errors import LutRangeError, NumericError

__all__ = [
    "DeviceParams",
    "BlDropLut",
    "crosstalk_factors",
    "adjacent_pair_kxt",
    "solve_bl_drop_exact",
    "build_bl_lut",
    "default_lut",
    "bl_drop_lookup",
    "bl_relative_error",
    "cell_current_from_vth",
]


@dataclass(frozen=True)
class DeviceParams:
    """All physical constants of the array and its column amplifiers.

    Only ``g_m`` (14 uS, median of measured column amplifiers) is tied to
    silicon; the remaining defaults are plausible configuration values and
    every one of them is overridable through the experiment config.
    """

    eta: float = 1.3                 # subthreshold slope factor, >= 1
    v_thermal: float = 25.85e-3      # thermal voltage, V (300 K)
    k_coupl: float = 0.6             # nominal drain-to-FG coupling factor
    k_xt_close: float = 0.618        # coupling under crosstalk, close pair
    k_xt_far: float = 0.6045         # coupling under crosstalk, far pair
    close_pair_parity: str = "even"  # parity of the 1-based lower row index of a close pair
    g_m: float = 14e-6               # amplifier transconductance, S
    c_fb: float = 1e-12              # feedback capacitance, F
    v_ref: float = 0.2               # bitline reference voltage, V
    i_0: float = 1e-9                # specific current, A
    v_sat: float = 1.0               # amplifier output span, V
    rows: int = 16
    cols: int = 16

    def __post_init__(self):
        if self.eta < 1.0:
            raise ValueError(f"eta must be >= 1, got {self.eta}")
        if self.v_thermal <= 0:
            raise ValueError(f"v_thermal must be positive, got {self.v_thermal}")
        if not 0.0 < self.k_coupl < 1.0:
            raise ValueError(f"k_coupl must lie in (0, 1), got {self.k_coupl}")
        if self.g_m <= 0 or self.c_fb <= 0 or self.v_ref <= 0:
            raise ValueError("g_m, c_fb and v_ref must be positive")
        if self.i_0 <= 0 or self.v_sat <= 0:
            raise ValueError("i_0 and v_sat must be positive")
        if self.rows < 1 or self.cols < 1:
            raise ValueError("rows and cols must be positive")
        if self.close_pair_parity not in ("even", "odd"):
            raise ValueError(f"close_pair_parity must be 'even' or 'odd', got {self.close_pair_parity!r}")
        # Crosstalk must attenuate: single-neighbour alpha in (0, 1] requires
        # k_xt >= k_coupl (alpha > 0 holds for any finite exponent).
        for name in ("k_xt_close", "k_xt_far"):
            if getattr(self, name) < self.k_coupl:
                raise ValueError(f"{name} must be >= k_coupl so the attenuation factor stays <= 1")

    @property
    def xt_exponent_scale(self) -> float:
        """V_REF / (eta * V_T), the exponent per unit coupling difference."""
        return self.v_ref / (self.eta * self.v_thermal)

    @property
    def bl_exponent_scale(self) -> float:
        """k_coupl / (eta * V_T), the bitline-sag exponent per volt."""
        return self.k_coupl / (self.eta * self.v_thermal)

    def bl_hash(self) -> str:
        """Fingerprint of the constants entering the bitline-drop solve."""
        key = repr((self.g_m, self.k_coupl, self.eta, self.v_thermal))
        return hashlib.sha1(key.encode()).hexdigest()[:16]

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    @classmethod
    def from_dict(cls, data: dict) -> "DeviceParams":
        unknown = set(data) - {f.name for f in fields(cls)}
        if unknown:
            raise ValueError(f"unknown device parameter(s): {sorted(unknown)}")
        return cls(**data)

    def with_overrides(self, **kw) -> "DeviceParams":
        return replace(self, **kw)


def adjacent_pair_kxt(params: DeviceParams) -> np.ndarray:
    """Coupling factor under crosstalk for each consecutive row pair.

    Entry i describes the pair of 0-based rows (i, i+1).  The pair is
    physically close when the parity of its 1-based lower index (i+1)
    matches ``close_pair_parity``.
    """
    lower_1based = np.arange(1, params.rows)
    if params.close_pair_parity == "even":
        close = lower_1based % 2 == 0
    else:
        close = lower_1based % 2 == 1
    return np.where(close, params.k_xt_close, params.k_xt_far)


def crosstalk_exponents(act: np.ndarray, params: DeviceParams) -> np.ndarray:
    """Attenuation exponents for a batch of activation patterns.

    ``act`` has shape (..., rows), boolean.  Returns the per-row exponent
    sum(V_REF * (k0 - k_xt) / (eta * V_T)) over active adjacent neighbours;
    contributions from both neighbours add.  Rows without active adjacent
    neighbours (and inactive rows) get exponent 0.
    """
    act = np.asarray(act, dtype=bool)
    if act.shape[-1] != params.rows:
        raise ValueError(f"activation length {act.shape[-1]} does not match rows={params.rows}")
    coef = params.xt_exponent_scale
    pair_kxt = adjacent_pair_kxt(params)            # (rows-1,)
    k_diff = params.k_coupl - pair_kxt              # <= 0 for each pair
    exponents = np.zeros(act.shape, dtype=float)
    if params.rows > 1:
        a = act.astype(float)
        # neighbour below (pair index i-1) and above (pair index i)
        exponents[..., 1:] += a[..., :-1] * (coef * k_diff)
        exponents[..., :-1] += a[..., 1:] * (coef * k_diff)
    return exponents * act


def crosstalk_factors(act: np.ndarray, params: DeviceParams) -> np.ndarray:
    """Per-row current attenuation factors for one activation pattern.

    Inactive rows report 1 (the value is unused downstream).  Active rows
    report exp of the summed neighbour exponents, which is 1 when no
    adjacent wordline is active and < 1 otherwise.
    """
    act = np.asarray(act, dtype=bool)
    if act.ndim != 1:
        raise ValueError("act must be a 1-D boolean vector")
    return np.exp(crosstalk_exponents(act, params))


def solve_bl_drop_exact(i_ref, params: DeviceParams, tol: float = 1e-12, max_iter: int = 200):
    """Bitline voltage sag for a given theoretical column current.

    Solves -g_m*v = i_ref*exp(k_coupl*v/(eta*V_T)) for v <= 0 by bisection
    on the guaranteed bracket [-i_ref/g_m, 0] followed by a Newton polish,
    to absolute tolerance ``tol`` volts.  Accepts scalars or arrays of any
    shape; i_ref = 0 maps to exactly 0.
    """
    i_arr = np.asarray(i_ref, dtype=float)
    scalar = i_arr.ndim == 0
    i_flat = np.atleast_1d(i_arr).astype(float)
    if np.any(i_flat < 0):
        raise ValueError("i_ref must be non-negative")

    beta = params.bl_exponent_scale
    gm = params.g_m
    v = np.zeros_like(i_flat)
    active = i_flat > 0
    if np.any(active):
        ia = i_flat[active]
        lo = -ia / gm          # f(lo) >= 0
        hi = np.zeros_like(ia)  # f(hi) = -i < 0

        def f(x):
            return -gm * x - ia * np.exp(beta * x)

        # Bisection narrows the bracket; Newton then converges quadratically
        # (f is strictly decreasing and concave on the bracket).
        for _ in range(30):
            mid = 0.5 * (lo + hi)
            pos = f(mid) > 0
            lo = np.where(pos, mid, lo)
            hi = np.where(pos, hi, mid)
        x = 0.5 * (lo + hi)
        converged = np.zeros(x.shape, dtype=bool)
        for _ in range(max_iter):
            fx = -gm * x - ia * np.exp(beta * x)
            dfx = -gm - beta * ia * np.exp(beta * x)
            step = fx / dfx
            x = x - step
            converged = np.abs(step) < tol
            if converged.all():
                break
        if not converged.all():
            worst = float(np.max(np.abs(-gm * x - ia * np.exp(beta * x))))
            raise NumericError(
                f"bitline-drop solve did not converge within {max_iter} iterations "
                f"(worst residual {worst:.3e} A)"
            )
        v[active] = np.minimum(x, 0.0)
    return float(v[0]) if scalar else v.reshape(i_arr.shape)


def bl_relative_error(dv_bl, params: DeviceParams):
    """Relative column-current error caused by a bitline sag.

    eps_r = exp(k_coupl * dV_BL / (eta * V_T)) - 1; always in (-1, 0] for
    dV_BL <= 0.  Accepts scalars or arrays.
    """
    dv = np.asarray(dv_bl, dtype=float)
    if np.any(dv > 0):
        raise ValueError("dv_bl must be <= 0")
    out = np.exp(params.bl_exponent_scale * dv) - 1.0
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class BlDropLut:
    """Precomputed bitline sag on a log-spaced current grid.

    Queries below the grid fall back to the linear limit -I/g_m (exact for
    vanishing coupling, asymptotically exact for small currents); queries
    above ``i_max`` raise LutRangeError so callers rebuild a wider table.
    """

    log_i: np.ndarray          # ln of the current grid, ascending
    dv: np.ndarray             # sag at each grid point, <= 0, non-increasing
    i_min: float
    i_max: float
    params_hash: str
    g_m: float = field(repr=False, default=0.0)

    def __post_init__(self):
        if np.any(self.dv > 0):
            raise ValueError("LUT sag entries must be <= 0")
        if np.any(np.diff(self.dv) > 0):
            raise ValueError("LUT sag entries must be non-increasing in current")

    @property
    def n_points(self) -> int:
        return self.log_i.size


def build_bl_lut(params: DeviceParams, i_min: float, i_max: float, n_points: int = 256) -> BlDropLut:
    """Tabulate the exact bitline-drop solve on a log-spaced current grid."""
    if not 0.0 < i_min < i_max:
        raise ValueError(f"need 0 < i_min < i_max, got i_min={i_min}, i_max={i_max}")
    if n_points < 2:
        raise ValueError(f"n_points must be >= 2, got {n_points}")
    grid = np.exp(np.linspace(np.log(i_min), np.log(i_max), n_points))
    dv = solve_bl_drop_exact(grid, params)
    return BlDropLut(
        log_i=np.log(grid),
        dv=np.asarray(dv, dtype=float),
        i_min=float(i_min),
        i_max=float(i_max),
        params_hash=params.bl_hash(),
        g_m=params.g_m,
    )


def default_lut(params: DeviceParams, max_cell_current: float, n_points: int = 256,
                i_min: float = 1e-12, headroom: float = 16.0) -> BlDropLut:
    """LUT sized for an array whose largest cell sources ``max_cell_current``.

    The upper bound is headroom * rows * max single-cell current, which
    dominates any realizable column sum.
    """
    i_max = headroom * params.rows * max_cell_current
    if i_max <= i_min:
        i_max = i_min * 10.0
    return build_bl_lut(params, i_min, i_max, n_points)


def bl_drop_lookup(lut: BlDropLut, i_ref):
    """Interpolated bitline sag; linear in (ln I, dV_BL) space.

    i_ref = 0 returns exactly 0; sub-grid currents use -I/g_m; currents
    above the grid raise LutRangeError.
    """
    i_arr = np.asarray(i_ref, dtype=float)
    scalar = i_arr.ndim == 0
    i_flat = np.atleast_1d(i_arr).astype(float)
    if np.any(i_flat < 0):
        raise ValueError("i_ref must be non-negative")
    above = i_flat > lut.i_max
    if np.any(above):
        raise LutRangeError(
            f"current {float(i_flat[above].max()):.3e} A exceeds LUT upper bound "
            f"{lut.i_max:.3e} A; rebuild the table with a wider range"
        )
    out = np.zeros_like(i_flat)
    below = (i_flat > 0) & (i_flat < lut.i_min)
    out[below] = -i_flat[below] / lut.g_m
    inside = i_flat >= lut.i_min
    if np.any(inside):
        out[inside] = np.interp(np.log(i_flat[inside]), lut.log_i, lut.dv)
    return float(out[0]) if scalar else out.reshape(i_arr.shape)


def cell_current_from_vth(v_th, params: DeviceParams):
    """Subthreshold cell current at nominal bias for a threshold voltage.

    I = I_0 * exp((k_coupl * V_REF - V_th) / (eta * V_T)).  Used to turn
    threshold-voltage spreads into physically plausible weight currents.
    """
    v = np.asarray(v_th, dtype=float)
    out = params.i_0 * np.exp((params.k_coupl * params.v_ref - v) / (params.eta * params.v_thermal))
    return float(out) if out.ndim == 0 else out
