"""Physical parameters, unit conversions, path loss and fading grids."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import numpy as np

SPEED_OF_LIGHT = 299792458.0


class ConfigError(ValueError):
    """Bad configuration value or file; carries the offending line when known."""

    def __init__(self, message, line=None, path=None):
        self.line = line
        self.path = path
        where = ""
        if path is not None:
            where = f"{path}:"
        if line is not None:
            where += f"{line}:"
        super().__init__(f"{where} {message}" if where else message)


def _scalar_or_array(out):
    return out if out.ndim else float(out)


def db_to_linear(x):
    """10^(x/10)."""
    return _scalar_or_array(np.power(10.0, np.asarray(x, dtype=float) / 10.0))


def linear_to_db(x):
    with np.errstate(divide="ignore"):
        return _scalar_or_array(10.0 * np.log10(np.asarray(x, dtype=float)))


def dbm_to_watts(x):
    """10^((x - 30)/10); -inf dBm maps to 0 W."""
    return _scalar_or_array(np.power(10.0, (np.asarray(x, dtype=float) - 30.0) / 10.0))


def watts_to_dbm(x):
    return linear_to_db(x) + 30.0


def path_loss(fc, d, gamma):
    """Average power gain (c / (4 pi fc))^2 d^-gamma of a link of length d."""
    if not (fc > 0 and d > 0 and gamma > 0):
        raise ValueError(f"path_loss needs positive inputs, got fc={fc}, d={d}, gamma={gamma}")
    return (SPEED_OF_LIGHT / (4.0 * math.pi * fc)) ** 2 * d ** (-gamma)


@dataclass(frozen=True)
class SystemParams:
    """All physical constants of the link; powers in watts, gains linear.

    Defaults are the reference setup: 2.4 GHz, gamma = 3, eta = 0.8,
    alpha2 = -100 dB, alpha1 = -40 dB, qbar1^2 = 0 dB, noise -90 dBm,
    EHU-ET at 10 m and EVE at 12 m from both.
    """

    eta: float = 0.8
    sigma1_sq: float = 1e-12
    sigma2_sq: float = 1e-12
    sigma3_sq: float = 1e-12
    alpha1: float = 1e-4
    qbar1: float = 1.0
    alpha2: float = 1e-10
    p_et: float = 1e-3
    p_p: float = 1e-15
    fc: float = 2.4e9
    gamma: float = 3.0
    d_ehu_et: float = 10.0
    d_ehu_eve: float = 12.0
    d_et_eve: float = 12.0

    def __post_init__(self):
        for name in ("sigma1_sq", "sigma2_sq", "sigma3_sq", "fc", "gamma",
                     "d_ehu_et", "d_ehu_eve", "d_et_eve"):
            val = getattr(self, name)
            if not (math.isfinite(val) and val > 0):
                raise ConfigError(f"{name} must be positive and finite, got {val}")
        # zero budgets are allowed: they are the degenerate ends of a sweep
        for name in ("p_et", "p_p", "alpha1", "alpha2", "qbar1"):
            val = getattr(self, name)
            if not (math.isfinite(val) and val >= 0):
                raise ConfigError(f"{name} must be non-negative and finite, got {val}")
        if not 0 < self.eta < 1:
            raise ConfigError(f"eta must lie in (0, 1), got {self.eta}")
        if self.recycle >= 1:
            raise ConfigError(
                f"eta*(qbar1^2 + alpha1) = {self.recycle:.6g} must be < 1")

    @property
    def recycle(self):
        """Recycled fraction eta (qbar1^2 + alpha1) of the EHU's own power."""
        return self.eta * (self.qbar1**2 + self.alpha1)

    @property
    def omega_v(self):
        return path_loss(self.fc, self.d_ehu_et, self.gamma)

    @property
    def omega_f(self):
        return path_loss(self.fc, self.d_ehu_eve, self.gamma)

    @property
    def omega_g(self):
        return path_loss(self.fc, self.d_et_eve, self.gamma)

    def harvest_ceiling(self):
        """eta P_ET Omega_V, the mean power harvested from the ET alone."""
        return self.eta * self.p_et * self.omega_v

    def with_(self, **changes):
        return replace(self, **changes)


def discretize_exponential(omega, n_points):
    """Equal-probability quantile bins of Exp(mean omega) with conditional means.

    Returns ``(gains, probs)``.  The conditional mean of bin [a, b) is
    omega + (a e^{-a/omega} - b e^{-b/omega}) / (e^{-a/omega} - e^{-b/omega}),
    and the last (unbounded) bin has mean omega + a.
    """
    if not omega > 0:
        raise ValueError("omega must be positive")
    n = int(n_points)
    if n < 1:
        raise ValueError("n_points must be >= 1")
    q = np.arange(n + 1) / n
    # bin edges in units of omega; survival at each edge is exactly 1 - q
    a = -np.log1p(-q[:-1])
    surv_a = 1.0 - q[:-1]
    surv_b = 1.0 - q[1:]
    b = np.empty(n)
    b[:-1] = -np.log1p(-q[1:-1])
    b[-1] = np.inf
    b_term = np.zeros(n)
    b_term[:-1] = b[:-1] * surv_b[:-1]
    gains = 1.0 + (a * surv_a - b_term) / (surv_a - surv_b)
    probs = np.full(n, 1.0 / n)
    return omega * gains, probs


@dataclass(frozen=True)
class Channel:
    """Discrete distribution of one squared channel gain."""

    gains: np.ndarray
    probs: np.ndarray
    omega: float

    def __post_init__(self):
        g = np.asarray(self.gains, dtype=float)
        p = np.asarray(self.probs, dtype=float)
        if g.ndim != 1 or g.shape != p.shape or g.size == 0:
            raise ValueError("gains and probs must be equal-length 1-D arrays")
        if np.any(g < 0) or np.any(p < 0):
            raise ValueError("gains and probabilities must be non-negative")
        if abs(p.sum() - 1.0) > 1e-12:
            raise ValueError(f"probabilities sum to {p.sum()!r}, not 1")
        g.setflags(write=False)
        p.setflags(write=False)
        object.__setattr__(self, "gains", g)
        object.__setattr__(self, "probs", p)

    @classmethod
    def rayleigh(cls, omega, n_points):
        g, p = discretize_exponential(omega, n_points)
        return cls(g, p, omega)

    @classmethod
    def constant(cls, gain):
        return cls(np.array([float(gain)]), np.array([1.0]), float(gain))

    @property
    def mean(self):
        return float(self.gains @ self.probs)

    def __len__(self):
        return self.gains.size


@dataclass(frozen=True)
class FadingGrid:
    """Supports of V^2 (EHU-ET), F^2 (EHU-EVE) and G^2 (ET-EVE) with masses."""

    v: Channel
    f: Channel
    g: Channel

    @classmethod
    def from_params(cls, params: SystemParams, n_points=64):
        return cls(Channel.rayleigh(params.omega_v, n_points),
                   Channel.rayleigh(params.omega_f, n_points),
                   Channel.rayleigh(params.omega_g, n_points))

    @property
    def omega_v(self):
        return self.v.omega

    @property
    def omega_f(self):
        return self.f.omega

    @property
    def omega_g(self):
        return self.g.omega

    def printed_compat(self):
        """Copy with G^2 = 1, i.e. EVE sees the ET symbol unscaled."""
        return replace(self, g=Channel.constant(1.0))

    def without_eve(self):
        """Copy with F^2 = 0 (EVE hears nothing from the EHU)."""
        return replace(self, f=Channel.constant(0.0))


class FadingSampler:
    """Seeded i.i.d. block-fading draws from a :class:`FadingGrid`."""

    def __init__(self, grid: FadingGrid, seed=None):
        self.grid = grid
        self.rng = np.random.default_rng(seed)

    def draw_indices(self, n):
        """Grid indices ``(iv, if_, ig)`` for ``n`` slots."""
        g = self.grid
        iv = self.rng.choice(len(g.v), size=n, p=g.v.probs)
        i_f = self.rng.choice(len(g.f), size=n, p=g.f.probs)
        ig = self.rng.choice(len(g.g), size=n, p=g.g.probs)
        return iv, i_f, ig

    def draw(self, n=None):
        """Squared gains ``(v_sq, f_sq, g_sq)``; scalars when ``n`` is None."""
        iv, i_f, ig = self.draw_indices(1 if n is None else n)
        g = self.grid
        out = g.v.gains[iv], g.f.gains[i_f], g.g.gains[ig]
        if n is None:
            return tuple(float(x[0]) for x in out)
        return out


def sample_fading_slot(grid: FadingGrid, rng):
    """One slot's ``(v_sq, f_sq, g_sq)`` drawn with ``rng`` (a numpy Generator)."""
    v = grid.v.gains[rng.choice(len(grid.v), p=grid.v.probs)]
    f = grid.f.gains[rng.choice(len(grid.f), p=grid.f.probs)]
    g = grid.g.gains[rng.choice(len(grid.g), p=grid.g.probs)]
    return float(v), float(f), float(g)


# ---------------------------------------------------------------- config files

@dataclass
class RunConfig:
    """Parsed config file: physical parameters plus run settings."""

    params: SystemParams = field(default_factory=SystemParams)
    n_fading_points: int = 64
    seed: int = 0
    bandwidth: float | None = None
    extra: dict = field(default_factory=dict)

    def grid(self, n_points=None):
        return FadingGrid.from_params(self.params, n_points or self.n_fading_points)


_PARAM_FIELDS = {f.name for f in fields(SystemParams)}
# run settings that are not physical parameters; values kept as text and
# interpreted by whoever consumes them (the CLI)
_RUN_KEYS = {"n_fading_points", "seed", "bandwidth", "sim_slots", "sim_k",
             "sim_burn_in", "sim_initial_battery", "sim_slack", "sweep_variable",
             "sweep_values", "sweep_outputs", "search_levels", "search_extra_levels",
             "search_jmax", "search_screen_points", "search_top_k", "printed_formulas"}


def _parse_float(text, line, path):
    try:
        return float(text)
    except ValueError:
        raise ConfigError(f"cannot parse number {text!r}", line, path) from None


def parse_config(text, path=None) -> RunConfig:
    """Parse ``key = value`` lines; ``#`` starts a comment.

    Keys are :class:`SystemParams` field names, optionally suffixed ``_db``
    (converted with :func:`db_to_linear`) or ``_dbm`` (:func:`dbm_to_watts`).
    ``qbar1_db`` gives qbar1^2 in dB.  ``noise_dbm`` / ``noise`` set all three
    noise variances; individual ``sigmaK_sq`` keys override it wherever they
    appear in the file.
    """
    values = {}
    noise = None
    run = RunConfig()
    seen = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'key = value', got {raw.strip()!r}", lineno, path)
        key, val = (s.strip() for s in line.split("=", 1))
        if not key or not val:
            raise ConfigError(f"empty key or value in {raw.strip()!r}", lineno, path)
        if key in seen:
            raise ConfigError(f"duplicate key {key!r} (first on line {seen[key]})", lineno, path)
        seen[key] = lineno

        if key in _RUN_KEYS:
            if key == "n_fading_points":
                n = _parse_float(val, lineno, path)
                if n != int(n) or n < 1:
                    raise ConfigError("n_fading_points must be a positive integer", lineno, path)
                run.n_fading_points = int(n)
            elif key == "seed":
                s = _parse_float(val, lineno, path)
                if s != int(s) or s < 0:
                    raise ConfigError("seed must be a non-negative integer", lineno, path)
                run.seed = int(s)
            elif key == "bandwidth":
                run.bandwidth = _parse_float(val, lineno, path)
            else:
                run.extra[key] = val
            continue

        base, conv = key, None
        if key.endswith("_dbm"):
            base, conv = key[:-4], dbm_to_watts
        elif key.endswith("_db"):
            base, conv = key[:-3], db_to_linear
        num = _parse_float(val, lineno, path)
        if conv is not None:
            num = conv(num)
        if base == "qbar1" and conv is db_to_linear:
            num = math.sqrt(num)
        if base in ("noise", "noise_sq"):
            noise = (num, lineno)
            continue
        if base not in _PARAM_FIELDS:
            raise ConfigError(f"unknown key {key!r}", lineno, path)
        if base in values:
            raise ConfigError(f"{base!r} given twice (line {values[base][1]})", lineno, path)
        values[base] = (num, lineno)

    kwargs = {k: v for k, (v, _) in values.items()}
    if noise is not None:
        for k in ("sigma1_sq", "sigma2_sq", "sigma3_sq"):
            kwargs.setdefault(k, noise[0])
    try:
        run.params = SystemParams(**kwargs)
    except ConfigError as exc:
        # point at the line of the first key named in the message, if any
        line = next((ln for k, (_, ln) in values.items() if k in str(exc)), None)
        raise ConfigError(str(exc), line, path) from None
    return run


def load_config(path) -> RunConfig:
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}", path=str(p)) from None
    return parse_config(text, path=str(p))
