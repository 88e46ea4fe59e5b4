"""INI-backed run settings for the pipeline and the CLI.

One file, five optional sections: [chain], [solve], [fit], [simulate],
[report]. Every key has a default, so an empty file is a valid config.
Syntax errors surface with the offending line number; semantic errors
(unknown keys, bad values, impossible families) raise :class:`ConfigError`
too, and the CLI maps both to exit code 2.
"""

from __future__ import annotations

import configparser
from dataclasses import asdict, dataclass, field

from .chains import (ChainSpec, make_birth_death, make_left_skip_free,
                     make_origin_jump_chain, make_reflected_walk,
                     make_updrift_birth_death)

__all__ = ["ConfigError", "RunSettings", "load_settings", "build_chain",
           "FAMILIES"]

FAMILIES = ("birth_death", "updrift_birth_death", "reflected_walk",
            "left_skip_free", "origin_jump")


class ConfigError(Exception):
    """Configuration the run cannot proceed with."""


@dataclass
class ChainSettings:
    family: str = "birth_death"
    mu: float = 2.0
    b: float = 1.0
    m3_low: float = 0.2
    m3_high: float = 0.8
    base_family: str = "updrift_birth_death"
    f_scale: float = 1.0
    p_scale: float = 1.0


@dataclass
class SolveSettings:
    trunc_n: int = 2000
    method: str = "auto"
    gb_tol: float = 1e-10


@dataclass
class FitSettings:
    window_lo: int = 0
    window_hi: int = 0
    exponent_tol: float = 0.1
    flatness_tol: float = 0.1

    def window(self, trunc_n: int) -> tuple[int, int] | None:
        """Explicit window when both ends are set, else None (use default)."""
        if self.window_lo > 0 and self.window_hi > 0:
            return (self.window_lo, self.window_hi)
        if self.window_lo > 0 or self.window_hi > 0:
            raise ConfigError("fit window needs both window_lo and window_hi")
        return None


@dataclass
class SimulateSettings:
    seed: int = 24245
    n_steps: int = 100_000
    n_replicas: int = 2000
    x_start: int = 0
    record_stride: int = 0
    backend: str = "auto"
    horizon_factor: float = 20.0
    renewal_top: int = 200
    renewal_replicas: int = 400
    gamma_steps: int = 100_000
    gamma_replicas: int = 5000


@dataclass
class ReportSettings:
    out_dir: str = "report_out"


@dataclass
class RunSettings:
    chain: ChainSettings = field(default_factory=ChainSettings)
    solve: SolveSettings = field(default_factory=SolveSettings)
    fit: FitSettings = field(default_factory=FitSettings)
    simulate: SimulateSettings = field(default_factory=SimulateSettings)
    report: ReportSettings = field(default_factory=ReportSettings)

    def as_dict(self) -> dict:
        return asdict(self)


_SECTION_TYPES = {
    "chain": {"family": str, "mu": float, "b": float, "m3_low": float,
              "m3_high": float, "base_family": str, "f_scale": float,
              "p_scale": float},
    "solve": {"trunc_n": int, "method": str, "gb_tol": float},
    "fit": {"window_lo": int, "window_hi": int, "exponent_tol": float,
            "flatness_tol": float},
    "simulate": {"seed": int, "n_steps": int, "n_replicas": int,
                 "x_start": int, "record_stride": int, "backend": str,
                 "horizon_factor": float, "renewal_top": int,
                 "renewal_replicas": int, "gamma_steps": int,
                 "gamma_replicas": int},
    "report": {"out_dir": str},
}


def _convert(section: str, key: str, raw: str, kind):
    raw = raw.strip()
    try:
        if kind is int:
            return int(raw)
        if kind is float:
            return float(raw)
        return raw
    except ValueError:
        raise ConfigError(
            f"[{section}] {key} = {raw!r} is not a valid {kind.__name__}"
        ) from None


def load_settings(path) -> RunSettings:
    """Parse an INI config file into RunSettings, defaults filled in."""
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        with open(path, "r", encoding="utf-8") as fh:
            parser.read_file(fh, source=str(path))
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    except configparser.Error as exc:
        # configparser reports the offending line numbers in its message
        raise ConfigError(str(exc)) from None

    settings = RunSettings()
    targets = {"chain": settings.chain, "solve": settings.solve,
               "fit": settings.fit, "simulate": settings.simulate,
               "report": settings.report}
    for section in parser.sections():
        if section not in targets:
            raise ConfigError(f"unknown section [{section}]; expected one of "
                              + ", ".join(sorted(targets)))
        types = _SECTION_TYPES[section]
        for key, raw in parser.items(section):
            if key not in types:
                raise ConfigError(f"unknown key {key!r} in [{section}]")
            setattr(targets[section], key, _convert(section, key, raw, types[key]))

    if settings.chain.family not in FAMILIES:
        raise ConfigError(f"unknown chain family {settings.chain.family!r}; "
                          "expected one of " + ", ".join(FAMILIES))
    if settings.solve.method not in ("auto", "product", "global_balance"):
        raise ConfigError(f"unknown solve method {settings.solve.method!r}")
    if settings.simulate.backend not in ("auto", "numpy", "numba"):
        raise ConfigError(f"unknown backend {settings.simulate.backend!r}")
    settings.fit.window(settings.solve.trunc_n)
    return settings


def build_chain(cs: ChainSettings) -> ChainSpec:
    """Construct the configured chain; invalid parameters become ConfigError."""
    try:
        if cs.family == "birth_death":
            return make_birth_death(cs.mu, cs.b)
        if cs.family == "updrift_birth_death":
            return make_updrift_birth_death(cs.mu, cs.b)
        if cs.family == "reflected_walk":
            return make_reflected_walk(cs.b)
        if cs.family == "left_skip_free":
            return make_left_skip_free(cs.mu, cs.b, cs.m3_low, cs.m3_high)
        if cs.family == "origin_jump":
            if cs.base_family != "updrift_birth_death":
                raise ConfigError("origin_jump supports only the "
                                  "updrift_birth_death base family")
            base = make_updrift_birth_death(cs.mu, cs.b)
            f_choice = None
            if cs.f_scale != 1.0:
                scale = cs.f_scale

                def f_choice(x, _base=base, _s=scale):
                    return _s * _base.law(x).moment(2) / x

            p_choice = None
            if cs.p_scale != 1.0:
                def p_choice(x, _s=cs.p_scale):
                    return _s / (1.0 + x)

            return make_origin_jump_chain(base, f_choice=f_choice,
                                          p_choice=p_choice)
    except ValueError as exc:
        raise ConfigError(f"chain family {cs.family!r} rejected its "
                          f"parameters: {exc}") from None
    raise ConfigError(f"unknown chain family {cs.family!r}")
