"""Run configuration: TOML files with sections per study, units in key names.

``RunConfig.load`` validates every field on load (units converted to SI)
and rejects unknown keys with a message naming the field.  See the shipped
``configs/`` examples and FORMATS.md.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError

__all__ = ["RunConfig", "ENV_PREFIX"]

ENV_PREFIX = "IGAMAG_"

_STUDY_KINDS = ("verify", "infsup", "solve", "emf")


@dataclass
class RunConfig:
    """Validated settings of one batch run."""

    kind: str
    # verify
    degrees: tuple = (1, 2, 3)
    refinements: tuple = (2, 3, 4, 5, 6)
    max_order: int = 3
    # infsup
    infsup_degree: int = 2
    infsup_refinements: tuple = (2, 3, 4, 5)
    infsup_max_orders: tuple = (0, 1, 2, 3, 4, 5)
    # solve / emf
    model: str = "machine"            # 'machine' or 'verification'
    degree: int = 2
    refinement: int = 1
    coupling: str = "harmonic"        # 'harmonic' or 'dn'
    alpha: float = 0.0                # radians
    machine_max_order: int = 15
    dn_relax: float = 0.5
    dn_tol: float = 1e-3
    dn_max_iter: int = 50
    # emf
    n_alpha: int = 60
    speed: float = 0.0                # mechanical rad/s
    line_to_line: bool = True
    # shared
    machine_config: str = ""
    quadrature_order: int = 0         # 0 = default (degree + 1)
    out_dir: str = "out"
    threads: int = 1
    seed: int = 0                     # reserved
    verbose: bool = False

    @classmethod
    def load(cls, path, overrides=None):
        try:
            import tomllib
        except ImportError:  # Python < 3.11
            import tomli as tomllib

        try:
            with open(path, "rb") as fh:
                raw = tomllib.load(fh)
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {path}") from None
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"config parse error in {path}: {exc}") from None
        cfg = cls._from_tables(raw, path)
        cfg._apply_env()
        for key, value in (overrides or {}).items():
            if value is not None:
                setattr(cfg, key, value)
        cfg.validate()
        return cfg

    @classmethod
    def _from_tables(cls, raw, path):
        study = raw.get("study", {})
        kind = study.get("kind")
        if kind not in _STUDY_KINDS:
            raise ConfigError(f"[study] kind must be one of {_STUDY_KINDS}, got {kind!r}")
        cfg = cls(kind=kind)
        readers = {
            ("verify", "degrees"): ("degrees", lambda v: tuple(int(x) for x in v)),
            ("verify", "refinements"): ("refinements", lambda v: tuple(int(x) for x in v)),
            ("verify", "max_order"): ("max_order", int),
            ("infsup", "degree"): ("infsup_degree", int),
            ("infsup", "refinements"): ("infsup_refinements", lambda v: tuple(int(x) for x in v)),
            ("infsup", "max_orders"): ("infsup_max_orders", lambda v: tuple(int(x) for x in v)),
            ("solve", "model"): ("model", str),
            ("solve", "degree"): ("degree", int),
            ("solve", "refinement"): ("refinement", int),
            ("solve", "coupling"): ("coupling", str),
            ("solve", "alpha_deg"): ("alpha", lambda v: float(np.deg2rad(v))),
            ("solve", "max_order"): ("machine_max_order", int),
            ("dn", "relax"): ("dn_relax", float),
            ("dn", "tol"): ("dn_tol", float),
            ("dn", "max_iter"): ("dn_max_iter", int),
            ("emf", "n_alpha"): ("n_alpha", int),
            ("emf", "speed_rpm"): ("speed", lambda v: float(v) * 2.0 * np.pi / 60.0),
            ("emf", "degree"): ("degree", int),
            ("emf", "refinement"): ("refinement", int),
            ("emf", "max_order"): ("machine_max_order", int),
            ("emf", "line_to_line"): ("line_to_line", bool),
            ("machine", "config"): ("machine_config", str),
            ("quadrature", "order"): ("quadrature_order", int),
            ("output", "directory"): ("out_dir", str),
        }
        for section, table in raw.items():
            if section == "study":
                extra = set(table) - {"kind"}
                if extra:
                    raise ConfigError(f"unknown key in [study]: {sorted(extra)[0]}")
                continue
            if not isinstance(table, dict):
                raise ConfigError(f"top-level key {section!r} must be a section")
            for key, value in table.items():
                if (section, key) not in readers:
                    raise ConfigError(f"unknown config key [{section}] {key}")
                attr, conv = readers[(section, key)]
                try:
                    setattr(cfg, attr, conv(value))
                except (TypeError, ValueError) as exc:
                    raise ConfigError(f"bad value for [{section}] {key}: {exc}") from None
        return cfg

    def _apply_env(self):
        env = os.environ
        if ENV_PREFIX + "OUT" in env:
            self.out_dir = env[ENV_PREFIX + "OUT"]
        if ENV_PREFIX + "THREADS" in env:
            self.threads = int(env[ENV_PREFIX + "THREADS"])
        if ENV_PREFIX + "SEED" in env:
            self.seed = int(env[ENV_PREFIX + "SEED"])
        if ENV_PREFIX + "VERBOSE" in env:
            self.verbose = env[ENV_PREFIX + "VERBOSE"] not in ("", "0", "false")

    def validate(self):
        if self.kind not in _STUDY_KINDS:
            raise ConfigError(f"unknown study kind {self.kind!r}")
        if self.model not in ("machine", "verification"):
            raise ConfigError("solve.model must be 'machine' or 'verification'")
        if self.coupling not in ("harmonic", "dn"):
            raise ConfigError("solve.coupling must be 'harmonic' or 'dn'")
        if not 0.0 < self.dn_relax <= 1.0:
            raise ConfigError("dn.relax must lie in (0, 1]")
        if self.dn_tol <= 0.0:
            raise ConfigError("dn.tol must be positive")
        if self.kind == "emf":
            if self.speed <= 0.0:
                raise ConfigError("emf.speed_rpm must be positive (nominal speed is a required input)")
            if self.n_alpha < 32:
                raise ConfigError("emf.n_alpha must be at least 32")
        if any(p < 1 for p in self.degrees) or self.degree < 1:
            raise ConfigError("spline degrees must be >= 1")
        if self.quadrature_order < 0:
            raise ConfigError("quadrature.order must be >= 0")
        if min(self.refinements, default=1) < 0 or self.refinement < 0:
            raise ConfigError("refinement levels must be >= 0")

    @property
    def quadrature(self):
        return self.quadrature_order if self.quadrature_order > 0 else None
