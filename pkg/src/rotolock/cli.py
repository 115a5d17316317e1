"""Command-line interface: config ingestion, subcommand dispatch, CSV/JSON output."""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .errors import ConfigError, PreconditionError
from .modulation import ModulationFit, modulation_series
from .reference import (
    EmissionFit,
    SpotGeometry,
    fit_trapezoid_cosine,
    reference_waveform,
)
from .signals import TimeGrid, synth, write_csv
from .sim import SimConfig, _reject_unknown_keys, report, run_simulation


@dataclass(frozen=True)
class ModwaveConfig:
    f_m: float = 2500.0
    samples_per_period: int = 720
    modulation: ModulationFit = field(default_factory=ModulationFit)

    def to_dict(self) -> dict:
        return {
            "f_m": self.f_m,
            "samples_per_period": self.samples_per_period,
            "modulation": self.modulation.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ModwaveConfig":
        _reject_unknown_keys(d, {"f_m", "samples_per_period", "modulation"}, "modwave")
        defaults = cls()
        return cls(
            f_m=float(d.get("f_m", defaults.f_m)),
            samples_per_period=int(d.get("samples_per_period", defaults.samples_per_period)),
            modulation=ModulationFit.from_dict(d.get("modulation", {})),
        )


@dataclass(frozen=True)
class RefsignalConfig:
    f_rot: float = 2500.0
    samples_per_period: int = 2000
    geometry: SpotGeometry = field(default_factory=SpotGeometry)

    def to_dict(self) -> dict:
        return {
            "f_rot": self.f_rot,
            "samples_per_period": self.samples_per_period,
            "geometry": self.geometry.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RefsignalConfig":
        _reject_unknown_keys(d, {"f_rot", "samples_per_period", "geometry"}, "refsignal")
        defaults = cls()
        return cls(
            f_rot=float(d.get("f_rot", defaults.f_rot)),
            samples_per_period=int(d.get("samples_per_period", defaults.samples_per_period)),
            geometry=_geometry_from_dict(d.get("geometry", {})),
        )


def _geometry_from_dict(d: dict) -> SpotGeometry:
    _reject_unknown_keys(d, {"r0", "d", "R0", "theta_gnd_deg", "emission"}, "geometry")
    em_d = d.get("emission", {})
    _reject_unknown_keys(em_d, {"A", "k", "c"}, "emission")
    defaults = SpotGeometry()
    em_defaults = defaults.emission
    emission = EmissionFit(
        A=float(em_d.get("A", em_defaults.A)),
        k=float(em_d.get("k", em_defaults.k)),
        c=float(em_d.get("c", em_defaults.c)),
    )
    return SpotGeometry(
        r0=float(d.get("r0", defaults.r0)),
        d=float(d.get("d", defaults.d)),
        R0=float(d.get("R0", defaults.R0)),
        theta_gnd=float(np.deg2rad(float(d.get("theta_gnd_deg", 30.0)))),
        emission=emission,
    )


def _load_config(path, subcommand: str) -> dict:
    """Load a JSON config file; a previously emitted manifest is accepted too."""
    if path is None:
        return {}
    try:
        with open(path) as fh:
            data = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be a JSON object")
    if "subcommand" in data and "config" in data:
        if data["subcommand"] != subcommand:
            raise ConfigError(
                f"{path} is a manifest for {data['subcommand']!r}, not {subcommand!r}"
            )
        data = data["config"]
    return data


def _write_json(obj: dict, path) -> None:
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _write_manifest(subcommand: str, config_dict: dict, out: Path) -> None:
    _write_json(
        {
            "subcommand": subcommand,
            "config": config_dict,
            "out_dir": str(out),
            "version": __version__,
        },
        out / "manifest.json",
    )


def cmd_modwave(cfg: ModwaveConfig, out: Path) -> dict:
    """Emit the modulation waveform over two rotation periods plus its series."""
    series = modulation_series(cfg.modulation, cfg.f_m)
    n = 2 * cfg.samples_per_period
    grid = TimeGrid(dt=1.0 / (cfg.f_m * cfg.samples_per_period), n=n, t0=0.0)
    wave = synth(series, grid)
    write_csv(wave, out / "modwave.csv")
    _write_json(series.to_dict(), out / "modwave_series.json")
    return {"files": [str(out / "modwave.csv"), str(out / "modwave_series.json")]}


def cmd_refsignal(cfg: RefsignalConfig, out: Path) -> dict:
    """Emit one period of the optical-switch reference plus its transition fit."""
    grid = TimeGrid(dt=1.0 / (cfg.f_rot * cfg.samples_per_period), n=cfg.samples_per_period, t0=0.0)
    wave = reference_waveform(cfg.geometry, grid, cfg.f_rot)
    write_csv(wave, out / "refsignal.csv")
    fit, resid = fit_trapezoid_cosine(wave, cfg.f_rot)
    _write_json(
        dict(fit.to_dict(), residual_rms=resid, period=1.0 / cfg.f_rot),
        out / "trapezoid_fit.json",
    )
    return {"files": [str(out / "refsignal.csv"), str(out / "trapezoid_fit.json")]}


def cmd_simulate(cfg: SimConfig, out: Path) -> dict:
    """Run the end-to-end scenario and write the signal stacks and metrics."""
    result = run_simulation(cfg)
    summary = report(result, out)
    write_csv(result.restored_downsampled, out / "restored_downsampled.csv")
    summary["files"].append(str(out / "restored_downsampled.csv"))
    return summary


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rotolock",
        description="Rotating-electrode optical voltage sensor simulation toolkit",
    )
    parser.add_argument("--version", action="version", version=f"rotolock {__version__}")
    sub = parser.add_subparsers(dest="subcommand", required=True)
    for name, helptext in (
        ("modwave", "emit the electrode modulation waveform"),
        ("refsignal", "emit the optical-switch reference waveform"),
        ("simulate", "run the end-to-end lock-in simulation"),
    ):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--config", type=Path, default=None, help="JSON config file")
        p.add_argument("--out", type=Path, default=Path("."), help="output directory")
        if name == "simulate":
            p.add_argument("--seed", type=int, default=None, help="override noise seed")
            p.add_argument(
                "--noise", choices=["step", "sine", "none"], default=None,
                help="override noise kind",
            )
            p.add_argument(
                "--ref", choices=["square", "sine"], default=None,
                help="override reference kind",
            )
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        raw = _load_config(args.config, args.subcommand)
        if args.subcommand == "simulate":
            # flag overrides beat file values
            if args.noise is not None:
                raw.setdefault("noise", {})["kind"] = args.noise
            if args.seed is not None:
                raw.setdefault("noise", {})["seed"] = args.seed
            if args.ref is not None:
                raw["ref_kind"] = args.ref
            cfg = SimConfig.from_dict(raw)
            runner = cmd_simulate
        elif args.subcommand == "modwave":
            cfg = ModwaveConfig.from_dict(raw)
            runner = cmd_modwave
        else:
            cfg = RefsignalConfig.from_dict(raw)
            runner = cmd_refsignal

        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        summary = runner(cfg, out)
        _write_manifest(args.subcommand, cfg.to_dict(), out)
        for f in summary["files"]:
            print(f"wrote {f}")
        print(f"wrote {out / 'manifest.json'}")
        if "metrics" in summary:
            for key in ("rms_error_full", "rms_error_downsampled", "bandwidth_hz"):
                print(f"{key} = {summary['metrics'][key]:.6g}")
        return 0
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (PreconditionError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
