"""Command-line experiment runner.

Usage::

    bdris EXPERIMENT [--config PATH] [--out DIR] [--seed N] [--threads N] [--quiet]

Failures print a single ``error[<kind>]: <message>`` line on stderr. Exit
codes: 0 success, 1 an embedded verification gate failed, 2 usage error or
unknown experiment, 3 invalid or missing config, 4 output directory not
writable.
"""

from __future__ import annotations

import argparse
import dataclasses
import datetime as _dt
import json
import logging
import math
import os
import sys
from dataclasses import dataclass, field

import numpy as np

from . import evaluation as ev
from .channel import bs_ris_channel, sample_ris_ue_channel
from .config import ConfigError, ExperimentConfig, load_config
from .geometry import steering_matrix
from .metrics import (beam_pattern, cav, default_pattern_grid, gain_ceiling_db,
                      gain_floor_db, snr_bdris_closed_form, snr_dris_closed_form)
from .precoder import beamforming_vector, build_codebook
from .results import (ResultTable, file_sha256, write_channel_dump, write_matrix_dump,
                      write_pattern_grid)
from .ris_config import (Architecture, GroupingStrategy, circuit_complexity,
                         configure_bdris, configure_dris, make_grouping,
                         relative_complexity)

log = logging.getLogger("bdris")

EXPERIMENTS = ("beampattern", "cav-surface", "snr-gain", "aber", "rate", "sweep",
               "complexity", "verify-propositions")

EXIT_OK, EXIT_GATE, EXIT_USAGE, EXIT_CONFIG, EXIT_OUTPUT = 0, 1, 2, 3, 4


class CliError(Exception):
    def __init__(self, kind: str, message: str, code: int):
        super().__init__(message)
        self.kind = kind
        self.code = code


@dataclass
class RunManifest:
    experiment: str
    config_path: str | None
    output_dir: str
    seed: int
    timestamp: str
    artifacts: dict = field(default_factory=dict)   # file name -> sha256
    gates: dict = field(default_factory=dict)       # gate name -> passed

    @property
    def passed(self) -> bool:
        return all(self.gates.values())

    def write(self) -> str:
        path = os.path.join(self.output_dir, "manifest.json")
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(dataclasses.asdict(self), fh, indent=2, sort_keys=True)
            fh.write("\n")
        return path


class _Run:
    def __init__(self, manifest: RunManifest, quiet: bool):
        self.manifest = manifest
        self.quiet = quiet

    def path(self, name: str) -> str:
        return os.path.join(self.manifest.output_dir, name)

    def record(self, *paths):
        for p in paths:
            self.manifest.artifacts[os.path.basename(p)] = file_sha256(p)

    def table(self, table: ResultTable, name: str):
        self.record(*table.write(self.path(name)))
        self.say(table.to_csv_text().rstrip())

    def gate(self, name: str, passed: bool, detail: str = ""):
        self.manifest.gates[name] = bool(passed)
        self.say(f"{'PASS' if passed else 'FAIL'} {name} {detail}".rstrip())

    def say(self, text: str):
        if not self.quiet:
            print(text)


# ---------------------------------------------------------------- experiments

def _pattern_vectors(cfg: ExperimentConfig, geometry, b):
    g = bs_ris_channel(geometry)
    out = {}
    for spec in cfg.architectures:
        out[spec.label] = ev.effective_vectors(spec, geometry, g, b[None, :])[0]
    return out


def run_beampattern(cfg: ExperimentConfig, run: _Run):
    geometry = cfg.build_geometry()
    az, el = default_pattern_grid(cfg.pattern_resolution_deg)
    b = steering_matrix(geometry, math.radians(cfg.pattern_azimuth_deg),
                        math.radians(cfg.pattern_elevation_deg))
    table = ResultTable(["architecture", "ppd_dbi", "hppd_dbi", "hpbw_deg"],
                        metadata={"experiment": "beampattern", "m_x": geometry.m_x_count,
                                  "m_y": geometry.m_y_count,
                                  "separation_m": geometry.d_c,
                                  "normalization": cfg.pattern_normalization})
    patterns = {}
    for label, zeta in _pattern_vectors(cfg, geometry, b).items():
        pat = beam_pattern(zeta, geometry, az, el, math.radians(cfg.pattern_cut_deg),
                           cfg.pattern_normalization)
        patterns[label] = pat
        run.record(write_pattern_grid(run.path(f"pattern_{label}.csv"), az, el,
                                      pat.directivity_db))
        table.add_row(architecture=label, ppd_dbi=pat.ppd, hppd_dbi=pat.hppd, hpbw_deg=pat.hpbw)
    run.table(table, "beampattern.csv")
    if "bd" in patterns and "active" in patterns:
        d_bd = 10 ** (patterns["bd"].directivity_db / 10)
        d_act = 10 ** (patterns["active"].directivity_db / 10)
        rel = np.max(np.abs(d_bd - d_act) / np.max(d_act))
        run.gate("bd_equals_active_pattern", rel <= 1e-9, f"max_rel={rel:.3e}")


def run_cav_surface(cfg: ExperimentConfig, run: _Run):
    sizes = range(2, max(cfg.geometry.m_x, cfg.geometry.m_y, 10) + 1)
    separations = [0.25 * k for k in range(2, 9)]
    table = ResultTable(["array_size", "separation_wavelengths", "cav", "floor_db", "ceiling_db"],
                        metadata={"experiment": "cav_surface"})
    for n in sizes:
        for sep in separations:
            c = cav(bs_ris_channel(cfg.geometry.build(m_x=n, m_y=n,
                                                      separation_wavelengths=sep))).cav
            table.add_row(array_size=n, separation_wavelengths=sep, cav=c,
                          floor_db=gain_floor_db(c), ceiling_db=gain_ceiling_db(c))
    run.table(table, "cav_surface.csv")


def run_snr_gain(cfg: ExperimentConfig, run: _Run):
    run.table(ev.snr_gain_sweep(cfg.cluster_counts, cfg), "snr_gain.csv")


def run_aber(cfg: ExperimentConfig, run: _Run):
    links = ev.prepare_links(cfg, trials=cfg.aber_trials)
    sim = ev.simulate_aber(cfg, links)
    bound = ev.theoretical_aber(cfg, links)
    merged = ResultTable(sim.columns + bound.columns[1:], metadata=sim.metadata)
    for a, b in zip(sim.rows, bound.rows):
        merged.rows.append(a + b[1:])
    run.table(merged, "aber.csv")


def run_rate(cfg: ExperimentConfig, run: _Run):
    links = ev.prepare_links(cfg)
    run.table(ev.achievable_rate(cfg, links), "rate.csv")
    # one inspectable realization: trial-0 channels and the BD scattering matrix
    geometry = links.geometry
    ch = sample_ris_ue_channel(geometry, cfg.channel, cfg.scenario,
                               ev.trial_rng(cfg.seed, ev.STREAM_CHANNEL, 0))
    run.record(write_channel_dump(run.path("channel_trial0.csv"), links.g, ch.h))
    codebook = build_codebook(geometry, math.radians(cfg.codebook_step_deg))
    b = beamforming_vector(cfg.case, ch, geometry, codebook).b
    for spec in cfg.architectures:
        if spec.architecture is Architecture.DRIS:
            omega = configure_dris(links.g, b).matrix()
        elif spec.architecture in (Architecture.BD_FULL, Architecture.BD_GROUP):
            grouping = make_grouping(geometry, spec.group_count, spec.strategy, spec.base)
            omega = configure_bdris(links.g, b, grouping).matrix()
        else:
            continue
        run.record(write_matrix_dump(run.path(f"scattering_{spec.label}_trial0.csv"), omega))


def run_sweep(cfg: ExperimentConfig, run: _Run):
    table = ev.sweep(cfg.sweep_axis, cfg, cfg.sweep_values or None)
    run.table(table, f"sweep_{cfg.sweep_axis}.csv")


def run_complexity(cfg: ExperimentConfig, run: _Run):
    M = cfg.geometry.m_x * cfg.geometry.m_y
    counts = ResultTable(["architecture", "group_count", "circuit_count", "algo_flop_model"],
                         metadata={"experiment": "complexity", "M": M})
    for arch, G in ((Architecture.ACTIVE, 1), (Architecture.DRIS, 1),
                    (Architecture.BD_FULL, 1)):
        rep = circuit_complexity(arch, M, G)
        counts.add_row(architecture=arch.value, group_count=G,
                       circuit_count=rep.circuit_count, algo_flop_model=rep.algo_flop_model)
    for G in cfg.complexity_group_counts():
        rep = circuit_complexity(Architecture.BD_GROUP, M, G)
        counts.add_row(architecture=Architecture.BD_GROUP.value, group_count=G,
                       circuit_count=rep.circuit_count, algo_flop_model=rep.algo_flop_model)
    run.table(counts, "complexity_counts.csv")
    rows = relative_complexity(M, cfg.complexity_group_counts())
    rel = ResultTable(list(rows[0].keys()), metadata={"experiment": "complexity_relative", "M": M})
    for r in rows:
        rel.add_row(**r)
    run.table(rel, "complexity_relative.csv")


def run_verify_propositions(cfg: ExperimentConfig, run: _Run):
    geometry = cfg.build_geometry()
    g = bs_ris_channel(geometry)
    c = cav(g).cav
    M = geometry.size
    rng = np.random.default_rng(np.random.SeedSequence(cfg.seed, spawn_key=(99,)))
    table = ResultTable(["check", "measured", "expected", "tolerance", "passed"],
                        metadata={"experiment": "verify_propositions", "seed": cfg.seed})

    def check(name, measured, expected, tol, relative=False):
        err = abs(measured - expected) / (abs(expected) if relative else 1.0)
        ok = bool(err <= tol)
        table.add_row(check=name, measured=float(measured), expected=float(expected),
                      tolerance=tol, passed=ok)
        run.gate(name, ok, f"measured={measured:.6g} expected={expected:.6g}")

    # floor: equal-amplitude RIS-UE channel, scattering matrices from the algorithm
    full = make_grouping(geometry, 1)
    worst = 0.0
    for _ in range(20):
        h = np.exp(2j * np.pi * rng.random(M))
        v1 = h.conj() / np.linalg.norm(h)
        bd = h @ configure_bdris(g, v1, full).apply(g)
        d = h @ configure_dris(g, v1).apply(g)
        ratio = abs(bd) ** 2 / abs(d) ** 2
        worst = max(worst, abs(ratio - (1 + c ** 2)) / (1 + c ** 2))
    check("floor_identity_equal_amplitude", worst, 0.0, 1e-9)

    # ceiling: Rayleigh RIS-UE channel, closed-form SNR ratio
    H = (rng.standard_normal((cfg.trials, M)) + 1j * rng.standard_normal((cfg.trials, M)))
    gain = 10 * np.log10(snr_bdris_closed_form(H, g) / snr_dris_closed_form(H, g))
    check("ceiling_rayleigh_mean_gain_db", float(gain.mean()), gain_ceiling_db(c), 0.15)

    # mirror-symmetric halves keep the CAV of the group they were split from
    for G, base in ((2, GroupingStrategy.LINEAR), (20, GroupingStrategy.ROWS)):
        try:
            grouping = make_grouping(geometry, G, GroupingStrategy.MIRROR_SYMMETRIC, base)
        except ValueError as exc:
            log.warning("skipping mirror G=%d: %s", G, exc)
            continue
        parent = make_grouping(geometry, G // 2, base)
        dev = 0.0
        for k, idx in enumerate(grouping.groups):
            ref = cav(g[parent.groups[k // 2]]).cav
            got = cav(g[idx]).cav
            dev = max(dev, abs(got - ref) / ref if ref > 0 else abs(got))
        check(f"mirror_g{G}_subgroup_cav", dev, 0.0, 1e-12)
    run.table(table, "verify_propositions.csv")


RUNNERS = {
    "beampattern": run_beampattern,
    "cav-surface": run_cav_surface,
    "snr-gain": run_snr_gain,
    "aber": run_aber,
    "rate": run_rate,
    "sweep": run_sweep,
    "complexity": run_complexity,
    "verify-propositions": run_verify_propositions,
}


def run(experiment: str, config_path=None, output_dir: str = "out",
        seed_override: int | None = None, threads: int | None = None,
        quiet: bool = False) -> RunManifest:
    if experiment not in RUNNERS:
        raise CliError("usage", f"unknown experiment {experiment!r}; "
                                f"choose from {', '.join(EXPERIMENTS)}", EXIT_USAGE)
    try:
        cfg = load_config(config_path)
    except FileNotFoundError as exc:
        raise CliError("config", str(exc), EXIT_CONFIG) from None
    except ConfigError as exc:
        raise CliError("config", str(exc), EXIT_CONFIG) from None
    if seed_override is not None:
        if seed_override < 0:
            raise CliError("config", "eval.seed: must be non-negative", EXIT_CONFIG)
        cfg = dataclasses.replace(cfg, seed=int(seed_override))
    if threads is not None:
        if threads < 1:
            raise CliError("config", "eval.threads: must be >= 1", EXIT_CONFIG)
        cfg = dataclasses.replace(cfg, threads=int(threads))

    try:
        os.makedirs(output_dir, exist_ok=True)
        probe = os.path.join(output_dir, ".write_probe")
        with open(probe, "w") as fh:
            fh.write("")
        os.remove(probe)
    except OSError as exc:
        raise CliError("output", f"cannot write to {output_dir}: {exc.strerror}",
                       EXIT_OUTPUT) from None

    manifest = RunManifest(experiment, None if config_path is None else os.fspath(config_path),
                           os.fspath(output_dir), cfg.seed,
                           _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"))
    RUNNERS[experiment](cfg, _Run(manifest, quiet))
    manifest.write()
    return manifest


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="bdris", description="BD-RIS passive beamforming experiments")
    p.add_argument("experiment", help=" | ".join(EXPERIMENTS))
    p.add_argument("--config", help="INI config file (defaults used when omitted)")
    p.add_argument("--out", default="out", help="output directory")
    p.add_argument("--seed", type=int, help="override eval.seed")
    p.add_argument("--threads", type=int, help="worker threads for Monte-Carlo trials")
    p.add_argument("--quiet", action="store_true", help="suppress summary output")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.ERROR if args.quiet else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.config is not None and not os.path.isfile(args.config):
        print(f"error[config]: config file not found: {args.config}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        manifest = run(args.experiment, args.config, args.out, args.seed, args.threads,
                       args.quiet)
    except CliError as exc:
        print(f"error[{exc.kind}]: {str(exc).replace(chr(10), ' ')}", file=sys.stderr)
        return exc.code
    return EXIT_OK if manifest.passed else EXIT_GATE


if __name__ == "__main__":
    sys.exit(main())
