"""Command-line front end: train / eval / sweep / verify-bounds / negative-demo.

All commands read a plain-text config of dotted ``key = value`` lines (``#``
comments allowed) and write CSV artifacts into the output directory. Exit
codes: 0 success, 1 validation error, 2 bound violation, 3 numerical fault.

Config keys (defaults in parentheses):

    setting                 general | bipartite          (general)
    distribution            path to a distribution file
    phi.kind                hinge | exponential | sigmoid (exponential)
    phi.k                   sigmoid slope                (1.0)
    constraints.W/B/Lam/q   norm-ball constraints        (1.0, 1.0, 1.0, 2.0)
    model.kind              linear | relu_nn             (linear)
    model.n_hidden          hidden width                 (16)
    model.path              model file, eval only
    abstention.gamma/cost   single cell, train/eval      (0.0, 0.1)
    abstention.gamma_list   sweep grid   (0.0 0.3 0.5 0.7 0.9)
    abstention.cost_list    sweep grid   (0.1 0.3 0.5)
    train.epochs/batch_size/lr0/momentum/lr_schedule/n_samples
                                                         (200, 64, 0.1, 0.9, cosine, 512)
    sweep.seeds             training seeds               (1 2 3)
    eval.method             exhaustive-grid | multi-restart-pgd (exhaustive-grid)
    verify.n_distributions/n_hypotheses/n_atoms/dim/variant
                                                         (5, 10, 6, 2, theorem-statement)
    negative.epsilons       (0.1 0.01 0.001 0.0001)
"""

from __future__ import annotations

import argparse
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import bounds as bounds_mod
from . import models as models_mod
from .bounds import (NEGATIVE_REPORT_COLUMNS, BOUND_REPORT_COLUMNS, VARIANTS,
                     THEOREM_VARIANT, negative_report, verify_theorem_bound)
from .distribution import (load_bipartite, load_general, random_bipartite,
                           random_general, sample_bipartite, sample_general)
from .losses import AbstentionConfig, PhiSpec, SaturationError
from .models import LINEAR, ConstraintSpec, null_model, random_model
from .risk import (BIPARTITE, GENERAL, GRID, TARGET, RISK_REPORT_COLUMNS,
                   expected_risk, risk_report)
from .tableio import fmt_float, write_csv
from .trainer import TrainConfig, TrainingDiverged, train
from .trainer import mean_surrogate_loss  # noqa: F401 (re-exported for tests)

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_BOUND_VIOLATION = 2
EXIT_NUMERICAL = 3

# test-only fault-injection hook: scales every bound RHS so the mutation test
# can confirm that a wrong transform coefficient is flagged as a violation
FAULT_ENV = "RANKABSTAIN_RHS_SCALE"


def parse_config(text: str) -> dict[str, str]:
    """Dotted key = value lines; later keys override earlier ones."""
    cfg: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep or not key.strip():
            raise ValueError(f"config line {lineno}: expected 'key = value', got {raw!r}")
        cfg[key.strip()] = value.strip()
    return cfg


class Config:
    """Typed accessors over the parsed key-value map."""

    def __init__(self, raw: dict[str, str]):
        self.raw = raw

    def get(self, key, default=None):
        return self.raw.get(key, default)

    def require(self, key) -> str:
        if key not in self.raw:
            raise ValueError(f"config is missing required key {key!r}")
        return self.raw[key]

    def get_float(self, key, default):
        return float(self.raw.get(key, default))

    def get_int(self, key, default):
        return int(self.raw.get(key, default))

    def floats(self, key, default: str) -> list[float]:
        return [float(v) for v in self.raw.get(key, default).split()]

    def ints(self, key, default: str) -> list[int]:
        return [int(v) for v in self.raw.get(key, default).split()]

    @property
    def setting(self) -> str:
        s = self.get("setting", GENERAL)
        if s not in (GENERAL, BIPARTITE):
            raise ValueError(f"unknown setting {s!r}")
        return s

    @property
    def phi(self) -> PhiSpec:
        return PhiSpec(self.get("phi.kind", "exponential"), k=self.get_float("phi.k", 1.0))

    @property
    def constraints(self) -> ConstraintSpec:
        q = self.get("constraints.q", "2")
        return ConstraintSpec(
            W=self.get_float("constraints.W", 1.0),
            B=self.get_float("constraints.B", 1.0),
            Lam=self.get_float("constraints.Lam", 1.0),
            q=math.inf if q in ("inf", "oo") else float(q),
        )

    @property
    def abstention(self) -> AbstentionConfig:
        return AbstentionConfig(
            gamma=self.get_float("abstention.gamma", 0.0),
            cost=self.get_float("abstention.cost", 0.1),
            p=self.constraints.p,
        )

    def train_config(self, seed: int) -> TrainConfig:
        return TrainConfig(
            phi=self.phi,
            epochs=self.get_int("train.epochs", 200),
            batch_size=self.get_int("train.batch_size", 64),
            lr0=self.get_float("train.lr0", 0.1),
            momentum=self.get_float("train.momentum", 0.9),
            lr_schedule=self.get("train.lr_schedule", "cosine"),
            seed=seed,
            setting=self.setting,
            abstention=self.abstention,
        )

    def load_distribution(self):
        path = self.require("distribution")
        p = self.constraints.p
        if self.setting == GENERAL:
            return load_general(path, p=p)
        return load_bipartite(path, p=p)


def _training_sample(cfg: Config, dist_obj, seed: int):
    n = cfg.get_int("train.n_samples", 512)
    if cfg.setting == GENERAL:
        xs, xps, y = sample_general(dist_obj, n, seed)
        return (xs, xps, y)
    pts, y = sample_bipartite(dist_obj, n, seed)
    return (pts, y)


def _initial_model(cfg: Config, dim: int):
    return null_model(cfg.get("model.kind", LINEAR), dim, cfg.constraints,
                      n_hidden=cfg.get_int("model.n_hidden", 16))


# --- commands ---

def cmd_train(cfg: Config, out: Path, seed: int, reproducible: bool) -> int:
    dist_obj = cfg.load_distribution()
    data = _training_sample(cfg, dist_obj, seed)
    model, trace = train(data, _initial_model(cfg, dist_obj.dim), cfg.train_config(seed))
    models_mod.save(model, out / "model.txt")
    write_csv(out / "loss_trace.csv",
              ["epoch", "mean_surrogate_loss", "mean_target_abstention_loss"],
              [[str(r.epoch), fmt_float(r.mean_surrogate_loss),
                fmt_float(r.mean_target_abstention_loss)] for r in trace],
              reproducible)
    return EXIT_OK


def cmd_eval(cfg: Config, out: Path, seed: int, reproducible: bool) -> int:
    dist_obj = cfg.load_distribution()
    model = models_mod.load(cfg.require("model.path"))
    abst = cfg.abstention
    method = cfg.get("eval.method", GRID)
    rows = []
    for loss in (TARGET, cfg.phi):
        rep = risk_report(loss, cfg.setting, model, dist_obj, abst,
                          cfg.constraints, method=method, seed=seed)
        rows.append(rep.csv_row())
    write_csv(out / "risk_report.csv", list(RISK_REPORT_COLUMNS), rows, reproducible)
    return EXIT_OK


def cmd_sweep(cfg: Config, out: Path, seed: int, reproducible: bool) -> int:
    dist_obj = cfg.load_distribution()
    gammas = cfg.floats("abstention.gamma_list", "0.0 0.3 0.5 0.7 0.9")
    costs = cfg.floats("abstention.cost_list", "0.1 0.3 0.5")
    if not gammas or sorted(gammas) != gammas:
        raise ValueError("abstention.gamma_list must be non-empty and sorted ascending")
    if any(not 0.0 <= c <= 1.0 for c in costs):
        raise ValueError("abstention.cost_list values must lie in [0, 1]")
    seeds = cfg.ints("sweep.seeds", "1 2 3")
    p = cfg.constraints.p
    models = []
    for s in seeds:
        data = _training_sample(cfg, dist_obj, s)
        model, _ = train(data, _initial_model(cfg, dist_obj.dim), cfg.train_config(s))
        models.append(model)
    rows = []
    for g in gammas:
        for c in costs:
            cell = AbstentionConfig(gamma=g, cost=c, p=p)
            vals = [expected_risk(TARGET, cfg.setting, m, dist_obj, cell) for m in models]
            rows.append([fmt_float(g), fmt_float(c),
                         fmt_float(float(np.mean(vals))), fmt_float(float(np.std(vals)))])
    write_csv(out / "sweep.csv", ["gamma", "cost", "mean_loss", "std_loss"], rows, reproducible)
    return EXIT_OK


def cmd_verify_bounds(cfg: Config, out: Path, seed: int, reproducible: bool) -> int:
    setting = cfg.setting
    constraints = cfg.constraints
    kind = cfg.get("model.kind", LINEAR)
    n_hidden = cfg.get_int("model.n_hidden", 16)
    variant = cfg.get("verify.variant", THEOREM_VARIANT)
    if variant not in VARIANTS:
        raise ValueError(f"unknown verify.variant {variant!r}")
    gammas = cfg.floats("abstention.gamma_list", "0.2 0.5")
    costs = cfg.floats("abstention.cost_list", "0.1 0.5")
    rng = np.random.default_rng(seed)
    dim = cfg.get_int("verify.dim", 2)
    dists = []
    if "distribution" in cfg.raw:
        dists.append(cfg.load_distribution())
    else:
        for _ in range(cfg.get_int("verify.n_distributions", 5)):
            if setting == GENERAL:
                dists.append(random_general(rng, cfg.get_int("verify.n_atoms", 6), dim,
                                            p=constraints.p))
            else:
                dists.append(random_bipartite(rng, cfg.get_int("verify.n_atoms", 6), dim,
                                              p=constraints.p))
    rows, all_hold = [], True
    for dist_obj in dists:
        for _ in range(cfg.get_int("verify.n_hypotheses", 10)):
            h = random_model(rng, kind, dist_obj.dim, constraints, n_hidden=n_hidden)
            for g in gammas:
                for c in costs:
                    abst = AbstentionConfig(gamma=g, cost=c, p=constraints.p)
                    rep = verify_theorem_bound(h, dist_obj, cfg.phi, setting, abst,
                                               constraints, variant=variant)
                    rows.append(rep.csv_row())
                    all_hold = all_hold and rep.holds
    write_csv(out / "bound_report.csv", list(BOUND_REPORT_COLUMNS), rows, reproducible)
    return EXIT_OK if all_hold else EXIT_BOUND_VIOLATION


def cmd_negative_demo(cfg: Config, out: Path, seed: int, reproducible: bool) -> int:
    epsilons = cfg.floats("negative.epsilons", "0.1 0.01 0.001 0.0001")
    rows = negative_report(cfg.setting, epsilons, cfg.phi, cfg.constraints,
                           kind=cfg.get("model.kind", LINEAR),
                           remedy_cost=cfg.get_float("abstention.cost", 0.1))
    write_csv(out / "negative_report.csv", list(NEGATIVE_REPORT_COLUMNS),
              [r.csv_row() for r in rows], reproducible)
    return EXIT_OK


_COMMANDS = {
    "train": cmd_train,
    "eval": cmd_eval,
    "sweep": cmd_sweep,
    "verify-bounds": cmd_verify_bounds,
    "negative-demo": cmd_negative_demo,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rankabstain",
        description="Score-based ranking with abstention: training, evaluation, "
                    "sweeps, consistency-bound verification, and negative-result demos.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=name != "negative-demo",
                       help="plain-text key = value config file")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--out", default=".", help="output directory")
        p.add_argument("--reproducible", action="store_true",
                       help="suppress the timestamped CSV header comment")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    scale = os.environ.get(FAULT_ENV)
    if scale is not None:
        bounds_mod._FAULT_RHS_SCALE = float(scale)
    try:
        raw = {}
        if args.config:
            with open(args.config) as f:
                raw = parse_config(f.read())
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        return _COMMANDS[args.command](Config(raw), out, args.seed, args.reproducible)
    except (SaturationError, TrainingDiverged, FloatingPointError, OverflowError) as exc:
        print(f"numerical fault: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (ValueError, KeyError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    finally:
        bounds_mod._FAULT_RHS_SCALE = 1.0


if __name__ == "__main__":
    sys.exit(main())
