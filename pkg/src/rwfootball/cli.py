"""Command line driver for reproducible campaigns.

::

    rwfootball run --kind oracle-export --L 4 --T 56 --seed 7
    rwfootball run --kind bias-variance-vs-K --zeta 256 --K 1 4 14 56 --M 20 --seed 7
    rwfootball validate --config campaign.toml

Settings come from an optional TOML file (top-level keys plus an
``[estimator]`` section) and are overridden by flags.  Outputs are written
to a scratch directory next to ``--out`` and moved into place only when the
whole campaign succeeds, together with a ``manifest.json`` holding the
config hash, seed, library version and a checksum of every file.
"""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import os
import re
import shutil
import sys
import tempfile
import traceback
from dataclasses import dataclass, field
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from . import __version__

KINDS = (
    "oracle-export",
    "bias-variance-vs-K",
    "bias-variance-vs-zeta",
    "bias-by-state",
    "ess",
    "bootstrap-coverage",
    "binned-coverage",
)
SCHEMA_VERSION = 1
OUT_ENV = "RWFOOTBALL_OUT"
CACHE_ENV = "RWFOOTBALL_CACHE"
DEFAULT_OUT = "rwfootball-out"

# serial cost of one boosting fit and of each training row in it, measured
# on one core at L=4, T=56; only used for the cost estimate
SECONDS_PER_FIT = 0.15
SECONDS_PER_ROW_FIT = 2.5e-5
FULL_SCALE_HOURS = 4.0

ZETA_GRID = (16.0, 64.0, 256.0, 1024.0, 4096.0)
MEMBER_MODES = ("refit", "resplit", "retune")
# fields left out of the config hash: they change wall time or location only
RUNTIME_FIELDS = ("workers", "out", "cache")


@dataclass
class CampaignConfig:
    """Every setting of one campaign.  ``None`` means the kind's default."""

    kind: str | None = None
    seed: int | None = None
    L: int = 4
    T: int = 56
    zeta: list | None = None
    K: list | None = None
    phi: list | None = None
    scheme: list | None = None
    family: list | None = None
    M: int = 100
    B: int = 101
    depth: list = field(default_factory=lambda: [3, 4, 5])
    lr: list = field(default_factory=lambda: [0.05, 0.1])
    max_rounds: int = 1000
    early_stopping: int = 50
    members: str = "refit"
    n_test_games: int = 10_000
    alpha: float = 0.10
    x_fixed: int = 2
    workers: int = 1
    out: str | None = None
    cache: str | None = None

    def resolved(self) -> "CampaignConfig":
        """Copy with kind-dependent defaults filled in."""
        c = dataclasses.replace(self)
        kind = c.kind
        if c.zeta is None:
            c.zeta = list(ZETA_GRID) if kind in ("bias-variance-vs-zeta", "ess") else [4101.0]
        if c.K is None:
            if kind == "bias-variance-vs-K":
                from .experiments import DEFAULT_K_GRID
                c.K = [k for k in DEFAULT_K_GRID if k <= c.T] if isinstance(c.T, int) else list(DEFAULT_K_GRID)
            else:
                c.K = [c.T]
        if c.scheme is None:
            c.scheme = ["randomized_cluster"] if kind == "binned-coverage" else \
                ["standard", "cluster", "randomized_cluster"]
        if c.phi is None:
            c.phi = [0.35] if kind == "binned-coverage" else [1.0]
        if c.family is None:
            c.family = ["clustered", "independent"] if kind == "ess" else \
                ["clustered", "one_per_game", "independent"]
        if c.out is None:
            c.out = os.environ.get(OUT_ENV, DEFAULT_OUT)
        if c.cache is None:
            c.cache = os.environ.get(CACHE_ENV) or None
        return c

    def hashed_dict(self) -> dict:
        d = dataclasses.asdict(self)
        for k in RUNTIME_FIELDS:
            d.pop(k)
        return d

    def config_hash(self) -> str:
        blob = json.dumps(self.hashed_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


LIST_FIELDS = {"zeta": float, "K": int, "phi": float, "scheme": str, "family": str,
               "depth": int, "lr": float}
SCALAR_FIELDS = {"kind": str, "seed": int, "L": int, "T": int, "M": int, "B": int,
                 "max_rounds": int, "early_stopping": int, "members": str,
                 "n_test_games": int, "alpha": float, "x_fixed": int, "workers": int,
                 "out": str, "cache": str}
ESTIMATOR_KEYS = ("depth", "lr", "max_rounds", "early_stopping", "members")


# -- loading ----------------------------------------------------------------

class Diagnostics:
    """Collects ``field: message`` lines, tagged with a config-file line when known."""

    def __init__(self, lines: dict | None = None):
        self.lines = lines or {}
        self.items: list[str] = []

    def add(self, name: str, msg: str) -> None:
        where = f" (line {self.lines[name]})" if name in self.lines else ""
        self.items.append(f"{name}{where}: {msg}")

    def __bool__(self) -> bool:
        return bool(self.items)


def _key_lines(text: str) -> dict:
    """Line number of each ``key = ...`` assignment, keyed by field name."""
    out, section = {}, ""
    for n, line in enumerate(text.splitlines(), start=1):
        m = re.match(r"\s*\[([^\]]+)\]", line)
        if m:
            section = m.group(1).strip()
            continue
        m = re.match(r"\s*([A-Za-z_][A-Za-z0-9_-]*)\s*=", line)
        if m and section in ("", "estimator"):
            key = m.group(1).replace("-", "_")
            out.setdefault(key, n)
            if section:
                out.setdefault(f"{section}.{key}", n)
    return out


def _coerce(name: str, value, diag: Diagnostics):
    def one(v, typ):
        if typ is int:
            if isinstance(v, bool) or not isinstance(v, int):
                if isinstance(v, float) and v.is_integer():
                    return int(v)
                raise TypeError("an integer")
            return v
        if typ is float:
            if isinstance(v, bool) or not isinstance(v, (int, float)):
                raise TypeError("a number")
            return float(v)
        if not isinstance(v, str):
            raise TypeError("a string")
        return v

    try:
        if name in LIST_FIELDS:
            vals = value if isinstance(value, list) else [value]
            return [one(v, LIST_FIELDS[name]) for v in vals]
        return one(value, SCALAR_FIELDS[name])
    except TypeError as err:
        diag.add(name, f"expected {err.args[0]}, got {value!r}")
        return None


def load_config_file(path, diag: Diagnostics) -> dict:
    """Flat ``field -> value`` dict from a TOML file; problems go to ``diag``."""
    text = Path(path).read_text()
    try:
        raw = tomllib.loads(text)
    except tomllib.TOMLDecodeError as err:
        diag.add("config", f"{path}: {err}")
        return {}
    diag.lines.update(_key_lines(text))
    flat = {}
    for key, value in raw.items():
        if key == "estimator" and isinstance(value, dict):
            for k, v in value.items():
                k = k.replace("-", "_")
                if k not in ESTIMATOR_KEYS:
                    diag.add(f"estimator.{k}", "unknown setting")
                else:
                    flat[k] = v
            continue
        key = key.replace("-", "_")
        if key not in LIST_FIELDS and key not in SCALAR_FIELDS:
            diag.add(key, "unknown setting")
        else:
            flat[key] = value
    return flat


def build_config(args: argparse.Namespace, diag: Diagnostics) -> CampaignConfig:
    values = {}
    if args.config:
        values.update(load_config_file(args.config, diag))
    for name in (*LIST_FIELDS, *SCALAR_FIELDS):
        v = getattr(args, name, None)
        if v is not None:
            values[name] = v
            diag.lines.pop(name, None)
    kw = {}
    for name, value in values.items():
        v = _coerce(name, value, diag)
        if v is not None:
            kw[name] = v
    return CampaignConfig(**kw)


# -- validation -------------------------------------------------------------

def validate_config(cfg: CampaignConfig, diag: Diagnostics | None = None) -> list[str]:
    """Static checks only; returns the diagnostic lines (empty when valid)."""
    from .bootstrap import KINDS as SCHEMES
    from .datagen import round_half_up
    from .experiments import FAMILIES

    diag = diag if diag is not None else Diagnostics()
    c = cfg.resolved()
    if c.kind is None:
        diag.add("kind", f"missing; choose from {', '.join(KINDS)}")
    elif c.kind not in KINDS:
        diag.add("kind", f"unknown kind {c.kind!r}; choose from {', '.join(KINDS)}")
    if c.seed is None:
        diag.add("seed", "a master seed is required")
    elif c.seed < 0:
        diag.add("seed", "must be non-negative")
    game_ok = True
    if c.L < 2 or c.L % 2:
        diag.add("L", f"must be an even integer >= 2, got {c.L}")
        game_ok = False
    if c.T < 1:
        diag.add("T", f"must be a positive integer, got {c.T}")
        game_ok = False
    if c.kind == "oracle-export":
        return diag.items

    if not c.zeta:
        diag.add("zeta", "grid is empty")
    elif any(z <= 0 for z in c.zeta):
        diag.add("zeta", "values must be positive")
    if c.kind in ("bias-variance-vs-K", "bias-by-state", "bootstrap-coverage", "binned-coverage") \
            and c.zeta and len(c.zeta) != 1:
        diag.add("zeta", f"{c.kind} takes exactly one value, got {len(c.zeta)}")
    if c.kind == "ess" and c.zeta and len(set(c.zeta)) < 4:
        diag.add("zeta", "ess needs at least 4 distinct values to fit a curve")
    if not c.K:
        diag.add("K", "grid is empty")
    else:
        bad = [k for k in c.K if not 1 <= k <= c.T]
        if bad:
            diag.add("K", f"{bad[0]} is outside 1..T={c.T}")
        if c.kind == "bias-by-state" and len(c.K) != 1:
            diag.add("K", "bias-by-state takes exactly one value")
    if not c.phi:
        diag.add("phi", "grid is empty")
    elif any(not 0.0 < p <= 1.0 for p in c.phi):
        diag.add("phi", "fraction must be in (0,1]")
    if not c.scheme:
        diag.add("scheme", "grid is empty")
    else:
        for s in c.scheme:
            if s not in SCHEMES:
                diag.add("scheme", f"unknown scheme {s!r}; choose from {', '.join(SCHEMES)}")
    if c.kind == "binned-coverage" and (len(c.scheme or []) != 1 or len(c.phi or []) != 1):
        diag.add("scheme", "binned-coverage takes exactly one scheme and one phi")
    if not c.family:
        diag.add("family", "grid is empty")
    else:
        for f in c.family:
            if f not in FAMILIES:
                diag.add("family", f"unknown family {f!r}; choose from {', '.join(FAMILIES)}")
        if c.kind == "ess" and not {"clustered", "independent"} <= set(c.family):
            diag.add("family", "ess needs the clustered and independent families")
    if c.M < 2:
        diag.add("M", "needs at least 2 replicates")
    if c.B < 2:
        diag.add("B", "needs at least 2 bootstrap replicates")
    if not c.depth or any(d < 1 for d in c.depth):
        diag.add("depth", "values must be >= 1 and the grid non-empty")
    if not c.lr or any(not 0.0 < v <= 1.0 for v in c.lr):
        diag.add("lr", "values must be in (0, 1] and the grid non-empty")
    if c.max_rounds < 1:
        diag.add("max_rounds", "must be >= 1")
    if c.early_stopping < 1:
        diag.add("early_stopping", "must be >= 1")
    if c.members not in MEMBER_MODES:
        diag.add("members", f"choose from {', '.join(MEMBER_MODES)}")
    if c.n_test_games < 1:
        diag.add("n_test_games", "must be >= 1")
    if not 0.0 < c.alpha < 1.0:
        diag.add("alpha", "must be in (0, 1)")
    if game_ok and not 1 <= c.x_fixed <= c.L - 1:
        diag.add("x_fixed", f"must be in 1..{c.L - 1}")
    if c.workers < 1:
        diag.add("workers", "must be >= 1")
    if diag or c.kind is None:
        return diag.items

    # dataset sizes implied by the grid
    for z in c.zeta:
        for k in (c.K if c.kind in ("bias-variance-vs-K", "bias-by-state") else []):
            if round_half_up(z * c.T / k) < 1:
                diag.add("zeta", f"zeta={z} with K={k} gives no games")
        if c.kind in ("bootstrap-coverage", "binned-coverage"):
            G = int(z)
            if G < 1:
                diag.add("zeta", f"zeta={z} gives no games")
            for p in c.phi:
                if G >= 1 and round_half_up(G * p) < 1:
                    diag.add("phi", f"fraction too small for dataset: round({G} * {p}) = 0")
        if c.kind in ("bias-variance-vs-zeta", "ess") and int(z) < 1:
            diag.add("zeta", f"zeta={z} gives no games for the G=zeta families")
    return diag.items


# -- cost -------------------------------------------------------------------

def estimate_seconds(cfg: CampaignConfig) -> float:
    """Rough serial cost: a fixed charge per boosting fit plus a charge per row."""
    from .datagen import round_half_up

    c = cfg.resolved()
    grid = len(c.depth) * len(c.lr)
    fits = rows = 0.0
    if c.kind == "bias-variance-vs-K":
        fits = c.M * len(c.K) * grid
        rows = sum(c.M * round_half_up(c.zeta[0] * c.T / k) * k for k in c.K) * grid
    elif c.kind == "bias-by-state":
        fits = c.M * grid
        rows = c.M * round_half_up(c.zeta[0] * c.T / c.K[0]) * c.K[0] * grid
    elif c.kind in ("bias-variance-vs-zeta", "ess"):
        per = {"clustered": c.T, "one_per_game": 1, "independent": c.T}
        fits = c.M * len(c.zeta) * len(c.family) * grid
        rows = sum(c.M * z * per[f] for z in c.zeta for f in c.family) * grid
    elif c.kind in ("bootstrap-coverage", "binned-coverage"):
        n = int(c.zeta[0]) * c.T
        member = grid if c.members == "retune" else 1
        fits = c.M * grid + c.M * c.B * len(c.scheme) * len(c.phi) * member
        rows = c.M * n * grid + sum(c.M * c.B * n * p for _ in c.scheme for p in c.phi) * member
    return fits * SECONDS_PER_FIT + rows * SECONDS_PER_ROW_FIT


# -- campaigns --------------------------------------------------------------

def _estimator(c: CampaignConfig):
    from .gbt import BoostConfig

    grid = [BoostConfig(max_depth=d, learning_rate=lr, max_rounds=c.max_rounds,
                        early_stopping_rounds=c.early_stopping)
            for d in c.depth for lr in c.lr]
    return grid[0] if len(grid) == 1 else tuple(grid)


def _run_oracle_export(c, game, out: Path) -> list[str]:
    from .oracle import build_wp_table, write_table_csv

    write_table_csv(build_wp_table(game), out / "wp_table.csv")
    return ["wp_table.csv"]


def _run_vs_K(c, game, out: Path) -> list[str]:
    from .experiments import Cell, run_campaign, write_vs_K_csv

    cells = [Cell(c.zeta[0], k) for k in c.K]
    reports = run_campaign(cells, c.M, _estimator(c), c.seed, game, c.n_test_games,
                           c.workers, c.cache)
    write_vs_K_csv(reports, out / "bias_var_vs_K.csv")
    return ["bias_var_vs_K.csv"]


def _zeta_reports(c, game):
    from .experiments import family_cell, run_campaign

    cells = [family_cell(f, z, game.T) for z in c.zeta for f in c.family]
    return run_campaign(cells, c.M, _estimator(c), c.seed, game, c.n_test_games,
                        c.workers, c.cache)


def _run_vs_zeta(c, game, out: Path) -> list[str]:
    from .experiments import write_vs_zeta_csv

    write_vs_zeta_csv(_zeta_reports(c, game), out / "bias_var_vs_zeta.csv")
    return ["bias_var_vs_zeta.csv"]


def _run_ess(c, game, out: Path) -> list[str]:
    from .ess import EssResult, ExtrapolationError, effective_sample_size, fit_biexponential, write_ess_csv
    from .experiments import write_vs_zeta_csv
    from .tables import write_csv

    reports = _zeta_reports(c, game)
    write_vs_zeta_csv(reports, out / "bias_var_vs_zeta.csv")
    fits = {}
    for fam in ("clustered", "independent"):
        pts = [(r.cell.zeta, r.rmse[0]) for r in reports if r.cell.family == fam]
        fits[fam] = fit_biexponential(pts)
    write_csv(out / "ess_fits.csv", ["family", "a1", "b1", "a2", "b2", "residual_norm"],
              ([f, *fit.params, fit.residual_norm] for f, fit in fits.items()))
    results = []
    for z in sorted(set(c.zeta)):
        try:
            results.append(effective_sample_size(fits["independent"], fits["clustered"], z))
        except ExtrapolationError as err:
            print(f"ess: zeta={z!r}: {err}; row left as nan", file=sys.stderr)
            results.append(EssResult(float(z), float("nan"), float("nan")))
    write_ess_csv(results, out / "ess_curve.csv")
    return ["bias_var_vs_zeta.csv", "ess_fits.csv", "ess_curve.csv"]


def _run_bias_by_state(c, game, out: Path) -> list[str]:
    from .experiments import Cell, bias_by_state, fit_replicates, write_bias_by_state_csv
    from .oracle import build_wp_table

    models = fit_replicates(Cell(c.zeta[0], c.K[0]), c.M, _estimator(c), c.seed, game,
                            c.workers, c.cache)
    rows = bias_by_state(models, build_wp_table(game), x_fixed=c.x_fixed)
    write_bias_by_state_csv(rows, out / "bias_by_state.csv")
    return ["bias_by_state.csv"]


def _coverage(c, game):
    from .bootstrap import BootstrapScheme, run_coverage_campaign

    schemes = [BootstrapScheme(s, p, c.B) for s in c.scheme for p in c.phi]
    return run_coverage_campaign(schemes, c.zeta[0], c.M, _estimator(c), c.seed, game,
                                 c.n_test_games, c.alpha, members=c.members,
                                 workers=c.workers, cache_root=c.cache)


def _run_bootstrap(c, game, out: Path) -> list[str]:
    from .bootstrap import write_coverage_csv

    camp = _coverage(c, game)
    write_coverage_csv(list(zip(camp.schemes, camp.reports)), out / "boot_coverage.csv")
    return ["boot_coverage.csv"]


def _run_binned(c, game, out: Path) -> list[str]:
    from .bootstrap import write_binned_csv, write_coverage_csv

    camp = _coverage(c, game)
    write_coverage_csv(list(zip(camp.schemes, camp.reports)), out / "boot_coverage.csv")
    write_binned_csv(camp.bins[0], out / "binned_coverage.csv")
    return ["boot_coverage.csv", "binned_coverage.csv"]


RUNNERS = {
    "oracle-export": _run_oracle_export,
    "bias-variance-vs-K": _run_vs_K,
    "bias-variance-vs-zeta": _run_vs_zeta,
    "bias-by-state": _run_bias_by_state,
    "ess": _run_ess,
    "bootstrap-coverage": _run_bootstrap,
    "binned-coverage": _run_binned,
}


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def write_manifest(c: CampaignConfig, files: list[str], out: Path) -> None:
    import numpy
    import scipy

    manifest = {
        "schema_version": SCHEMA_VERSION,
        "kind": c.kind,
        "seed": c.seed,
        "config": c.hashed_dict(),
        "config_hash": c.config_hash(),
        "library_version": __version__,
        "numpy_version": numpy.__version__,
        "scipy_version": scipy.__version__,
        "files": {name: _sha256(out / name) for name in files},
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def run(cfg: CampaignConfig, full_scale: bool = False, err=None,
        diag: Diagnostics | None = None) -> int:
    """Execute a campaign; returns the process exit status."""
    from .game import GameConfig

    err = err or sys.stderr
    problems = validate_config(cfg, diag)
    if problems:
        for p in problems:
            print(f"error: {p}", file=err)
        return 2
    c = cfg.resolved()
    secs = estimate_seconds(c)
    print(f"estimated cost: {secs / 3600:.2f} CPU-hours "
          f"(about {secs / 3600 / c.workers:.2f} h with {c.workers} worker(s))", file=err)
    if secs > FULL_SCALE_HOURS * 3600 and not full_scale:
        print(f"error: campaign exceeds {FULL_SCALE_HOURS:g} CPU-hours; "
              "pass --full-scale to run it", file=err)
        return 3

    out = Path(c.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    scratch = Path(tempfile.mkdtemp(prefix=".rwfootball-", dir=out.parent))
    try:
        files = RUNNERS[c.kind](c, GameConfig(c.L, c.T), scratch)
        write_manifest(c, files, scratch)
        out.mkdir(parents=True, exist_ok=True)
        for name in [*files, "manifest.json"]:
            os.replace(scratch / name, out / name)
    except Exception as exc:  # noqa: BLE001 - report and exit nonzero
        print(f"error: campaign failed: {exc}", file=err)
        if os.environ.get("RWFOOTBALL_DEBUG"):
            traceback.print_exc(file=err)
        return 1
    finally:
        shutil.rmtree(scratch, ignore_errors=True)
    print(f"wrote {', '.join(files)} and manifest.json to {out}", file=err)
    return 0


# -- argument parsing -------------------------------------------------------

def _add_campaign_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="TOML file; flags override its values")
    p.add_argument("--kind", choices=KINDS)
    p.add_argument("--seed", type=int, help="master seed (required)")
    p.add_argument("--L", type=int, help="field length (default 4)")
    p.add_argument("--T", type=int, help="plays per game (default 56)")
    p.add_argument("--zeta", type=float, nargs="+", help="nominal size(s) in games")
    p.add_argument("--K", type=int, nargs="+", help="plays kept per game")
    p.add_argument("--phi", type=float, nargs="+", help="bootstrap resample fraction(s)")
    p.add_argument("--scheme", nargs="+", help="bootstrap scheme(s)")
    p.add_argument("--family", nargs="+", help="dataset families for zeta campaigns")
    p.add_argument("--M", type=int, help="replicates (default 100)")
    p.add_argument("--B", type=int, help="bootstrap replicates (default 101)")
    p.add_argument("--depth", type=int, nargs="+", help="tree depth grid (default 3 4 5)")
    p.add_argument("--lr", type=float, nargs="+", help="learning rate grid (default 0.05 0.1)")
    p.add_argument("--max-rounds", dest="max_rounds", type=int)
    p.add_argument("--early-stopping", dest="early_stopping", type=int)
    p.add_argument("--members", help="how bootstrap members are fit: refit, resplit or retune")
    p.add_argument("--n-test-games", dest="n_test_games", type=int)
    p.add_argument("--alpha", type=float, help="interval miscoverage level (default 0.10)")
    p.add_argument("--x-fixed", dest="x_fixed", type=int, help="field position for bias-by-state")
    p.add_argument("--workers", type=int)
    p.add_argument("--out", help=f"output directory (default ${OUT_ENV} or ./{DEFAULT_OUT})")
    p.add_argument("--cache", help=f"model cache directory (default ${CACHE_ENV}; unset disables)")


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rwfootball", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", help="run a campaign and write CSVs")
    _add_campaign_args(p_run)
    p_run.add_argument("--full-scale", dest="full_scale", action="store_true",
                       help="allow campaigns above the desk-scale cost limit")
    p_val = sub.add_parser("validate", help="check a config without running it")
    _add_campaign_args(p_val)
    return parser


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    diag = Diagnostics()
    try:
        cfg = build_config(args, diag)
    except OSError as exc:
        print(f"error: config: {exc}", file=sys.stderr)
        return 2
    if args.command == "validate":
        problems = validate_config(cfg, diag)
        for p in problems:
            print(f"error: {p}", file=sys.stderr)
        if problems:
            return 2
        print(f"ok: estimated cost {estimate_seconds(cfg) / 3600:.2f} CPU-hours")
        return 0
    return run(cfg, full_scale=args.full_scale, diag=diag)
