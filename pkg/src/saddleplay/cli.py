"""Command-line experiment runner.

Subcommands: ``train``, ``tournament``, ``elo``, ``nash``, ``export-curves``.
Exit codes are 0 on success, 2 for configuration errors and 3 for runtime
failures.
"""
from __future__ import annotations

import argparse
import csv
import glob
import hashlib
import json
import logging
import math
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from .evaluation import Agent, MatchRecord, fit_elo, nash_oracle, run_tournament
from .games import ENV_IDS, MatrixGame, make_env
from .optim import TheoryConfig
from .policies import RulePolicy, SimplexPolicy, UniformPolicy, load_checkpoint, save_checkpoint
from .selfplay import (
    METHODS,
    MODES,
    IterationMetrics,
    TrainConfig,
    rng_stream,
    simplex_grid,
    train,
    train_single_theory,
)

log = logging.getLogger("saddleplay")

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 2, 3
CONFIG_VERSION = 1
_TOURNAMENT_STREAM = 7


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending field and line."""


# ---------------------------------------------------------------------------
# Configuration
# ---------------------------------------------------------------------------

_OPTIMIZER_KEYS = {"name", "lr", "schedule", "max_grad_norm", "alpha"}
_THEORY_KEYS = {"R", "B", "D", "d", "eps", "delta", "alpha", "grid_step", "max_iter", "x0", "y0", "m_override"}
_FLAG_KEYS = {"reuse_eval_rollouts", "theory_mode"}
_TOP_KEYS = {
    "version", "game", "method", "mode", "n", "N", "l", "m_k", "m_eval", "optimizer", "gamma", "lam",
    "entropy_coef", "T", "env", "seed", "output_dir", "threads", "max_episodes_per_agent", "init",
    "init_points", "flags", "theory",
}


@dataclass
class ExperimentConfig:
    train: TrainConfig
    output_dir: str | None
    theory_mode: bool = False
    theory: TheoryConfig | None = None
    theory_options: dict = field(default_factory=dict)
    raw: dict = field(default_factory=dict)


def _line_index(text: str) -> dict[tuple[str, ...], int]:
    """1-based source line of every mapping key, keyed by its path."""
    out: dict[tuple[str, ...], int] = {}

    def walk(node, path):
        if isinstance(node, yaml.MappingNode):
            for k, v in node.value:
                p = path + (str(k.value),)
                out[p] = k.start_mark.line + 1
                walk(v, p)

    try:
        walk(yaml.compose(text), ())
    except yaml.YAMLError:
        pass
    return out


def load_config(path: str | os.PathLike, seed: int | None = None, output: str | None = None,
                threads: int | None = None) -> ExperimentConfig:
    """Parse and validate an experiment config; raise ConfigError on any problem."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigError(f"{path}: cannot read config: {e.strerror}") from None
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as e:
        mark = getattr(e, "problem_mark", None)
        where = f":{mark.line + 1}" if mark else ""
        raise ConfigError(f"{path}{where}: malformed config: {getattr(e, 'problem', e)}") from None
    lines = _line_index(text)

    def fail(key_path, msg):
        ln = lines.get(tuple(key_path))
        where = f"{path}:{ln}" if ln else str(path)
        raise ConfigError(f"{where}: field '{'.'.join(key_path)}': {msg}")

    if not isinstance(raw, dict):
        raise ConfigError(f"{path}:1: config must be a mapping of fields")
    if "version" not in raw:
        raise ConfigError(f"{path}: field 'version': required")
    if raw["version"] != CONFIG_VERSION:
        fail(["version"], f"unsupported version {raw['version']!r} (expected {CONFIG_VERSION})")
    for k in raw:
        if k not in _TOP_KEYS:
            fail([k], "unknown field")

    def get(key, kind, default, sub=None):
        container = raw if sub is None else (raw.get(sub) or {})
        kp = [key] if sub is None else [sub, key]
        v = container.get(key, default)
        if v is None:
            return v
        if kind is float and isinstance(v, int) and not isinstance(v, bool):
            v = float(v)
        if kind is int and isinstance(v, bool) or not isinstance(v, kind):
            fail(kp, f"expected {getattr(kind, '__name__', kind)}, got {v!r}")
        return v

    game = get("game", str, None)
    if game is None:
        raise ConfigError(f"{path}: field 'game': required")
    if game not in ENV_IDS:
        fail(["game"], f"unknown game id {game!r}; choose from {', '.join(ENV_IDS)}")
    method = get("method", str, "ours")
    if method not in METHODS:
        fail(["method"], f"must be one of {', '.join(METHODS)}")
    mode = get("mode", str, "exact_grad")
    if mode not in MODES:
        fail(["mode"], f"must be one of {', '.join(MODES)}")
    is_matrix = game != "soccer"
    if mode == "exact_grad" and not is_matrix:
        fail(["mode"], "exact_grad is only valid for matrix games")

    for sub, allowed in (("optimizer", _OPTIMIZER_KEYS), ("flags", _FLAG_KEYS), ("theory", _THEORY_KEYS)):
        block = raw.get(sub)
        if block is None:
            continue
        if not isinstance(block, dict):
            fail([sub], "expected a mapping")
        for k in block:
            if k not in allowed:
                fail([sub, k], "unknown field")

    ints = {}
    for key, default in (("n", 4 if method == "ours" else 1), ("N", 100), ("l", 1), ("m_k", 1024), ("seed", 0),
                         ("threads", 0)):
        v = get(key, int, default)
        if key not in ("seed", "threads") and v < 1:
            fail([key], "must be a positive integer")
        if key == "threads" and v < 0:
            fail([key], "must be >= 0 (0 uses every core)")
        ints[key] = v
    m_eval = get("m_eval", int, None)
    if m_eval is not None and m_eval < 1:
        fail(["m_eval"], "must be a positive integer")
    budget = get("max_episodes_per_agent", int, None)
    if budget is not None and budget < 1:
        fail(["max_episodes_per_agent"], "must be a positive integer")
    if method != "ours" and ints["n"] != 1:
        fail(["n"], f"baseline {method!r} trains a single pair; n must be 1")

    opt_name = get("name", str, "sgd", "optimizer")
    if opt_name not in ("sgd", "rmsprop"):
        fail(["optimizer", "name"], "must be 'sgd' or 'rmsprop'")
    lr = get("lr", float, 0.03, "optimizer")
    if lr <= 0:
        fail(["optimizer", "lr"], "must be positive")
    schedule = get("schedule", str, "constant", "optimizer")
    if schedule not in ("constant", "linear_to_zero"):
        fail(["optimizer", "schedule"], "must be 'constant' or 'linear_to_zero'")
    clip = get("max_grad_norm", float, None, "optimizer")
    if clip is not None and clip <= 0:
        fail(["optimizer", "max_grad_norm"], "must be positive")
    rms_alpha = get("alpha", float, 0.99, "optimizer")
    if not 0 < rms_alpha < 1:
        fail(["optimizer", "alpha"], "must lie in (0, 1)")

    gamma = get("gamma", float, 1.0)
    if not 0 < gamma <= 1:
        fail(["gamma"], "must lie in (0, 1]")
    lam = get("lam", float, 0.95)
    if not 0 <= lam <= 1:
        fail(["lam"], "must lie in [0, 1]")
    entropy_coef = get("entropy_coef", float, 0.0)
    if entropy_coef < 0:
        fail(["entropy_coef"], "must be non-negative")

    env_options = dict(get("env", dict, {}) or {})
    T = get("T", int, None)
    if T is not None:
        if is_matrix:
            fail(["T"], "a time limit only applies to soccer")
        if T < 1:
            fail(["T"], "must be a positive integer")
        env_options["time_limit"] = T
    try:
        make_env(game, **env_options)
    except (TypeError, ValueError, KeyError) as e:
        fail(["env"], str(e))

    init = get("init", str, "dirichlet")
    if init not in ("dirichlet", "uniform", "points"):
        fail(["init"], "must be 'dirichlet', 'uniform' or 'points'")
    init_points = raw.get("init_points")
    if init == "points" and (not isinstance(init_points, list) or len(init_points) != ints["n"]):
        fail(["init_points"] if "init_points" in raw else ["init"], "init 'points' needs one [x, y] pair per agent")

    reuse = get("reuse_eval_rollouts", bool, False, "flags")
    if reuse:
        fail(["flags", "reuse_eval_rollouts"], "reusing evaluation rollouts for updates is not supported")
    theory_mode = get("theory_mode", bool, False, "flags")

    if threads is None:
        threads = ints["threads"] or (os.cpu_count() or 1)
    elif threads < 1:
        raise ConfigError("--threads must be positive")

    try:
        cfg = TrainConfig(
            game=game, method=method, mode=mode, n=ints["n"], N=ints["N"], l=ints["l"], m_k=ints["m_k"],
            m_eval=m_eval, optimizer=opt_name, lr=lr, lr_schedule=schedule, max_grad_norm=clip,
            rms_alpha=rms_alpha, gamma=gamma, lam=lam, entropy_coef=entropy_coef, env_options=env_options,
            seed=ints["seed"] if seed is None else seed, threads=threads,
            max_episodes_per_agent=budget, init=init, init_points=init_points, keep_checkpoints=False,
        )
    except (TypeError, ValueError) as e:
        raise ConfigError(f"{path}: {e}") from None

    theory = None
    theory_options = {}
    if theory_mode:
        if not is_matrix:
            fail(["flags", "theory_mode"], "theory mode needs a matrix game")
        block = dict(raw.get("theory") or {})
        theory_options = {k: block.pop(k) for k in ("grid_step", "max_iter", "x0", "y0", "m_override") if k in block}
        try:
            theory = TheoryConfig(**block)
        except (TypeError, ValueError) as e:
            fail(["theory"], str(e))
    out = output if output is not None else get("output_dir", str, None)
    return ExperimentConfig(cfg, out, theory_mode, theory, theory_options, raw)


# ---------------------------------------------------------------------------
# Artifacts
# ---------------------------------------------------------------------------


def git_blob_sha1(data: bytes) -> str:
    """Content hash in git's blob format."""
    return hashlib.sha1(b"blob %d\0" % len(data) + data).hexdigest()


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (float, np.floating)):
        return "nan" if math.isnan(v) else repr(float(v))
    return str(v)


class CsvStream:
    """Append-only CSV with a fixed header, flushed after every batch of rows."""

    def __init__(self, path: Path, header):
        self.path = path
        self.fh = open(path, "w", encoding="utf-8", newline="")
        self.writer = csv.writer(self.fh, lineterminator="\n")
        self.writer.writerow(header)

    def rows(self, rows):
        for r in rows:
            self.writer.writerow([_fmt(v) for v in r])
        self.fh.flush()

    def close(self):
        self.fh.close()


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True, allow_nan=True) + "\n", encoding="utf-8")


def _manifest(exp_path: str, exp: ExperimentConfig, out: Path, status: str, error: str | None = None) -> dict:
    data = Path(exp_path).read_bytes()
    artifacts = {}
    for p in sorted(out.rglob("*")):
        if p.is_file() and p.name != "manifest.json":
            artifacts[p.relative_to(out).as_posix()] = git_blob_sha1(p.read_bytes())
    m = {
        "status": status,
        "config": exp.raw,
        "config_hash": git_blob_sha1(data),
        "seed": exp.train.seed,
        "artifacts": artifacts,
    }
    if error is not None:
        m["error"] = error
    return m


def run_train(exp: ExperimentConfig, config_path: str) -> int:
    if exp.output_dir is None:
        raise ConfigError(f"{config_path}: field 'output_dir': required (or pass --output)")
    out = Path(exp.output_dir)
    ckdir = out / "checkpoints"
    ckdir.mkdir(parents=True, exist_ok=True)
    cfg = exp.train
    try:
        if exp.theory_mode:
            _run_theory(exp, out)
        else:
            _run_selfplay(cfg, out, ckdir)
    except Exception as e:  # noqa: BLE001 - any failure must leave an error manifest
        log.error("run failed: %s", e)
        _write_json(out / "manifest.json", _manifest(config_path, exp, out, "error", f"{type(e).__name__}: {e}"))
        return EXIT_RUNTIME
    _write_json(out / "manifest.json", _manifest(config_path, exp, out, "ok"))
    return EXIT_OK


def _run_selfplay(cfg: TrainConfig, out: Path, ckdir: Path) -> None:
    env = cfg.make_env()
    metrics = CsvStream(out / "metrics.csv", IterationMetrics.FIELDS)
    phase = None
    if isinstance(env, MatrixGame):
        rows, cols = env.shape
        phase = CsvStream(out / "phase.csv", ["k", "agent"] + [f"P_x_{a}" for a in range(rows)]
                          + [f"P_y_{b}" for b in range(cols)])
    written = [0]

    def callback(k, agents, rows):
        metrics.rows([[getattr(m, f) for f in IterationMetrics.FIELDS] for m in rows[written[0]:]])
        written[0] = len(rows)
        if phase is not None:
            phase.rows([[k, i, *a.x.p, *a.y.p] for i, a in enumerate(agents)])
        for i, a in enumerate(agents):
            parts = {"x": a.x, "y": a.y}
            if a.vx is not None:
                parts.update(vx=a.vx, vy=a.vy)
            meta = {"env_id": cfg.game, "env_options": cfg.env_options, "method": cfg.method, "k": k, "agent": i,
                    "seed": cfg.seed}
            save_checkpoint(ckdir / f"k{k:04d}_a{i}.ckpt", parts, meta)
        log.info("iteration %d", k)

    try:
        train(cfg, callback)
    finally:
        metrics.close()
        if phase is not None:
            phase.close()


def _run_theory(exp: ExperimentConfig, out: Path) -> None:
    cfg = exp.train
    game = cfg.make_env()
    opts = exp.theory_options
    step = float(opts.get("grid_step", 0.05))
    rows, cols = game.shape
    rng = rng_stream(cfg.seed, 0, 0)
    x0 = np.asarray(opts["x0"], dtype=float) if "x0" in opts else rng.dirichlet(np.ones(rows))
    y0 = np.asarray(opts["y0"], dtype=float) if "y0" in opts else rng.dirichlet(np.ones(cols))
    x, y, records, stopped = train_single_theory(
        game, exp.theory, x0, y0, simplex_grid(rows, step), simplex_grid(cols, step), mode=cfg.mode,
        max_iter=int(opts.get("max_iter", 10_000)), seed=cfg.seed, m_override=opts.get("m_override"),
    )
    stream = CsvStream(out / "metrics.csv", ["k", "E_hat", "u_index", "v_index", "eta", "m_k", "f_xy", "f_xv", "f_uy"])
    stream.rows([[r.k, r.E_hat, r.u_index, r.v_index, r.eta, r.m_k, r.f_xy, r.f_xv, r.f_uy] for r in records])
    stream.close()
    phase = CsvStream(out / "phase.csv", ["k", "agent"] + [f"P_x_{a}" for a in range(rows)]
                      + [f"P_y_{b}" for b in range(cols)])
    phase.rows([[r.k, 0, *r.x, *r.y] for r in records])
    phase.close()
    save_checkpoint(out / "checkpoints" / "final_a0.ckpt", {"x": SimplexPolicy(x), "y": SimplexPolicy(y)},
                    {"env_id": cfg.game, "env_options": cfg.env_options, "method": "theory", "stopped": stopped,
                     "k": len(records) - 1, "agent": 0, "seed": cfg.seed})
    if not stopped:
        raise RuntimeError(f"stop test not met within {len(records)} iterations")


# ---------------------------------------------------------------------------
# Tournament, Elo, Nash, curves
# ---------------------------------------------------------------------------


def _agent_id(path: Path) -> str:
    run = path.parent.parent.name if path.parent.name == "checkpoints" else path.parent.name
    return f"{run}/{path.stem}"


def load_agents(pattern: str, reference_agents: bool = False) -> tuple[list[Agent], str, dict]:
    paths = sorted(Path(p) for p in glob.glob(pattern, recursive=True))
    if not paths:
        raise FileNotFoundError(f"no checkpoints match {pattern!r}")
    agents, env_keys = [], set()
    env_id, env_options = None, {}
    for p in paths:
        parts, meta = load_checkpoint(p)
        if "x" not in parts or "y" not in parts or "env_id" not in meta:
            raise ValueError(f"{p}: checkpoint lacks x/y policies or env metadata")
        env_id, env_options = meta["env_id"], meta.get("env_options", {})
        env_keys.add(json.dumps([env_id, env_options], sort_keys=True))
        agents.append(Agent(_agent_id(p), parts["x"], parts["y"], env_id))
    if len(env_keys) > 1:
        raise ValueError(f"checkpoints come from different environments: {sorted(env_keys)}")
    if len({a.id for a in agents}) != len(agents):
        raise ValueError("checkpoint ids collide; give runs distinct directory names")
    if reference_agents:
        if env_id != "soccer":
            raise ValueError("reference agents exist only for soccer")
        agents += [Agent("rule", RulePolicy("A"), RulePolicy("B"), env_id),
                   Agent("random", UniformPolicy(), UniformPolicy(), env_id)]
    return agents, env_id, env_options


def run_tournament_cmd(pattern: str, matches: int, seed: int, output: str, threads: int = 1,
                       reference_agents: bool = False, gamma: float = 1.0) -> list[MatchRecord]:
    agents, env_id, env_options = load_agents(pattern, reference_agents)
    env = make_env(env_id, **env_options)
    results = run_tournament(agents, env, matches, lambda i, j, s: rng_stream(seed, _TOURNAMENT_STREAM, i, j, s),
                             gamma=gamma, threads=threads)
    Path(output).parent.mkdir(parents=True, exist_ok=True)
    _write_json(Path(output), [r.to_dict() for r in results])
    return results


def read_results(path: str) -> list[MatchRecord]:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise ValueError(f"{path}: not JSON ({e.msg} at line {e.lineno})") from None
    if not isinstance(data, list):
        raise ValueError(f"{path}: expected a JSON array of match records")
    out = []
    for n, rec in enumerate(data):
        try:
            out.append(MatchRecord(**rec))
        except TypeError as e:
            raise ValueError(f"{path}: record {n} does not match the MatchResults schema: {e}") from None
    return out


def run_elo_cmd(results_path: str, anchor: str, output: str, prior_draws: float = 0.0) -> dict:
    results = read_results(results_path)
    if not results:
        raise ValueError(f"{results_path}: no match records; refusing to produce a rating table")
    table = fit_elo(results, anchor, prior_draws=prior_draws)
    out = table.to_dict()
    Path(output).parent.mkdir(parents=True, exist_ok=True)
    _write_json(Path(output), out)
    return out


def run_nash_cmd(game_id: str) -> str:
    game = make_env(game_id)
    if not isinstance(game, MatrixGame):
        raise ConfigError(f"nash: {game_id!r} is not a matrix game")
    sol = nash_oracle(game)
    x, y = sol.as_arrays()
    return (f"game {game_id}\n"
            f"x = ({', '.join(f'{v:.6g}' for v in x)})\n"
            f"y = ({', '.join(f'{v:.6g}' for v in y)})\n"
            f"value (Player 1) = {float(sol.player1_value):.6g}\n"
            f"value (Player 2) = {float(sol.value):.6g}\n")


CURVE_FIELDS = ("k", "episodes_per_agent", "n_values", "distance_mean", "distance_ci95", "E_hat_mean",
                "self_selected_rate")


def export_curves(run_dirs: list[str], output: str) -> list[list]:
    """Aggregate metrics.csv files into one row per iteration (mean and normal 95% half-width)."""
    by_k: dict[int, dict[str, list]] = {}
    for d in run_dirs:
        path = Path(d) / "metrics.csv"
        with open(path, encoding="utf-8", newline="") as fh:
            reader = csv.DictReader(fh)
            missing = set(IterationMetrics.FIELDS) - set(reader.fieldnames or [])
            if missing:
                raise ValueError(f"{path}: missing columns {sorted(missing)}")
            for row in reader:
                b = by_k.setdefault(int(row["k"]), {"ep": [], "dist": [], "E": [], "self": []})
                b["ep"].append(int(row["episodes_per_agent"]))
                b["dist"].append(float(row["distance_to_nash"]))
                b["E"].append(float(row["E_hat"]))
                b["self"].extend([int(row["self_selected_x"]), int(row["self_selected_y"])])
    rows = []
    for k in sorted(by_k):
        b = by_k[k]
        dist = np.array(b["dist"])
        ci = 1.96 * dist.std(ddof=1) / math.sqrt(dist.size) if dist.size > 1 else 0.0
        rows.append([k, int(np.mean(b["ep"])), dist.size, float(dist.mean()), float(ci), float(np.mean(b["E"])),
                     float(np.mean(b["self"]))])
    stream = CsvStream(Path(output), CURVE_FIELDS)
    stream.rows(rows)
    stream.close()
    return rows


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="saddleplay", description="Perturbation-based self-play experiments.")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    t = sub.add_parser("train", help="run one experiment from a config file")
    t.add_argument("--config", required=True)
    t.add_argument("--seed", type=int)
    t.add_argument("--output")
    t.add_argument("--threads", type=int)

    tr = sub.add_parser("tournament", help="round robin among checkpoints")
    tr.add_argument("checkpoints", help="glob of checkpoint files (quote it)")
    tr.add_argument("--matches", type=int, default=32, help="matches per pair")
    tr.add_argument("--seed", type=int, default=0)
    tr.add_argument("--output", default="results.json")
    tr.add_argument("--threads", type=int, default=1)
    tr.add_argument("--reference-agents", action="store_true", help="add the scripted and random soccer players")
    tr.add_argument("--gamma", type=float, default=1.0)

    e = sub.add_parser("elo", help="fit Elo ratings to tournament results")
    e.add_argument("results")
    e.add_argument("--anchor", required=True, help="agent id whose rating is fixed at 0")
    e.add_argument("--output", default="elo.json")
    e.add_argument("--prior-draws", type=float, default=0.0,
                   help="virtual draws added to every pairing, keeping ratings finite")

    nsh = sub.add_parser("nash", help="print the exact equilibrium of a matrix game")
    nsh.add_argument("game")

    c = sub.add_parser("export-curves", help="aggregate metrics.csv files into curve data")
    c.add_argument("runs", nargs="+", help="run output directories")
    c.add_argument("--output", default="curves.csv")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        if args.command == "train":
            exp = load_config(args.config, seed=args.seed, output=args.output, threads=args.threads)
            return run_train(exp, args.config)
        if args.command == "nash":
            sys.stdout.write(run_nash_cmd(args.game))
            return EXIT_OK
        if args.command == "tournament":
            if args.matches < 1:
                raise ConfigError("--matches must be positive")
            run_tournament_cmd(args.checkpoints, args.matches, args.seed, args.output, args.threads,
                               args.reference_agents, args.gamma)
            return EXIT_OK
        if args.command == "elo":
            run_elo_cmd(args.results, args.anchor, args.output, args.prior_draws)
            return EXIT_OK
        if args.command == "export-curves":
            export_curves(args.runs, args.output)
            return EXIT_OK
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except KeyError as e:
        print(f"config error: {e.args[0] if e.args else e}", file=sys.stderr)
        return EXIT_CONFIG
    except (OSError, ValueError, RuntimeError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
