"""Experiment protocols: config resolution, training runs, sweeps, breakdowns.

Every run is fully determined by (resolved config, seed); result CSVs embed
a hash of the resolved config so identical configurations reproduce
byte-identical files.
"""

from __future__ import annotations

import csv
import hashlib
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, fields, replace

import numpy as np

from . import labeling, metrics, policies, qlearn
from .cohort import (CohortDataset, generate_synthetic_cohort, load_cohort_csv,
                     save_cohort_csv, split_train_test)
from .env import SensingEnv
from .reward import RewardParams, mlac_cost

logger = logging.getLogger(__name__)

DEFAULT_POLICIES = ("random:0.3", "random:0.5", "random:0.7", "random:0.9",
                    "nos", "bans", "ans", "lr")


@dataclass(frozen=True)
class ExperimentConfig:
    # cohort source: a CSV path wins over the synthetic spec
    cohort_csv: str | None = None
    synthetic_n: int = 1600
    synthetic_seed: int = 11
    horizon: int = 4
    test_fraction: float = 0.25
    split_seed: int = 0
    # reward (monetary values pre-scaled by 1e-3)
    lam: float = 0.5
    c: float = 2.0
    kappa: float = 0.7
    alpha: float = 0.5
    beta_fraction_of_c: float = 0.3
    gamma: float = 1.0
    allow_boundary: bool = False
    # training
    epochs: int = 1000
    train_interval: int = 50
    batch_size: int = 256
    learning_rate: float = 5e-4
    epsilon_init: float = 1.0
    epsilon_decay: float = 5e-3
    target_sync_period: int = 100
    hidden_width: int = 64
    epsilon_convention: str = "intent"
    eval_period: int = 1
    # evaluation
    policies: tuple[str, ...] = DEFAULT_POLICIES
    lr_l2: tuple[float, ...] = (1e-3,)
    # sweep grids
    alpha_grid: tuple[float, ...] = (0.25, 0.5, 0.75, 1.0)
    beta_fraction_grid: tuple[float, ...] = (0.1, 0.3, 0.5, 0.7)
    lambda_grid: tuple[float, ...] = (0.0, 0.25, 0.5, 0.75, 1.0, 1.5, 2.0)
    c_grid: tuple[float, ...] = (0.5, 1.0, 1.5, 2.0)
    # run
    level: str = "patient"
    feature_mode: str = "full"
    seeds: tuple[int, ...] = (0,)
    out: str = "results"
    jobs: int = 1


_LIST_KEYS = {"policies", "lr_l2", "alpha_grid", "beta_fraction_grid",
              "lambda_grid", "c_grid", "seeds"}
_KEY_ALIASES = {"lambda": "lam"}
# keys that do not influence results, excluded from the config hash
_NON_SEMANTIC_KEYS = {"out", "jobs"}


def _field_types() -> dict[str, type]:
    types = {}
    for f in fields(ExperimentConfig):
        types[f.name] = f.type
    return types


def _coerce(key: str, raw: str):
    """Parse one config value from its key=value text form."""
    if key == "cohort_csv":
        return raw or None
    if key in ("level", "feature_mode", "epsilon_convention", "out"):
        return raw
    if key == "allow_boundary":
        return raw.strip().lower() in ("1", "true", "yes")
    if key == "policies":
        return tuple(tok.strip() for tok in raw.split(",") if tok.strip())
    if key == "seeds":
        return tuple(int(tok) for tok in raw.split(",") if tok.strip())
    if key in _LIST_KEYS:
        return tuple(float(tok) for tok in raw.split(",") if tok.strip())
    if key in ("synthetic_n", "synthetic_seed", "horizon", "split_seed", "epochs",
               "train_interval", "batch_size", "target_sync_period", "hidden_width",
               "eval_period", "jobs"):
        return int(raw)
    return float(raw)


def parse_config_file(path) -> dict:
    """Flat key=value config file; '#' starts a comment, blank lines ignored."""
    values = {}
    known = {f.name for f in fields(ExperimentConfig)}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected key=value, got {line!r}")
            key, raw = (tok.strip() for tok in line.split("=", 1))
            key = _KEY_ALIASES.get(key, key)
            if key not in known:
                raise ValueError(f"{path}:{lineno}: unknown config key {key!r}")
            values[key] = _coerce(key, raw)
    return values


def resolve_config(file_values: dict | None = None, overrides: dict | None = None
                   ) -> ExperimentConfig:
    """Defaults, overridden by config-file values, overridden by CLI values."""
    merged: dict = {}
    merged.update(file_values or {})
    merged.update({k: v for k, v in (overrides or {}).items() if v is not None})
    tkr = merged.pop("tkr_cost_dollars", None)
    jsw = merged.pop("mean_healthy_jsw_mm", None)
    visit = merged.pop("visit_cost_dollars", None)
    cfg = ExperimentConfig(**merged)
    if tkr is not None:
        cfg = replace(cfg, c=mlac_cost(tkr, jsw if jsw is not None else 5.0) / 1000.0)
    if visit is not None:
        cfg = replace(cfg, lam=visit / 1000.0)
    return cfg


def config_hash(cfg: ExperimentConfig) -> str:
    lines = []
    for key, value in sorted(asdict(cfg).items()):
        if key in _NON_SEMANTIC_KEYS:
            continue
        if isinstance(value, tuple):
            value = ",".join(repr(v) for v in value)
        lines.append(f"{key}={value!r}")
    return hashlib.sha256("\n".join(lines).encode()).hexdigest()[:12]


def reward_params_from(cfg: ExperimentConfig, *, lam=None, c=None, alpha=None,
                       beta_fraction=None) -> RewardParams:
    lam = cfg.lam if lam is None else lam
    c = cfg.c if c is None else c
    alpha = cfg.alpha if alpha is None else alpha
    frac = cfg.beta_fraction_of_c if beta_fraction is None else beta_fraction
    return RewardParams(lam=lam, c=c, kappa=cfg.kappa, alpha=alpha, beta=frac * c,
                        horizon=cfg.horizon, gamma=cfg.gamma,
                        allow_boundary=cfg.allow_boundary)


def train_config_from(cfg: ExperimentConfig, seed: int) -> qlearn.TrainConfig:
    return qlearn.TrainConfig(
        epochs=cfg.epochs, train_interval=cfg.train_interval, batch_size=cfg.batch_size,
        learning_rate=cfg.learning_rate, epsilon_init=cfg.epsilon_init,
        epsilon_decay=cfg.epsilon_decay, gamma=cfg.gamma,
        target_sync_period=cfg.target_sync_period, hidden_width=cfg.hidden_width,
        seed=seed, epsilon_convention=cfg.epsilon_convention, eval_period=cfg.eval_period,
    )


def resolve_cohort(cfg: ExperimentConfig) -> CohortDataset:
    if cfg.cohort_csv:
        return load_cohort_csv(cfg.cohort_csv, cfg.horizon)
    return generate_synthetic_cohort(cfg.synthetic_n, cfg.horizon, cfg.synthetic_seed)


def resolve_datasets(cfg: ExperimentConfig) -> tuple[CohortDataset, CohortDataset]:
    return split_train_test(resolve_cohort(cfg), cfg.test_fraction, cfg.split_seed)


# ---------------------------------------------------------------------------
# Output helpers
# ---------------------------------------------------------------------------

def _require_writable(path, force: bool) -> None:
    if os.path.exists(path) and not force:
        raise FileExistsError(f"{path} exists; pass --force to overwrite")


def write_csv(path, header: list[str], rows: list[list], cfg: ExperimentConfig) -> None:
    """CSV with a leading comment embedding the config hash and seed list."""
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(f"# config_hash={config_hash(cfg)} seeds={','.join(map(str, cfg.seeds))}\n")
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def read_result_csv(path) -> tuple[str, list[dict]]:
    """Read back a result CSV; returns (comment line, rows as dicts)."""
    with open(path, newline="", encoding="utf-8") as fh:
        comment = fh.readline().rstrip("\n")
        reader = csv.DictReader(fh)
        return comment, list(reader)


def _se(values) -> float:
    values = np.asarray(values, dtype=float)
    if values.size <= 1:
        return 0.0
    return float(values.std(ddof=1) / math.sqrt(values.size))


def _policy_seed(run_seed: int, policy_index: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(entropy=(run_seed, policy_index))


# ---------------------------------------------------------------------------
# Policy roster
# ---------------------------------------------------------------------------

def build_policy(spec: str, cfg: ExperimentConfig, seed: int, policy_index: int,
                 train_ds: CohortDataset, train_labels) -> tuple[object, bool]:
    """Instantiate one roster policy; returns (policy, is_stochastic)."""
    if spec in policies.ROUTINE_KINDS:
        return policies.routine_policy(spec), False
    if spec.startswith("random:"):
        p = float(spec.split(":", 1)[1])
        return policies.RandomPolicy(p, _policy_seed(seed, policy_index)), True
    if spec == "lr":
        return policies.fit_logistic(train_ds, train_labels, feature_mode=cfg.feature_mode,
                                     level=cfg.level, l2_grid=cfg.lr_l2), False
    raise ValueError(f"unknown policy spec {spec!r}")


def evaluate_policy(policy, env: SensingEnv, dataset: CohortDataset, labels
                    ) -> metrics.MetricReport:
    traces = env.rollout_all(dataset, labels, policy)
    return metrics.build_report(traces, env.params.lam)


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

def cmd_generate(cfg: ExperimentConfig, force: bool = False) -> str:
    """Write the synthetic cohort CSV for the configured spec."""
    path = os.path.join(cfg.out, "cohort.csv")
    _require_writable(path, force)
    os.makedirs(cfg.out, exist_ok=True)
    dataset = generate_synthetic_cohort(cfg.synthetic_n, cfg.horizon, cfg.synthetic_seed)
    save_cohort_csv(dataset, path)
    logger.info("wrote %d subjects (%d rows) to %s", len(dataset),
                len(dataset) * (cfg.horizon + 1), path)
    return path


def checkpoint_path(out: str, seed: int, level: str = "patient") -> str:
    suffix = "" if level == "patient" else f"_{level}"
    return os.path.join(out, f"checkpoint{suffix}_seed{seed}.json")


def curve_path(out: str, seed: int) -> str:
    return os.path.join(out, f"curve_seed{seed}.csv")


def _train_one(train_ds, train_labels, test_ds, test_labels, params, tc,
               level: str, feature_mode: str):
    return qlearn.train(train_ds, train_labels, params, tc, level=level,
                        feature_mode=feature_mode, eval_dataset=test_ds,
                        eval_labels=test_labels)


def cmd_train(cfg: ExperimentConfig, force: bool = False, resume: bool = False) -> list[str]:
    """One checkpoint and one learning-curve CSV per seed."""
    if resume:
        raise ValueError("training resumption is not supported; rerun from scratch")
    params = reward_params_from(cfg)
    train_ds, test_ds = resolve_datasets(cfg)
    train_labels = labeling.label_cohort(train_ds, params.kappa, cfg.level)
    test_labels = labeling.label_cohort(test_ds, params.kappa, cfg.level)
    written = []
    for seed in cfg.seeds:
        ckpt = checkpoint_path(cfg.out, seed)
        _require_writable(ckpt, force)
        os.makedirs(cfg.out, exist_ok=True)
        tc = train_config_from(cfg, seed)
        net, curve = _train_one(train_ds, train_labels, test_ds, test_labels,
                                params, tc, cfg.level, cfg.feature_mode)
        qlearn.save_checkpoint(ckpt, "q_network", qlearn.net_to_payload(net),
                               level=cfg.level, feature_mode=cfg.feature_mode,
                               cfg=tc, params=params, seed=seed, epochs_trained=cfg.epochs)
        rows = [[r["epoch"], repr(r["epsilon"]), repr(r["train_rpp"]), repr(r["eval_rpp"])]
                for r in curve]
        write_csv(curve_path(cfg.out, seed), ["epoch", "epsilon", "train_rpp", "eval_rpp"],
                  rows, cfg)
        written.extend([ckpt, curve_path(cfg.out, seed)])
        logger.info("seed %d: trained %d epochs -> %s", seed, cfg.epochs, ckpt)
    return written


def _load_greedy(ckpt_file: str):
    doc = qlearn.load_checkpoint(ckpt_file)
    if doc["kind"] != "q_network":
        raise ValueError(f"{ckpt_file}: expected a q_network checkpoint, got {doc['kind']!r}")
    return policies.GreedyQPolicy(qlearn.net_from_payload(doc["payload"])), doc


def cmd_evaluate(cfg: ExperimentConfig, checkpoints: list[str] | None = None,
                 per_year: bool = False) -> list[str]:
    """Metric table over the policy roster plus the trained greedy policies."""
    params = reward_params_from(cfg)
    train_ds, test_ds = resolve_datasets(cfg)
    train_labels = labeling.label_cohort(train_ds, params.kappa, cfg.level)
    test_labels = labeling.label_cohort(test_ds, params.kappa, cfg.level)
    env = SensingEnv.for_dataset(test_ds, params, cfg.level, cfg.feature_mode)
    if checkpoints is None:
        candidates = [checkpoint_path(cfg.out, s) for s in cfg.seeds]
        checkpoints = [p for p in candidates if os.path.exists(p)]

    n_rows = len(cfg.policies) + (1 if checkpoints else 0)
    print(f"run matrix: {n_rows} policy rows")

    summary_rows, year_rows = [], []

    def add_rows(name: str, reports: list[metrics.MetricReport]):
        mean_or = lambda vals: vals[0] if len(set(map(repr, vals))) == 1 else float(np.mean(vals))
        rpps = [r.rpp for r in reports]
        costs = [r.acquisition_cost for r in reports]
        bas = [r.avg_ba for r in reports]
        recalls = [r.avg_recall for r in reports]
        summary_rows.append([
            name,
            repr(mean_or(rpps)), repr(_se(rpps)),
            repr(mean_or(costs)), repr(_se(costs)),
            repr(mean_or(bas)), repr(_se(bas)),
            repr(mean_or(recalls)), repr(_se(recalls)),
            len(reports),
        ])
        if per_year:
            for year in range(params.horizon):
                ba_y = [r.ba_per_year[year] for r in reports]
                rec_y = [r.recall_per_year[year] for r in reports]
                year_rows.append([
                    name, year + 1,
                    repr(float(np.nanmean(ba_y))), repr(_se(ba_y)),
                    repr(float(np.nanmean(rec_y))), repr(_se(rec_y)),
                ])

    for i, spec in enumerate(cfg.policies):
        reports = []
        if spec.startswith("random:"):
            for seed in cfg.seeds:
                policy, _ = build_policy(spec, cfg, seed, i, train_ds, train_labels)
                reports.append(evaluate_policy(policy, env, test_ds, test_labels))
        else:
            policy, _ = build_policy(spec, cfg, cfg.seeds[0], i, train_ds, train_labels)
            reports.append(evaluate_policy(policy, env, test_ds, test_labels))
        name = getattr(policy, "name", spec)
        add_rows(name, reports)

    if checkpoints:
        reports = []
        for ckpt_file in checkpoints:
            policy, _ = _load_greedy(ckpt_file)
            reports.append(evaluate_policy(policy, env, test_ds, test_labels))
        add_rows("rl", reports)

    header = ["policy", "rpp_mean", "rpp_se", "cost_mean", "cost_se",
              "ba_mean", "ba_se", "recall_mean", "recall_se", "n_runs"]
    out_path = os.path.join(cfg.out, "evaluation.csv")
    write_csv(out_path, header, summary_rows, cfg)
    written = [out_path]
    if per_year:
        year_path = os.path.join(cfg.out, "evaluation_per_year.csv")
        write_csv(year_path, ["policy", "year", "ba_mean", "ba_se",
                              "recall_mean", "recall_se"], year_rows, cfg)
        written.append(year_path)
    return written


# ---------------------------------------------------------------------------
# Sweeps
# ---------------------------------------------------------------------------

def _train_and_report(cfg_dict: dict, lam: float, c: float, alpha: float,
                      beta_fraction: float, seed: int) -> dict:
    """One (cell, seed) run: retrain with the cell's reward and evaluate."""
    cfg = ExperimentConfig(**cfg_dict)
    params = reward_params_from(cfg, lam=lam, c=c, alpha=alpha, beta_fraction=beta_fraction)
    train_ds, test_ds = resolve_datasets(cfg)
    train_labels = labeling.label_cohort(train_ds, params.kappa, cfg.level)
    test_labels = labeling.label_cohort(test_ds, params.kappa, cfg.level)
    tc = train_config_from(cfg, seed)
    net, _ = _train_one(train_ds, train_labels, test_ds, test_labels, params, tc,
                        cfg.level, cfg.feature_mode)
    env = SensingEnv.for_dataset(test_ds, params, cfg.level, cfg.feature_mode)
    report = evaluate_policy(policies.GreedyQPolicy(net), env, test_ds, test_labels)
    return {"rpp": report.rpp, "cost": report.acquisition_cost,
            "ba": report.avg_ba, "recall": report.avg_recall}


def _run_cells(cfg: ExperimentConfig, cells: list[dict]) -> list[list[dict]]:
    """Run (cell, seed) jobs, optionally in a worker pool; order-independent."""
    jobs = [(asdict(cfg), cell["lam"], cell["c"], cell["alpha"],
             cell["beta_fraction"], seed)
            for cell in cells for seed in cfg.seeds]
    if cfg.jobs > 1:
        with ProcessPoolExecutor(max_workers=cfg.jobs) as pool:
            flat = list(pool.map(_train_and_report_star, jobs))
    else:
        flat = [_train_and_report_star(job) for job in jobs]
    per_cell = []
    k = len(cfg.seeds)
    for i in range(len(cells)):
        per_cell.append(flat[i * k:(i + 1) * k])
    return per_cell


def _train_and_report_star(job) -> dict:
    return _train_and_report(*job)


def cmd_sweep(cfg: ExperimentConfig, kind: str) -> str:
    """Parameter sweeps; each feasible cell retrains per seed."""
    if kind == "alpha-beta":
        return _sweep_alpha_beta(cfg)
    if kind == "lambda":
        return _sweep_one_cost(cfg, "lambda")
    if kind == "c":
        return _sweep_one_cost(cfg, "c")
    if kind == "lambda-c":
        return _sweep_factorial(cfg)
    raise ValueError(f"unknown sweep kind {kind!r}")


def _sweep_alpha_beta(cfg: ExperimentConfig) -> str:
    for alpha in cfg.alpha_grid:
        if alpha >= 1.0 and not cfg.allow_boundary:
            raise ValueError(f"alpha={alpha} lies outside [0,1); "
                             "pass --allow-boundary to include the boundary")
    cells, feasible = [], []
    for alpha in cfg.alpha_grid:
        for frac in cfg.beta_fraction_grid:
            beta = frac * cfg.c
            cell = {"alpha": alpha, "beta_fraction": frac, "lam": cfg.lam, "c": cfg.c,
                    "feasible": beta < cfg.c * cfg.kappa}
            cells.append(cell)
            if cell["feasible"]:
                feasible.append(cell)
    print(f"run matrix: {len(cells)} cells "
          f"({len(feasible)} feasible x {len(cfg.seeds)} seeds)")
    results = _run_cells(cfg, feasible)
    by_key = {(c["alpha"], c["beta_fraction"]): r for c, r in zip(feasible, results)}

    raw_ratios = []
    for cell in cells:
        key = (cell["alpha"], cell["beta_fraction"])
        if key in by_key:
            reports = by_key[key]
            raw = [metrics.raw_recall_over_cost(r["recall"], r["cost"]) for r in reports]
            raw_ratios.append(float(np.nanmean(raw)))
        else:
            raw_ratios.append(math.nan)
    normalized = metrics.normalized_recall_over_cost(raw_ratios)

    rows = []
    for cell, raw, norm in zip(cells, raw_ratios, normalized):
        key = (cell["alpha"], cell["beta_fraction"])
        if key in by_key:
            reports = by_key[key]
            rows.append([
                repr(cell["alpha"]), repr(cell["beta_fraction"]),
                repr(cell["beta_fraction"] * cfg.c), "ok",
                repr(float(np.mean([r["ba"] for r in reports]))),
                repr(_se([r["ba"] for r in reports])),
                repr(float(np.mean([r["recall"] for r in reports]))),
                repr(raw), repr(float(norm)),
            ])
        else:
            rows.append([repr(cell["alpha"]), repr(cell["beta_fraction"]),
                         repr(cell["beta_fraction"] * cfg.c),
                         "skipped_beta_ge_c_kappa", "", "", "", "", ""])
    path = os.path.join(cfg.out, "sweep_alpha_beta.csv")
    write_csv(path, ["alpha", "beta_fraction", "beta", "status", "ba_mean", "ba_se",
                     "recall_mean", "recall_over_cost_raw", "recall_over_cost_normalized"],
              rows, cfg)
    return path


def _sweep_one_cost(cfg: ExperimentConfig, which: str) -> str:
    grid = cfg.lambda_grid if which == "lambda" else cfg.c_grid
    print(f"run matrix: {len(grid)} cells x {len(cfg.seeds)} seeds "
          f"(+ {len(cfg.policies)} baselines per cell)")
    cells = []
    for value in grid:
        lam = value if which == "lambda" else cfg.lam
        c = value if which == "c" else cfg.c
        cells.append({"lam": lam, "c": c, "alpha": cfg.alpha,
                      "beta_fraction": cfg.beta_fraction_of_c})
    results = _run_cells(cfg, cells)

    train_ds, test_ds = resolve_datasets(cfg)
    rows = []
    for cell, reports in zip(cells, results):
        params = reward_params_from(cfg, lam=cell["lam"], c=cell["c"])
        train_labels = labeling.label_cohort(train_ds, params.kappa, cfg.level)
        test_labels = labeling.label_cohort(test_ds, params.kappa, cfg.level)
        env = SensingEnv.for_dataset(test_ds, params, cfg.level, cfg.feature_mode)
        for i, spec in enumerate(cfg.policies):
            seeds = cfg.seeds if spec.startswith("random:") else cfg.seeds[:1]
            reps = []
            for seed in seeds:
                policy, _ = build_policy(spec, cfg, seed, i, train_ds, train_labels)
                reps.append(evaluate_policy(policy, env, test_ds, test_labels))
            rows.append([repr(cell["lam"]), repr(cell["c"]),
                         getattr(policy, "name", spec),
                         repr(float(np.mean([r.rpp for r in reps]))),
                         repr(_se([r.rpp for r in reps]))])
        rows.append([repr(cell["lam"]), repr(cell["c"]), "rl",
                     repr(float(np.mean([r["rpp"] for r in reports]))),
                     repr(_se([r["rpp"] for r in reports]))])
    path = os.path.join(cfg.out, f"sweep_{which}.csv")
    write_csv(path, ["lambda", "c", "policy", "rpp_mean", "rpp_se"], rows, cfg)
    return path


def _sweep_factorial(cfg: ExperimentConfig) -> str:
    cells = [{"lam": lam, "c": c, "alpha": cfg.alpha,
              "beta_fraction": cfg.beta_fraction_of_c}
             for lam in cfg.lambda_grid for c in cfg.c_grid]
    print(f"run matrix: {len(cells)} cells x {len(cfg.seeds)} seeds")
    results = _run_cells(cfg, cells)
    rows = []
    for cell, reports in zip(cells, results):
        rpp_mean = float(np.mean([r["rpp"] for r in reports]))
        ratio = cell["lam"] / cell["c"]
        rows.append([
            repr(cell["lam"]), repr(cell["c"]), repr(ratio),
            repr(rpp_mean), repr(_se([r["rpp"] for r in reports])),
            repr(rpp_mean / cell["c"]),
            int(ratio <= 0.3),
        ])
    path = os.path.join(cfg.out, "sweep_lambda_c.csv")
    write_csv(path, ["lambda", "c", "lambda_over_c", "rpp_mean", "rpp_se",
                     "rpp_over_c", "cost_efficient_region"], rows, cfg)
    return path


# ---------------------------------------------------------------------------
# Policy-behaviour breakdown
# ---------------------------------------------------------------------------

def _baseline_klg(subject) -> tuple[int, int]:
    v = subject.visits[0]
    return (int(np.argmax(v.klg_probs_left)), int(np.argmax(v.klg_probs_right)))


def severity_class(subject) -> str:
    worst = max(_baseline_klg(subject))
    return {0: "healthy", 1: "healthy", 2: "mild", 3: "moderate", 4: "severe"}[worst]


def _age_band(age: float) -> str:
    if age < 55:
        return "<55"
    if age < 65:
        return "55-64"
    if age < 75:
        return "65-74"
    return ">=75"


def _bmi_class(bmi: float) -> str:
    if bmi < 18.5:
        return "underweight"
    if bmi < 25.0:
        return "healthy"
    if bmi < 30.0:
        return "overweight"
    return "obese"


def behavior_groups(subject, label) -> dict[str, str]:
    klg = _baseline_klg(subject)
    v0 = subject.visits[0]
    return {
        "baseline_klg_pair": str(tuple(sorted(klg))),
        "severity": severity_class(subject),
        "sex": subject.sex,
        "age_band": _age_band(subject.age),
        "bmi_class": _bmi_class(subject.bmi),
        "symptomatic": "symptomatic" if (v0.womac_left + v0.womac_right) > 0 else "asymptomatic",
        "n_progression_events": str(len(label.events)),
    }


def cmd_behavior(cfg: ExperimentConfig, checkpoint: str | None = None,
                 policy_substitute: str | None = None) -> str:
    """Follow-up counts grouped by severity, demographics and event counts."""
    params = reward_params_from(cfg)
    _, test_ds = resolve_datasets(cfg)
    test_labels = labeling.label_cohort(test_ds, params.kappa, cfg.level)
    env = SensingEnv.for_dataset(test_ds, params, cfg.level, cfg.feature_mode)
    if policy_substitute is not None:
        policy = policies.routine_policy(policy_substitute)
    else:
        if checkpoint is None:
            checkpoint = checkpoint_path(cfg.out, cfg.seeds[0])
        policy, _ = _load_greedy(checkpoint)
    traces = env.rollout_all(test_ds, test_labels, policy)
    visits = {tr.subject_id: tr.n_follow_ups for tr in traces}

    grouped: dict[tuple[str, str], list[int]] = {}
    for subject, label in zip(test_ds.subjects, test_labels):
        for group_by, group in behavior_groups(subject, label).items():
            grouped.setdefault((group_by, group), []).append(visits[subject.subject_id])
    rows = []
    for (group_by, group) in sorted(grouped):
        counts = grouped[(group_by, group)]
        rows.append([group_by, group, len(counts),
                     repr(float(np.mean(counts))), repr(_se(counts))])

    severity_means = {g: float(np.mean(grouped[("severity", g)]))
                      for g in ("healthy", "mild", "moderate", "severe")
                      if ("severity", g) in grouped}
    order = [severity_means[g] for g in ("healthy", "mild", "moderate", "severe")
             if g in severity_means]
    trend = "non-decreasing" if all(a <= b + 1e-9 for a, b in zip(order, order[1:])) \
        else "not monotone"
    print(f"severity ordering (healthy->severe mean visits): "
          f"{['%.3f' % v for v in order]} -> {trend}")

    path = os.path.join(cfg.out, "behavior.csv")
    write_csv(path, ["group_by", "group", "n", "mean_visits", "se_visits"], rows, cfg)
    return path


# ---------------------------------------------------------------------------
# Knee-level vs patient-level comparison
# ---------------------------------------------------------------------------

def cmd_knee_vs_patient(cfg: ExperimentConfig) -> list[str]:
    """Patient-level agent vs OR-combined per-knee agents, patient evaluation."""
    params = reward_params_from(cfg)
    train_ds, test_ds = resolve_datasets(cfg)
    test_patient_labels = labeling.label_cohort(test_ds, params.kappa, "patient")
    env = SensingEnv.for_dataset(test_ds, params, "patient", cfg.feature_mode)
    print(f"run matrix: {2 * len(cfg.seeds)} evaluations "
          f"({len(cfg.seeds)} seeds x 2 approaches, 3 trainings per seed)")

    per_approach: dict[str, list[metrics.MetricReport]] = {"patient": [], "knee": []}
    for seed in cfg.seeds:
        tc = train_config_from(cfg, seed)
        nets = {}
        for level in ("patient", "knee_left", "knee_right"):
            train_labels = labeling.label_cohort(train_ds, params.kappa, level)
            nets[level], _ = qlearn.train(train_ds, train_labels, params, tc,
                                          level=level, feature_mode=cfg.feature_mode)
        patient_policy = policies.GreedyQPolicy(nets["patient"])
        knee_policy = policies.CombinedKneePolicy(nets["knee_left"], nets["knee_right"])
        per_approach["patient"].append(
            evaluate_policy(patient_policy, env, test_ds, test_patient_labels))
        per_approach["knee"].append(
            evaluate_policy(knee_policy, env, test_ds, test_patient_labels))

    rows, year_rows = [], []
    for approach_key, approach in (("knee", "knee-level"), ("patient", "patient-level")):
        reports = per_approach[approach_key]
        rows.append([
            approach, "rl",
            repr(float(np.mean([r.rpp for r in reports]))), repr(_se([r.rpp for r in reports])),
            repr(float(np.mean([r.avg_ba for r in reports]))), repr(_se([r.avg_ba for r in reports])),
            repr(float(np.mean([r.avg_recall for r in reports]))),
            repr(_se([r.avg_recall for r in reports])),
        ])
        for year in range(params.horizon):
            ba_y = [r.ba_per_year[year] for r in reports]
            rec_y = [r.recall_per_year[year] for r in reports]
            year_rows.append([approach, "rl", year + 1,
                              repr(float(np.nanmean(ba_y))), repr(_se(ba_y)),
                              repr(float(np.nanmean(rec_y))), repr(_se(rec_y))])

    path = os.path.join(cfg.out, "knee_vs_patient.csv")
    write_csv(path, ["approach", "method", "reward_mean", "reward_se",
                     "ba_mean", "ba_se", "recall_mean", "recall_se"], rows, cfg)
    year_path = os.path.join(cfg.out, "knee_vs_patient_per_year.csv")
    write_csv(year_path, ["approach", "method", "year", "ba_mean", "ba_se",
                          "recall_mean", "recall_se"], year_rows, cfg)
    return [path, year_path]
