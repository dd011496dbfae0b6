"""Experiment configuration, dataset ingestion, orchestration and persistence.

A run is described by one JSON document (see README for the keys).  Every run
writes trace CSVs, a metrics CSV and ``manifest.json``; the manifest embeds the
full config and seed, so ``load_config(manifest)`` replays the run exactly.
"""

from __future__ import annotations

import csv
import dataclasses
import hashlib
import json
import platform
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .energy import GridMixtureModel, LogQuadraticModel, RbmModel
from .learning import (
    GibbsNegative,
    LangevinNegative,
    TemperedNegative,
    ais_log_z,
    block_gibbs_step,
    exact_log_z,
    sample_rbm_exact,
    train_pcd,
)
from .metrics import (
    RffFeatureMap,
    emc,
    forward_kl,
    log_mmd,
    median_heuristic,
    metric_row,
    mmd_rff,
    mode_coverage,
    write_metric_rows,
)
from .oracle import (
    detailed_balance_residual,
    exact_pt_kernel,
    marginal,
    product_target,
    stationarity_residual,
    stationary_distribution,
    tempered_target,
    tv,
)
from .space import DiscreteSpace, enumerate_states
from .tempering import ReplicaEnsemble, geometric_betas
from .tuning import DEFAULT_BETA_MIN, estimate_barrier, solve_schedule, tune

SCHEMA_VERSION = "1"
TRACE_FIELDS = ("step", "copy", "energy", "state", "swaps")
KINDS = ("synthetic-mog", "synthetic-mos", "rbm-sample", "rbm-learn", "tune-only", "oracle-suite")
ALGORITHMS = ("pt-dmala", "pt-dula", "dmala", "dula", "gibbs")
MODEL_TYPES = ("mog-ring", "mos-ring", "rbm", "log-quadratic")


class ConfigError(ValueError):
    """Invalid configuration; ``field`` names the offending key."""

    def __init__(self, message, field=None):
        super().__init__(message)
        self.field = field


# ---------------------------------------------------------------- config


@dataclass
class SamplerSpec:
    algorithm: str = "pt-dmala"
    K: int | str = 4
    betas: list | str = "auto"
    alphas: float | list = 0.2
    p: float = 2.0
    rho: float = 1.0
    swap_rule: str = "tailored"
    beta_min: float = DEFAULT_BETA_MIN
    minibatch: bool = False
    batch_size: int | None = None

    @property
    def adjusted(self) -> bool:
        return self.algorithm.endswith("dmala")

    @property
    def tempered(self) -> bool:
        return self.algorithm.startswith("pt-")


@dataclass
class RunSpec:
    steps: int = 1000
    burn_in: int = 0
    thin: int = 1
    seed: int = 0
    copies: int = 1
    K_total: int | None = None
    pilot_steps: int = 1000
    max_rounds: int = 10
    tol: float = 0.05
    baselines: list = field(default_factory=lambda: ["dmala"])


@dataclass
class MetricSpec:
    mmd_features: int = 4096
    mmd_sigma: float | None = None
    mmd_seed: int = 0
    kl_smoothing: float = 0.5
    emc: bool = True


@dataclass
class ExperimentConfig:
    kind: str
    model: dict
    sampler: SamplerSpec = field(default_factory=SamplerSpec)
    run: RunSpec = field(default_factory=RunSpec)
    metrics: MetricSpec = field(default_factory=MetricSpec)
    output: str = "out"

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def hash(self) -> str:
        canon = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode()).hexdigest()


def _build(cls, data, prefix):
    if not isinstance(data, dict):
        raise ConfigError(f"{prefix or 'config'} must be an object", prefix)
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - names)
    if unknown:
        where = f"{prefix}." if prefix else ""
        raise ConfigError(f"unknown key {where}{unknown[0]}", f"{where}{unknown[0]}")
    return cls(**data)


def _need(cond, name, msg):
    if not cond:
        raise ConfigError(f"{name}: {msg}", name)


def _is_num(v):
    return isinstance(v, (int, float)) and not isinstance(v, bool)


def config_from_dict(d: dict) -> ExperimentConfig:
    if not isinstance(d, dict):
        raise ConfigError("config must be a JSON object")
    d = dict(d)
    for key in ("kind", "model"):
        if key not in d:
            raise ConfigError(f"missing required key {key}", key)
    sub = {"sampler": SamplerSpec, "run": RunSpec, "metrics": MetricSpec}
    for key, cls in sub.items():
        d[key] = _build(cls, d.get(key, {}), key)
    cfg = _build(ExperimentConfig, d, "")
    validate_config(cfg)
    return cfg


def validate_config(cfg: ExperimentConfig):
    _need(cfg.kind in KINDS, "kind", f"must be one of {KINDS}")
    m = cfg.model
    _need(isinstance(m, dict) and m.get("type") in MODEL_TYPES, "model.type", f"must be one of {MODEL_TYPES}")
    s, r, mt = cfg.sampler, cfg.run, cfg.metrics
    _need(s.algorithm in ALGORITHMS, "algorithm", f"must be one of {ALGORITHMS}")
    _need(s.swap_rule in ("tailored", "standard"), "swap_rule", "must be 'tailored' or 'standard'")
    alphas = s.alphas if isinstance(s.alphas, list) else [s.alphas]
    _need(all(_is_num(a) and a > 0 for a in alphas), "alpha", "must be > 0")
    _need(_is_num(s.p) and s.p >= 1, "p", "must be >= 1")
    _need(_is_num(s.rho) and 0 < s.rho <= 1, "rho", "must lie in (0, 1]")
    _need(_is_num(s.beta_min) and 0 <= s.beta_min < 1, "beta_min", "must lie in [0, 1)")
    if s.K == "auto":
        _need(s.betas == "auto", "K", "K='auto' and explicit betas are mutually exclusive")
    else:
        _need(isinstance(s.K, int) and not isinstance(s.K, bool) and s.K >= 1, "K", "must be a positive integer or 'auto'")
    if s.betas != "auto":
        b = s.betas
        _need(isinstance(b, list) and len(b) >= 1 and all(_is_num(v) for v in b), "betas", "must be a list or 'auto'")
        _need(b[0] == 1 and all(x > y for x, y in zip(b, b[1:])) and b[-1] >= 0, "betas",
              "must be strictly decreasing from 1 to a value >= 0")
        _need(s.K == len(b), "K", "must equal len(betas)")
    if isinstance(s.alphas, list) and s.K != "auto":
        _need(len(s.alphas) == s.K, "alpha", "needs one value per chain")
    if s.minibatch:
        _need(isinstance(s.batch_size, int) and s.batch_size >= 1, "batch_size", "must be a positive integer")
        _need(not s.adjusted, "minibatch", "only supported with the unadjusted sampler")
    for name in ("steps", "thin", "copies", "pilot_steps", "max_rounds"):
        v = getattr(r, name)
        _need(isinstance(v, int) and v >= 1, name, "must be a positive integer")
    _need(isinstance(r.burn_in, int) and r.burn_in >= 0, "burn_in", "must be >= 0")
    _need(isinstance(r.seed, int) and r.seed >= 0, "seed", "must be a non-negative integer")
    _need(all(b in ALGORITHMS for b in r.baselines), "baselines", f"entries must be in {ALGORITHMS}")
    _need(isinstance(mt.mmd_features, int) and mt.mmd_features >= 1, "mmd_features", "must be >= 1")
    _need(mt.mmd_sigma is None or (_is_num(mt.mmd_sigma) and mt.mmd_sigma > 0), "mmd_sigma", "must be > 0")
    _need(_is_num(mt.kl_smoothing) and mt.kl_smoothing >= 0, "kl_smoothing", "must be >= 0")
    for key in ("rbm", "dataset"):
        if key in m:
            _need(Path(m[key]).exists(), f"model.{key}", f"file not found: {m[key]}")


def load_config(path) -> ExperimentConfig:
    """Parse a JSON config (or a run manifest, which embeds its config)."""
    text = Path(path).read_text()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path}: parse error at line {e.lineno}, column {e.colno}: {e.msg}") from e
    if isinstance(doc, dict) and "config" in doc and "schema_version" in doc:
        doc = doc["config"]
    return config_from_dict(doc)


# ---------------------------------------------------------------- data


def load_idx_dataset(path, binarize_threshold: float = 0.5) -> np.ndarray:
    """Binary visibles from an IDX ubyte image file, shape ``(n, rows * cols)``."""
    raw = Path(path).read_bytes()
    if len(raw) < 16:
        raise ValueError("truncated IDX header")
    magic, n, rows, cols = struct.unpack(">IIII", raw[:16])
    if magic != 0x00000803:
        raise ValueError(f"bad IDX magic 0x{magic:08x}")
    need = n * rows * cols
    if len(raw) - 16 < need:
        raise ValueError(f"truncated IDX file: expected {need} pixel bytes, found {len(raw) - 16}")
    pix = np.frombuffer(raw, dtype=np.uint8, count=need, offset=16).reshape(n, rows * cols)
    return (pix / 255.0 > binarize_threshold).astype(np.int64)


def write_idx(path, images):
    """Write uint8 images ``(n, rows, cols)`` in IDX format."""
    images = np.asarray(images, dtype=np.uint8)
    n, r, c = images.shape
    Path(path).write_bytes(struct.pack(">IIII", 0x00000803, n, r, c) + images.tobytes())


def mode_initialize(model, dataset) -> np.ndarray:
    """Dataset item of maximal energy (first one on ties)."""
    dataset = np.asarray(dataset)
    if dataset.size == 0:
        raise ValueError("dataset is empty")
    return dataset[int(np.argmax(model.energy(dataset)))].copy()


# ---------------------------------------------------------------- models


def build_model(spec: dict):
    t = spec["type"]
    if t in ("mog-ring", "mos-ring"):
        return GridMixtureModel.ring(
            int(spec.get("components", 8)),
            family=t[:3],
            radius=float(spec.get("radius", 0.6)),
            scale=float(spec.get("scale", 0.06)),
            dof=float(spec.get("dof", 3.0)),
            cells=int(spec.get("cells", 100)),
        )
    if t == "rbm":
        if "rbm" in spec:
            return RbmModel.load(spec["rbm"])
        rng = np.random.default_rng(spec.get("seed", 0))
        return RbmModel.random(int(spec.get("n_hidden", 8)), int(spec.get("n_visible", 16)), rng,
                               float(spec.get("scale", 1.0)))
    dim = int(spec.get("dim", 2))
    rng = np.random.default_rng(spec.get("seed", 0))
    scale = float(spec.get("scale", 1.0))
    return LogQuadraticModel(DiscreteSpace.binary(dim), scale * rng.normal(size=(dim, dim)),
                             scale * rng.normal(size=dim))


# ---------------------------------------------------------------- runs


@dataclass
class RunArtifacts:
    out_dir: Path
    traces: dict = field(default_factory=dict)
    metrics: Path | None = None
    report: Path | None = None
    checkpoints: list = field(default_factory=list)
    manifest: Path | None = None
    rows: list = field(default_factory=list)


def _state_str(x) -> str:
    x = np.asarray(x)
    if x.size <= 64:
        if x.max(initial=0) <= 1:
            return "".join(map(str, x.tolist()))
        return "-".join(map(str, x.tolist()))
    return hashlib.sha256(x.astype(np.int64).tobytes()).hexdigest()[:16]


def write_trace(path, trace, offset=0):
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRACE_FIELDS)
        n, B = trace.energies.shape
        for t in range(n):
            for b in range(B):
                sw = "".join("1" if v else "0" for v in trace.swaps[t, b])
                w.writerow([offset + t, b, repr(float(trace.energies[t, b])), _state_str(trace.states[t, b]), sw])


def _ladder(cfg: ExperimentConfig, model, seed, report_sink):
    s, r = cfg.sampler, cfg.run
    if not s.tempered:
        return np.ones(1)
    if s.betas != "auto":
        return np.asarray(s.betas, dtype=float)
    K0 = 5 if s.K == "auto" else int(s.K)
    alpha0 = s.alphas if not isinstance(s.alphas, list) else s.alphas[0]
    betas, K_star, B_star, rep = tune(
        model, geometric_betas(max(K0, 2), s.beta_min), r.pilot_steps, r.max_rounds, r.tol, seed,
        alphas=alpha0, p=s.p, adjusted=s.adjusted, K_total=r.K_total, beta_min=s.beta_min,
    )
    report_sink.append(rep)
    if s.K != "auto" and K0 != K_star:
        curve = estimate_barrier(rep.acceptances[-1], rep.schedules[-1])
        betas = solve_schedule(curve, K0)
    return betas


def run_sampler(model, algorithm, betas, alphas, *, p=2.0, rho=1.0, swap_rule="tailored", steps=1000, burn_in=0,
                thin=1, copies=1, seed=0, x0=None):
    """Run one sampler; returns ``(trace, grad_evals)``."""
    if algorithm == "gibbs":
        return _run_gibbs(model, steps, burn_in, thin, copies, seed, x0)
    adjusted = algorithm.endswith("dmala")
    if not algorithm.startswith("pt-"):
        betas = np.ones(1)
    alphas = np.broadcast_to(np.asarray(alphas, dtype=float), (len(betas),))
    ens = ReplicaEnsemble(model, betas, alphas, x0, p=p, rho=rho, adjusted=adjusted, swap_rule=swap_rule,
                          copies=copies, seed=seed)
    trace = ens.run(steps, burn_in, thin)
    return trace, ens.n_grad


def _run_gibbs(model, steps, burn_in, thin, copies, seed, x0):
    from .tempering import Trace

    rng = np.random.default_rng(seed)
    d = model.space.dim
    x = np.zeros((copies, d), dtype=np.int64) if x0 is None else np.broadcast_to(x0, (copies, d)).copy()
    for _ in range(burn_in):
        x = block_gibbs_step(model, x, rng)
    n = steps // thin
    states = np.empty((n, copies, d), dtype=np.int64)
    for t in range(n * thin):
        x = block_gibbs_step(model, x, rng)
        if (t + 1) % thin == 0:
            states[(t + 1) // thin - 1] = x
    energies = model.energy(states)
    swaps = np.zeros((n, copies, 0), dtype=bool)
    labels = np.zeros((n + 1, copies, 1), dtype=np.int64)
    return Trace(states, energies, swaps, labels), 0


def _reference_samples(model, n, rng):
    if isinstance(model, GridMixtureModel):
        table = model.table()
        idx = rng.choice(table.size, size=n, p=table)
        return model.grid_states()[idx]
    if isinstance(model, RbmModel) and model.n_visible <= 20:
        return sample_rbm_exact(model, n, rng)
    x = (rng.random((n, model.space.dim)) < 0.5).astype(np.int64)
    for _ in range(1000):
        x = block_gibbs_step(model, x, rng)
    return x


def _sample_metrics(cfg, model, name, samples, budget, seed):
    mt = cfg.metrics
    rows = []
    rng = np.random.default_rng([mt.mmd_seed, seed])
    ref = _reference_samples(model, len(samples), rng)
    to_vec = model.to_coords if isinstance(model, GridMixtureModel) else (lambda z: np.asarray(z, float))
    X, Y = to_vec(samples), to_vec(ref)
    sigma = mt.mmd_sigma if mt.mmd_sigma is not None else median_heuristic(Y, rng=rng)
    fmap = RffFeatureMap.create(X.shape[1], mt.mmd_features, sigma, seed=mt.mmd_seed)
    mmd = mmd_rff(X, Y, fmap)
    base = {"sampler": name, "grad_evals": budget}
    rows.append(metric_row("mmd", mmd, len(samples), seed, {**base, "D": mt.mmd_features, "sigma": round(sigma, 12)}))
    rows.append(metric_row("log_mmd", log_mmd(mmd), len(samples), seed, base))
    if isinstance(model, GridMixtureModel):
        kl = forward_kl(model.table(), model.space.index_of(samples), mt.kl_smoothing)
        rows.append(metric_row("kl", kl, len(samples), seed, {**base, "smoothing": mt.kl_smoothing}))
        if mt.emc:
            rows.append(metric_row("emc", emc(samples, model.mode_posteriors), len(samples), seed, base))
            rows.append(metric_row("mode_coverage", mode_coverage(samples, model.mode_posteriors), len(samples),
                                   seed, base))
    elif isinstance(model, RbmModel) and model.n_visible <= 20:
        table = np.exp(model.log_probs(enumerate_states(model.space)))
        kl = forward_kl(table, model.space.index_of(samples), mt.kl_smoothing)
        rows.append(metric_row("kl", kl, len(samples), seed, {**base, "smoothing": mt.kl_smoothing}))
    return rows


def _sampling_run(cfg, model, seed, out, art, x0=None):
    s, r = cfg.sampler, cfg.run
    if s.minibatch:
        raise ConfigError("minibatch: needs a dataset-sum energy; use MiniBatchEnergy through the library", "minibatch")
    reports = []
    betas = _ladder(cfg, model, seed, reports)
    if reports:
        art.report = out / "tuning_report.json"
        art.report.write_text(reports[0].to_json() + "\n")
    K = len(betas)
    runs = [(s.algorithm, betas, s.alphas, r.steps, r.burn_in, r.thin)]
    for b in r.baselines:
        if b == s.algorithm:
            continue
        # evaluation matching: single chains get K times the steps, thinned to the same sample count
        mult = K if not b.startswith("pt-") else 1
        a0 = s.alphas[0] if isinstance(s.alphas, list) else s.alphas
        runs.append((b, betas, a0 if mult > 1 else s.alphas, r.steps * mult, r.burn_in * mult, r.thin * mult))
    rows = []
    for i, (name, bts, al, steps, burn, thin) in enumerate(runs):
        trace, budget = run_sampler(model, name, bts, al, p=s.p, rho=s.rho, swap_rule=s.swap_rule, steps=steps,
                                    burn_in=burn, thin=thin, copies=r.copies, seed=[seed, i], x0=x0)
        path = out / f"trace_{name}.csv"
        write_trace(path, trace)
        art.traces[name] = path
        samples = trace.states.reshape(-1, trace.states.shape[-1])
        rows += _sample_metrics(cfg, model, name, samples, budget, seed)
    return rows


def _learning_run(cfg, model, seed, out, art, data):
    s, r = cfg.sampler, cfg.run
    if s.algorithm == "gibbs":
        neg = GibbsNegative()
    elif s.tempered:
        betas = s.betas if s.betas != "auto" else geometric_betas(int(s.K) if s.K != "auto" else 3, 0.5).tolist()
        neg = TemperedNegative(tuple(betas), s.alphas, s.adjusted, seed=seed)
    else:
        neg = LangevinNegative(s.alphas if not isinstance(s.alphas, list) else s.alphas[0], s.adjusted, s.p)
    d = data.shape[1]
    init = RbmModel(np.zeros((model.n_hidden, d)) + 0.01 * np.random.default_rng(seed).normal(size=(model.n_hidden, d)),
                    np.zeros(model.n_hidden), np.zeros(d))
    pcd, log_rows = train_pcd(init, data, neg, r.steps, batch_size=min(32, len(data)), seed=seed,
                              log_every=max(1, r.steps // 10))
    log_path = out / "training_log.csv"
    with log_path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["epoch", "batch", "log_likelihood"])
        for t, ll in log_rows:
            w.writerow([0, t, repr(float(ll))])
    art.traces["training_log"] = log_path
    ck = out / "rbm.json"
    pcd.model.save(ck)
    opt = pcd.optimizer
    opt_path = out / "optimizer.json"
    opt_path.write_text(json.dumps({"t": opt.t, "lr": opt.lr, "beta1": opt.beta1, "beta2": opt.beta2, "eps": opt.eps,
                                    "m": {k: np.asarray(v).tolist() for k, v in opt.m.items()},
                                    "v": {k: np.asarray(v).tolist() for k, v in opt.v.items()}}) + "\n")
    art.checkpoints += [ck, opt_path]
    rows = []
    if d <= 20:
        lz = exact_log_z(pcd.model)
        rows.append(metric_row("log_likelihood_exact", np.mean(pcd.model.energy(data)) - lz, len(data), seed))
    else:
        lz, _ = ais_log_z(pcd.model, 1000, 1, 100, np.random.default_rng(seed))
        rows.append(metric_row("log_likelihood_ais", np.mean(pcd.model.energy(data)) - lz, len(data), seed,
                               {"n_temps": 1000, "particles": 100}))
    return rows


def _oracle_run(cfg, model, seed, out, art):
    s = cfg.sampler
    if not s.tempered:
        betas = np.ones(1)
    elif s.betas != "auto":
        betas = np.asarray(s.betas, dtype=float)
    else:
        betas = geometric_betas(int(s.K) if s.K != "auto" else 2, s.beta_min)
    alphas = s.alphas if s.tempered or not isinstance(s.alphas, list) else s.alphas[0]
    kernel = exact_pt_kernel(model, betas, alphas, s.rho, s.adjusted, p=s.p, swap_rule=s.swap_rule)
    pi = product_target(model, betas)
    stat = stationary_distribution(kernel)
    n = model.space.n_states
    first = marginal(stat, n, len(betas), 0)
    res = {
        "detailed_balance_residual": detailed_balance_residual(kernel, pi),
        "stationarity_residual": stationarity_residual(kernel, pi),
        "first_chain_tv": tv(first, tempered_target(model)),
        "joint_states": int(kernel.size),
    }
    art.report = out / "oracle_report.json"
    art.report.write_text(json.dumps(res, indent=2, sort_keys=True) + "\n")
    kernel.to_csv(out / "kernel.csv")
    return [metric_row(k, v, 0, seed, {"K": len(betas)}) for k, v in res.items() if k != "joint_states"]


def _tune_run(cfg, model, seed, out, art):
    s, r = cfg.sampler, cfg.run
    alpha0 = s.alphas if not isinstance(s.alphas, list) else s.alphas[0]
    init = np.asarray(s.betas, float) if s.betas != "auto" else geometric_betas(
        5 if s.K == "auto" else max(2, int(s.K)), s.beta_min)
    _, _, _, rep = tune(model, init, r.pilot_steps, r.max_rounds, r.tol, seed, alphas=alpha0, p=s.p,
                        adjusted=s.adjusted, K_total=r.K_total, beta_min=s.beta_min)
    art.report = out / "tuning_report.json"
    art.report.write_text(rep.to_json() + "\n")
    return [metric_row("barrier", rep.barriers[-1], 0, seed, {"rounds": rep.rounds}),
            metric_row("K_star", rep.K_star, 0, seed), metric_row("B_star", rep.B_star, 0, seed)]


def _file_hash(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def run_experiment(cfg: ExperimentConfig, out_dir=None, seed: int | None = None, threads: int = 1) -> RunArtifacts:
    """Execute a configured run and write its artifacts; deterministic given the seed."""
    if seed is not None:
        cfg = dataclasses.replace(cfg, run=dataclasses.replace(cfg.run, seed=int(seed)))
    out = Path(out_dir if out_dir is not None else cfg.output)
    out.mkdir(parents=True, exist_ok=True)
    art = RunArtifacts(out)
    seed = cfg.run.seed
    stage = "model"
    try:
        model = build_model(cfg.model)
        data = None
        if "dataset" in cfg.model:
            stage = "dataset"
            data = load_idx_dataset(cfg.model["dataset"], float(cfg.model.get("threshold", 0.5)))
        stage = cfg.kind
        if cfg.kind in ("synthetic-mog", "synthetic-mos"):
            rows = _sampling_run(cfg, model, seed, out, art)
        elif cfg.kind == "rbm-sample":
            x0 = mode_initialize(model, data) if data is not None else None
            rows = _sampling_run(cfg, model, seed, out, art, x0=x0)
        elif cfg.kind == "rbm-learn":
            if data is None:
                data = sample_rbm_exact(model, 500, np.random.default_rng(seed)) if model.n_visible <= 20 else \
                    _reference_samples(model, 500, np.random.default_rng(seed))
            rows = _learning_run(cfg, model, seed, out, art, data)
        elif cfg.kind == "tune-only":
            rows = _tune_run(cfg, model, seed, out, art)
        else:
            rows = _oracle_run(cfg, model, seed, out, art)
    except ConfigError:
        raise
    except Exception as e:
        raise RuntimeError(f"run failed during stage '{stage}': {e}") from e
    art.rows = rows
    art.metrics = out / "metrics.csv"
    art.metrics.write_text(write_metric_rows(rows))
    files = [*art.traces.values(), art.metrics, *art.checkpoints] + ([art.report] if art.report else [])
    manifest = {
        "schema_version": SCHEMA_VERSION,
        "trace_fields": list(TRACE_FIELDS),
        "config": cfg.to_dict(),
        "config_hash": cfg.hash(),
        "seed": seed,
        "threads": int(threads),
        "versions": {"package": __version__, "python": platform.python_version(), "numpy": np.__version__,
                     "scipy": scipy.__version__},
        "files": {Path(f).name: _file_hash(f) for f in files},
    }
    art.manifest = out / "manifest.json"
    art.manifest.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return art


def verify_manifest(run_dir) -> dict:
    """Compare recorded file hashes with the files on disk; returns ``{name: ok}``."""
    run_dir = Path(run_dir)
    man = json.loads((run_dir / "manifest.json").read_text())
    return {name: (run_dir / name).exists() and _file_hash(run_dir / name) == h for name, h in man["files"].items()}
