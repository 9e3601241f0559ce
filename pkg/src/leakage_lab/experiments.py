"""Experiment orchestration: config files, sweeps and the verification suite.

Config files are line oriented::

    # comment
    experiment = theory_sweep
    distortion_budgets = 1, 2, 3, 4, 5, 6

Every key is optional except ``experiment``.  All CSV floats are written with
``repr`` so reruns with the same config are byte-identical.
"""

from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Optional

import numpy as np

from . import affine_opt, estimators, gauss_core, leakage_metrics as lm
from .adversarial_training import TrainingConfig, alternating_train, evaluate_adversary
from .datasets import gen_synthetic, load_mnist_idx
from .errors import ConfigError, DegenerateThresholdError, DomainError, TrainingDiverged
from .gauss_core import BinaryGaussianMixture, TransformedModel

EXPERIMENTS = ("theory_sweep", "train_synthetic", "train_mnist", "verify")

THEORY_COLUMNS = (
    "D", "beta0_star", "beta1_star", "regime", "map_accuracy",
    "max_leakage", "sibson_mi_approx", "sibson_mi_quadrature",
)
TRADEOFF_COLUMNS = (
    "budget", "achieved_distortion", "adversary_accuracy", "metric", "alpha",
    "privatizer", "seed", "theory_map_accuracy", "diverged",
)

MNIST_FILES = {
    "train": ("train-images-idx3-ubyte", "train-labels-idx1-ubyte"),
    "validation": ("t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte"),
}


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str
    mu0: float = -3.0
    mu1: float = 3.0
    sigma: float = 1.0
    prior_p: float = 0.5
    metric: str = "sibson"
    alpha: float = 20.0
    privatizer: str = "affine"
    distortion_budgets: tuple = (1.0, 2.0, 3.0, 4.0, 5.0, 6.0)
    n_train: int = 10000
    n_val: int = 5000
    batch_size: int = 500
    samples_s: int = 12
    adversary_steps_k: Optional[int] = None  # 20 synthetic, 10 MNIST
    epochs: int = 1000
    learning_rate: float = 1e-3
    privatizer_learning_rate: Optional[float] = None
    seed: int = 0
    rho_schedule: str = "linear10"
    adversary_hidden: tuple = (4,)
    privatizer_hidden: tuple = (16, 16)
    latent_dim: Optional[int] = None
    dropout: float = 0.0
    output: Optional[str] = None
    mnist_dir: Optional[str] = None

    @property
    def model(self) -> BinaryGaussianMixture:
        return BinaryGaussianMixture(self.mu0, self.mu1, self.sigma, self.prior_p)

    @property
    def k(self) -> int:
        if self.adversary_steps_k is not None:
            return self.adversary_steps_k
        return 10 if self.experiment == "train_mnist" else 20

    def output_name(self) -> str:
        if self.output:
            return self.output
        return "verification_report.json" if self.experiment == "verify" else f"{self.experiment}.csv"

    def training_config(self, budget: float, seed: int) -> TrainingConfig:
        mnist = self.experiment == "train_mnist"
        return TrainingConfig(
            batch_size=self.batch_size, samples_s=self.samples_s, adversary_steps_k=self.k,
            epochs=self.epochs, d_budget=budget, alpha=self.alpha, metric=self.metric,
            privatizer=self.privatizer, learning_rate=self.learning_rate,
            privatizer_learning_rate=self.privatizer_learning_rate, seed=seed,
            rho_schedule=self.rho_schedule, adversary_hidden=self.adversary_hidden,
            privatizer_hidden=self.privatizer_hidden, latent_dim=self.latent_dim,
            dropout=self.dropout, distortion_per_feature=mnist,
        )


_INT_KEYS = {"n_train", "n_val", "batch_size", "samples_s", "adversary_steps_k", "epochs", "seed", "latent_dim"}
_FLOAT_KEYS = {"mu0", "mu1", "sigma", "prior_p", "alpha", "learning_rate", "privatizer_learning_rate", "dropout"}
_FLOAT_LISTS = {"distortion_budgets"}
_INT_LISTS = {"adversary_hidden", "privatizer_hidden"}
_CHOICES = {
    "experiment": EXPERIMENTS,
    "metric": ("sibson", "mi"),
    "privatizer": ("affine", "noisy_affine", "mlp"),
    "rho_schedule": ("linear10", "linear1000"),
}
_STR_KEYS = {"output", "mnist_dir"}


def _convert(key, raw, lineno):
    try:
        if key in _INT_KEYS:
            return int(raw)
        if key in _FLOAT_KEYS:
            return float(raw)
        if key in _FLOAT_LISTS:
            return tuple(float(v) for v in raw.split(",") if v.strip())
        if key in _INT_LISTS:
            return tuple(int(v) for v in raw.split(",") if v.strip())
    except ValueError:
        raise ConfigError(f"line {lineno}: cannot parse {key} = {raw!r}") from None
    if key in _CHOICES and raw not in _CHOICES[key]:
        raise ConfigError(f"line {lineno}: {key} must be one of {', '.join(_CHOICES[key])}")
    return raw


def _validate(cfg: ExperimentConfig, lines):
    def fail(key, msg):
        where = f"line {lines[key]}: " if key in lines else ""
        raise ConfigError(where + msg)

    if not cfg.alpha > 1:
        fail("alpha", "alpha (Sibson order) must exceed 1")
    if not cfg.sigma > 0:
        fail("sigma", "sigma must be positive")
    if not 0.0 <= cfg.prior_p <= 1.0:
        fail("prior_p", "prior_p must lie in [0, 1]")
    if cfg.mu0 > cfg.mu1:
        fail("mu0", "mu0 must not exceed mu1")
    for key in ("n_train", "batch_size", "samples_s", "epochs"):
        if getattr(cfg, key) < 1:
            fail(key, f"{key} must be at least 1")
    if cfg.n_val < 0:
        fail("n_val", "n_val must be nonnegative")
    if cfg.adversary_steps_k is not None and cfg.adversary_steps_k < 1:
        fail("adversary_steps_k", "adversary_steps_k must be at least 1")
    if any(not (b >= 0 and math.isfinite(b)) for b in cfg.distortion_budgets):
        fail("distortion_budgets", "distortion budgets must be finite and nonnegative")
    if not cfg.learning_rate > 0:
        fail("learning_rate", "learning_rate must be positive")
    if not 0.0 <= cfg.dropout < 1.0:
        fail("dropout", "dropout must lie in [0, 1)")
    if cfg.experiment == "train_mnist":
        if not cfg.mnist_dir:
            fail("experiment", "train_mnist needs mnist_dir")
        if cfg.privatizer != "mlp":
            fail("privatizer", "MNIST training needs the mlp privatizer")


def parse_config_text(text: str) -> ExperimentConfig:
    known = {f.name for f in fields(ExperimentConfig)}
    values, lines = {}, {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, raw = (part.strip() for part in line.split("=", 1))
        if key not in known:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        values[key] = _convert(key, raw, lineno)
        lines[key] = lineno
    if "experiment" not in values:
        raise ConfigError("missing required key 'experiment'")
    cfg = ExperimentConfig(**values)
    _validate(cfg, lines)
    return cfg


def parse_config(path) -> ExperimentConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_config_text(text)


# ---------------------------------------------------------------------------
# theory sweep
# ---------------------------------------------------------------------------


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _write_csv(path, header, rows):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])
    return path


def theory_row(model: BinaryGaussianMixture, budget: float, alpha: float):
    sol = affine_opt.solve_affine(model, budget)
    t = gauss_core.apply_affine(model, sol.beta0, sol.beta1)
    try:
        approx = lm.sibson_mi_max_approx(t, alpha).value
    except (DegenerateThresholdError, DomainError):
        approx = 0.0  # limit at collapsed means or a degenerate prior
    return (
        float(budget), sol.beta0, sol.beta1, sol.regime, lm.map_accuracy(t),
        lm.max_leakage_binary(t), approx, lm.sibson_mi_quadrature(t, alpha),
    )


def run_theory_sweep(cfg: ExperimentConfig, out_dir="."):
    rows = [theory_row(cfg.model, b, cfg.alpha) for b in cfg.distortion_budgets]
    return _write_csv(Path(out_dir) / cfg.output_name(), THEORY_COLUMNS, rows)


# ---------------------------------------------------------------------------
# training sweep
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TradeoffRecord:
    budget: float
    achieved_distortion: float
    adversary_accuracy: float
    metric: str
    alpha: float
    privatizer: str
    seed: int
    theory_map_accuracy: float
    diverged: bool = False


def theory_accuracy_at(model: BinaryGaussianMixture, distortion: float) -> float:
    """MAP accuracy of the closed-form affine optimum at this distortion."""
    sol = affine_opt.solve_affine(model, max(distortion, 0.0))
    return lm.map_accuracy(gauss_core.apply_affine(model, sol.beta0, sol.beta1))


def budget_seed(seed: int, index: int) -> int:
    return int(np.random.SeedSequence([seed, index]).generate_state(1)[0])


def _load_data(cfg: ExperimentConfig):
    if cfg.experiment == "train_mnist":
        root = Path(cfg.mnist_dir)
        train = load_mnist_idx(*(root / f for f in MNIST_FILES["train"]), split="train")
        val = load_mnist_idx(*(root / f for f in MNIST_FILES["validation"]), split="validation")
        sub = np.random.default_rng(cfg.seed)
        ti = np.sort(sub.permutation(len(train))[: cfg.n_train])
        vi = np.sort(sub.permutation(len(val))[: cfg.n_val])
        return (
            type(train)(train.features[ti], train.labels[ti], 10, "train"),
            type(val)(val.features[vi], val.labels[vi], 10, "validation"),
        )
    return gen_synthetic(cfg.model, cfg.n_train, cfg.n_val, cfg.seed)


def train_one_budget(cfg: ExperimentConfig, index: int, budget: float, out_dir=None):
    train, val = _load_data(cfg)
    seed = budget_seed(cfg.seed, index)
    tcfg = cfg.training_config(budget, seed)
    theory = theory_accuracy_at(cfg.model, 0.0) if cfg.experiment == "train_synthetic" else float("nan")
    try:
        pair = alternating_train(tcfg, train, val)
    except TrainingDiverged as exc:
        pair = exc.partial
        return TradeoffRecord(budget, float("nan"), float("nan"), cfg.metric, cfg.alpha,
                              cfg.privatizer, seed, theory, True), pair
    eval_set = val if len(val) else train
    acc, dist = evaluate_adversary(pair.adversary, pair.privatizer, eval_set, cfg.samples_s, seed)
    if cfg.experiment == "train_synthetic":
        theory = theory_accuracy_at(cfg.model, dist)
    if out_dir is not None:
        pair.write_trace(Path(out_dir) / f"trace_{index:02d}_D{budget!r}.csv")
    return TradeoffRecord(budget, dist, acc, cfg.metric, cfg.alpha, cfg.privatizer, seed, theory), pair


def _train_record(args):
    return train_one_budget(*args)[0]


def run_training_experiment(cfg: ExperimentConfig, out_dir=".", parallel=False):
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    jobs = [(cfg, i, b, out_dir) for i, b in enumerate(cfg.distortion_budgets)]
    if parallel and len(jobs) > 1:
        with ProcessPoolExecutor() as pool:
            records = list(pool.map(_train_record, jobs))
    else:
        records = [_train_record(j) for j in jobs]
    records.sort(key=lambda r: r.budget)
    rows = [tuple(asdict(r)[k] for k in TRADEOFF_COLUMNS) for r in records]
    _write_csv(out_dir / cfg.output_name(), TRADEOFF_COLUMNS, rows)
    return records


# ---------------------------------------------------------------------------
# verification suite
# ---------------------------------------------------------------------------


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str = ""


@dataclass
class VerificationReport:
    checks: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def to_json(self) -> str:
        return json.dumps(
            {"passed": self.passed, "checks": [asdict(c) for c in self.checks]}, indent=2
        )


def _check_q_reference():
    # scipy.stats-free reference values of the standard normal tail
    ref = {0.0: 0.5, 1.0: 0.15865525393145707, 1.959963984540054: 0.025, 3.0: 0.0013498980316300946}
    err = max(abs(gauss_core.q_function(x) - v) for x, v in ref.items())
    return err < 1e-12, f"max error {err:.2e}"


def _d_grid():
    return np.linspace(0.1, 8.0, 80)


def map_accuracy_increments(p):
    """Increments of MAP accuracy along the d grid, off the majority-guess plateau.

    For skewed priors and small d the accuracy equals ``max(p, 1-p)`` to double
    precision, so strict growth is only observable once it leaves that value.
    """
    vals = np.array([lm.map_accuracy(TransformedModel.from_gap(d, p)) for d in _d_grid()])
    steps = np.diff(vals)
    moving = vals[1:] > max(p, 1 - p) + 1e-12
    return steps, moving


def _check_map_monotone():
    worst_all, worst_moving = math.inf, math.inf
    for p in (0.1, 0.3, 0.5, 0.7, 0.9):
        steps, moving = map_accuracy_increments(p)
        worst_all = min(worst_all, float(steps.min()))
        worst_moving = min(worst_moving, float(steps[moving].min()))
    return worst_all >= 0 and worst_moving > 0, f"smallest increment {worst_moving:.3e}"


def _check_approx_monotone():
    worst = math.inf
    for p in (0.1, 0.3, 0.5, 0.7, 0.9):
        vals = [lm.sibson_mi_max_approx(TransformedModel.from_gap(d, p), 20.0).value for d in _d_grid()]
        worst = min(worst, float(np.min(np.diff(vals))))
    return worst > 0, f"smallest increment {worst:.3e}"


def _check_leakage_vs_quadrature():
    err = 0.0
    for d in (0.5, 1.0, 2.0, 4.0):
        t = TransformedModel.from_gap(d)
        err = max(err, abs(lm.max_leakage_binary(t) - lm.max_leakage_quadrature([t.mu0p, t.mu1p], 1.0)))
    return err < 1e-8, f"max error {err:.2e}"


def _check_leakage_range():
    vals = [lm.max_leakage_binary(TransformedModel.from_gap(d)) for d in np.linspace(0, 20, 41)]
    ok = min(vals) >= 0 and max(vals) <= math.log(2) + 1e-15
    return ok, f"range [{min(vals):.3g}, {max(vals):.6g}]"


def _check_approx_fidelity():
    worst = math.inf
    for p in (0.3, 0.5, 0.7):
        for d in (1.0, 2.0, 3.0, 4.0, 6.0):
            t = TransformedModel.from_gap(d, p)
            worst = min(worst, lm.sibson_mi_max_approx(t, 20.0).value / lm.sibson_mi_quadrature(t, 20.0))
    return worst >= 0.995, f"worst ratio {worst:.5f} for d >= 1"


def _check_alpha_limit():
    err = 0.0
    for d in (0.5, 2.0, 6.0):
        t = TransformedModel.from_gap(d)
        err = max(err, abs(lm.sibson_mi_quadrature(t, 1e4) - lm.max_leakage_binary(t)))
    return err < 1e-3, f"max gap {err:.2e} nats"


def _check_argmin():
    model = BinaryGaussianMixture(-3.0, 3.0, 1.0, 0.3)
    budget, n = 2.0, 60
    grid = np.linspace(0, model.gap, n)
    b0, b1 = np.meshgrid(grid, grid, indexing="ij")
    feas = (affine_opt.affine_distortion(b0, b1, model.p_tilde) <= budget) & (b0 + b1 <= model.gap)
    best = {}
    for name, fn in (
        ("map", lm.map_accuracy),
        ("leak", lm.max_leakage_binary),
        ("sibson", lambda t: lm.sibson_mi_max_approx(t, 20.0).value),
    ):
        vals = np.full(b0.shape, np.inf)
        for i, j in zip(*np.nonzero(feas)):
            t = gauss_core.apply_affine(model, b0[i, j], b1[i, j])
            if t.mu1p > t.mu0p:
                vals[i, j] = fn(t)
        best[name] = tuple(int(i) for i in np.unravel_index(np.argmin(vals), vals.shape))
    spots = list(best.values())
    ok = all(max(abs(a[0] - b[0]), abs(a[1] - b[1])) <= 1 for a in spots for b in spots)
    return ok, f"argmins {spots}"


def _check_condition_forms():
    model_gap = 6.0
    err = 0.0
    for p in np.linspace(0.01, 0.99, 99):
        d1 = p * (1 - p) * model_gap**2
        d2 = (model_gap / (math.sqrt(p / (1 - p)) + math.sqrt((1 - p) / p))) ** 2
        err = max(err, abs(d1 - d2))
    return err <= 1e-12 * 9, f"max difference {err:.2e}"


def _check_kkt():
    model = BinaryGaussianMixture(-2.0, 2.5, 1.0, 0.35)
    worst = 0.0
    for budget in (0.5, 1.0, 2.0, 4.0):
        sol = affine_opt.solve_affine(model, budget)
        r = affine_opt.kkt_residuals(model, budget, sol.beta0, sol.beta1)
        worst = max(worst, r.stationarity0, r.stationarity1, r.slackness)
    return worst <= 1e-8, f"max residual {worst:.2e}"


def _check_continuity():
    model = BinaryGaussianMixture(-1.0, 3.0, 1.0, 0.3)
    d_max = affine_opt.condition_threshold(model)
    lo = affine_opt.solve_affine(model, d_max - 1e-6)
    hi = affine_opt.solve_affine(model, d_max + 1e-6)
    jump = max(abs(lo.beta0 - hi.beta0), abs(lo.beta1 - hi.beta1))
    return jump < 1e-5, f"jump {jump:.2e}"


def _check_hessian():
    model = BinaryGaussianMixture(-3.0, 3.0, 1.0, 0.5)
    worst = -math.inf
    for beta in np.linspace(0, 5.9, 30):
        for gamma in np.linspace(0, 5, 30):
            worst = max(worst, affine_opt.noisy_objective_hessian(model, beta, gamma)[1])
    return worst <= 0, f"largest determinant {worst:.2e}"


def _check_estimator_exact():
    err = 0.0
    for g in (2, 10):
        onehot = np.eye(g)[np.arange(50) % g][:, None, :]
        prior = np.full(g, 1.0 / g)
        for a in (2.0, 20.0):
            err = max(err, abs(estimators.empirical_sibson_mi(onehot, prior, a) - math.log(g)))
            flat = np.broadcast_to(prior, (20, 3, g))
            err = max(err, abs(estimators.empirical_sibson_mi(flat, prior, a)))
    return err <= 1e-10, f"max error {err:.2e}"


def bayes_posteriors(t: TransformedModel, z):
    """Exact class posteriors of the binary Gaussian release at points ``z``."""
    p = t.p_tilde
    l0 = math.log(p) - 0.5 * ((z - t.mu0p) / t.sigma_eff) ** 2
    l1 = math.log(1 - p) - 0.5 * ((z - t.mu1p) / t.sigma_eff) ** 2
    q1 = 1.0 / (1.0 + np.exp(l0 - l1))
    return np.stack([1.0 - q1, q1], axis=-1)


def _check_estimator_oracle():
    t = TransformedModel.from_gap(2.0, 0.5)
    rng = np.random.default_rng(7)
    n = 20000
    c = (rng.random(n) >= t.p_tilde).astype(int)
    z = np.where(c == 0, t.mu0p, t.mu1p) + t.sigma_eff * rng.standard_normal(n)
    q = bayes_posteriors(t, z)[:, None, :]
    prior = np.array([t.p_tilde, 1 - t.p_tilde])
    e1 = abs(estimators.empirical_sibson_mi(q, prior, 20.0) - lm.sibson_mi_quadrature(t, 20.0))
    e2 = abs(estimators.empirical_mi(q, prior) - lm.mutual_information_quadrature(t))
    return max(e1, e2) < 0.02, f"Sibson error {e1:.4f}, MI error {e2:.4f}"


def _check_map_monte_carlo():
    rng = np.random.default_rng(11)
    n = 200000
    worst = 0.0
    for p, d in ((0.5, 2.0), (0.75, 1.0)):
        t = TransformedModel.from_gap(d, p)
        c = (rng.random(n) >= p).astype(int)
        z = np.where(c == 0, t.mu0p, t.mu1p) + rng.standard_normal(n)
        acc = np.mean((z > lm.map_threshold(t)) == (c == 1))
        se = math.sqrt(acc * (1 - acc) / n)
        worst = max(worst, abs(acc - lm.map_accuracy(t)) / se)
    return worst < 4.0, f"worst deviation {worst:.2f} standard errors"


def _check_discrete():
    ok = True
    for k in (2, 3, 4):
        ok &= abs(lm.max_leakage_discrete(lm.parity_release_channel(k)).bits - math.log2(2 ** (2 * k - 1) + 1)) < 1e-12
        ok &= abs(lm.max_leakage_discrete(lm.low_bits_channel(k)).bits - (k + 1)) < 1e-12
    return bool(ok), "k = 2, 3, 4"


def _check_hetero():
    rng = np.random.default_rng(3)
    err = 0.0
    for _ in range(5):
        m0, m1 = rng.uniform(-2, 2, 2)
        s0, s1 = rng.uniform(0.5, 2.5, 2)
        h = lm.max_leakage_hetero(lm.HeteroscedasticModel(m0, m1, s0, s1))
        err = max(err, abs(h.nats - lm.max_leakage_quadrature([m0, m1], [s0, s1])))
    return err < 1e-8, f"max error {err:.2e}"


CHECKS = (
    ("q_function_reference", _check_q_reference),
    ("map_accuracy_monotone_in_d", _check_map_monotone),
    ("sibson_approx_monotone_in_d", _check_approx_monotone),
    ("max_leakage_range", _check_leakage_range),
    ("max_leakage_matches_quadrature", _check_leakage_vs_quadrature),
    ("sibson_approx_fidelity", _check_approx_fidelity),
    ("sibson_large_order_limit", _check_alpha_limit),
    ("metric_argmins_coincide", _check_argmin),
    ("budget_condition_forms_agree", _check_condition_forms),
    ("kkt_residuals_active", _check_kkt),
    ("regime_boundary_continuity", _check_continuity),
    ("noisy_hessian_nonpositive_det", _check_hessian),
    ("estimator_exact_cases", _check_estimator_exact),
    ("estimator_matches_quadrature", _check_estimator_oracle),
    ("map_accuracy_monte_carlo", _check_map_monte_carlo),
    ("discrete_leakage_examples", _check_discrete),
    ("hetero_leakage_matches_quadrature", _check_hetero),
)


def run_verification_suite(out_path=None) -> VerificationReport:
    """Run every cross-module check; a check that raises counts as failed."""
    report = VerificationReport()
    for name, fn in CHECKS:
        try:
            ok, detail = fn()
        except Exception as exc:  # noqa: BLE001 - a crash is a failed check
            ok, detail = False, f"{type(exc).__name__}: {exc}"
        report.checks.append(CheckResult(name, bool(ok), detail))
    if out_path is not None:
        out_path = Path(out_path)
        out_path.parent.mkdir(parents=True, exist_ok=True)
        out_path.write_text(report.to_json() + "\n")
    return report


def run(cfg: ExperimentConfig, out_dir=".", parallel=False):
    """Dispatch on ``cfg.experiment``; returns the verification report for ``verify``."""
    if cfg.experiment == "theory_sweep":
        return run_theory_sweep(cfg, out_dir)
    if cfg.experiment == "verify":
        return run_verification_suite(Path(out_dir) / cfg.output_name())
    return run_training_experiment(cfg, out_dir, parallel)
