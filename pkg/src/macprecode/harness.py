"""Experiment driver: configs, SNR sweeps, the exact-MI oracle, and files.

A YAML config describes the users (statistics plus constellation), the
SNR grid, weights, and optimizer settings.  `run_sweep` walks the grid,
warm-starting each point from the previous solution, and appends one CSV
row per SNR as soon as it is known.  Precoders are stored as JSON with
enough provenance (config hash, seed, build id) to reproduce them.

Row semantics by mode:
  optimize  wsr_opt_bits is the optimized design, wsr_np_bits the
            uniform diagonal baseline; no oracle columns.
  sweep     same as optimize plus the Monte Carlo exact-MI columns for
            the optimized design.
  evaluate  wsr_opt_bits evaluates precoders loaded from a file (scaled
            to each point's budget); no optimization runs.
  oracle    wsr_np_bits plus oracle columns for the baseline (or loaded
            precoders); the asymptotic-versus-exact comparison mode.
  count     no sweep; reports precoder-search alphabet sizes.
"""

import csv
import hashlib
import json
import logging
import math
import os
import subprocess
import time
from dataclasses import dataclass, field

import numpy as np
import yaml

from .channel import PrecoderSet, UserStatistics, sample_channel, snr_to_power
from .constellation import build_constellation, search_space_size, vector_alphabet
from .equivalent import mi_from_points
from .errors import ConfigurationError, SizeLimitError, ValidationError
from .fixed_point import MacSystem, wsr_objective
from .optimizer import OptimizerConfig, baseline_np, optimize
from .sampling import complex_normal, derived_int, rng_for

log = logging.getLogger(__name__)

MODES = ("optimize", "evaluate", "oracle", "count", "sweep")
CSV_COLUMNS = (
    "snr_db",
    "wsr_opt_bits",
    "wsr_np_bits",
    "mc_exact_bits",
    "mc_se_bits",
    "residual",
    "converged",
    "seconds",
)
_CSV_SCHEMA = "# schema=1"
DEFAULT_JOINT_CAP = 2**16


def _as_complex_matrix(rows, label: str) -> np.ndarray:
    """Parse a matrix whose entries are numbers or [re, im] pairs."""
    try:
        out = []
        for row in rows:
            parsed = []
            for entry in row:
                if isinstance(entry, (list, tuple)):
                    if len(entry) != 2:
                        raise ConfigurationError(
                            f"{label}: complex entries need exactly [re, im]"
                        )
                    parsed.append(complex(float(entry[0]), float(entry[1])))
                else:
                    parsed.append(complex(float(entry), 0.0))
            out.append(parsed)
        return np.array(out, dtype=np.complex128)
    except (TypeError, ValueError) as exc:
        raise ConfigurationError(f"{label}: not a numeric matrix ({exc})") from exc


@dataclass
class OracleConfig:
    n_channels: int = 2000
    n_noise: int = 500
    joint_cap: int = DEFAULT_JOINT_CAP

    def __post_init__(self):
        if self.n_channels < 1 or self.n_noise < 1 or self.joint_cap < 1:
            raise ConfigurationError("oracle sample counts must be positive")


@dataclass
class ExperimentConfig:
    """Everything one experiment needs, normally loaded from YAML."""

    name: str
    mode: str
    users: list  # of UserStatistics
    constellations: list  # of VectorAlphabet, aligned with users
    snr_db: list
    weights: list
    optimizer: OptimizerConfig
    oracle: OracleConfig
    seed: int = 0
    out_dir: str = "results"
    csv_name: str = "sweep.csv"
    precoders_path: str | None = None
    raw: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigurationError(
                f"mode must be one of {MODES}, got {self.mode!r}"
            )
        if not self.users:
            raise ConfigurationError("need at least one user")
        if len(self.constellations) != len(self.users):
            raise ConfigurationError("one constellation per user required")
        if len(self.weights) != len(self.users):
            raise ConfigurationError("one weight per user required")
        if self.mode != "count":
            if not self.snr_db:
                raise ConfigurationError("snr_db grid must be nonempty")
            snr = [float(s) for s in self.snr_db]
            if any(b <= a for a, b in zip(snr, snr[1:])):
                raise ConfigurationError("snr_db grid must be strictly increasing")
            self.snr_db = snr
        for k in range(len(self.users) - 1):
            if float(self.weights[k]) < float(self.weights[k + 1]) - 1e-12:
                raise ConfigurationError(
                    "weights must be nonincreasing; sort users by weight first"
                )

    @property
    def system(self) -> MacSystem:
        return MacSystem(
            users=tuple(self.users), alphabets=tuple(self.constellations)
        )

    def config_sha256(self) -> str:
        blob = json.dumps(self.raw, sort_keys=True, default=str).encode("utf-8")
        return hashlib.sha256(blob).hexdigest()


# Every key a config section may carry; anything else is a typo and is
# rejected so a misspelled knob cannot silently fall back to a default.
_TOP_KEYS = {
    "name", "mode", "seed", "snr_db", "weights", "users",
    "optimizer", "oracle", "output", "precoders",
}
_USER_KEYS = {
    "name", "constellation", "orthonormalize", "unitary_tol",
    "u_t", "u_r", "gtilde",
}
_CONSTELLATION_KEYS = {"kind", "order"}
_OUTPUT_KEYS = {"dir", "csv"}


def _reject_unknown(section: dict, allowed: set, where: str) -> None:
    unknown = sorted(set(section) - allowed)
    if unknown:
        raise ConfigurationError(
            f"{where}: unknown key(s) {', '.join(map(repr, unknown))}; "
            f"allowed: {', '.join(sorted(allowed))}"
        )


def _user_from_dict(entry: dict, index: int):
    if not isinstance(entry, dict):
        raise ConfigurationError(f"users[{index}] must be a mapping")
    _reject_unknown(entry, _USER_KEYS, f"users[{index}]")
    spec = entry.get("constellation")
    if not isinstance(spec, dict):
        raise ConfigurationError(
            f"users[{index}].constellation must be a mapping like "
            "{kind: qpsk, order: 4}"
        )
    _reject_unknown(spec, _CONSTELLATION_KEYS, f"users[{index}].constellation")
    try:
        kind = spec["kind"]
        order = int(spec["order"])
        u_t = _as_complex_matrix(entry["u_t"], f"users[{index}].u_t")
        u_r = _as_complex_matrix(entry["u_r"], f"users[{index}].u_r")
        gtilde = np.asarray(entry["gtilde"], dtype=np.float64)
    except KeyError as exc:
        raise ConfigurationError(f"users[{index}] is missing field {exc}") from exc
    stats = UserStatistics(
        u_t=u_t,
        u_r=u_r,
        gtilde=gtilde,
        name=str(entry.get("name", f"user{index}")),
        unitary_tol=float(entry.get("unitary_tol", 1e-3)),
        orthonormalized=bool(entry.get("orthonormalize", False)),
    )
    alphabet = vector_alphabet(build_constellation(kind, order), stats.n_tx)
    return stats, alphabet


def config_from_dict(data: dict, source: str = "<dict>") -> ExperimentConfig:
    """Build and validate an ExperimentConfig from a parsed mapping."""
    if not isinstance(data, dict):
        raise ConfigurationError(f"{source}: top level must be a mapping")
    _reject_unknown(data, _TOP_KEYS, source)
    try:
        user_entries = data["users"]
    except KeyError:
        raise ConfigurationError(f"{source}: missing 'users' list") from None
    if not isinstance(user_entries, list) or not user_entries:
        raise ConfigurationError(f"{source}: 'users' must be a nonempty list")
    users, alphabets = [], []
    for i, entry in enumerate(user_entries):
        stats, alphabet = _user_from_dict(entry, i)
        users.append(stats)
        alphabets.append(alphabet)
    opt_kwargs = dict(data.get("optimizer", {}))
    if "seed" in data and "seed" not in opt_kwargs:
        opt_kwargs["seed"] = int(data["seed"])
    try:
        optimizer = OptimizerConfig(**opt_kwargs)
        oracle = OracleConfig(**dict(data.get("oracle", {})))
    except TypeError as exc:
        raise ConfigurationError(f"{source}: {exc}") from exc
    output = dict(data.get("output", {}))
    _reject_unknown(output, _OUTPUT_KEYS, f"{source}: output")
    return ExperimentConfig(
        name=str(data.get("name", "experiment")),
        mode=str(data.get("mode", "optimize")),
        users=users,
        constellations=alphabets,
        snr_db=list(data.get("snr_db", [])),
        weights=[float(w) for w in data.get("weights", [1.0] * len(users))],
        optimizer=optimizer,
        oracle=oracle,
        seed=int(data.get("seed", 0)),
        out_dir=str(output.get("dir", "results")),
        csv_name=str(output.get("csv", "sweep.csv")),
        precoders_path=data.get("precoders"),
        raw=data,
    )


def load_config(path: str) -> ExperimentConfig:
    """Load a YAML experiment config from disk."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            data = yaml.safe_load(fh)
    except OSError as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ConfigurationError(f"cannot parse config {path}: {exc}") from exc
    return config_from_dict(data, source=path)


@dataclass(frozen=True)
class McMiResult:
    """Monte Carlo exact mutual information with its standard error (bits)."""

    bits: float
    se: float
    n_channels: int
    n_noise: int


def mc_exact_mi(
    system: MacSystem,
    precoders: PrecoderSet,
    subset,
    n_channels: int,
    n_noise: int,
    seed: int,
    joint_cap: int = DEFAULT_JOINT_CAP,
) -> McMiResult:
    """Exact-enumeration Monte Carlo estimate of the subset sum rate.

    Conditioned on the complement users' symbols, the channel seen by
    the subset is the subset-only multiple access channel, so the joint
    alphabet of the subset is enumerated exactly while channels and
    noise are sampled.  The standard error comes from the spread of the
    per-channel conditional informations.
    """
    subset = tuple(int(t) for t in subset)
    if len(set(subset)) != len(subset) or not subset:
        raise ValidationError("subset must be nonempty without repeats")
    joint = 1
    for t in subset:
        joint *= system.alphabets[t].size
    if joint > joint_cap:
        raise SizeLimitError(
            f"joint alphabet holds {joint} vectors, above the cap {joint_cap}; "
            "use a smaller subset, alphabet or antenna count"
        )
    n_rx = system.users[subset[0]].n_rx
    draws = [
        sample_channel(system.users[t], n_channels, seed, tag=f"oracle-{t}")
        for t in subset
    ]
    noise = complex_normal(rng_for(seed, "oracle-noise"), (n_channels, n_noise, n_rx))
    values = np.empty(n_channels)
    for c in range(n_channels):
        points = np.zeros((1, n_rx), dtype=np.complex128)
        for t, h in zip(subset, draws):
            per_user = system.alphabets[t].vectors @ (
                h[c] @ precoders.matrices[t]
            ).T
            points = (points[:, None, :] + per_user[None, :, :]).reshape(-1, n_rx)
        values[c] = mi_from_points(points, noise[c])
    se = 0.0
    if n_channels > 1:
        se = float(np.std(values, ddof=1) / math.sqrt(n_channels))
    return McMiResult(
        bits=float(values.mean()), se=se, n_channels=n_channels, n_noise=n_noise
    )


def _build_id() -> str:
    env = os.environ.get("MACPRECODE_BUILD_ID")
    if env:
        return env
    try:
        out = subprocess.run(
            ["git", "rev-parse", "--short", "HEAD"],
            capture_output=True,
            text=True,
            timeout=2,
        )
        if out.returncode == 0:
            return out.stdout.strip()
    except OSError:
        pass
    return "unknown"


def save_precoders(path: str, precoders: PrecoderSet, provenance: dict | None = None):
    """Write a PrecoderSet as JSON with [re, im] entries and provenance."""
    doc = {
        "format": "macprecode-precoders",
        "version": 1,
        "n_users": precoders.n_users,
        "dims": [list(b.shape) for b in precoders.matrices],
        "powers": list(precoders.powers),
        "weights": list(precoders.weights),
        "matrices": [
            [[[float(v.real), float(v.imag)] for v in row] for row in b]
            for b in precoders.matrices
        ],
        "provenance": dict(provenance or {}),
    }
    doc["provenance"].setdefault("build_id", _build_id())
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=1)
        fh.write("\n")


def load_precoders(path: str) -> PrecoderSet:
    """Read a PrecoderSet back; power budget violations fail validation."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ConfigurationError(f"cannot read precoders {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigurationError(
            f"cannot parse precoders {path}: line {exc.lineno} column {exc.colno}: "
            f"{exc.msg}"
        ) from exc
    for key in ("matrices", "powers", "weights", "dims"):
        if key not in doc:
            raise ConfigurationError(f"{path}: missing field {key!r}")
    mats = []
    for i, (rows, dims) in enumerate(zip(doc["matrices"], doc["dims"])):
        b = _as_complex_matrix(rows, f"{path}: matrices[{i}]")
        if list(b.shape) != list(dims):
            raise ConfigurationError(
                f"{path}: matrices[{i}] has shape {list(b.shape)}, header says {dims}"
            )
        mats.append(b)
    try:
        return PrecoderSet(
            matrices=mats, powers=doc["powers"], weights=doc["weights"]
        )
    except ValidationError as exc:
        raise ConfigurationError(f"{path}: {exc}") from exc


@dataclass
class SweepRow:
    """One SNR point of a sweep; None marks a column the mode skips."""

    snr_db: float
    wsr_opt_bits: float | None = None
    wsr_np_bits: float | None = None
    mc_exact_bits: float | None = None
    mc_se_bits: float | None = None
    residual: float | None = None
    converged: bool | None = None
    seconds: float = 0.0

    def as_csv(self) -> list:
        def fmt(v):
            if v is None:
                return ""
            if isinstance(v, bool):
                return str(int(v))
            return "%.17g" % v

        return [fmt(getattr(self, c)) for c in CSV_COLUMNS]


def read_sweep_csv(path: str) -> list:
    """Parse a sweep CSV back into SweepRow objects."""
    rows = []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(line for line in fh if not line.startswith("#"))
        header = next(reader)
        if tuple(header) != CSV_COLUMNS:
            raise ConfigurationError(f"{path}: unexpected columns {header}")
        for rec in reader:
            vals = dict(zip(CSV_COLUMNS, rec))
            rows.append(
                SweepRow(
                    snr_db=float(vals["snr_db"]),
                    wsr_opt_bits=_opt_float(vals["wsr_opt_bits"]),
                    wsr_np_bits=_opt_float(vals["wsr_np_bits"]),
                    mc_exact_bits=_opt_float(vals["mc_exact_bits"]),
                    mc_se_bits=_opt_float(vals["mc_se_bits"]),
                    residual=_opt_float(vals["residual"]),
                    converged=(
                        None if vals["converged"] == "" else bool(int(vals["converged"]))
                    ),
                    seconds=float(vals["seconds"]),
                )
            )
    return rows


def _opt_float(text: str) -> float | None:
    return None if text == "" else float(text)


def table_counts(config: ExperimentConfig) -> dict:
    """Precoder-search alphabet sizes for the config's constellations."""
    orders = [a.base.order for a in config.constellations]
    n_tx = config.users[0].n_tx
    return {
        "orders": orders,
        "n_tx": n_tx,
        "statistical": search_space_size(orders, n_tx, "statistical"),
        "instantaneous": search_space_size(orders, n_tx, "instantaneous"),
    }


def _np_set(config: ExperimentConfig, powers) -> PrecoderSet:
    return PrecoderSet(
        matrices=[
            baseline_np(stats.n_tx, p) for stats, p in zip(config.users, powers)
        ],
        powers=list(powers),
        weights=list(config.weights),
    )


def _rescaled(precoders: PrecoderSet, powers, weights) -> PrecoderSet:
    mats = []
    for b, p in zip(precoders.matrices, powers):
        used = float(np.real(np.trace(b @ b.conj().T)))
        if used <= 0:
            raise ValidationError("cannot rescale a zero precoder")
        mats.append(b * np.sqrt(p / used))
    return PrecoderSet(matrices=mats, powers=list(powers), weights=list(weights))


def run_sweep(config: ExperimentConfig, progress=None) -> list:
    """Run the configured experiment over its SNR grid.

    Returns the list of SweepRow values; as side effects it appends each
    row to the CSV as soon as it is computed and stores the final
    precoders of every optimized point as JSON.  `progress`, when given,
    receives each completed SweepRow.
    """
    if config.mode == "count":
        counts = table_counts(config)
        log.info(
            "search space: statistical %d, instantaneous %d",
            counts["statistical"],
            counts["instantaneous"],
        )
        return []

    os.makedirs(config.out_dir, exist_ok=True)
    csv_path = os.path.join(config.out_dir, config.csv_name)
    system = config.system
    provenance = {
        "config_sha256": config.config_sha256(),
        "seed": config.seed,
        "name": config.name,
    }
    loaded = None
    if config.precoders_path:
        loaded = load_precoders(config.precoders_path)

    rows = []
    warm = None
    with open(csv_path, "w", encoding="utf-8", newline="") as fh:
        fh.write(_CSV_SCHEMA + "\n")
        writer = csv.writer(fh)
        writer.writerow(CSV_COLUMNS)
        fh.flush()
        for snr in config.snr_db:
            tic = time.perf_counter()
            powers = [snr_to_power(snr, stats) for stats in config.users]
            np_set = _np_set(config, powers)
            row = SweepRow(snr_db=snr)
            report_opts = config.optimizer.solve_options(
                config.optimizer.mc_report,
                _report_seed(config.seed, snr),
            )
            try:
                if config.mode in ("optimize", "sweep"):
                    best, trace = optimize(
                        system,
                        powers,
                        config.weights,
                        config.optimizer,
                        warm_start=warm,
                    )
                    warm = best
                    row.wsr_opt_bits = trace.best_wsr
                    row.wsr_np_bits = trace.baseline_report
                    row.converged = trace.converged
                    row.residual = trace.report_residual
                    _save_point(config, snr, best, provenance)
                    if config.mode == "sweep":
                        mc = mc_exact_mi(
                            system,
                            best,
                            range(system.n_users),
                            config.oracle.n_channels,
                            config.oracle.n_noise,
                            config.seed,
                            joint_cap=config.oracle.joint_cap,
                        )
                        row.mc_exact_bits = mc.bits
                        row.mc_se_bits = mc.se
                elif config.mode == "evaluate":
                    target = (
                        _rescaled(loaded, powers, config.weights)
                        if loaded is not None
                        else np_set
                    )
                    res = wsr_objective(system, target, report_opts)
                    row.wsr_opt_bits = res.value
                    row.wsr_np_bits = wsr_objective(system, np_set, report_opts).value
                    row.residual = _states_residual(res)
                    row.converged = _states_converged(res)
                elif config.mode == "oracle":
                    target = (
                        _rescaled(loaded, powers, config.weights)
                        if loaded is not None
                        else np_set
                    )
                    res = wsr_objective(system, target, report_opts)
                    row.wsr_np_bits = res.value
                    row.residual = _states_residual(res)
                    row.converged = _states_converged(res)
                    mc = mc_exact_mi(
                        system,
                        target,
                        range(system.n_users),
                        config.oracle.n_channels,
                        config.oracle.n_noise,
                        config.seed,
                        joint_cap=config.oracle.joint_cap,
                    )
                    row.mc_exact_bits = mc.bits
                    row.mc_se_bits = mc.se
            except (ValidationError, SizeLimitError) as exc:
                log.error("snr %.1f dB failed: %s", snr, exc)
                row.converged = False
            row.seconds = time.perf_counter() - tic
            writer.writerow(row.as_csv())
            fh.flush()
            rows.append(row)
            if progress is not None:
                progress(row)
    return rows


def _report_seed(seed: int, snr: float) -> int:
    return derived_int(seed, "sweep-report", "%.6f" % snr)


def _states_residual(res) -> float:
    vals = [s.residual for s in res.states if s is not None]
    return max(vals) if vals else 0.0


def _states_converged(res) -> bool:
    return all(s.converged for s in res.states if s is not None)


def _save_point(config: ExperimentConfig, snr: float, precoders, provenance):
    name = "precoders_snr_%+07.2fdB.json" % snr
    save_precoders(
        os.path.join(config.out_dir, name),
        precoders,
        provenance={**provenance, "snr_db": snr},
    )
