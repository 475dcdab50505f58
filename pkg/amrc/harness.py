"""Experiment driver: data ingestion, the prequential (test-then-train) loop
and results files.
"""
from pathlib import Path
import json
import logging
import time
import typing

import numpy as np
import pandas as pd

from amrc import __version__
from amrc.classifier import (
    deterministic_rule,
    predict_deterministic,
    predict_probs,
    randomized_rule,
    sample_label,
)
from amrc.config import DETERMINISTIC, ORACLE, RANDOMIZED, UNIDIM, RunConfig
from amrc.datagen import (
    INPUT_DIM,
    N_CLASSES,
    SyntheticConfig,
    draw_instances,
    synthetic_stream,
    true_error,
    true_tau,
)
from amrc.errors import AMRCError, IngestionError, StepError
from amrc.feature_map import (
    LINEAR,
    MEDIAN_HEURISTIC_SAMPLES,
    FeatureMap,
    InstanceMapConfig,
    subset_rows,
)
from amrc.guarantees import (
    AccumulatedBound,
    alpha,
    beta,
    deterministic_risk_bound,
    mistake_bound,
)
from amrc.optimizer import ClassifierState, optimize, oracle_minimax
from amrc.tracker import (
    TrackerState,
    UncertaintyModel,
    track_step,
    unidimensional_track_step,
)

logger = logging.getLogger(__name__)

COLUMNS = [
    "t",
    "y_true",
    "y_rand",
    "y_det",
    "mistake_rand",
    "mistake_det",
    "R_U",
    "cum_rate_rand",
    "cum_rate_det",
    "cum_bound",
    "wall_time",
    "true_error",
    "true_error_det",
    "alpha",
    "beta",
    "r_inf",
]
_INT_COLUMNS = {"t", "y_true", "y_rand", "y_det", "mistake_rand", "mistake_det"}
_FLOAT_FORMAT = "%.17g"


class StepRecord:
    """Metrics of one prequential step. Columns of a rule that was not
    evaluated, and oracle columns outside checkpoints, are None.
    """

    def __init__(self, **fields: typing.Any) -> None:
        unknown = set(fields) - set(COLUMNS)
        if unknown:
            raise TypeError(f"Unknown StepRecord fields: {sorted(unknown)}")
        for name in COLUMNS:
            setattr(self, name, fields.get(name))

    def __repr__(self) -> str:
        return f"StepRecord(t={self.t}, y_true={self.y_true}, R_U={self.R_U!r})"

    def __eq__(self, other: typing.Any) -> bool:
        if not isinstance(other, StepRecord):
            return NotImplemented
        return self.as_dict() == other.as_dict()

    def as_dict(self) -> typing.Dict[str, typing.Any]:
        return {name: getattr(self, name) for name in COLUMNS}

    @classmethod
    def from_row(cls, row: typing.Mapping) -> "StepRecord":
        fields = {}
        for name in COLUMNS:
            value = row[name]
            if pd.isna(value):
                fields[name] = None
            elif name in _INT_COLUMNS:
                fields[name] = int(value)
            else:
                fields[name] = float(value)
        return cls(**fields)


class RunResult(list):
    """List of :class:`StepRecord` plus the run metadata the summary needs."""

    def __init__(
        self,
        records: typing.Iterable[StepRecord] = (),
        config: typing.Optional[RunConfig] = None,
        n_classes: typing.Optional[int] = None,
        m: typing.Optional[int] = None,
        max_cache_rows: int = 0,
    ) -> None:
        super().__init__(records)
        self.config = config
        self.n_classes = n_classes
        self.m = m
        self.max_cache_rows = max_cache_rows


class DataStream:
    """Time-ordered instances with labels mapped to 1..n_classes.

    :param instances: Array of shape (T, n_features).
    :param labels: 1-based labels of shape (T,).
    :param label_names: Original label of each index, in mapping order.
    """

    def __init__(
        self,
        instances: np.ndarray,
        labels: np.ndarray,
        label_names: typing.Sequence[typing.Any],
    ) -> None:
        self.instances = np.asarray(instances, dtype=float)
        self.labels = np.asarray(labels, dtype=int)
        self.label_names = list(label_names)

    def __repr__(self) -> str:
        return (
            f"DataStream(steps={len(self)}, n_features={self.n_features}, "
            f"n_classes={self.n_classes})"
        )

    def __len__(self) -> int:
        return self.labels.shape[0]

    def __iter__(self) -> typing.Iterator[typing.Tuple[np.ndarray, int]]:
        for x, y in zip(self.instances, self.labels):
            yield x, int(y)

    @property
    def n_features(self) -> int:
        return self.instances.shape[1]

    @property
    def n_classes(self) -> int:
        return len(self.label_names)


class OnlineStandardizer:
    """Standardizes each instance with the mean and standard deviation of the
    instances seen strictly before it. The first instance maps to zeros and
    features with zero spread are only centered.
    """

    def __init__(self, n_features: int) -> None:
        self.count = 0
        self.mean = np.zeros(n_features)
        self.m2 = np.zeros(n_features)

    def __repr__(self) -> str:
        return f"OnlineStandardizer(count={self.count})"

    def transform(self, x: np.ndarray) -> np.ndarray:
        if self.count == 0:
            out = np.zeros_like(self.mean)
        else:
            std = np.sqrt(self.m2 / self.count)
            out = (x - self.mean) / np.where(std > 0, std, 1.0)
        self.partial_fit(x)
        return out

    def partial_fit(self, x: np.ndarray) -> None:
        self.count += 1
        delta = x - self.mean
        self.mean = self.mean + delta / self.count
        self.m2 = self.m2 + delta * (x - self.mean)


def _label_column(frame: pd.DataFrame, label_column: typing.Any) -> str:
    if label_column is None:
        return frame.columns[-1]
    if label_column in frame.columns:
        return label_column
    if isinstance(label_column, int) or str(label_column).lstrip("-").isdigit():
        index = int(label_column)
        try:
            return frame.columns[index]
        except IndexError:
            pass
    raise IngestionError(f'Label column "{label_column}" not found')


def ingest_csv(
    path: typing.Union[str, Path],
    label_column: typing.Any = None,
    labels: typing.Optional[typing.Sequence[typing.Any]] = None,
) -> DataStream:
    """Reads a CSV with a header row. Every column except the label column
    must be numeric. Labels are mapped to 1..|Y| by first appearance, or by
    their position in ``labels`` when it is given.
    """
    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False)
    except FileNotFoundError:
        raise IngestionError(f"Data file {path} not found") from None
    except pd.errors.EmptyDataError:
        raise IngestionError(f"Data file {path} is empty") from None
    except pd.errors.ParserError as error:
        raise IngestionError(f"Data file {path} is malformed: {error}") from None
    except UnicodeDecodeError:
        raise IngestionError(f"Data file {path} is not UTF-8 text") from None
    label_name = _label_column(frame, label_column)
    feature_names = [name for name in frame.columns if name != label_name]
    if not feature_names:
        raise IngestionError("No feature columns")
    instances = np.empty((len(frame), len(feature_names)))
    for j, name in enumerate(feature_names):
        column = pd.to_numeric(frame[name].str.strip(), errors="coerce")
        bad = column.isna().to_numpy().nonzero()[0]
        if bad.size:
            row = int(bad[0])
            raise IngestionError(
                f'Non-numeric value {frame[name].iloc[row]!r} in column "{name}"',
                row=row,
            )
        instances[:, j] = column.to_numpy(dtype=float)
    raw_labels = frame[label_name].str.strip()
    if labels is not None:
        label_names = [str(label) for label in labels]
    else:
        label_names = [label for label in pd.unique(raw_labels) if label != ""]
    mapping = {label: index + 1 for index, label in enumerate(label_names)}
    mapped = raw_labels.map(mapping)
    unknown = mapped.isna().to_numpy().nonzero()[0]
    if unknown.size:
        row = int(unknown[0])
        raise IngestionError(f"Unknown label {raw_labels.iloc[row]!r}", row=row)
    if len(label_names) < 2:
        raise IngestionError("At least 2 labels are required")
    logger.info(
        f"Ingested {path}: {len(frame)} rows, {len(feature_names)} features, "
        f"{len(label_names)} labels"
    )
    return DataStream(instances, mapped.to_numpy(dtype=int), label_names)


def standardize_stream(stream: DataStream) -> DataStream:
    standardizer = OnlineStandardizer(stream.n_features)
    instances = np.array([standardizer.transform(x) for x in stream.instances])
    return DataStream(
        instances.reshape(stream.instances.shape), stream.labels, stream.label_names
    )


def synthetic_config(config: RunConfig) -> SyntheticConfig:
    return SyntheticConfig(
        omega=config["omega"],
        noise_std=config["noise_std"],
        steps=config["steps"],
        seed=config["seed"],
    )


def synthetic_data(cfg: SyntheticConfig) -> DataStream:
    pairs = list(synthetic_stream(cfg))
    return DataStream(
        np.array([x for x, _ in pairs]).reshape(-1, INPUT_DIM),
        np.array([y for _, y in pairs], dtype=int),
        list(range(1, N_CLASSES + 1)),
    )


def write_synthetic(cfg: SyntheticConfig, path: typing.Union[str, Path]) -> None:
    """Writes the synthetic stream as CSV with columns x1, x2, y."""
    data = synthetic_data(cfg)
    frame = pd.DataFrame(data.instances, columns=["x1", "x2"])
    frame["y"] = data.labels
    frame.to_csv(path, index=False, float_format=_FLOAT_FORMAT)
    logger.info(f"Wrote {len(frame)} synthetic rows to {path}")


def load_stream(config: RunConfig) -> DataStream:
    if config.is_synthetic:
        return synthetic_data(synthetic_config(config))
    stream = ingest_csv(config["dataset"], label_column=config["label_column"])
    return standardize_stream(stream) if config["standardize"] else stream


def build_feature_map(config: RunConfig, stream: DataStream) -> FeatureMap:
    if config.instance_map == LINEAR:
        instance_map = InstanceMapConfig.linear(stream.n_features)
    else:
        instance_map = InstanceMapConfig.rff(
            stream.n_features,
            rff_dim=config["rff_dim"],
            rff_scale=config["rff_scale"],
            seed=config["seed"],
            instances=stream.instances[:MEDIAN_HEURISTIC_SAMPLES],
        )
    return FeatureMap(instance_map, stream.n_classes, config["max_subset_size"])


def checkpoint_steps(steps: int, count: int) -> typing.Set[int]:
    """``count`` evenly spaced steps in 1..steps."""
    if count <= 0 or steps <= 0:
        return set()
    return {int(t) for t in np.linspace(1, steps, num=count).round()}


def _oracle_columns(
    config: RunConfig,
    syn: SyntheticConfig,
    fm: FeatureMap,
    t: int,
    clf: ClassifierState,
    uncertainty: UncertaintyModel,
    rng: np.random.Generator,
) -> typing.Dict[str, float]:
    tau_true = true_tau(syn, t, fm)
    columns: typing.Dict[str, float] = {}
    if RANDOMIZED in config.rules:
        rule = randomized_rule(fm, clf.mu, clf.cache)
        columns["true_error"] = true_error(syn, t, rule, config["trials"], rng)
    if DETERMINISTIC in config.rules:
        rule = deterministic_rule(fm, clf.mu)
        columns["true_error_det"] = true_error(syn, t, rule, config["trials"], rng)
    pool = draw_instances(syn, t, config["oracle_pool"], rng)
    rows = [subset_rows(fm, x) for x in pool]
    F_full = np.vstack([F for F, _ in rows])
    h_full = np.concatenate([h for _, h in rows])
    mu_inf, r_inf = oracle_minimax(tau_true, F_full, h_full, config["oracle_iters"])
    columns["r_inf"] = r_inf
    columns["alpha"] = alpha(tau_true, uncertainty.tau_hat, uncertainty.lam, clf.mu)
    columns["beta"] = beta(
        tau_true, uncertainty.tau_hat, uncertainty.lam, clf.mu, mu_inf
    )
    logger.info(
        f"Checkpoint {t}: R(U)={clf.minimax_risk:.4f}, R_inf={r_inf:.4f}, "
        f"error={columns.get('true_error', columns.get('true_error_det')):.4f}"
    )
    return columns


def run_online(
    config: RunConfig, stream: typing.Optional[DataStream] = None
) -> RunResult:
    """Prequential loop. At every step the label of x_t is predicted with the
    current parameters before y_t is revealed, then the uncertainty set and
    the parameters are updated with (x_t, y_t).
    """
    config.validate()
    if stream is None:
        stream = load_stream(config)
    fm = build_feature_map(config, stream)
    logger.info(f"Running {len(stream)} steps with {fm!r}")
    tracker = TrackerState(
        fm,
        order=config["order"],
        window=config["window"],
        process_noise=config["process_noise"],
        init_obs_noise=config["init_obs_noise"],
        forgetting=config["forgetting"],
        noise_floor=config["noise_floor"],
        noise_timing=config["noise_timing"],
        lambda_floor=config["lambda_floor"],
    )
    step_tracker = (
        unidimensional_track_step if config["mode"] == UNIDIM else track_step
    )
    clf = ClassifierState.initial(fm, config["cache"])
    uncertainty = UncertaintyModel(np.zeros(fm.m), np.zeros(fm.m))
    bound = AccumulatedBound(config["delta"])
    rules = config.rules
    sample_rng = np.random.default_rng([config["seed"], 1])
    oracle_rng = np.random.default_rng([config["seed"], 2])
    syn = synthetic_config(config) if config.is_synthetic else None
    oracle_lambda = config["lambda_mode"] == ORACLE
    checkpoints = checkpoint_steps(len(stream), config["checkpoints"])
    result = RunResult(config=config, n_classes=fm.n_classes, m=fm.m)
    mistakes = {RANDOMIZED: 0, DETERMINISTIC: 0}

    for t, (x, y) in enumerate(stream, start=1):
        started = time.perf_counter()
        try:
            predictions = {}
            if RANDOMIZED in rules:
                dist = predict_probs(fm, clf.mu, clf.cache.F, clf.cache.h, x)
                predictions[RANDOMIZED] = sample_label(dist, sample_rng)
            if DETERMINISTIC in rules:
                predictions[DETERMINISTIC] = predict_deterministic(fm, clf.mu, x)
            risk = clf.minimax_risk
            oracle = (
                _oracle_columns(config, syn, fm, t, clf, uncertainty, oracle_rng)
                if syn is not None and t in checkpoints
                else {}
            )
            # y_t is used only from here on
            uncertainty = step_tracker(tracker, x, y)
            if oracle_lambda:
                gap = np.abs(true_tau(syn, t + 1, fm) - uncertainty.tau_hat)
                uncertainty = UncertaintyModel(
                    uncertainty.tau_hat, np.maximum(uncertainty.lam, gap)
                )
            clf = optimize(
                fm,
                clf.mu,
                uncertainty.tau_hat,
                uncertainty.lam,
                x,
                clf.cache,
                config["iters"],
            )
        except (AMRCError, ArithmeticError, ValueError, np.linalg.LinAlgError) as error:
            raise StepError(t, error) from error
        result.max_cache_rows = max(result.max_cache_rows, clf.working_rows)
        fields: typing.Dict[str, typing.Any] = {"t": t, "y_true": y, "R_U": risk}
        for rule, suffix in ((RANDOMIZED, "rand"), (DETERMINISTIC, "det")):
            if rule in predictions:
                missed = int(predictions[rule] != y)
                mistakes[rule] += missed
                fields[f"y_{suffix}"] = predictions[rule]
                fields[f"mistake_{suffix}"] = missed
                fields[f"cum_rate_{suffix}"] = mistakes[rule] / t
        fields["cum_bound"] = bound.push(risk).cumulative_bound
        if config["record_timing"]:
            fields["wall_time"] = time.perf_counter() - started
        fields.update(oracle)
        result.append(StepRecord(**fields))
        logger.debug(f"Step {t}: y={y}, predictions={predictions}, R(U)={risk:.6g}")
    logger.info(
        f"Finished {len(result)} steps; peak working rows {result.max_cache_rows}"
    )
    return result


def summarize(
    records: typing.Sequence[StepRecord], config: typing.Optional[RunConfig] = None
) -> typing.Dict[str, typing.Any]:
    """Summary of a run; see the docs for the schema."""
    if config is None:
        config = getattr(records, "config", None) or RunConfig()
    steps = len(records)

    def error_pct(column: str) -> typing.Optional[float]:
        if not steps or getattr(records[0], column) is None:
            return None
        return 100.0 * sum(getattr(r, column) for r in records) / steps

    def count(column: str) -> typing.Optional[int]:
        if not steps or getattr(records[0], column) is None:
            return None
        return sum(getattr(r, column) for r in records)

    risks = [r.R_U for r in records]
    return {
        "T": steps,
        "n_classes": getattr(records, "n_classes", None),
        "m": getattr(records, "m", None),
        "error_rand_pct": error_pct("mistake_rand"),
        "error_det_pct": error_pct("mistake_det"),
        "mistakes_rand": count("mistake_rand"),
        "mistakes_det": count("mistake_det"),
        "bound_first": records[0].cum_bound if steps else None,
        "bound_final": records[-1].cum_bound if steps else None,
        "det_bound_final": (
            mistake_bound(
                [deterministic_risk_bound(risk) for risk in risks],
                config["delta"],
                per_step=True,
            )
            if steps
            else None
        ),
        "mean_risk": float(np.mean(risks)) if steps else None,
        "max_cache_rows": getattr(records, "max_cache_rows", None),
        "config": dict(config),
        "seed": config["seed"],
        "version": __version__,
    }


def emit_results(
    records: typing.Sequence[StepRecord],
    path: typing.Union[str, Path],
    config: typing.Optional[RunConfig] = None,
) -> typing.Tuple[Path, Path]:
    """Writes the records to ``path`` as CSV and the summary next to it with
    a .json suffix. Returns both paths.
    """
    csv_path = Path(path)
    json_path = csv_path.with_suffix(".json")
    frame = pd.DataFrame([r.as_dict() for r in records], columns=COLUMNS)
    frame.to_csv(csv_path, index=False, float_format=_FLOAT_FORMAT)
    with json_path.open("w", encoding="utf-8") as fp:
        json.dump(summarize(records, config), fp, indent=2)
    logger.info(f"Wrote {len(records)} records to {csv_path} and {json_path}")
    return csv_path, json_path


def load_results(path: typing.Union[str, Path]) -> typing.List[StepRecord]:
    frame = pd.read_csv(path, float_precision="round_trip")
    missing = set(COLUMNS) - set(frame.columns)
    if missing:
        raise IngestionError(f"Results file lacks columns {sorted(missing)}")
    return [StepRecord.from_row(row) for row in frame.to_dict("records")]
