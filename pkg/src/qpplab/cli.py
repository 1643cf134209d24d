"""Batch command-line front-end.

Subcommands: evaluate, predict, detect, analyze, synth. Every option can
live in a JSON config file (--config) and be overridden by a flag, so an
experiment is reproducible from its manifest. Exit codes: 0 ok, 2 data
parse error, 3 config error, 4 infeasible analysis. Set QPPLAB_LOG to
debug/info/warning for verbosity.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import re
import sys
from dataclasses import dataclass, field
from pathlib import Path

from . import analysis, effectiveness, outliers, predictors, synthetic, trec_io
from .matrix import QueryFeatureMatrix

EXIT_OK = 0
EXIT_PARSE_ERROR = 2
EXIT_CONFIG_ERROR = 3
EXIT_INFEASIBLE = 4

log = logging.getLogger("qpplab")


class ConfigError(Exception):
    pass


@dataclass
class AnalysisConfig:
    run: Path | None = None
    feedback_run: Path | None = None
    qrels: Path | None = None
    topics: Path | None = None
    topics_format: str = "tab"
    feature_files: dict[str, Path] = field(default_factory=dict)
    corpus_scores: Path | None = None
    matrix: Path | None = None
    effectiveness: Path | None = None
    metric: str = "ap"
    cutoff: int = 1000
    ndcg_gain: str = "linear"
    alpha: float = 0.95
    method: str = "trc"
    cutoff_family: str = "f"
    out: Path = Path("qpplab-out")
    seed: int = 1
    synth_n: int = 100
    synth_m: int = 4
    synth_noise: float = 0.1
    synth_contamination: float = 0.15
    synth_corrupt_noise: float = 1.0
    predictor_specs: list[predictors.PredictorSpec] = field(default_factory=list)
    predictor_defaults: predictors.PredictorConfig = field(
        default_factory=predictors.PredictorConfig
    )

    def validate(self) -> None:
        if not 0.0 < self.alpha < 1.0:
            raise ConfigError(f"alpha must lie in (0, 1), got {self.alpha}")
        if self.metric not in ("ap", "ndcg"):
            raise ConfigError(f"metric must be 'ap' or 'ndcg', got {self.metric!r}")
        if self.cutoff < 1:
            raise ConfigError(f"cutoff must be >= 1, got {self.cutoff}")
        if self.method not in outliers.METHODS:
            raise ConfigError(f"method must be one of {outliers.METHODS}, got {self.method!r}")
        if self.cutoff_family not in outliers.CUTOFF_FAMILIES:
            raise ConfigError(
                f"cutoff-family must be one of {outliers.CUTOFF_FAMILIES}, "
                f"got {self.cutoff_family!r}"
            )
        if self.ndcg_gain not in ("linear", "exponential"):
            raise ConfigError(f"ndcg_gain must be linear or exponential, got {self.ndcg_gain!r}")
        if self.topics_format not in ("tab", "colon"):
            raise ConfigError(f"topics_format must be tab or colon, got {self.topics_format!r}")
        for label, path in self._referenced_paths():
            if path is not None and not Path(path).exists():
                raise ConfigError(f"{label} path does not exist: {path}")

    def _referenced_paths(self):
        yield "run", self.run
        yield "feedback_run", self.feedback_run
        yield "qrels", self.qrels
        yield "topics", self.topics
        yield "corpus_scores", self.corpus_scores
        yield "matrix", self.matrix
        yield "effectiveness", self.effectiveness
        for key, path in self.feature_files.items():
            yield f"feature_files[{key}]", path


_CONFIG_PATH_KEYS = (
    "run", "feedback_run", "qrels", "topics", "corpus_scores", "matrix", "effectiveness",
)
_CONFIG_PLAIN_KEYS = (
    "topics_format", "metric", "cutoff", "ndcg_gain", "alpha", "method",
    "cutoff_family", "seed", "synth_n", "synth_m", "synth_noise",
    "synth_contamination", "synth_corrupt_noise",
)


def load_config(path: Path) -> AnalysisConfig:
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot load config {path}: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("config file must hold a JSON object")
    cfg = AnalysisConfig()
    known = set(_CONFIG_PATH_KEYS) | set(_CONFIG_PLAIN_KEYS) | {
        "out", "feature_files", "predictors", "predictor_defaults",
    }
    for key in raw:
        if key not in known:
            raise ConfigError(f"unknown config key {key!r}")
    for key in _CONFIG_PATH_KEYS:
        if raw.get(key) is not None:
            setattr(cfg, key, Path(raw[key]))
    for key in _CONFIG_PLAIN_KEYS:
        if raw.get(key) is not None:
            setattr(cfg, key, raw[key])
    if raw.get("out") is not None:
        cfg.out = Path(raw["out"])
    for key, value in (raw.get("feature_files") or {}).items():
        cfg.feature_files[key] = Path(value)
    try:
        if raw.get("predictor_defaults"):
            cfg.predictor_defaults = predictors.PredictorConfig(**raw["predictor_defaults"])
        cfg.predictor_specs = [
            predictors.PredictorSpec(**spec) for spec in raw.get("predictors", [])
        ]
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad predictor specification: {exc}") from exc
    return cfg


def _apply_overrides(cfg: AnalysisConfig, args: argparse.Namespace) -> None:
    for key in (
        "run", "feedback_run", "qrels", "topics", "corpus_scores", "matrix",
        "effectiveness", "out",
    ):
        value = getattr(args, key, None)
        if value is not None:
            setattr(cfg, key, Path(value))
    for key in _CONFIG_PLAIN_KEYS:
        value = getattr(args, key, None)
        if value is not None:
            setattr(cfg, key, value)


def _read_text(path: Path) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise trec_io.ParseError(0, f"cannot read {path}: {exc}") from exc


def _load_matrix(cfg: AnalysisConfig) -> QueryFeatureMatrix:
    if cfg.matrix is not None:
        return trec_io.read_matrix(_read_text(cfg.matrix))
    return _build_matrix(cfg)


def _build_matrix(cfg: AnalysisConfig) -> QueryFeatureMatrix:
    if cfg.run is None:
        raise ConfigError("building a predictor matrix requires a run file (--run)")
    if not cfg.predictor_specs:
        raise ConfigError("no predictor specs configured (config key 'predictors')")
    run = trec_io.parse_run(_read_text(cfg.run))
    kinds = {spec.kind for spec in cfg.predictor_specs}
    feedback_run = None
    if "qf" in kinds:
        if cfg.feedback_run is None:
            raise ConfigError("a qf predictor requires --feedback-run")
        feedback_run = trec_io.parse_run(_read_text(cfg.feedback_run))
    topics = None
    if "wig" in kinds:
        if cfg.topics is None:
            raise ConfigError("a wig predictor requires --topics")
        topics = trec_io.parse_topics(_read_text(cfg.topics), cfg.topics_format)
    tables = None
    if "letor" in kinds:
        if not cfg.feature_files:
            raise ConfigError("a letor predictor requires feature_files in the config")
        tables = {
            key: trec_io.parse_feature_file(_read_text(path))
            for key, path in cfg.feature_files.items()
        }
    corpus_scores = None
    if cfg.corpus_scores is not None:
        corpus_scores = trec_io.read_corpus_scores(_read_text(cfg.corpus_scores))
    try:
        return predictors.build_feature_matrix(
            cfg.predictor_defaults,
            run,
            cfg.predictor_specs,
            feedback_run=feedback_run,
            topics=topics,
            tables=tables,
            corpus_scores=corpus_scores,
        )
    except (ValueError, KeyError) as exc:
        raise ConfigError(str(exc)) from exc


def _load_effectiveness(cfg: AnalysisConfig) -> effectiveness.EffectivenessVector:
    if cfg.effectiveness is not None:
        return effectiveness.EffectivenessVector.from_csv(_read_text(cfg.effectiveness))
    if cfg.run is None or cfg.qrels is None:
        raise ConfigError("effectiveness needs either --effectiveness or --run and --qrels")
    run = trec_io.parse_run(_read_text(cfg.run))
    qrels = trec_io.parse_qrels(_read_text(cfg.qrels))
    if qrels.clamped_negative:
        log.warning("clamped %d negative qrels grades to 0", qrels.clamped_negative)
    return effectiveness.evaluate_run(
        run, qrels, cfg.metric, cfg.cutoff,
        exponential_gain=(cfg.ndcg_gain == "exponential"),
    )


def _detect(cfg: AnalysisConfig, matrix: QueryFeatureMatrix) -> outliers.OutlierReport:
    if cfg.method == "classical":
        return outliers.classical_detect(matrix, cfg.alpha, cfg.cutoff_family)
    if cfg.method == "trc":
        return outliers.trc_detect(matrix, cfg.alpha, cfg.cutoff_family)
    if matrix.n_predictors != 1:
        raise outliers.DetectionInfeasibleError(
            "method 'univariate' needs a single-column matrix; "
            f"this one has {matrix.n_predictors} predictors"
        )
    reduced, dropped = matrix.drop_missing_rows()
    report = outliers.univariate_detect(
        reduced.values[:, 0], cfg.alpha, cfg.cutoff_family,
        query_ids=list(reduced.query_ids),
    )
    report.dropped_query_ids = dropped
    return report


def _write(path: Path, content: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(content, encoding="utf-8")
    log.info("wrote %s", path)


def _safe_name(name: str) -> str:
    return re.sub(r"[^A-Za-z0-9_.-]", "_", name)


def cmd_evaluate(cfg: AnalysisConfig) -> int:
    if cfg.run is None or cfg.qrels is None:
        raise ConfigError("evaluate requires --run and --qrels")
    vector = _load_effectiveness(cfg)
    _write(cfg.out / "effectiveness.csv", vector.to_csv())
    print(
        f"evaluate: {vector.metric_name}@{vector.cutoff} "
        f"mean={vector.mean:.6f} over {len(vector.scores)} queries "
        f"({vector.run_only_queries} run-only skipped)"
    )
    return EXIT_OK


def cmd_predict(cfg: AnalysisConfig) -> int:
    matrix = _build_matrix(cfg)
    _write(cfg.out / "matrix.csv", trec_io.write_matrix(matrix))
    n_missing = int(matrix.missing_mask.sum())
    print(
        f"predict: {matrix.n_queries}x{matrix.n_predictors} matrix "
        f"({n_missing} missing cells)"
    )
    return EXIT_OK


def cmd_detect(cfg: AnalysisConfig) -> int:
    matrix = _load_matrix(cfg)
    report = _detect(cfg, matrix)
    _write(cfg.out / "outliers.csv", report.to_csv())
    print(
        f"detect: method={report.method} alpha={report.alpha} "
        f"flagged {report.n_flagged} of {len(report.query_ids)} queries"
    )
    return EXIT_OK


def cmd_analyze(cfg: AnalysisConfig) -> int:
    matrix = _load_matrix(cfg)
    vector = _load_effectiveness(cfg)
    report = _detect(cfg, matrix)
    uni = outliers.univariate_reports(matrix, cfg.alpha, cfg.cutoff_family)
    rows = analysis.correlation_table(matrix, vector, report, uni)
    _write(cfg.out / "outliers.csv", report.to_csv())
    _write(cfg.out / "correlation_table.csv", analysis.table_to_csv(rows))
    _write(cfg.out / "correlation_table.txt", analysis.table_to_text(rows))
    for name in matrix.predictor_names:
        scatter = analysis.scatter_report(matrix, name, vector, report)
        base = f"scatter_{_safe_name(name)}"
        _write(cfg.out / f"{base}.csv", analysis.scatter_to_csv(scatter))
        _write(cfg.out / f"{base}.svg", analysis.scatter_to_svg(scatter))
    print(
        f"analyze: {report.n_flagged} outliers of {len(report.query_ids)} queries; "
        f"table and {matrix.n_predictors} scatter pairs in {cfg.out}"
    )
    return EXIT_OK


def cmd_synth(cfg: AnalysisConfig) -> int:
    try:
        scenario = synthetic.synth_qpp_scenario(
            cfg.synth_n, cfg.synth_m, cfg.synth_noise,
            cfg.synth_contamination, cfg.synth_corrupt_noise, cfg.seed,
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    _write(cfg.out / "matrix.csv", trec_io.write_matrix(scenario.matrix))
    _write(cfg.out / "truth.csv", synthetic.truth_to_csv(scenario))
    _write(cfg.out / "effectiveness.csv", scenario.effectiveness.to_csv())
    print(
        f"synth: seed={scenario.seed} {scenario.n}x{scenario.m} matrix, "
        f"{sum(scenario.truth_flags)} contaminated rows"
    )
    return EXIT_OK


_COMMANDS = {
    "evaluate": cmd_evaluate,
    "predict": cmd_predict,
    "detect": cmd_detect,
    "analyze": cmd_analyze,
    "synth": cmd_synth,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qpplab",
        description="Query-performance-prediction analysis over TREC-format files.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("evaluate", "per-query effectiveness (AP/nDCG) from a run and qrels"),
        ("predict", "build the query-by-predictor matrix"),
        ("detect", "flag hard-to-predict queries in a predictor matrix"),
        ("analyze", "correlation table, outlier report, and scatter plots"),
        ("synth", "generate a deterministic synthetic scenario"),
    ):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", type=Path, help="JSON config manifest")
        p.add_argument("--run", type=Path, help="TREC run file")
        p.add_argument("--feedback-run", dest="feedback_run", type=Path)
        p.add_argument("--qrels", type=Path, help="TREC qrels file")
        p.add_argument("--topics", type=Path, help="flat qid/text topic file")
        p.add_argument("--topics-format", dest="topics_format", choices=("tab", "colon"))
        p.add_argument("--corpus-scores", dest="corpus_scores", type=Path)
        p.add_argument("--matrix", type=Path, help="predictor matrix CSV")
        p.add_argument("--effectiveness", type=Path, help="effectiveness CSV")
        p.add_argument("--metric", choices=("ap", "ndcg"))
        p.add_argument("--cutoff", type=int, help="metric rank cutoff")
        p.add_argument("--ndcg-gain", dest="ndcg_gain", choices=("linear", "exponential"))
        p.add_argument("--alpha", type=float, help="detection level (default 0.95)")
        p.add_argument("--method", choices=outliers.METHODS)
        p.add_argument(
            "--cutoff-family", dest="cutoff_family", choices=outliers.CUTOFF_FAMILIES
        )
        p.add_argument("--out", type=Path, help="output directory")
        p.add_argument("--seed", type=int, help="synthetic generator seed")
        if name == "synth":
            p.add_argument("--n", dest="synth_n", type=int)
            p.add_argument("--m", dest="synth_m", type=int)
            p.add_argument("--noise", dest="synth_noise", type=float)
            p.add_argument("--contamination", dest="synth_contamination", type=float)
            p.add_argument("--corrupt-noise", dest="synth_corrupt_noise", type=float)
    return parser


def _setup_logging() -> None:
    level_name = os.environ.get("QPPLAB_LOG", "warning").lower()
    level = {"debug": logging.DEBUG, "info": logging.INFO}.get(level_name, logging.WARNING)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")


def main(argv: list[str] | None = None) -> int:
    _setup_logging()
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args.config) if args.config else AnalysisConfig()
        _apply_overrides(cfg, args)
        cfg.validate()
        return _COMMANDS[args.command](cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG_ERROR
    except trec_io.ParseError as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return EXIT_PARSE_ERROR
    except outliers.DetectionError as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE


if __name__ == "__main__":
    sys.exit(main())
