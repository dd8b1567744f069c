"""Configuration-driven orchestration: ingest, vintage, aggregate, transform,
fit, audit, render.

A run is described by a single JSON config (committed examples live under
``configs/`` and ``fixtures/``). Identical inputs produce byte-identical
outputs: iteration order is fixed by the config, result files carry no
timestamps, and JSON is written with sorted keys.
"""

from __future__ import annotations

import csv
import json
import math
from contextlib import contextmanager
from dataclasses import dataclass, field
from datetime import date, datetime, timedelta, timezone
from pathlib import Path

from .errors import ConfigError, DataError, EstimationError
from .months import (
    add_months,
    format_month,
    format_timestamp,
    parse_month,
    parse_timestamp,
)
from .rdd_local_poly import DEFAULT_BANDWIDTH_SAMPLE, RddSpec, rd_estimate
from .replication_audit import ONE_MINUS_CORRELATION, coefficient_audit, search_vintage_date
from .series import LEVELS, LOG, MonthlySeries, SeriesMeta, read_series_csv
from .tables import render_tables
from .trade_ingest import (
    BUILTIN_CATEGORY_SETS,
    CategorySet,
    VintagePolicy,
    aggregate_series,
    apply_vintage,
    parse_records,
)
from .trend_break import (
    CounterfactualPath,
    TrendBreakFit,
    TrendBreakSpec,
    counterfactual_projection,
    feasibility_check,
    fit_trend_break,
    log_transform,
)


@dataclass(frozen=True)
class SeriesDef:
    label: str
    category_set: str


@dataclass(frozen=True)
class VintageDef:
    label: str
    cutoff: datetime | None  # None means all records (latest data)


@dataclass(frozen=True)
class TrendSettings:
    cutoff_month: date
    pre_window: int = 28
    post_window: int = 29
    treat_cutoff_as_post: bool = True
    se_type: str = "classical"
    hac_lags: int | None = None
    horizon: int | None = None  # default: post_window - 1

    def to_spec(self, transform: str) -> TrendBreakSpec:
        return TrendBreakSpec(
            cutoff_month=self.cutoff_month,
            pre_window=self.pre_window,
            post_window=self.post_window,
            transform=transform,
            treat_cutoff_as_post=self.treat_cutoff_as_post,
            se_type=self.se_type,
            hac_lags=self.hac_lags,
        )

    @property
    def resolved_horizon(self) -> int:
        return self.post_window - 1 if self.horizon is None else self.horizon


@dataclass(frozen=True)
class RddSettings:
    cutoff_month: date
    estimands: tuple[str, ...] = ("level", "slope")
    kernel: str = "triangular"
    bandwidth: float | str = "mse_optimal"
    bandwidth_sample: tuple[date, date] = DEFAULT_BANDWIDTH_SAMPLE
    transform: str = LOG
    vintage: str = "latest"
    poly_order_level: int | None = None
    poly_order_slope: int | None = None
    pilot_factor: float = 1.5
    variance: str = "wls_residuals"

    def to_spec(self, estimand: str) -> RddSpec:
        order = self.poly_order_level if estimand == "level" else self.poly_order_slope
        return RddSpec(
            cutoff_month=self.cutoff_month,
            estimand=estimand,
            poly_order=order,
            kernel=self.kernel,
            bandwidth=self.bandwidth,
            bandwidth_sample=self.bandwidth_sample,
            pilot_factor=self.pilot_factor,
            variance=self.variance,
        )


@dataclass(frozen=True)
class SearchGrid:
    start: date = date(2020, 10, 1)
    end: date = date(2020, 12, 31)
    step_days: int = 7

    def candidates(self) -> list[datetime]:
        out = []
        day = self.start
        while day <= self.end:
            out.append(datetime(day.year, day.month, day.day, tzinfo=timezone.utc))
            day = day + timedelta(days=self.step_days)
        return out


@dataclass(frozen=True)
class AuditDef:
    label: str
    target_file: str
    series: str
    vintage: str
    metric: str = ONE_MINUS_CORRELATION
    search: SearchGrid | None = None


@dataclass(frozen=True)
class RunConfig:
    data_file: str
    series: tuple[SeriesDef, ...]
    vintages: tuple[VintageDef, ...]
    transforms: tuple[str, ...]
    trend: TrendSettings
    rdd: RddSettings | None = None
    audits: tuple[AuditDef, ...] = ()
    category_sets: dict[str, tuple[str, ...]] = field(default_factory=dict)
    panels: tuple[tuple[str, str], ...] | None = None  # (transform, vintage label)
    output_dir: str = "out"
    seed: int | None = None

    # -- construction -----------------------------------------------------

    @classmethod
    def from_dict(cls, raw: dict) -> "RunConfig":
        try:
            trend_raw = dict(raw["trend_break"])
            trend = TrendSettings(
                cutoff_month=parse_month(trend_raw.pop("cutoff_month")),
                **trend_raw,
            )
            rdd = None
            if raw.get("rdd") is not None:
                rdd_raw = dict(raw["rdd"])
                sample = rdd_raw.pop("bandwidth_sample", None)
                rdd = RddSettings(
                    cutoff_month=parse_month(rdd_raw.pop("cutoff_month")),
                    estimands=tuple(rdd_raw.pop("estimands", ("level", "slope"))),
                    bandwidth_sample=(
                        (parse_month(sample[0]), parse_month(sample[1]))
                        if sample
                        else DEFAULT_BANDWIDTH_SAMPLE
                    ),
                    **rdd_raw,
                )
            audits = []
            for a in raw.get("audits", ()):
                a = dict(a)
                search_raw = a.pop("search", None)
                search = None
                if search_raw is not None:
                    search = SearchGrid(
                        start=date.fromisoformat(search_raw.get("start", "2020-10-01")),
                        end=date.fromisoformat(search_raw.get("end", "2020-12-31")),
                        step_days=int(search_raw.get("step_days", 7)),
                    )
                audits.append(AuditDef(search=search, **a))
            return cls(
                data_file=raw["data_file"],
                series=tuple(SeriesDef(**s) for s in raw["series"]),
                vintages=tuple(
                    VintageDef(
                        label=v["label"],
                        cutoff=None if v.get("cutoff") is None else parse_timestamp(v["cutoff"]),
                    )
                    for v in raw["vintages"]
                ),
                transforms=tuple(raw.get("transforms", (LEVELS, LOG))),
                trend=trend,
                rdd=rdd,
                audits=tuple(audits),
                category_sets={
                    name: tuple(codes)
                    for name, codes in raw.get("category_sets", {}).items()
                },
                panels=(
                    tuple((p[0], p[1]) for p in raw["panels"])
                    if raw.get("panels") is not None
                    else None
                ),
                output_dir=raw.get("output_dir", "out"),
                seed=raw.get("seed"),
            )
        except (KeyError, TypeError, ValueError) as e:
            raise ConfigError(f"invalid config: {e}") from e

    def to_dict(self) -> dict:
        out: dict = {
            "data_file": self.data_file,
            "series": [{"label": s.label, "category_set": s.category_set} for s in self.series],
            "vintages": [
                {
                    "label": v.label,
                    "cutoff": None if v.cutoff is None else format_timestamp(v.cutoff),
                }
                for v in self.vintages
            ],
            "transforms": list(self.transforms),
            "trend_break": {
                "cutoff_month": format_month(self.trend.cutoff_month),
                "pre_window": self.trend.pre_window,
                "post_window": self.trend.post_window,
                "treat_cutoff_as_post": self.trend.treat_cutoff_as_post,
                "se_type": self.trend.se_type,
                "hac_lags": self.trend.hac_lags,
                "horizon": self.trend.horizon,
            },
            "rdd": None,
            "audits": [],
            "category_sets": {k: list(v) for k, v in self.category_sets.items()},
            "panels": None if self.panels is None else [list(p) for p in self.panels],
            "output_dir": self.output_dir,
            "seed": self.seed,
        }
        if self.rdd is not None:
            out["rdd"] = {
                "cutoff_month": format_month(self.rdd.cutoff_month),
                "estimands": list(self.rdd.estimands),
                "kernel": self.rdd.kernel,
                "bandwidth": self.rdd.bandwidth,
                "bandwidth_sample": [
                    format_month(self.rdd.bandwidth_sample[0]),
                    format_month(self.rdd.bandwidth_sample[1]),
                ],
                "transform": self.rdd.transform,
                "vintage": self.rdd.vintage,
                "poly_order_level": self.rdd.poly_order_level,
                "poly_order_slope": self.rdd.poly_order_slope,
                "pilot_factor": self.rdd.pilot_factor,
                "variance": self.rdd.variance,
            }
        for a in self.audits:
            entry: dict = {
                "label": a.label,
                "target_file": a.target_file,
                "series": a.series,
                "vintage": a.vintage,
                "metric": a.metric,
                "search": None,
            }
            if a.search is not None:
                entry["search"] = {
                    "start": a.search.start.isoformat(),
                    "end": a.search.end.isoformat(),
                    "step_days": a.search.step_days,
                }
            out["audits"].append(entry)
        return out

    # -- validation --------------------------------------------------------

    def resolve_category_set(self, name: str) -> CategorySet:
        if name in self.category_sets:
            return CategorySet(name, frozenset(self.category_sets[name]))
        if name in BUILTIN_CATEGORY_SETS:
            return BUILTIN_CATEGORY_SETS[name]
        raise ConfigError(f"unknown category set: {name!r}")

    def validate(self, base_dir: Path) -> None:
        if not self.series:
            raise ConfigError("config.series must not be empty")
        if not self.vintages:
            raise ConfigError("config.vintages must not be empty")
        if not self.transforms:
            raise ConfigError("config.transforms must not be empty")
        for tr in self.transforms:
            if tr not in (LEVELS, LOG):
                raise ConfigError(f"unknown transform: {tr!r}")
        labels = [s.label for s in self.series]
        if len(set(labels)) != len(labels):
            raise ConfigError("series labels must be unique")
        vlabels = [v.label for v in self.vintages]
        if len(set(vlabels)) != len(vlabels):
            raise ConfigError("vintage labels must be unique")
        if not (base_dir / self.data_file).exists():
            raise ConfigError(f"data file not found: {self.data_file}")
        for s in self.series:
            try:
                self.resolve_category_set(s.category_set)
            except ValueError as e:
                raise ConfigError(str(e)) from e
        for transform, vintage in self.resolved_panels():
            if transform not in self.transforms:
                raise ConfigError(f"panel transform {transform!r} not in transforms")
            if vintage not in vlabels:
                raise ConfigError(f"panel vintage {vintage!r} not declared")
        if self.rdd is not None:
            if self.rdd.vintage not in vlabels:
                raise ConfigError(f"rdd vintage {self.rdd.vintage!r} not declared")
            if self.rdd.transform not in (LEVELS, LOG):
                raise ConfigError(f"unknown rdd transform: {self.rdd.transform!r}")
        for a in self.audits:
            if a.series not in labels:
                raise ConfigError(f"audit {a.label!r} references unknown series {a.series!r}")
            if a.vintage not in vlabels:
                raise ConfigError(f"audit {a.label!r} references unknown vintage {a.vintage!r}")
            if not (base_dir / a.target_file).exists():
                raise ConfigError(f"audit target not found: {a.target_file}")

    def resolved_panels(self) -> tuple[tuple[str, str], ...]:
        if self.panels is not None:
            return self.panels
        return tuple(
            (tr, v.label) for tr in self.transforms for v in self.vintages
        )


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except OSError as e:
        raise ConfigError(f"cannot read config: {e}") from e
    except json.JSONDecodeError as e:
        raise ConfigError(f"config is not valid JSON: {e}") from e
    return RunConfig.from_dict(raw)


# -- execution --------------------------------------------------------------


@contextmanager
def _stage(stage: str, label: str = ""):
    where = f"{stage}:{label}" if label else stage
    try:
        yield
    except ConfigError as e:
        raise ConfigError(f"[{where}] {e}") from e
    except DataError as e:
        raise DataError(f"[{where}] {e}") from e
    except EstimationError as e:
        raise EstimationError(f"[{where}] {e}") from e
    except OSError as e:
        raise DataError(f"[{where}] {e}") from e


def _jsonify(value):
    if isinstance(value, dict):
        return {k: _jsonify(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonify(v) for v in value]
    if isinstance(value, float):
        return value if math.isfinite(value) else None
    if hasattr(value, "item") and not isinstance(value, (str, bytes)):
        return _jsonify(value.item())
    return value


def _trend_record(
    label: str,
    transform: str,
    vintage: str,
    fit: TrendBreakFit,
    path: CounterfactualPath,
) -> dict:
    names = ("alpha0", "alpha1", "alpha2", "alpha3")
    feasibility = None
    crossing = None
    if transform == LEVELS:
        check = feasibility_check(path)
        feasibility = check.feasible
        crossing = (
            None
            if check.infeasible_at_month is None
            else format_month(check.infeasible_at_month)
        )
    return {
        "series": label,
        "transform": transform,
        "vintage": vintage,
        "coef": dict(zip(names, fit.coefficients)),
        "se": dict(zip(names, fit.se)),
        "t": dict(zip(names, fit.t_stats)),
        "p": dict(zip(names, fit.p_values)),
        "r_squared": fit.r_squared,
        "n_pre": fit.n_pre,
        "n_post": fit.n_post,
        "n": fit.n,
        "counterfactual_end": path.values[-1],
        "counterfactual_end_month": format_month(path.months[-1]),
        "feasible": feasibility,
        "zero_crossing_month": crossing,
    }


def export_figure_data(
    fit: TrendBreakFit,
    counterfactual: CounterfactualPath,
    series: MonthlySeries,
    path,
) -> None:
    """Write month, observed, fitted_pre, fitted_post, counterfactual columns.

    One row per month in the fit window union the projection horizon. The
    series must be in the same transform the fit was run on.
    """
    spec = fit.spec
    horizon = len(counterfactual.values) - 1
    t_end = max(spec.post_window - 1, horizon)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["month", "observed", "fitted_pre", "fitted_post", "counterfactual"])
        for t in range(-spec.pre_window, t_end + 1):
            month = add_months(spec.cutoff_month, t)
            observed = ""
            if series.covers(month, month):
                v = series.value_at(month)
                observed = "" if v is None else repr(float(v))
            fitted_pre = ""
            fitted_post = ""
            if t <= spec.post_window - 1:
                if fit.spec.indicator(t) == 0:
                    fitted_pre = repr(fit.alpha0 + fit.alpha2 * t)
                else:
                    fitted_post = repr(
                        (fit.alpha0 + fit.alpha1) + (fit.alpha2 + fit.alpha3) * t
                    )
            cf = ""
            if 0 <= t <= horizon:
                cf = repr(counterfactual.values[t])
            writer.writerow([format_month(month), observed, fitted_pre, fitted_post, cf])


def _aggregation_span(config: RunConfig) -> tuple[date, date]:
    starts = [add_months(config.trend.cutoff_month, -config.trend.pre_window)]
    ends = [add_months(config.trend.cutoff_month, config.trend.post_window - 1)]
    if config.rdd is not None:
        starts.append(config.rdd.bandwidth_sample[0])
        ends.append(config.rdd.bandwidth_sample[1])
    return min(starts), max(ends)


def _build_series(config: RunConfig, records) -> dict[tuple[str, str], MonthlySeries]:
    """Aggregated levels series for every (series label, vintage label)."""
    span = _aggregation_span(config)
    out: dict[tuple[str, str], MonthlySeries] = {}
    for vintage in config.vintages:
        if vintage.cutoff is None:
            kept = records
        else:
            kept = apply_vintage(records, VintagePolicy(cutoff_instant=vintage.cutoff))
        for sdef in config.series:
            with _stage("aggregate", f"{sdef.label}/{vintage.label}"):
                cat = config.resolve_category_set(sdef.category_set)
                out[(sdef.label, vintage.label)] = aggregate_series(
                    kept,
                    cat,
                    span,
                    vintage_cutoff=vintage.cutoff,
                    label=sdef.label,
                )
    return out


def _transformed(series: MonthlySeries, transform: str) -> MonthlySeries:
    return log_transform(series) if transform == LOG else series


def run_audits(config: RunConfig, base_dir: Path, records, series_map) -> list[dict]:
    results = []
    for audit in config.audits:
        with _stage("audit", audit.label):
            target = read_series_csv(
                base_dir / audit.target_file,
                SeriesMeta(transform=LEVELS, label=audit.label),
            )
            reconstructed = series_map[(audit.series, audit.vintage)]
            spec = config.trend.to_spec(LEVELS)
            paired = coefficient_audit(target, reconstructed, spec)
            record = {
                "label": audit.label,
                "series": audit.series,
                "vintage": audit.vintage,
                "correlation": paired.comparison.correlation,
                "max_abs_diff": paired.comparison.max_abs_diff,
                "n_overlap": paired.comparison.n_overlap,
                "means": {
                    "extracted": {
                        "overall": paired.means_a.overall,
                        "pre": paired.means_a.pre,
                        "post": paired.means_a.post,
                    },
                    "reconstructed": {
                        "overall": paired.means_b.overall,
                        "pre": paired.means_b.pre,
                        "post": paired.means_b.post,
                    },
                },
                "coefficients": {
                    "extracted": _audit_coef(paired.fit_a),
                    "reconstructed": _audit_coef(paired.fit_b),
                },
                "vintage_search": None,
            }
            if audit.search is not None:
                cat = config.resolve_category_set(
                    next(s.category_set for s in config.series if s.label == audit.series)
                )
                search = search_vintage_date(
                    records,
                    target,
                    audit.search.candidates(),
                    cat,
                    metric=audit.metric,
                )
                record["vintage_search"] = {
                    "best": format_timestamp(search.best),
                    "metric": search.distance_metric,
                    "candidates": [
                        [format_timestamp(when), dist] for when, dist in search.candidates
                    ],
                }
            results.append(record)
    return results


def _audit_coef(fit: TrendBreakFit) -> dict:
    return {
        "alpha1": fit.alpha1,
        "alpha1_se": fit.se[1],
        "alpha1_p": fit.p_values[1],
        "alpha3": fit.alpha3,
        "alpha3_se": fit.se[3],
        "alpha3_p": fit.p_values[3],
    }


def run_pipeline(config: RunConfig, base_dir, out_dir=None) -> tuple[dict, Path]:
    """Execute every configured stage and write the result bundle.

    Returns the in-memory results plus the output directory. Output files:
    results.json, tables/*.txt, audit.csv (when audits are configured) and
    figures/<series>_<transform>_<vintage>.csv.
    """
    base_dir = Path(base_dir)
    with _stage("validate"):
        config.validate(base_dir)
    out_path = Path(out_dir) if out_dir is not None else base_dir / config.output_dir

    with _stage("ingest", config.data_file):
        records = parse_records(base_dir / config.data_file)

    series_map = _build_series(config, records)

    trend_records = []
    figure_jobs = []
    for sdef in config.series:
        for vintage in config.vintages:
            base = series_map[(sdef.label, vintage.label)]
            for transform in config.transforms:
                cell = f"{sdef.label}/{transform}/{vintage.label}"
                with _stage("trend_break", cell):
                    used = _transformed(base, transform)
                    fit = fit_trend_break(used, config.trend.to_spec(transform))
                    path = counterfactual_projection(fit, config.trend.resolved_horizon)
                    trend_records.append(
                        _trend_record(sdef.label, transform, vintage.label, fit, path)
                    )
                    figure_jobs.append((cell.replace("/", "_"), fit, path, used))

    rdd_records = []
    if config.rdd is not None:
        for sdef in config.series:
            base = series_map[(sdef.label, config.rdd.vintage)]
            used = _transformed(base, config.rdd.transform)
            for estimand in config.rdd.estimands:
                with _stage("rdd", f"{sdef.label}/{estimand}"):
                    fit = rd_estimate(used, config.rdd.to_spec(estimand))
                    rdd_records.append(
                        {
                            "series": sdef.label,
                            "transform": config.rdd.transform,
                            "vintage": config.rdd.vintage,
                            "estimand": estimand,
                            "tau": fit.tau,
                            "se_conventional": fit.se_conventional,
                            "tau_bc": fit.tau_bc,
                            "se_robust": fit.se_robust,
                            "ci_robust": list(fit.ci_robust),
                            "p_conventional": fit.p_conventional,
                            "p_robust": fit.p_robust,
                            "h_months": fit.h_used,
                            "b_months": fit.b_used,
                            "n_left": fit.n_left,
                            "n_right": fit.n_right,
                            "poly_order": fit.poly_order,
                            "kernel": fit.kernel,
                        }
                    )

    audit_records = run_audits(config, base_dir, records, series_map)

    results = {
        "config": config.to_dict(),
        "layout": {
            "series": [s.label for s in config.series],
            "panels": [list(p) for p in config.resolved_panels()],
        },
        "trend_break": trend_records,
        "rdd": rdd_records,
        "audit": audit_records,
    }

    with _stage("write", str(out_path)):
        _write_outputs(results, figure_jobs, out_path)
    return results, out_path


def _write_outputs(results: dict, figure_jobs, out_path: Path) -> None:
    out_path.mkdir(parents=True, exist_ok=True)
    (out_path / "tables").mkdir(exist_ok=True)
    (out_path / "figures").mkdir(exist_ok=True)

    payload = json.dumps(_jsonify(results), sort_keys=True, indent=2) + "\n"
    (out_path / "results.json").write_text(payload, encoding="utf-8")

    for name, text in render_tables(results).items():
        (out_path / "tables" / f"{name}.txt").write_text(text, encoding="utf-8")

    if results["audit"]:
        _write_audit_csv(results["audit"], out_path / "audit.csv")

    for stem, fit, path, used in figure_jobs:
        export_figure_data(fit, path, used, out_path / "figures" / f"{stem}.csv")


def _write_audit_csv(audit_records: list[dict], path: Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            [
                "label",
                "statistic",
                "extracted_value",
                "extracted_se",
                "reconstructed_value",
                "reconstructed_se",
            ]
        )
        for r in audit_records:
            ex, rc = r["coefficients"]["extracted"], r["coefficients"]["reconstructed"]
            mex, mrc = r["means"]["extracted"], r["means"]["reconstructed"]
            rows = [
                ("change_in_level", ex["alpha1"], ex["alpha1_se"], rc["alpha1"], rc["alpha1_se"]),
                ("change_in_slope", ex["alpha3"], ex["alpha3_se"], rc["alpha3"], rc["alpha3_se"]),
                ("average_level", mex["overall"], "", mrc["overall"], ""),
                ("pre_cutoff_mean", mex["pre"], "", mrc["pre"], ""),
                ("post_cutoff_mean", mex["post"], "", mrc["post"], ""),
                ("correlation", r["correlation"], "", "", ""),
            ]
            if r.get("vintage_search"):
                rows.append(("best_vintage", r["vintage_search"]["best"], "", "", ""))
            for statistic, a, a_se, b, b_se in rows:
                writer.writerow(
                    [
                        r["label"],
                        statistic,
                        _csv_num(a),
                        _csv_num(a_se),
                        _csv_num(b),
                        _csv_num(b_se),
                    ]
                )


def _csv_num(value) -> str:
    if value == "":
        return ""
    if isinstance(value, str):
        return value
    return repr(float(value))
