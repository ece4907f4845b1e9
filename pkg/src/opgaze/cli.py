"""Command-line front end for the analysis pipeline.

Commands::

    opgaze validate  PATH...                 check session files, write a report
    opgaze analyze   PATH...                 full pipeline: units, hotspots, features, traces
    opgaze compare   FEATURES_DIR MANIFEST   earlier-vs-later feature deltas per operator pair
    opgaze correlate FEATURES_DIR RATINGS    feature-difficulty correlations per step
    opgaze synth                             generate a seeded synthetic cohort

Every command takes ``--config``, ``--out``, ``--jobs``, and ``--seed``.
Exit codes are a stable contract: 0 success, 1 input error, 2 empty
input, 3 partial failure.  All outputs are written atomically and are
byte-identical across reruns and ``--jobs`` values.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import csv
import dataclasses
import io
import json
import logging
import sys
from pathlib import Path
from typing import Mapping, Optional, Sequence, Union

from . import analysis, synth
from .analysis import CATEGORICAL_FEATURES, SCALAR_FEATURES
from .features import FeatureParams, build_distance_series, feature_vector
from .hotspot import ClusterParams, cluster_touches, extract_touches, touch_distribution, touch_distribution_plot_data
from .ingest import (
    ParseError,
    atomic_write_text,
    detect_format,
    load_ratings,
    load_step_labels,
    parse_session,
    validate_session,
)
from .segmentation import SegmentationParams, segment_units
from .session import FeatureVector, Hotspot, OperationUnit, Session

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_INPUT_ERROR = 1
EXIT_EMPTY = 2
EXIT_PARTIAL = 3

SESSION_SUFFIXES = (".jsonl", ".csv")
NON_SESSION_NAMES = frozenset({
    "ratings.csv", "features.csv", "units.csv", "hotspots.csv",
    "comparison.csv", "correlation.csv",
})

CLUSTER_KEYS = ("spatial_eps", "temporal_gap_max", "min_points")
SEGMENTATION_KEYS = ("touch_merge_gap", "min_operating", "hand_presence_debounce")
FEATURE_KEYS = ("sign_deadband", "lag_threshold", "search_freq_min", "early_shift_min")

FEATURES_HEADER = (
    ("session_id", "ou_index", "hotspot_id", "step_id")
    + SCALAR_FEATURES
    + CATEGORICAL_FEATURES
    + ("undefined_reasons",)
)
UNITS_HEADER = (
    "ou_index", "g_start", "g_end", "h_start", "h_end",
    "o_start", "o_end", "hotspot_id", "step_id",
)
HOTSPOTS_HEADER = ("id", "cx", "cy", "count", "first_t", "last_t")


class _Parser(argparse.ArgumentParser):
    """argparse exits with 2 on usage errors; our contract reserves 2 for
    empty input, so usage problems exit 1 (input error) instead."""

    def error(self, message: str):  # noqa: D102 - argparse override
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT_ERROR, f"{self.prog}: error: {message}\n")


def _cell(value: Union[None, float, int, str]) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _write_csv(path: Path, header: Sequence[str], rows: Sequence[Sequence[object]]) -> None:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_cell(v) for v in row])
    atomic_write_text(path, buf.getvalue())


def _write_json(path: Path, obj: object) -> None:
    atomic_write_text(path, json.dumps(obj, indent=2, sort_keys=True) + "\n")


# --- config ------------------------------------------------------------------

@dataclasses.dataclass(frozen=True)
class RunConfig:
    """Effective parameter set for a run; unknown keys are rejected."""

    cluster: ClusterParams
    segmentation: SegmentationParams
    features: FeatureParams

    def echo(self) -> dict:
        return {
            "cluster": {
                "spatial_eps": self.cluster.spatial_eps,
                "temporal_gap_max": self.cluster.temporal_gap_max,
                "min_points": self.cluster.min_points,
            },
            "segmentation": {
                "touch_merge_gap": self.segmentation.touch_merge_gap,
                "min_operating": self.segmentation.min_operating,
                "hand_presence_debounce": self.segmentation.hand_presence_debounce,
            },
            "features": {
                "sign_deadband": self.features.sign_deadband,
                "lag_threshold": self.features.lag_threshold,
                "search_freq_min": self.features.search_freq_min,
                "early_shift_min": self.features.early_shift_min,
                "min_operating_for_early_shift": self.features.min_operating_for_early_shift,
            },
        }


def _section(raw: Mapping[str, object], name: str, allowed: Sequence[str]) -> dict:
    data = raw.get(name, {})
    if not isinstance(data, dict):
        raise ValueError(f"config section {name!r} must be an object")
    unknown = set(data) - set(allowed)
    if unknown:
        raise ValueError(f"unknown {name} config keys: {sorted(unknown)}")
    return dict(data)


def load_config(path: Optional[str]) -> RunConfig:
    """Load the pipeline config file (JSON with cluster / segmentation /
    features sections); missing sections and keys fall back to defaults."""
    raw: dict = {}
    if path:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
        if not isinstance(raw, dict):
            raise ValueError("config must be a JSON object")
        unknown = set(raw) - {"cluster", "segmentation", "features"}
        if unknown:
            raise ValueError(f"unknown config sections: {sorted(unknown)}")
    return RunConfig(
        cluster=ClusterParams(**_section(raw, "cluster", CLUSTER_KEYS)),
        segmentation=SegmentationParams(**_section(raw, "segmentation", SEGMENTATION_KEYS)),
        features=FeatureParams(**_section(raw, "features", FEATURE_KEYS)),
    )


# --- input discovery ---------------------------------------------------------

def _is_session_file(path: Path) -> bool:
    if path.suffix not in SESSION_SUFFIXES:
        return False
    if path.name in NON_SESSION_NAMES or path.name.endswith(".steps.csv"):
        return False
    return True


def find_session_files(paths: Sequence[str]) -> list[Path]:
    """Expand files and directories into a sorted, deduplicated list of
    session files; sidecars and report files are skipped."""
    found: list[Path] = []
    for raw in paths:
        path = Path(raw)
        if path.is_dir():
            found.extend(p for p in path.rglob("*") if p.is_file() and _is_session_file(p))
        elif path.is_file():
            found.append(path)
        else:
            raise FileNotFoundError(f"no such file or directory: {raw}")
    unique = sorted(set(p.resolve() for p in found))
    return unique


def _load_session(path: Path) -> Session:
    sidecar = path.with_suffix(".steps.csv")
    labels = load_step_labels(sidecar) if sidecar.is_file() else None
    return parse_session(path, format=detect_format(path), step_labels=labels)


# --- validate ----------------------------------------------------------------

def cmd_validate(args: argparse.Namespace) -> int:
    files = find_session_files(args.paths)
    if not files:
        print("no sessions found", file=sys.stderr)
        return EXIT_EMPTY
    reports = []
    had_errors = False
    for path in files:
        try:
            session = _load_session(path)
        except ParseError as exc:
            had_errors = True
            print(str(exc), file=sys.stderr)
            reports.append({
                "source": str(path),
                "session_id": None,
                "errors": [[exc.line, str(exc)]],
                "warnings": [],
                "stats": {},
            })
            continue
        report = validate_session(session, expected_rate=args.expected_rate)
        entry = report.to_dict()
        entry["source"] = str(path)
        reports.append(entry)
        if report.errors:
            had_errors = True
        status = "OK" if report.ok else "ERRORS"
        print(f"{session.id}: {status} ({report.stats['frame_count']} frames, "
              f"{len(report.warnings)} warnings)")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _write_json(out / "validation_report.json", sorted(reports, key=lambda r: r["source"]))
    return EXIT_INPUT_ERROR if had_errors else EXIT_OK


# --- analyze -----------------------------------------------------------------

@dataclasses.dataclass(frozen=True)
class SessionResult:
    session: Session
    resolved_eps: float
    hotspots: tuple[Hotspot, ...]
    units: tuple[OperationUnit, ...]
    fvs: tuple[FeatureVector, ...]


def analyze_session(s: Session, config: RunConfig) -> SessionResult:
    """Run the full per-session pipeline in memory."""
    touches = extract_touches(s)
    params = config.cluster.resolve([s])
    hotspots = tuple(cluster_touches(touches, params))
    units = tuple(segment_units(s, config.segmentation, hotspots))
    fvs = tuple(
        feature_vector(
            s, ou,
            hotspots[ou.hotspot_id] if ou.hotspot_id is not None else None,
            config.features,
        )
        for ou in units
    )
    return SessionResult(
        session=s,
        resolved_eps=params.spatial_eps,
        hotspots=hotspots,
        units=units,
        fvs=fvs,
    )


def _feature_row(session_id: str, fv: FeatureVector) -> list[object]:
    scalars = analysis.scalar_features(fv)
    row: list[object] = [session_id, fv.ou_index, fv.hotspot_id, fv.step_id]
    row.extend(scalars[name] for name in SCALAR_FEATURES)
    row.append(fv.gaze_pattern)
    row.append(fv.shift_kind)
    row.append(";".join(f"{k}={v}" for k, v in sorted(fv.undefined.items())))
    return row


def _write_session_outputs(out_dir: Path, result: SessionResult) -> None:
    s = result.session
    sdir = out_dir / "sessions" / s.id
    (sdir / "traces").mkdir(parents=True, exist_ok=True)
    _write_csv(
        sdir / "units.csv",
        UNITS_HEADER,
        [
            [
                ou.index,
                ou.gazing.start, ou.gazing.end,
                ou.approaching.start, ou.approaching.end,
                ou.operating.start, ou.operating.end,
                ou.hotspot_id, ou.step_id,
            ]
            for ou in result.units
        ],
    )
    _write_csv(
        sdir / "hotspots.csv",
        HOTSPOTS_HEADER,
        [
            [h.id, h.centroid.x, h.centroid.y, h.touch_count, h.first_t, h.last_t]
            for h in result.hotspots
        ],
    )
    _write_csv(
        sdir / "features.csv",
        FEATURES_HEADER,
        [_feature_row(s.id, fv) for fv in result.fvs],
    )
    for ou in result.units:
        if ou.hotspot_id is None:
            continue
        hotspot = result.hotspots[ou.hotspot_id]
        series = {
            kind: build_distance_series(s, ou, hotspot, kind, "OU")
            for kind in ("AO", "HO", "AH")
        }
        by_t: dict[float, list[Optional[float]]] = {
            float(t): [None, None, None] for t in series["AO"].times
        }
        for col, kind in enumerate(("AO", "HO", "AH")):
            for t, v in zip(series[kind].times, series[kind].values):
                by_t.setdefault(float(t), [None, None, None])[col] = float(v)
        _write_csv(
            sdir / "traces" / f"{s.id}_{ou.index}.csv",
            ("t", "d_ao", "d_ho", "d_ah"),
            [[t] + by_t[t] for t in sorted(by_t)],
        )


def cmd_analyze(args: argparse.Namespace) -> int:
    config = load_config(args.config)
    files = find_session_files(args.paths)
    if not files:
        print("no sessions found", file=sys.stderr)
        return EXIT_EMPTY
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    def work(path: Path) -> SessionResult:
        return analyze_session(_load_session(path), config)

    results: dict[Path, SessionResult] = {}
    failures: dict[Path, str] = {}
    with concurrent.futures.ThreadPoolExecutor(max_workers=args.jobs) as pool:
        futures = {pool.submit(work, path): path for path in files}
        for future in concurrent.futures.as_completed(futures):
            path = futures[future]
            try:
                results[path] = future.result()
            except (ParseError, ValueError, OSError) as exc:
                failures[path] = str(exc)
                print(f"{path}: {exc}", file=sys.stderr)

    combined_rows: list[list[object]] = []
    summary_sessions = []
    for path in files:
        if path not in results:
            continue
        result = results[path]
        if not result.units:
            print(f"warning: session {result.session.id!r}: no operation units "
                  "(no touches, or all bouts dropped)", file=sys.stderr)
        _write_session_outputs(out, result)
        combined_rows.extend(_feature_row(result.session.id, fv) for fv in result.fvs)
        summary_sessions.append({
            "id": result.session.id,
            "source": str(path),
            "operator": result.session.operator,
            "ordinal": result.session.ordinal,
            "n_frames": len(result.session.frames),
            "n_units": len(result.units),
            "n_hotspots": len(result.hotspots),
            "resolved_spatial_eps": result.resolved_eps,
        })
    combined_rows.sort(key=lambda r: (r[0], r[1]))
    _write_csv(out / "features.csv", FEATURES_HEADER, combined_rows)
    _write_json(out / "config_used.json", config.echo())

    ok_sessions = [results[p].session for p in files if p in results]
    touching = sum(1 for s in ok_sessions for f in s.frames if f.touching)
    if touching:
        dist = touch_distribution(ok_sessions)
        _write_json(out / "touchdist.json", touch_distribution_plot_data(dist, ok_sessions))
    else:
        _write_json(out / "touchdist.json", {"touch_count": 0})
    _write_json(out / "summary.json", {
        "sessions": summary_sessions,
        "failures": [
            {"source": str(p), "error": failures[p]} for p in sorted(failures)
        ],
        "n_sessions_ok": len(results),
        "n_sessions_failed": len(failures),
    })
    if failures and results:
        return EXIT_PARTIAL
    if failures:
        return EXIT_INPUT_ERROR
    return EXIT_OK


# --- compare -----------------------------------------------------------------

def _read_features_csv(path: Path) -> list[dict[str, object]]:
    rows: list[dict[str, object]] = []
    with path.open("r", encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or set(FEATURES_HEADER) - set(reader.fieldnames):
            raise ParseError("not a features.csv (missing columns)", source=str(path))
        for raw in reader:
            row: dict[str, object] = {
                "session_id": raw["session_id"],
                "ou_index": int(raw["ou_index"]),
                "step_id": raw["step_id"] or None,
                "gaze_pattern": raw["gaze_pattern"],
                "shift_kind": raw["shift_kind"],
            }
            for name in SCALAR_FEATURES:
                cell = raw[name]
                row[name] = float(cell) if cell else None
            rows.append(row)
    return rows


def _features_path(arg: str) -> Path:
    path = Path(arg)
    if path.is_dir():
        path = path / "features.csv"
    if not path.is_file():
        raise FileNotFoundError(f"features file not found: {path}")
    return path


def _load_manifest(path: Path) -> list[dict[str, str]]:
    data = json.loads(path.read_text(encoding="utf-8"))
    pairs = data.get("pairs") if isinstance(data, dict) else None
    if not isinstance(pairs, list):
        raise ValueError(f"{path}: manifest must be an object with a 'pairs' list")
    for entry in pairs:
        if not isinstance(entry, dict) or {"operator", "earlier", "later"} - set(entry):
            raise ValueError(f"{path}: each pair needs operator, earlier, later")
    return pairs


def cmd_compare(args: argparse.Namespace) -> int:
    rows = _read_features_csv(_features_path(args.features))
    manifest = _load_manifest(Path(args.manifest))
    if not manifest:
        print("no pairs in manifest", file=sys.stderr)
        return EXIT_EMPTY
    by_session: dict[str, list[dict[str, object]]] = {}
    for row in rows:
        by_session.setdefault(str(row["session_id"]), []).append(row)

    pairs = []
    for entry in sorted(manifest, key=lambda e: e["operator"]):
        for key in ("earlier", "later"):
            if entry[key] not in by_session:
                print(f"manifest references missing session {entry[key]!r}", file=sys.stderr)
                return EXIT_INPUT_ERROR
        summaries = {}
        for key in ("earlier", "later"):
            srows = by_session[entry[key]]
            summaries[key] = analysis.summarize_rows(
                entry[key], entry["operator"], key,
                srows,  # type: ignore[arg-type]
                patterns=[str(r["gaze_pattern"]) for r in srows],
                kinds=[str(r["shift_kind"]) for r in srows],
            )
        pairs.append(analysis.SessionPair(earlier=summaries["earlier"], later=summaries["later"]))

    report = analysis.pairwise_comparison(pairs)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _write_csv(
        out / "comparison.csv",
        ("feature", "mean_delta_pct", "n_pairs", "n_later_smaller"),
        [[r.feature, r.mean_delta_pct, r.n_pairs, r.n_later_smaller] for r in report.rows],
    )
    _write_json(out / "comparison_plot.json", {
        "kind": "earlier_vs_later_bar",
        "n_pairs_total": report.n_pairs_total,
        "features": [r.feature for r in report.rows],
        "mean_delta_pct": [r.mean_delta_pct for r in report.rows],
        "n_pairs": [r.n_pairs for r in report.rows],
        "n_later_smaller": [r.n_later_smaller for r in report.rows],
        "per_pair_deltas_pct": {r.feature: list(r.deltas_pct) for r in report.rows},
    })
    return EXIT_OK


# --- correlate ---------------------------------------------------------------

def cmd_correlate(args: argparse.Namespace) -> int:
    rows = _read_features_csv(_features_path(args.features))
    ratings = load_ratings(Path(args.ratings))
    units = [
        (row["step_id"], {name: row[name] for name in SCALAR_FEATURES})
        for row in rows
    ]
    labeled = [u for u in units if u[0] is not None]
    if not labeled:
        print("no step-labeled units in features", file=sys.stderr)
        return EXIT_EMPTY
    report = analysis.difficulty_correlation(labeled, ratings)  # type: ignore[arg-type]
    if len(report.step_ids) < 3:
        logger.warning(
            "only %d step(s) shared between features and ratings; correlations undefined",
            len(report.step_ids),
        )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _write_csv(
        out / "correlation.csv",
        ("feature", "r_vs_difficulty", "r_vs_score", "n_steps"),
        [[r.feature, r.r_vs_difficulty, r.r_vs_score, r.n_steps] for r in report.rows],
    )
    by_role = {}
    for role in ("expert", "beginner"):
        try:
            role_report = analysis.difficulty_correlation(labeled, ratings, role=role)  # type: ignore[arg-type]
        except ValueError:
            continue  # a step without raters of this role
        by_role[role] = {
            r.feature: {"r_vs_difficulty": r.r_vs_difficulty, "r_vs_score": r.r_vs_score, "n_steps": r.n_steps}
            for r in role_report.rows
        }
    _write_json(out / "correlation_plot.json", {
        "kind": "difficulty_correlation_bar",
        "step_ids": list(report.step_ids),
        "features": [r.feature for r in report.rows],
        "r_vs_difficulty": [r.r_vs_difficulty for r in report.rows],
        "r_vs_score": [r.r_vs_score for r in report.rows],
        "n_steps": [r.n_steps for r in report.rows],
        "by_role": by_role,
    })
    return EXIT_OK


# --- synth -------------------------------------------------------------------

def cmd_synth(args: argparse.Namespace) -> int:
    raw: dict = {}
    if args.config:
        raw = json.loads(Path(args.config).read_text(encoding="utf-8"))
        if not isinstance(raw, dict):
            raise ValueError("synth spec must be a JSON object")
    spec = synth.cohort_spec_from_dict(raw, seed_override=args.seed)
    cohort = synth.generate_cohort(spec)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    synth.write_cohort(cohort, out, format=args.format)
    echo = dataclasses.asdict(spec)
    echo["injected"] = dict(spec.injected)
    echo["step_scores"] = list(spec.step_scores)
    _write_json(out / "synth_spec_used.json", echo)
    print(f"wrote {len(cohort.sessions)} sessions "
          f"({spec.n_pairs} pairs, {spec.n_steps} steps) to {out}")
    return EXIT_OK


# --- entry point -------------------------------------------------------------

def _add_common(p: argparse.ArgumentParser, out_default: str = "out") -> None:
    p.add_argument("--config", help="JSON config file")
    p.add_argument("--out", default=out_default, help="output directory (default: %(default)s)")
    p.add_argument("--jobs", type=int, default=1, help="parallel sessions (default: %(default)s)")
    p.add_argument("--seed", type=int, default=None, help="RNG seed where applicable")
    p.add_argument("--log-level", default="WARNING",
                   help="logging level (default: %(default)s)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="opgaze", description=__doc__,
                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("validate", help="check session files")
    p.add_argument("paths", nargs="+", help="session files or directories")
    p.add_argument("--expected-rate", type=float, default=None,
                   help="declared sample rate to check against (default: each header's)")
    _add_common(p)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("analyze", help="segment, cluster, and extract features")
    p.add_argument("paths", nargs="+", help="session files or directories")
    _add_common(p)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("compare", help="earlier-vs-later feature deltas")
    p.add_argument("features", help="analyze output directory or features.csv")
    p.add_argument("manifest", help="pairs.json manifest")
    _add_common(p)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("correlate", help="feature-difficulty correlations")
    p.add_argument("features", help="analyze output directory or features.csv")
    p.add_argument("ratings", help="ratings.csv")
    _add_common(p)
    p.set_defaults(func=cmd_correlate)

    p = sub.add_parser("synth", help="generate a synthetic cohort")
    p.add_argument("--format", choices=("jsonl", "csv"), default="jsonl",
                   help="session file format (default: %(default)s)")
    _add_common(p)
    p.set_defaults(func=cmd_synth)

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=args.log_level.upper(),
                        format="%(levelname)s %(name)s: %(message)s")
    if args.jobs is not None and args.jobs < 1:
        print("--jobs must be >= 1", file=sys.stderr)
        return EXIT_INPUT_ERROR
    try:
        return args.func(args)
    except (ParseError, FileNotFoundError, ValueError, json.JSONDecodeError) as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_INPUT_ERROR


if __name__ == "__main__":
    sys.exit(main())
