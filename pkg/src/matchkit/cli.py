"""Command-line interface: batch matching, precision evaluation, and the
service launcher.

Exit codes: 0 success, 1 runtime failure, 2 input error. Diagnostics go to
stderr; data goes to stdout or the requested output file.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from pathlib import Path
from typing import Any, Mapping, Sequence

from . import __version__
from .config import DEFAULT_CONFIG, EngineConfig
from .core import ingest_source, parse_target_schema
from .ensemble import GroundTruth, MatchSession, precision_at_k
from .errors import EmptyGroundTruth, MatchkitError

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_INPUT = 2


def _read_file(path: str) -> bytes:
    try:
        return Path(path).read_bytes()
    except OSError as exc:
        raise MatchkitError(f"cannot read {path}: {exc}") from exc


def _load_config(path: str | None) -> tuple[EngineConfig, dict[str, float]]:
    """Config file: engine keys plus an optional 'weights' object."""
    if path is None:
        return DEFAULT_CONFIG, {}
    try:
        doc = json.loads(Path(path).read_text("utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise MatchkitError(f"cannot load config {path}: {exc}") from exc
    if not isinstance(doc, dict):
        raise MatchkitError(f"config {path} must be a JSON object")
    weights = {str(k): float(v) for k, v in (doc.pop("weights", {}) or {}).items()}
    try:
        return DEFAULT_CONFIG.merged(doc), weights
    except ValueError as exc:
        raise MatchkitError(f"config {path}: {exc}") from exc


def _parse_weight_flags(flags: Sequence[str] | None) -> dict[str, float]:
    out: dict[str, float] = {}
    for flag in flags or ():
        if "=" not in flag:
            raise MatchkitError(f"--weight expects id=value, got {flag!r}")
        key, _, raw = flag.partition("=")
        try:
            out[key.strip()] = float(raw)
        except ValueError:
            raise MatchkitError(f"--weight {flag!r}: not a number") from None
    return out


def build_session(
    source_path: str,
    target_path: str,
    config: EngineConfig,
    weight_overrides: Mapping[str, float] | None = None,
    auto_accept_easy: bool = True,
) -> MatchSession:
    """The same pipeline the service runs on upload, for batch use."""
    if not auto_accept_easy:
        # Easy-match detection requires strictly exceeding both thresholds,
        # so 1.0 disables it outright.
        config = config.merged({"theta_name": 1.0, "theta_value": 1.0})
    source = ingest_source(_read_file(source_path), Path(source_path).stem)
    target = parse_target_schema(_read_file(target_path), Path(target_path).stem)
    session = MatchSession(source, target, config)
    if weight_overrides:
        unknown = set(weight_overrides) - set(session.weights.weights)
        if unknown:
            raise MatchkitError(f"unknown matcher ids in weights: {sorted(unknown)}")
        session.set_weights(dict(weight_overrides))
    return session


def cmd_match(args: argparse.Namespace) -> int:
    config, file_weights = _load_config(args.config)
    overrides: dict[str, Any] = {}
    if args.k is not None:
        overrides["top_k"] = args.k
    if args.theta_name is not None:
        overrides["theta_name"] = args.theta_name
    if args.theta_value is not None:
        overrides["theta_value"] = args.theta_value
    config = config.merged(overrides)

    session = build_session(
        args.source,
        args.target,
        config,
        weight_overrides={**file_weights, **_parse_weight_flags(args.weight)},
        auto_accept_easy=args.auto_accept_easy,
    )

    if args.accepted_only:
        from .service import export_csv, export_json

        payload_bytes = export_csv(session) if args.format == "csv" else export_json(session)
        payload = payload_bytes.decode("utf-8")
    else:
        matcher_ids = sorted(session.registry.ids())
        rows = [
            c
            for lst in session.candidates.values()
            for c in sorted(lst, key=lambda c: c.rank)
        ]
        if args.format == "csv":
            buf = io.StringIO()
            writer = csv.writer(buf, lineterminator="\n")
            writer.writerow(
                ["source_attribute", "target_attribute", "score", "rank", "status"]
                + [f"score__{mid}" for mid in matcher_ids]
            )
            for c in rows:
                writer.writerow(
                    [c.source, c.target, c.ensemble_score, c.rank, c.status.value]
                    + [c.per_matcher.get(mid, "") for mid in matcher_ids]
                )
            payload = buf.getvalue()
        else:
            doc = {
                "source": session.source.name,
                "target": session.target.name,
                "matchers": matcher_ids,
                "candidates": [c.to_dict() for c in rows],
            }
            payload = json.dumps(doc, indent=2, sort_keys=True) + "\n"

    if args.output:
        Path(args.output).write_text(payload, "utf-8")
    else:
        sys.stdout.write(payload)
    return EXIT_OK


def _load_predictions(path: str) -> tuple[dict[str, list[dict[str, Any]]], list[str]]:
    """Read a cmd_match output file (csv or json) into per-source rows."""
    data = _read_file(path).decode("utf-8")
    per_source: dict[str, list[dict[str, Any]]] = {}
    matcher_ids: set[str] = set()
    stripped = data.lstrip()
    if stripped.startswith("{"):
        doc = json.loads(data)
        matcher_ids.update(doc.get("matchers", []))
        for c in doc["candidates"]:
            per_source.setdefault(c["source"], []).append(
                {
                    "target": c["target"],
                    "score": float(c["ensemble_score"]),
                    "rank": int(c["rank"]),
                    "per_matcher": {k: float(v) for k, v in c["per_matcher"].items()},
                }
            )
    else:
        reader = csv.DictReader(io.StringIO(data))
        if reader.fieldnames is None:
            raise MatchkitError(f"{path}: empty predictions file")
        score_cols = [f for f in reader.fieldnames if f.startswith("score__")]
        matcher_ids.update(f[len("score__") :] for f in score_cols)
        for row in reader:
            per_matcher = {}
            for col in score_cols:
                if row.get(col):
                    per_matcher[col[len("score__") :]] = float(row[col])
            per_source.setdefault(row["source_attribute"], []).append(
                {
                    "target": row["target_attribute"],
                    "score": float(row["score"]),
                    "rank": int(row["rank"]),
                    "per_matcher": per_matcher,
                }
            )
    return per_source, sorted(matcher_ids)


_TRUTH_HEADERS = {"source", "target", "source_attribute", "target_attribute"}


def load_ground_truth(path: str) -> GroundTruth:
    text = _read_file(path).decode("utf-8")
    first = text.splitlines()[0] if text.splitlines() else ""
    delimiter = max((",", "\t", ";"), key=first.count)
    rows = [r for r in csv.reader(io.StringIO(text), delimiter=delimiter) if len(r) >= 2]
    if rows and rows[0][0].strip().lower() in _TRUTH_HEADERS:
        rows = rows[1:]
    pairs = [(r[0].strip(), r[1].strip()) for r in rows if r[0].strip() and r[1].strip()]
    if not pairs:
        raise EmptyGroundTruth(f"{path} contains no ground-truth pairs")
    return GroundTruth.from_pairs(pairs)


def evaluate_predictions(
    per_source: Mapping[str, list[dict[str, Any]]],
    matcher_ids: Sequence[str],
    truth: GroundTruth,
    ks: Sequence[int],
) -> dict[str, dict[int, float]]:
    """Precision@k for the ensemble ranking and each matcher's own ranking."""
    rankings: dict[str, dict[str, list[str]]] = {"ensemble": {}}
    for source, rows in per_source.items():
        rankings["ensemble"][source] = [
            r["target"] for r in sorted(rows, key=lambda r: r["rank"])
        ]
    for mid in matcher_ids:
        view: dict[str, list[str]] = {}
        for source, rows in per_source.items():
            ranked = sorted(rows, key=lambda r: (-r["per_matcher"].get(mid, 0.0), r["target"]))
            view[source] = [r["target"] for r in ranked]
        rankings[mid] = view
    return {
        name: {k: precision_at_k(view, truth, k) for k in ks}
        for name, view in rankings.items()
    }


def cmd_eval(args: argparse.Namespace) -> int:
    per_source, matcher_ids = _load_predictions(args.predictions)
    truth = load_ground_truth(args.truth)
    try:
        ks = [int(k) for k in args.k_list.split(",") if k.strip()]
    except ValueError:
        raise MatchkitError(f"--k-list {args.k_list!r}: expected comma-separated integers") from None
    if not ks:
        raise MatchkitError("--k-list is empty")

    table = evaluate_predictions(per_source, matcher_ids, truth, ks)

    names = ["ensemble"] + [m for m in sorted(table) if m != "ensemble"]
    width = max(len(n) for n in names) + 2
    header = "configuration".ljust(width) + "".join(f"P@{k}".rjust(10) for k in ks)
    lines = [header, "-" * len(header)]
    for name in names:
        lines.append(name.ljust(width) + "".join(f"{table[name][k]:10.4f}" for k in ks))
    sys.stdout.write("\n".join(lines) + "\n")

    if args.output:
        doc = {"k": ks, "precision": {n: {str(k): table[n][k] for k in ks} for n in names}}
        Path(args.output).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", "utf-8")
    return EXIT_OK


def cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    from .service import SessionStore, create_app

    host, _, port_text = args.address.rpartition(":")
    if not host or not port_text.isdigit():
        print(f"invalid --address {args.address!r}; expected host:port", file=sys.stderr)
        return EXIT_INPUT
    store = SessionStore(args.session_dir)
    app = create_app(store, ui_dir=args.ui_dir)
    try:
        uvicorn.run(app, host=host, port=int(port_text), log_level="warning")
    except (OSError, SystemExit) as exc:
        print(f"serve failed: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="matchkit", description=__doc__)
    parser.add_argument("--version", action="version", version=f"matchkit {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p_match = sub.add_parser("match", help="generate candidate matches for a source/target pair")
    p_match.add_argument("source", help="source table (csv/tsv)")
    p_match.add_argument("target", help="target schema (json) or table")
    p_match.add_argument("--k", type=int, default=None, help="candidates per source attribute")
    p_match.add_argument("--theta-name", type=float, default=None)
    p_match.add_argument("--theta-value", type=float, default=None)
    p_match.add_argument(
        "--weight",
        action="append",
        metavar="ID=VALUE",
        help="override a matcher weight (repeatable)",
    )
    p_match.add_argument("--config", default=None, help="JSON config file; flags win on conflict")
    p_match.add_argument(
        "--auto-accept-easy",
        action=argparse.BooleanOptionalAction,
        default=True,
        help="detect easy matches and mark unambiguous ones accepted",
    )
    p_match.add_argument("--accepted-only", action="store_true", help="emit only accepted matches")
    p_match.add_argument("--output", default=None, help="output path (default: stdout)")
    p_match.add_argument("--format", choices=["csv", "json"], default="csv")
    p_match.set_defaults(func=cmd_match)

    p_eval = sub.add_parser("eval", help="precision@k of predictions against ground truth")
    p_eval.add_argument("predictions", help="output of `matchkit match`")
    p_eval.add_argument("truth", help="two-column ground truth (source, target)")
    p_eval.add_argument("--k-list", default="10,20,40")
    p_eval.add_argument("--output", default=None, help="also write a JSON report here")
    p_eval.set_defaults(func=cmd_eval)

    p_serve = sub.add_parser("serve", help="run the HTTP curation service")
    p_serve.add_argument("--address", default="127.0.0.1:8425")
    p_serve.add_argument("--session-dir", default="./sessions")
    p_serve.add_argument("--ui-dir", default=None, help="static web UI directory to mount at /ui")
    p_serve.set_defaults(func=cmd_serve)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except MatchkitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except Exception as exc:  # pragma: no cover - defensive
        print(f"unexpected failure: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    raise SystemExit(main())
