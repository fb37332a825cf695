"""HTTP API and session persistence.

Each session lives in its own directory: the uploaded inputs verbatim, the
config, an append-only mutation journal, and the agent memory log. State is
reconstructed by replaying the journal, which makes provenance the source of
truth and the on-disk format auditable.
"""

from __future__ import annotations

import csv
import io
import json
import threading
import uuid
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Mapping

from fastapi import FastAPI, File, Form, Request, UploadFile
from fastapi.responses import JSONResponse, Response

from . import __version__
from .agent import Agent, AgentContext, provider_from_env, MemoryStore, memory_key
from .config import DEFAULT_CONFIG, EngineConfig
from .core import (
    dataset_from_dict,
    dataset_to_dict,
    ingest_source,
    parse_target_schema,
    schema_from_dict,
    schema_to_dict,
)
from .ensemble import Candidate, CandidateStatus, MatchSession, score_pair
from .errors import (
    AgentTimeout,
    BadRequest,
    DuplicateAttribute,
    DuplicateMatcherId,
    EmptyGroundTruth,
    EmptySchema,
    InvalidTransition,
    InvalidWeight,
    MalformedModelResponse,
    MalformedTable,
    MatchkitError,
    ModelUnavailable,
    NothingToRedo,
    NothingToUndo,
    PayloadTooLarge,
    PluginFailed,
    SchemaParseError,
    UnknownCandidate,
    UnknownKey,
    UnknownSeq,
    UnknownSession,
)
from .provenance import EventKind, now_iso
from .semantics import compare_distributions, map_values, profile_from_values

ACCEPTED_STATUSES = {CandidateStatus.ACCEPTED, CandidateStatus.EASY_ACCEPTED}

EXPORT_KIND = "matchkit.session"
EXPORT_VERSION = 1


def canonical_json(obj: Any) -> bytes:
    return (json.dumps(obj, indent=2, sort_keys=True, ensure_ascii=False) + "\n").encode("utf-8")


def export_csv(session: MatchSession) -> bytes:
    """Accepted matches as CSV, sorted by source name."""
    rows = [
        (c.source, c.target, c.ensemble_score, c.status.value)
        for c in session.all_candidates()
        if c.status in ACCEPTED_STATUSES
    ]
    rows.sort(key=lambda r: (r[0], r[1]))
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["source_attribute", "target_attribute", "score", "status"])
    for source, target, score, status in rows:
        writer.writerow([source, target, score, status])
    return buf.getvalue().encode("utf-8")


def _accepted_value_mappings(session: MatchSession) -> dict[str, Any]:
    out: dict[str, Any] = {}
    for c in session.all_candidates():
        if c.status not in ACCEPTED_STATUSES:
            continue
        out[memory_key(c.source, c.target)] = candidate_value_mapping(session, c).to_dict()
    return out


def candidate_value_mapping(session: MatchSession, c: Candidate):
    s_attr = session.source.attribute(c.source)
    t_attr = session.target.attribute(c.target)
    src_values = s_attr.profile.unique_values if s_attr else ()
    tgt_values = t_attr.known_values() if t_attr else ()
    override = session.value_map_overrides.get((c.source, c.target))
    if override is not None:
        from .semantics import ValueMapping

        used_s = {s for s, _ in override}
        used_t = {t for _, t in override}
        return ValueMapping(
            pairs=tuple((s, t, 1.0) for s, t in override),
            unmapped_source=tuple(v for v in src_values if v not in used_s),
            unmapped_target=tuple(v for v in tgt_values if v not in used_t),
        )
    return map_values(src_values, tgt_values, floor=session.config.value_map_floor)


def export_json(session: MatchSession, session_id: str = "") -> bytes:
    """Full session object: mappings, weights, config, timeline, value maps."""
    mappings = [
        {
            "source": c.source,
            "target": c.target,
            "score": c.ensemble_score,
            "status": c.status.value,
        }
        for c in sorted(
            (c for c in session.all_candidates() if c.status in ACCEPTED_STATUSES),
            key=lambda c: (c.source, c.target),
        )
    ]
    doc = {
        "kind": EXPORT_KIND,
        "version": EXPORT_VERSION,
        "id": session_id,
        "config": session.config.to_dict(),
        "initial_config": session.initial_config.to_dict(),
        "source": dataset_to_dict(session.source),
        "target": schema_to_dict(session.target),
        "weights": session.weights.snapshot(),
        "mappings": mappings,
        "timeline": session.timeline.to_dict(),
        "value_mappings": _accepted_value_mappings(session),
    }
    return canonical_json(doc)


def import_export(data: bytes) -> dict[str, Any]:
    """Parse and validate a JSON export; re-serializing the result with
    export_bundle_bytes reproduces the input byte for byte."""
    try:
        doc = json.loads(data.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise BadRequest(f"not a valid session export: {exc}") from exc
    if not isinstance(doc, dict) or doc.get("kind") != EXPORT_KIND:
        raise BadRequest("not a matchkit session export")
    if doc.get("version") != EXPORT_VERSION:
        raise BadRequest(f"unsupported export version {doc.get('version')!r}")
    return doc


def export_bundle_bytes(bundle: dict[str, Any]) -> bytes:
    return canonical_json(bundle)


def replay_export(bundle: dict[str, Any]) -> MatchSession:
    """Rebuild a live session from an export, for audit replay.

    The timeline's forward payloads are applied in order against the initial
    configuration, then the cursor is walked back to its exported position.
    """
    source = dataset_from_dict(bundle["source"])
    target = schema_from_dict(bundle["target"])
    config = EngineConfig(**bundle["initial_config"])
    session = MatchSession(source, target, config)
    timeline = bundle["timeline"]
    for event in timeline["events"]:
        _apply_event_payload(session, event)
    for _ in range(len(timeline["events"]) - timeline["cursor"]):
        session.undo()
    return session


def _apply_event_payload(session: MatchSession, event: Mapping[str, Any]) -> None:
    kind = EventKind(event["kind"])
    payload = event["payload"]
    ts = event.get("timestamp")
    if kind is EventKind.ACCEPT:
        session.accept(payload["source"], payload["target"], timestamp=ts)
    elif kind is EventKind.REJECT:
        session.reject(payload["source"], payload["target"], timestamp=ts)
    elif kind is EventKind.WEIGHT_ADJUSTED:
        session.set_weights(payload["set"], timestamp=ts)
    elif kind is EventKind.THRESHOLD_CHANGED:
        session.set_thresholds(payload["theta_name"], payload["theta_value"], timestamp=ts)
    elif kind is EventKind.FEEDBACK_RECORDED:
        session.record_feedback(payload["key"], payload["feedback"], timestamp=ts)
    elif kind is EventKind.VALUE_MAPPING_EDITED:
        session.set_value_mapping(
            payload["source"], payload["target"], [(s, t) for s, t in payload["pairs"]], timestamp=ts
        )
    elif kind is EventKind.MATCHER_REGISTERED:
        from .matchers import MatcherDescriptor, MatcherKind, SubprocessMatcher

        if not payload.get("command"):
            raise BadRequest(f"cannot replay in-process matcher {payload['id']!r}")
        session.register_matcher(
            SubprocessMatcher(
                MatcherDescriptor(payload["id"], payload["display_name"], MatcherKind(payload["kind"])),
                payload["command"],
            ),
            timestamp=ts,
        )
    else:
        raise BadRequest(f"unknown event kind {event['kind']!r}")


@dataclass
class SessionRecord:
    id: str
    session: MatchSession
    agent: Agent
    lock: threading.Lock
    directory: Path | None
    created_at: str


_ACTIONS = {
    "accept",
    "reject",
    "set_weights",
    "set_thresholds",
    "undo",
    "redo",
    "jump_to",
    "feedback",
    "set_value_mapping",
}


def apply_action(session: MatchSession, action: str, args: Mapping[str, Any], timestamp: str | None = None) -> None:
    """Dispatch one mutation named by the HTTP action vocabulary."""
    if action == "accept":
        session.accept(str(args["source"]), str(args["target"]), timestamp=timestamp)
    elif action == "reject":
        session.reject(str(args["source"]), str(args["target"]), timestamp=timestamp)
    elif action == "set_weights":
        weights = args.get("weights")
        if not isinstance(weights, dict) or not weights:
            raise BadRequest("set_weights needs a non-empty 'weights' object")
        session.set_weights({k: float(v) for k, v in weights.items()}, timestamp=timestamp)
    elif action == "set_thresholds":
        session.set_thresholds(
            args.get("theta_name"), args.get("theta_value"), timestamp=timestamp
        )
    elif action == "undo":
        session.undo()
    elif action == "redo":
        session.redo()
    elif action == "jump_to":
        if "seq" not in args:
            raise BadRequest("jump_to needs 'seq'")
        session.jump_to(int(args["seq"]))
    elif action == "feedback":
        if "key" not in args or "feedback" not in args:
            raise BadRequest("feedback needs 'key' and 'feedback'")
        session.record_feedback(str(args["key"]), str(args["feedback"]), timestamp=timestamp)
    elif action == "set_value_mapping":
        pairs = args.get("pairs")
        if not isinstance(pairs, list):
            raise BadRequest("set_value_mapping needs 'pairs'")
        session.set_value_mapping(
            str(args["source"]), str(args["target"]), [(p[0], p[1]) for p in pairs], timestamp=timestamp
        )
    else:
        raise BadRequest(f"unknown action {action!r}; expected one of {sorted(_ACTIONS)}")


class SessionStore:
    """Creates, persists, and reloads sessions, one directory each."""

    def __init__(self, root: str | Path | None, config: EngineConfig = DEFAULT_CONFIG) -> None:
        self.root = Path(root) if root is not None else None
        if self.root is not None:
            self.root.mkdir(parents=True, exist_ok=True)
        self.base_config = config
        self._records: dict[str, SessionRecord] = {}
        self._lock = threading.Lock()

    def _new_agent(self, memory: MemoryStore, config: EngineConfig) -> Agent:
        return Agent(
            provider_from_env(),
            memory,
            timeout=config.agent_timeout,
            memory_hits=config.agent_memory_hits,
            inflight=config.agent_inflight,
        )

    def create(
        self,
        source_bytes: bytes,
        source_name: str,
        target_bytes: bytes,
        target_name: str,
        overrides: Mapping[str, Any] | None = None,
    ) -> SessionRecord:
        config = self.base_config.merged(overrides)
        if max(len(source_bytes), len(target_bytes)) > config.max_upload_bytes:
            raise PayloadTooLarge(f"upload exceeds {config.max_upload_bytes} bytes")
        source = ingest_source(source_bytes, source_name)
        target = parse_target_schema(target_bytes, target_name)
        if max(len(source.attributes), len(target.attributes)) > config.max_attributes:
            raise BadRequest(f"more than {config.max_attributes} attributes on one side")

        session_id = uuid.uuid4().hex
        memory = MemoryStore()
        directory: Path | None = None
        if self.root is not None:
            directory = self.root / session_id
            directory.mkdir(parents=True)
            (directory / "source.dat").write_bytes(source_bytes)
            (directory / "target.dat").write_bytes(target_bytes)
            (directory / "meta.json").write_bytes(
                canonical_json(
                    {
                        "id": session_id,
                        "source_name": source_name,
                        "target_name": target_name,
                        "overrides": dict(overrides) if overrides else {},
                        "created_at": now_iso(),
                    }
                )
            )
            (directory / "journal.jsonl").touch()
            memory.attach_log(directory / "memory.jsonl", replay=False)

        session = MatchSession(source, target, config, memory=memory)
        record = SessionRecord(
            id=session_id,
            session=session,
            agent=self._new_agent(memory, config),
            lock=threading.Lock(),
            directory=directory,
            created_at=now_iso(),
        )
        with self._lock:
            self._records[session_id] = record
        return record

    def get(self, session_id: str) -> SessionRecord:
        with self._lock:
            record = self._records.get(session_id)
        if record is not None:
            return record
        return self._load(session_id)

    def drop_cached(self, session_id: str) -> None:
        """Forget the in-memory state; next access reloads from disk."""
        with self._lock:
            self._records.pop(session_id, None)

    def ids(self) -> list[str]:
        known = set(self._records)
        if self.root is not None:
            known.update(p.name for p in self.root.iterdir() if (p / "meta.json").exists())
        return sorted(known)

    def _load(self, session_id: str) -> SessionRecord:
        if self.root is None:
            raise UnknownSession(f"unknown session {session_id!r}")
        directory = self.root / session_id
        meta_path = directory / "meta.json"
        if not meta_path.exists():
            raise UnknownSession(f"unknown session {session_id!r}")
        meta = json.loads(meta_path.read_text("utf-8"))
        config = self.base_config.merged(meta.get("overrides") or {})
        memory = MemoryStore()
        memory.attach_log(directory / "memory.jsonl", replay=True)
        source = ingest_source((directory / "source.dat").read_bytes(), meta["source_name"])
        target = parse_target_schema((directory / "target.dat").read_bytes(), meta["target_name"])
        session = MatchSession(source, target, config, memory=memory)
        for line in (directory / "journal.jsonl").read_text("utf-8").splitlines():
            if not line.strip():
                continue
            entry = json.loads(line)
            apply_action(session, entry["op"], entry.get("args") or {}, timestamp=entry.get("ts"))
        record = SessionRecord(
            id=session_id,
            session=session,
            agent=self._new_agent(memory, config),
            lock=threading.Lock(),
            directory=directory,
            created_at=str(meta.get("created_at", "")),
        )
        with self._lock:
            self._records[session_id] = record
        return record

    def mutate(self, record: SessionRecord, action: str, args: Mapping[str, Any]) -> None:
        """Apply one action under the session's single-writer lock and
        append it to the journal."""
        with record.lock:
            ts = now_iso()
            apply_action(record.session, action, args, timestamp=ts)
            if record.directory is not None:
                line = json.dumps({"op": action, "args": dict(args), "ts": ts})
                with (record.directory / "journal.jsonl").open("a", encoding="utf-8") as fh:
                    fh.write(line + "\n")
                    fh.flush()


_STATUS_BY_ERROR: list[tuple[type, int]] = [
    (PayloadTooLarge, 413),
    (UnknownSession, 404),
    (UnknownCandidate, 404),
    (UnknownKey, 404),
    (UnknownSeq, 404),
    (InvalidTransition, 409),
    (NothingToUndo, 409),
    (NothingToRedo, 409),
    (ModelUnavailable, 503),
    (AgentTimeout, 504),
    (MalformedModelResponse, 502),
    (MalformedTable, 400),
    (DuplicateAttribute, 400),
    (SchemaParseError, 400),
    (EmptySchema, 400),
    (DuplicateMatcherId, 400),
    (InvalidWeight, 400),
    (EmptyGroundTruth, 400),
    (PluginFailed, 400),
    (BadRequest, 400),
]


def _error_status(exc: MatchkitError) -> int:
    for etype, status in _STATUS_BY_ERROR:
        if isinstance(exc, etype):
            return status
    return 400


def candidate_dict(session: MatchSession, c: Candidate) -> dict[str, Any]:
    t_attr = session.target.attribute(c.target)
    return {
        "source": c.source,
        "target": c.target,
        "ensemble_score": c.ensemble_score,
        "rank": c.rank,
        "status": c.status.value,
        "per_matcher": {k: c.per_matcher[k] for k in sorted(c.per_matcher)},
        "support": sorted(c.support),
        "supercategory": t_attr.supercategory if t_attr else None,
        "category": t_attr.category if t_attr else None,
    }


def candidate_detail(
    record: SessionRecord, source: str, target: str, with_agent: bool = True
) -> dict[str, Any]:
    session = record.session
    c = session.candidate(source, target)
    s_attr = session.source.attribute(c.source)
    t_attr = session.target.attribute(c.target)
    per_matcher = dict(c.per_matcher)
    if not per_matcher and s_attr is not None and t_attr is not None:
        per_matcher = score_pair(session.registry, s_attr, t_attr)

    t_profile = None
    if t_attr is not None:
        if t_attr.profile is not None:
            t_profile = t_attr.profile
        elif t_attr.enum_values:
            t_profile = profile_from_values(t_attr.enum_values)

    distribution = None
    if s_attr is not None and t_profile is not None:
        distribution = compare_distributions(
            s_attr.profile, t_profile, bins=session.config.numeric_bins
        ).to_dict()

    mapping = candidate_value_mapping(session, c)

    cached = record.agent.cached_verdict(c.source, c.target)
    verdict = cached
    if verdict is None and with_agent:
        ctx = AgentContext(
            source_name=c.source,
            target_name=c.target,
            source_profile=s_attr.profile if s_attr else None,
            target=t_attr,
            matcher_scores=per_matcher,
            value_mapping_preview=tuple((s, t) for s, t, _ in mapping.pairs[:10]),
        )
        verdict = record.agent.explain(ctx)

    return {
        "candidate": candidate_dict(session, c),
        "per_matcher": {k: per_matcher[k] for k in sorted(per_matcher)},
        "weights": session.weights.snapshot(),
        "source_profile": s_attr.profile.to_dict() if s_attr else None,
        "target_info": {
            "name": t_attr.name,
            "supercategory": t_attr.supercategory,
            "category": t_attr.category,
            "description": t_attr.description,
            "value_type": t_attr.value_type.value,
            "enum_values": list(t_attr.enum_values) if t_attr and t_attr.enum_values else None,
        }
        if t_attr
        else None,
        "target_profile": t_profile.to_dict() if t_profile else None,
        "distribution": distribution,
        "value_mapping": {
            **mapping.to_dict(),
            "overridden": (c.source, c.target) in session.value_map_overrides,
        },
        "agent": {**verdict.to_dict(), "cached": cached is not None} if verdict else None,
    }


def list_candidates(
    session: MatchSession,
    min_score: float | None = None,
    supercategory: str | None = None,
    category: str | None = None,
    cluster: int | None = None,
    status: str | None = None,
    query: str | None = None,
    page: int = 1,
    page_size: int | None = None,
) -> dict[str, Any]:
    """Filtered, paginated candidate listing. Filters are conjunctive; the
    ordering is stable: source attribute order, then rank."""
    if page < 1:
        raise BadRequest("page must be >= 1")
    size = page_size if page_size is not None else session.config.page_size
    if size < 1:
        raise BadRequest("page_size must be >= 1")
    status_filter: CandidateStatus | None = None
    if status is not None:
        try:
            status_filter = CandidateStatus(status)
        except ValueError:
            raise BadRequest(f"unknown status {status!r}") from None
    cluster_members: set[str] | None = None
    if cluster is not None:
        clusters = session.clusters().clusters
        if not 0 <= cluster < len(clusters):
            raise BadRequest(f"cluster index {cluster} outside 0..{len(clusters) - 1}")
        cluster_members = set(clusters[cluster])

    needle = query.lower() if query else None
    items = []
    for source_name, lst in session.candidates.items():
        if cluster_members is not None and source_name not in cluster_members:
            continue
        for c in sorted(lst, key=lambda c: c.rank):
            if min_score is not None and c.ensemble_score < min_score:
                continue
            if status_filter is not None and c.status is not status_filter:
                continue
            t_attr = session.target.attribute(c.target)
            if supercategory is not None and (t_attr is None or t_attr.supercategory != supercategory):
                continue
            if category is not None and (t_attr is None or t_attr.category != category):
                continue
            if needle is not None and needle not in c.source.lower() and needle not in c.target.lower():
                continue
            items.append(candidate_dict(session, c))

    total = len(items)
    start = (page - 1) * size
    return {
        "items": items[start : start + size],
        "page": page,
        "page_size": size,
        "total": total,
    }


def session_summary(record: SessionRecord) -> dict[str, Any]:
    return {"id": record.id, "created_at": record.created_at, **record.session.summary()}


def create_app(store: SessionStore, ui_dir: str | Path | None = None) -> FastAPI:
    app = FastAPI(title="matchkit", version=__version__)

    @app.exception_handler(MatchkitError)
    async def _matchkit_error(_request: Request, exc: MatchkitError) -> JSONResponse:
        return JSONResponse(
            status_code=_error_status(exc),
            content={"code": exc.code, "message": str(exc), "detail": type(exc).__name__},
        )

    @app.get("/")
    def health() -> dict[str, Any]:
        return {"name": "matchkit", "version": __version__, "status": "ok"}

    @app.post("/sessions")
    async def create_session(
        source: UploadFile = File(...),
        target: UploadFile = File(...),
        config: str | None = Form(None),
        source_name: str | None = Form(None),
        target_name: str | None = Form(None),
    ) -> dict[str, Any]:
        overrides = None
        if config:
            try:
                overrides = json.loads(config)
            except json.JSONDecodeError as exc:
                raise BadRequest(f"config is not valid JSON: {exc.msg}") from exc
            if not isinstance(overrides, dict):
                raise BadRequest("config must be a JSON object")
        source_bytes = await source.read()
        target_bytes = await target.read()
        try:
            record = store.create(
                source_bytes,
                source_name or _stem(source.filename) or "source",
                target_bytes,
                target_name or _stem(target.filename) or "target",
                overrides,
            )
        except ValueError as exc:
            raise BadRequest(str(exc)) from exc
        return session_summary(record)

    @app.get("/sessions")
    def list_sessions() -> dict[str, Any]:
        return {"sessions": store.ids()}

    @app.get("/sessions/{sid}")
    def get_session(sid: str) -> dict[str, Any]:
        return session_summary(store.get(sid))

    @app.get("/sessions/{sid}/candidates")
    def get_candidates(
        sid: str,
        min_score: float | None = None,
        supercategory: str | None = None,
        category: str | None = None,
        cluster: int | None = None,
        status: str | None = None,
        query: str | None = None,
        page: int = 1,
        page_size: int | None = None,
    ) -> dict[str, Any]:
        record = store.get(sid)
        return list_candidates(
            record.session,
            min_score=min_score,
            supercategory=supercategory,
            category=category,
            cluster=cluster,
            status=status,
            query=query,
            page=page,
            page_size=page_size,
        )

    @app.get("/sessions/{sid}/candidates/{source}/{target}")
    def get_detail(sid: str, source: str, target: str, agent: bool = True) -> dict[str, Any]:
        return candidate_detail(store.get(sid), source, target, with_agent=agent)

    @app.post("/sessions/{sid}/actions")
    async def post_action(sid: str, request: Request) -> dict[str, Any]:
        record = store.get(sid)
        try:
            body = await request.json()
        except json.JSONDecodeError as exc:
            raise BadRequest(f"request body is not valid JSON: {exc.msg}") from exc
        if not isinstance(body, dict) or "action" not in body:
            raise BadRequest("body must be an object with an 'action' key")
        action = str(body["action"])
        args = {k: v for k, v in body.items() if k != "action"}
        store.mutate(record, action, args)
        session = record.session
        response: dict[str, Any] = {
            "action": action,
            "weights": session.weights.snapshot(),
            "counts": session.status_counts(),
            "timeline": {"events": len(session.timeline.events), "cursor": session.timeline.cursor},
        }
        source_name = args.get("source")
        if isinstance(source_name, str) and source_name in session.candidates:
            response["affected_source"] = source_name
            response["candidates"] = [
                candidate_dict(session, c)
                for c in sorted(session.candidates[source_name], key=lambda c: c.rank)
            ]
        return response

    @app.get("/sessions/{sid}/timeline")
    def get_timeline(sid: str) -> dict[str, Any]:
        return store.get(sid).session.timeline.to_dict()

    @app.get("/sessions/{sid}/clusters")
    def get_clusters(sid: str) -> dict[str, Any]:
        record = store.get(sid)
        return {
            "clusters": [list(c) for c in record.session.clusters().clusters],
            "parameters": {
                "n_neighbors": record.session.config.n_neighbors,
                "tau": record.session.config.cluster_tau,
            },
        }

    @app.get("/sessions/{sid}/export")
    def get_export(sid: str, format: str = "json") -> Response:
        record = store.get(sid)
        if format == "csv":
            return Response(content=export_csv(record.session), media_type="text/csv")
        if format == "json":
            return Response(content=export_json(record.session, record.id), media_type="application/json")
        raise BadRequest(f"unknown format {format!r}; expected csv or json")

    @app.get("/sessions/{sid}/hierarchy")
    def get_hierarchy(sid: str) -> dict[str, Any]:
        return {"hierarchy": store.get(sid).session.target.hierarchy()}

    if ui_dir is not None and Path(ui_dir).is_dir():
        from fastapi.staticfiles import StaticFiles

        app.mount("/ui", StaticFiles(directory=str(ui_dir), html=True), name="ui")

    return app


def _stem(filename: str | None) -> str | None:
    if not filename:
        return None
    return Path(filename).stem
