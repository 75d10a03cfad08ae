"""Train/test split construction and external dataset ingestion.

In-domain splits are stratified: within every domain the dialogues are
sorted by id, shuffled with a per-domain seeded RNG, and ceil(fraction*n)
go to test (capped so both sides stay non-empty). Out-of-domain splits
hold out whole domains plus everything connected to them through a
user-supplied synonym map, and assert the resulting domain sets are
disjoint. Both splits are pure functions of (content, parameters, seed),
insensitive to input order.
"""

from __future__ import annotations

import json
import logging
import math
import random
from typing import Iterable

from .errors import (
    DatasetInvalid,
    DegenerateSplit,
    EmptyDataset,
    IngestError,
    InvalidArgumentMap,
    SchemaInvalid,
    UnknownDomain,
)
from .schema import (
    ApiSchema,
    ArgumentMap,
    Dialogue,
    DialogueTurn,
    SlotSpec,
    _read_source,
    canonicalize_key,
    canonicalize_value,
    normalize_kind,
)

logger = logging.getLogger(__name__)


def split_in_domain(
    dialogues: list[Dialogue], test_fraction: float, seed: int
) -> tuple[list[Dialogue], list[Dialogue]]:
    """Stratified split; every domain with >= 2 dialogues appears in both sides."""
    if not dialogues:
        raise EmptyDataset("cannot split an empty dataset")
    if not 0.0 < test_fraction < 1.0:
        raise ValueError(f"test_fraction must be in (0, 1), got {test_fraction}")
    by_domain: dict[str, list[str]] = {}
    for d in dialogues:
        by_domain.setdefault(d.domain, []).append(d.id)

    test_ids: set[str] = set()
    for domain in sorted(by_domain):
        ids = sorted(by_domain[domain])
        if len(ids) == 1:
            logger.warning("domain '%s' has a single dialogue; placed in train", domain)
            continue
        rng = random.Random(f"{seed}:{domain}")
        rng.shuffle(ids)
        n_test = min(math.ceil(test_fraction * len(ids)), len(ids) - 1)
        test_ids.update(ids[:n_test])

    train = [d for d in dialogues if d.id not in test_ids]
    test = [d for d in dialogues if d.id in test_ids]
    return train, test


def _synonym_closure(
    seeds: set[str], overlap_map: dict[str, str] | None
) -> set[str]:
    """Domains equivalent to any seed under the (undirected) synonym map."""
    closure = set(seeds)
    if not overlap_map:
        return closure
    edges: dict[str, set[str]] = {}
    for a, b in overlap_map.items():
        a, b = canonicalize_value(a), canonicalize_value(b)
        edges.setdefault(a, set()).add(b)
        edges.setdefault(b, set()).add(a)
    frontier = list(closure)
    while frontier:
        node = frontier.pop()
        for neighbor in edges.get(node, ()):
            if neighbor not in closure:
                closure.add(neighbor)
                frontier.append(neighbor)
    return closure


def split_out_of_domain(
    dialogues: list[Dialogue],
    holdout_domains: Iterable[str],
    overlap_map: dict[str, str] | None = None,
) -> tuple[list[Dialogue], list[Dialogue]]:
    """Hold out whole domains (and their synonyms) as the test set."""
    if not dialogues:
        raise EmptyDataset("cannot split an empty dataset")
    holdout = {canonicalize_value(h) for h in holdout_domains}
    if not holdout:
        raise UnknownDomain("holdout_domains is empty")
    present = {d.domain for d in dialogues}
    known = set(present)
    if overlap_map:
        for a, b in overlap_map.items():
            known.add(canonicalize_value(a))
            known.add(canonicalize_value(b))
    for domain in sorted(holdout):
        if domain not in known:
            raise UnknownDomain(f"holdout domain '{domain}' not in data or synonym map")

    closure = _synonym_closure(holdout, overlap_map)
    test = [d for d in dialogues if d.domain in closure]
    train = [d for d in dialogues if d.domain not in closure]
    if not train:
        raise DegenerateSplit("synonym closure leaves the train side empty")
    assert not ({d.domain for d in train} & closure)
    return train, test


def build_split_manifest(
    kind: str,
    train: list[Dialogue],
    test: list[Dialogue],
    *,
    seed: int | None = None,
    test_fraction: float | None = None,
    holdout_domains: Iterable[str] | None = None,
    synonym_map: dict[str, str] | None = None,
) -> dict:
    """Auditable record of a split: parameters plus the exact id partition."""
    manifest: dict = {"kind": kind}
    if seed is not None:
        manifest["seed"] = seed
    if test_fraction is not None:
        manifest["test_fraction"] = test_fraction
    if holdout_domains is not None:
        manifest["holdout_domains"] = sorted(canonicalize_value(h) for h in holdout_domains)
    if synonym_map is not None:
        manifest["synonym_map"] = {
            canonicalize_value(a): canonicalize_value(b) for a, b in synonym_map.items()
        }
    manifest["train_ids"] = [d.id for d in train]
    manifest["test_ids"] = [d.id for d in test]
    return manifest


# --- external dataset ingestion ----------------------------------------------
#
# Both converters consume a single JSON document (multi-file distribution
# dumps are concatenated into one object by the caller; see
# scripts/ingest_dump.py).
#
# SGD layout: {"schema": [service...], "dialogues": [dialogue...]} with the
# public per-record shapes: services carry slots with `is_categorical` and
# `possible_values`; dialogues carry turns with frames, and a frame's
# `service_call.parameters` holds the annotated call arguments.
#
# STAR-style layout: {"tasks": [...], "dialogues": [...]}; tasks are
# task specifications {name, description?, domain?, parameters: [{name,
# type, description?, values?, required?}]}, dialogue events are either
# utterances {speaker, text} or calls {action: "call"|"query", api?,
# arguments|constraints}.


def ingest_external(source, format: str):
    """Best-effort conversion of an external dump into (dialogues, catalog, warnings)."""
    text = _read_source(source)
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise IngestError(f"dump is not valid JSON: {exc.msg}")
    if not isinstance(doc, dict):
        raise IngestError("dump must be a JSON object")
    if format == "sgd":
        return _ingest_sgd(doc)
    if format == "star":
        return _ingest_star(doc)
    raise ValueError(f"unknown ingest format {format!r} (expected sgd|star)")


def _domain_of_service(service_name: str) -> str:
    # "Restaurants_1" -> "restaurants"
    base = service_name.rsplit("_", 1)
    if len(base) == 2 and base[1].isdigit():
        return canonicalize_value(base[0])
    return canonicalize_value(service_name)


def _coerce_value(value) -> str:
    if isinstance(value, list):
        value = value[0] if value else ""
    return str(value)


def _ingest_sgd(doc: dict):
    services = doc.get("schema") or doc.get("schemas")
    raw_dialogues = doc.get("dialogues")
    if services is None or raw_dialogues is None:
        raise IngestError("SGD dump needs 'schema' and 'dialogues' keys")

    catalog: dict[str, ApiSchema] = {}
    warnings: list[str] = []
    for service in services:
        try:
            slots = []
            for slot in service.get("slots", []):
                categorical = bool(slot.get("is_categorical")) and slot.get("possible_values")
                slots.append(
                    SlotSpec(
                        name=slot["name"],
                        kind="categorical" if categorical else "free-text",
                        description=slot.get("description", ""),
                        allowed_values=tuple(slot["possible_values"]) if categorical else None,
                    )
                )
            schema = ApiSchema(
                api_name=service["service_name"],
                description=service.get("description", ""),
                slots=tuple(slots),
            )
        except (KeyError, TypeError, SchemaInvalid) as exc:
            raise IngestError(f"bad SGD service record {service.get('service_name')!r}: {exc}")
        catalog[schema.api_name] = schema

    dialogues: list[Dialogue] = []
    for raw in raw_dialogues:
        try:
            dialogue_id = raw["dialogue_id"]
            raw_turns = raw["turns"]
        except (KeyError, TypeError) as exc:
            raise IngestError(f"bad SGD dialogue record: missing {exc}")
        for turn_index, turn in enumerate(raw_turns):
            for frame in turn.get("frames", []):
                call = frame.get("service_call")
                if not call:
                    continue
                service = canonicalize_key(frame.get("service", call.get("method", "")))
                params = call.get("parameters") or {}
                if service not in catalog:
                    warnings.append(
                        f"{dialogue_id}:{turn_index}: unknown service '{service}', skipped"
                    )
                    continue
                if not params:
                    warnings.append(
                        f"{dialogue_id}:{turn_index}: call without slot annotations, skipped"
                    )
                    continue
                history = [
                    DialogueTurn(
                        speaker="user" if t.get("speaker", "").upper() == "USER" else "agent",
                        utterance=t.get("utterance", ""),
                    )
                    for t in raw_turns[:turn_index]
                    if t.get("utterance", "").strip()
                ]
                if not history:
                    warnings.append(f"{dialogue_id}:{turn_index}: empty history, skipped")
                    continue
                try:
                    gold = ArgumentMap.from_pairs(
                        (str(k), _coerce_value(v)) for k, v in params.items()
                    )
                    dialogues.append(
                        Dialogue(
                            id=f"{dialogue_id}__{turn_index}",
                            domain=_domain_of_service(frame.get("service", service)),
                            target_api=service,
                            turns=tuple(history),
                            gold_arguments=gold,
                        )
                    )
                except (InvalidArgumentMap, DatasetInvalid) as exc:
                    warnings.append(f"{dialogue_id}:{turn_index}: {exc}, skipped")
    return dialogues, catalog, warnings


def _ingest_star(doc: dict):
    tasks = doc.get("tasks")
    raw_dialogues = doc.get("dialogues")
    if tasks is None or raw_dialogues is None:
        raise IngestError("STAR dump needs 'tasks' and 'dialogues' keys")

    catalog: dict[str, ApiSchema] = {}
    task_domains: dict[str, str] = {}
    warnings: list[str] = []
    for task in tasks:
        try:
            slots = tuple(
                SlotSpec(
                    name=p["name"],
                    kind=normalize_kind(p.get("type", "text")),
                    description=p.get("description", ""),
                    allowed_values=tuple(p["values"]) if p.get("values") else None,
                    required=bool(p.get("required", True)),
                )
                for p in task.get("parameters", [])
            )
            schema = ApiSchema(
                api_name=task["name"],
                description=task.get("description", ""),
                slots=slots,
            )
        except (KeyError, TypeError, SchemaInvalid) as exc:
            raise IngestError(f"bad STAR task record {task.get('name')!r}: {exc}")
        catalog[schema.api_name] = schema
        domain = task.get("domain") or schema.api_name.split("_")[0]
        task_domains[schema.api_name] = canonicalize_value(str(domain))

    dialogues: list[Dialogue] = []
    for raw in raw_dialogues:
        try:
            dialogue_id = raw["id"]
            task_name = canonicalize_key(raw["task"])
            events = raw["events"]
        except (KeyError, TypeError) as exc:
            raise IngestError(f"bad STAR dialogue record: missing {exc}")
        if task_name not in catalog:
            warnings.append(f"{dialogue_id}: unknown task '{task_name}', skipped")
            continue
        history: list[DialogueTurn] = []
        call_count = 0
        for event in events:
            action = str(event.get("action", "")).lower()
            if action in ("call", "query"):
                args = event.get("arguments") or event.get("constraints") or {}
                api = canonicalize_key(event.get("api", task_name))
                if api not in catalog:
                    warnings.append(f"{dialogue_id}: unknown api '{api}', skipped")
                    continue
                if not args:
                    warnings.append(f"{dialogue_id}: call without slot annotations, skipped")
                    continue
                if not history:
                    warnings.append(f"{dialogue_id}: call before any utterance, skipped")
                    continue
                try:
                    gold = ArgumentMap.from_pairs(
                        (str(k), _coerce_value(v)) for k, v in args.items()
                    )
                    dialogues.append(
                        Dialogue(
                            id=f"{dialogue_id}__{call_count}",
                            domain=raw.get("domain") or task_domains[api],
                            target_api=api,
                            turns=tuple(history),
                            gold_arguments=gold,
                        )
                    )
                except (InvalidArgumentMap, DatasetInvalid) as exc:
                    warnings.append(f"{dialogue_id}: {exc}, skipped")
                call_count += 1
                continue
            text_value = str(event.get("text", "")).strip()
            if not text_value:
                continue
            speaker = str(event.get("speaker", "user")).lower()
            history.append(
                DialogueTurn(
                    speaker="user" if speaker == "user" else "agent",
                    utterance=text_value,
                )
            )
    return dialogues, catalog, warnings
