"""Training-data export and rejection sampling.

Phase one: one gold example per dialogue (default prompt, gold arguments
serialized in schema order, reward 1.0). Phase two: sample K candidates
per prompt, score each with the error classifier, keep only candidates
with strictly positive reward, de-duplicate within a dialogue, and emit
gold plus kept samples as the augmented dataset. Gold examples are never
dropped or modified.
"""

from __future__ import annotations

import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

from .errors import BackendError, DatasetInvalid, GoldSchemaMismatch, MalformedArguments, NoArgumentObject
from .generation import GenerationBackend, GenerationRequest
from .parsing import extract_argument_map, serialize_argument_map
from .prompting import build_default_prompt
from .schema import ApiSchema, ArgumentMap, Dialogue
from .scoring import classify_errors

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainingExample:
    prompt: str
    completion: str
    source: str  # "gold" or "sampled"
    reward: float
    dialogue_id: str

    def to_obj(self) -> dict:
        return {
            "prompt": self.prompt,
            "completion": self.completion,
            "source": self.source,
            "reward": self.reward,
            "dialogue_id": self.dialogue_id,
        }


@dataclass
class SamplerStats:
    generated: int = 0
    parse_failed: int = 0
    rejected: int = 0
    deduplicated: int = 0
    kept: int = 0
    skipped_dialogues: int = 0
    mean_kept_reward: float = 0.0

    def to_obj(self) -> dict:
        return {
            "generated": self.generated,
            "parse_failed": self.parse_failed,
            "rejected": self.rejected,
            "deduplicated": self.deduplicated,
            "kept": self.kept,
            "skipped_dialogues": self.skipped_dialogues,
            "mean_kept_reward": self.mean_kept_reward,
        }


@dataclass(frozen=True)
class SamplerConfig:
    k: int = 4
    temperature: float = 0.8
    max_tokens: int = 256
    in_flight: int = 4
    strict: bool = False

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.in_flight < 1:
            raise ValueError("in_flight must be >= 1")


def _schema_for(dialogue: Dialogue, catalog: dict[str, ApiSchema]) -> ApiSchema:
    schema = catalog.get(dialogue.target_api)
    if schema is None:
        raise DatasetInvalid(
            f"dialogue '{dialogue.id}': target_api '{dialogue.target_api}' not in catalog"
        )
    return schema


def _gold_in_schema_order(dialogue: Dialogue, schema: ApiSchema) -> ArgumentMap:
    gold = dialogue.gold_arguments
    for key, _ in gold:
        if schema.slot(key) is None:
            raise GoldSchemaMismatch(
                f"dialogue '{dialogue.id}': gold key '{key}' not in schema '{schema.api_name}'"
            )
    ordered = tuple((s.name, gold.get(s.name)) for s in schema.slots if s.name in gold)
    return ArgumentMap(ordered)


def gold_training_example(dialogue: Dialogue, schema: ApiSchema) -> TrainingExample:
    ordered = _gold_in_schema_order(dialogue, schema)
    return TrainingExample(
        prompt=build_default_prompt(schema, dialogue).text,
        completion=serialize_argument_map(ordered, "given"),
        source="gold",
        reward=1.0,
        dialogue_id=dialogue.id,
    )


def export_sft_dataset(
    dialogues: list[Dialogue], catalog: dict[str, ApiSchema]
) -> list[TrainingExample]:
    """One gold example per dialogue, in input order."""
    return [gold_training_example(d, _schema_for(d, catalog)) for d in dialogues]


def _bounded_map(fn, items, workers: int):
    if workers <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def rejection_sample(
    backend: GenerationBackend,
    dialogues: list[Dialogue],
    catalog: dict[str, ApiSchema],
    config: SamplerConfig,
) -> tuple[list[TrainingExample], SamplerStats]:
    """Generate, score, filter, and assemble the augmented dataset.

    Emission order follows input dialogue order regardless of worker
    count: per dialogue the gold example first, then kept samples in
    generation order.
    """
    stats = SamplerStats()
    # Validate gold against schema up front; a dataset bug is fatal.
    golds = [gold_training_example(d, _schema_for(d, catalog)) for d in dialogues]

    def sample_one(dialogue: Dialogue):
        schema = catalog[dialogue.target_api]
        prompt = build_default_prompt(schema, dialogue).text
        request = GenerationRequest(
            prompt=prompt,
            temperature=config.temperature,
            max_tokens=config.max_tokens,
            n_samples=config.k,
            tag=dialogue.id,
        )
        try:
            record = backend.generate(request)
        except BackendError as exc:
            if config.strict:
                raise
            logger.warning("skipping dialogue '%s': %s", dialogue.id, exc)
            return None
        kept: list[TrainingExample] = []
        counts = {"generated": 0, "parse_failed": 0, "rejected": 0, "deduplicated": 0}
        seen: set[str] = set()
        for output in record.outputs:
            counts["generated"] += 1
            try:
                outcome = extract_argument_map(output)
            except (NoArgumentObject, MalformedArguments):
                counts["parse_failed"] += 1
                continue
            breakdown = classify_errors(outcome.map, dialogue.gold_arguments, schema)
            if breakdown.reward <= 0.0:
                counts["rejected"] += 1
                continue
            dedup_key = serialize_argument_map(outcome.map, "sorted")
            if dedup_key in seen:
                counts["deduplicated"] += 1
                continue
            seen.add(dedup_key)
            kept.append(
                TrainingExample(
                    prompt=prompt,
                    completion=serialize_argument_map(outcome.map, "given"),
                    source="sampled",
                    reward=breakdown.reward,
                    dialogue_id=dialogue.id,
                )
            )
        return kept, counts

    results = _bounded_map(sample_one, dialogues, config.in_flight)

    augmented: list[TrainingExample] = []
    reward_sum = 0.0
    for gold, result in zip(golds, results):
        augmented.append(gold)
        if result is None:
            stats.skipped_dialogues += 1
            continue
        kept, counts = result
        stats.generated += counts["generated"]
        stats.parse_failed += counts["parse_failed"]
        stats.rejected += counts["rejected"]
        stats.deduplicated += counts["deduplicated"]
        stats.kept += len(kept)
        reward_sum += sum(e.reward for e in kept)
        augmented.extend(kept)
    stats.mean_kept_reward = reward_sum / stats.kept if stats.kept else 0.0
    return augmented, stats


def dump_training_examples(examples: list[TrainingExample]) -> str:
    lines = [json.dumps(e.to_obj(), ensure_ascii=False) for e in examples]
    return "\n".join(lines) + ("\n" if lines else "")
