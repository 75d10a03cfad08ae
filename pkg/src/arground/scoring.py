"""Error classification and reward for model-predicted argument maps.

Each predicted entry is judged against the schema and the gold map:

* key outside the schema            -> NK (value ignored)
* key in schema and gold, fuzzy hit -> correct
* key in schema and gold, miss      -> SV if the value conforms to the
                                       slot's kind, HV otherwise
* key in schema but not in gold     -> one error, SV/HV by conformance
* gold key absent from prediction   -> MK (one error per missing slot)

n_total counts keys AND values of the gold map (2 per slot); the reward
1 - 2 * n_error / n_total is clamped to [-1, 1]. For an empty gold map
the reward is 1 for an empty prediction and -1 otherwise.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import GoldSchemaMismatch
from .fuzzy import values_match
from .schema import ApiSchema, ArgumentMap, value_conforms_to_slot

VERDICT_CORRECT = "correct"
VERDICT_NK = "NK"
VERDICT_MK = "MK"
VERDICT_SV = "SV"
VERDICT_HV = "HV"


@dataclass(frozen=True)
class ErrorBreakdown:
    """Per-sample error counts, gold size, and the resulting reward."""

    n_nk: int
    n_mk: int
    n_sv: int
    n_hv: int
    n_total: int
    n_error: int
    reward: float
    per_slot_verdicts: tuple[tuple[str, str], ...] = field(default=())

    def __post_init__(self):
        if self.n_error != self.n_nk + self.n_mk + self.n_sv + self.n_hv:
            raise ValueError("n_error must equal the sum of the four error counts")

    def to_obj(self) -> dict:
        return {
            "n_nk": self.n_nk,
            "n_mk": self.n_mk,
            "n_sv": self.n_sv,
            "n_hv": self.n_hv,
            "n_total": self.n_total,
            "reward": self.reward,
            "verdicts": [[k, v] for k, v in self.per_slot_verdicts],
        }

    @classmethod
    def from_obj(cls, obj: dict) -> "ErrorBreakdown":
        counts = (int(obj["n_nk"]), int(obj["n_mk"]), int(obj["n_sv"]), int(obj["n_hv"]))
        return cls(
            n_nk=counts[0],
            n_mk=counts[1],
            n_sv=counts[2],
            n_hv=counts[3],
            n_total=int(obj["n_total"]),
            n_error=sum(counts),
            reward=float(obj["reward"]),
            per_slot_verdicts=tuple((k, v) for k, v in obj.get("verdicts", [])),
        )


def reward_value(n_error: int, n_total: int) -> float:
    """Reward 1 - 2*n_error/n_total clamped to [-1, 1]; empty-gold edge per docstring above."""
    if n_total == 0:
        return 1.0 if n_error == 0 else -1.0
    raw = 1.0 - 2.0 * n_error / n_total
    return max(-1.0, min(1.0, raw))


def reward_of(breakdown: ErrorBreakdown) -> float:
    return reward_value(breakdown.n_error, breakdown.n_total)


def classify_errors(pred: ArgumentMap, gold: ArgumentMap, schema: ApiSchema) -> ErrorBreakdown:
    """Classify every predicted entry and missing gold slot; compute the reward.

    Raises GoldSchemaMismatch when the gold map references a key the schema
    does not define (a dataset bug, not a model error).
    """
    slot_names = set(schema.slot_names())
    for key, _ in gold:
        if key not in slot_names:
            raise GoldSchemaMismatch(
                f"gold key '{key}' not in schema '{schema.api_name}'"
            )

    n_nk = n_mk = n_sv = n_hv = 0
    verdicts: list[tuple[str, str]] = []
    gold_values = gold.as_dict()

    for key, value in pred:
        if key not in slot_names:
            n_nk += 1
            verdicts.append((key, VERDICT_NK))
            continue
        slot = schema.slot(key)
        if key in gold_values and values_match(value, gold_values[key]):
            verdicts.append((key, VERDICT_CORRECT))
        elif value_conforms_to_slot(slot, value):
            n_sv += 1
            verdicts.append((key, VERDICT_SV))
        else:
            n_hv += 1
            verdicts.append((key, VERDICT_HV))

    pred_keys = set(pred.keys())
    for key, _ in gold:
        if key not in pred_keys:
            n_mk += 1
            verdicts.append((key, VERDICT_MK))

    n_total = 2 * len(gold)
    n_error = n_nk + n_mk + n_sv + n_hv
    return ErrorBreakdown(
        n_nk=n_nk,
        n_mk=n_mk,
        n_sv=n_sv,
        n_hv=n_hv,
        n_total=n_total,
        n_error=n_error,
        reward=reward_value(n_error, n_total),
        per_slot_verdicts=tuple(verdicts),
    )
