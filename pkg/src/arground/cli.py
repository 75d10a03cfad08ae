"""Command-line entry point and report emission.

Subcommands: export-sft, reject-sample, fill, evaluate, split, report.
Every artifact is written atomically (temp file + rename) together with a
run-metadata JSON recording the command, config hash, template hashes,
and input hashes, so identical inputs always produce byte-identical
outputs. Exit codes: 0 success, 1 usage error, 2 data error, 3 backend
error.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import logging
import os
import platform
import sys
import tempfile
from pathlib import Path

from . import __version__
from .errors import (
    AlignmentError,
    ArgroundError,
    AuthError,
    BackendError,
    EmptyCorpus,
    LogCorrupt,
    MalformedArguments,
    NoArgumentObject,
)
from .generation import DEFAULT_IN_FLIGHT, GenerationRequest, backend_from_spec
from .metrics import evaluate_corpus, metrics_report_csv
from .parsing import extract_argument_map
from .prompting import build_default_prompt, run_multistep, template_hashes
from .sampler import (
    SamplerConfig,
    dump_training_examples,
    export_sft_dataset,
    rejection_sample,
)
from .schema import ArgumentMap, dump_dialogues, load_dialogues, load_schema_catalog
from .scoring import ErrorBreakdown, classify_errors
from .splits import build_split_manifest, split_in_domain, split_out_of_domain

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_BACKEND = 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse would sys.exit(2); we want exit 1
        raise UsageError(message)


# --- artifact helpers --------------------------------------------------------

def _atomic_write(path, text: str) -> None:
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp_name = tempfile.mkstemp(dir=target.parent, prefix=f".{target.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as handle:
            handle.write(text)
        os.replace(tmp_name, target)
    except BaseException:
        try:
            os.unlink(tmp_name)
        except OSError:
            pass
        raise


def _sha256_text(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def _sha256_file(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _write_metadata(
    out_path,
    command: str,
    config: dict,
    inputs: dict[str, str],
    templates: dict[str, str] | None,
) -> None:
    meta = {
        "command": command,
        "config_hash": _sha256_text(json.dumps(config, sort_keys=True)),
        "template_hash": templates,
        "input_hashes": {name: _sha256_file(path) for name, path in inputs.items()},
        "versions": {"arground": __version__, "python": platform.python_version()},
    }
    _atomic_write(f"{out_path}.meta.json", json.dumps(meta, indent=2, sort_keys=True) + "\n")


def _jsonl_rows(path) -> list[dict]:
    rows = []
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = line.strip()
        if not line:
            continue
        try:
            rows.append(json.loads(line))
        except json.JSONDecodeError as exc:
            raise ArgroundError(f"{path}: line {lineno} is not valid JSON: {exc.msg}")
    return rows


def _dump_jsonl(rows: list[dict]) -> str:
    lines = [json.dumps(r, ensure_ascii=False) for r in rows]
    return "\n".join(lines) + ("\n" if lines else "")


# --- subcommands -------------------------------------------------------------

def _cmd_export_sft(args) -> int:
    catalog = load_schema_catalog(args.schemas)
    dialogues = load_dialogues(args.dialogues, catalog)
    examples = export_sft_dataset(dialogues, catalog)
    _atomic_write(args.out, dump_training_examples(examples))
    _write_metadata(
        args.out,
        "export-sft",
        {"out": args.out},
        {"dialogues": args.dialogues, "schemas": args.schemas},
        template_hashes(),
    )
    return EXIT_OK


def _cmd_reject_sample(args) -> int:
    catalog = load_schema_catalog(args.schemas)
    dialogues = load_dialogues(args.dialogues, catalog)
    backend = backend_from_spec(args.backend)
    config = SamplerConfig(
        k=args.k,
        temperature=args.temperature,
        max_tokens=args.max_tokens,
        in_flight=args.in_flight,
        strict=args.strict,
    )
    augmented, stats = rejection_sample(backend, dialogues, catalog, config)
    _atomic_write(args.out, dump_training_examples(augmented))
    _atomic_write(f"{args.out}.stats.json", json.dumps(stats.to_obj(), indent=2) + "\n")
    _write_metadata(
        args.out,
        "reject-sample",
        {
            "backend": args.backend,
            "k": args.k,
            "temperature": args.temperature,
            "max_tokens": args.max_tokens,
            "in_flight": args.in_flight,
            "strict": args.strict,
            "out": args.out,
        },
        {"dialogues": args.dialogues, "schemas": args.schemas},
        template_hashes(),
    )
    return EXIT_OK


def _fill_one_default(backend, schema, dialogue, temperature, max_tokens):
    prompt = build_default_prompt(schema, dialogue).text
    record = backend.generate(
        GenerationRequest(
            prompt=prompt,
            temperature=temperature,
            max_tokens=max_tokens,
            n_samples=1,
            tag=dialogue.id,
        )
    )
    warnings: list[str] = []
    try:
        outcome = extract_argument_map(record.outputs[0])
        arguments = outcome.map
        warnings.extend(outcome.warnings)
    except (NoArgumentObject, MalformedArguments) as exc:
        arguments = ArgumentMap()
        warnings.append(f"unparseable output: {type(exc).__name__}")
    return arguments, warnings


def _cmd_fill(args) -> int:
    catalog = load_schema_catalog(args.schemas)
    dialogues = load_dialogues(args.dialogues, catalog)
    backend = backend_from_spec(args.backend)

    def fill_one(dialogue):
        schema = catalog[dialogue.target_api]
        if args.mode == "multistep":
            arguments, _ = run_multistep(
                backend, schema, dialogue, temperature=args.temperature, max_tokens=args.max_tokens
            )
            warnings: list[str] = []
        else:
            arguments, warnings = _fill_one_default(
                backend, schema, dialogue, args.temperature, args.max_tokens
            )
        return {
            "id": dialogue.id,
            "target_api": dialogue.target_api,
            "mode": args.mode,
            "model": backend.backend_id,
            "arguments": arguments.as_dict(),
            "warnings": warnings,
        }

    if args.in_flight > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=args.in_flight) as pool:
            rows = list(pool.map(fill_one, dialogues))
    else:
        rows = [fill_one(d) for d in dialogues]

    _atomic_write(args.out, _dump_jsonl(rows))
    _write_metadata(
        args.out,
        "fill",
        {
            "mode": args.mode,
            "backend": args.backend,
            "temperature": args.temperature,
            "max_tokens": args.max_tokens,
            "in_flight": args.in_flight,
            "out": args.out,
        },
        {"dialogues": args.dialogues, "schemas": args.schemas},
        template_hashes(),
    )
    return EXIT_OK


def _cmd_evaluate(args) -> int:
    catalog = load_schema_catalog(args.schemas)
    gold_dialogues = load_dialogues(args.gold, catalog)
    pred_rows = _jsonl_rows(args.pred)

    by_id: dict[str, dict] = {}
    for row in pred_rows:
        if "id" not in row or "arguments" not in row:
            raise AlignmentError("prediction rows need 'id' and 'arguments' fields")
        if row["id"] in by_id:
            raise AlignmentError(f"duplicate prediction id '{row['id']}'")
        by_id[row["id"]] = row

    pairs = []
    breakdowns = []
    scored_rows = []
    for dialogue in gold_dialogues:
        row = by_id.pop(dialogue.id, None)
        if row is None:
            raise AlignmentError(f"no prediction for dialogue '{dialogue.id}'")
        pred_map = ArgumentMap.from_dict(row["arguments"])
        breakdown = classify_errors(pred_map, dialogue.gold_arguments, catalog[dialogue.target_api])
        pairs.append((pred_map, dialogue.gold_arguments))
        breakdowns.append(breakdown)
        scored = dict(row)
        scored["breakdown"] = breakdown.to_obj()
        scored["dataset"] = args.dataset
        scored["split"] = args.split
        scored_rows.append(scored)
    if by_id:
        raise AlignmentError(f"predictions for unknown dialogue ids: {sorted(by_id)[:5]}")

    report = evaluate_corpus(pairs, breakdowns)
    backend_label = args.backend_label
    if not backend_label:
        models = {row.get("model", "") for row in pred_rows}
        backend_label = models.pop() if len(models) == 1 else ""
    _atomic_write(args.out, metrics_report_csv(report, args.dataset, args.split, backend_label))
    if args.scored_out:
        _atomic_write(args.scored_out, _dump_jsonl(scored_rows))
    _write_metadata(
        args.out,
        "evaluate",
        {
            "dataset": args.dataset,
            "split": args.split,
            "backend_label": args.backend_label,
            "out": args.out,
            "scored_out": args.scored_out,
        },
        {"pred": args.pred, "gold": args.gold, "schemas": args.schemas},
        None,
    )
    return EXIT_OK


def emit_error_panel(rows: list[dict], group_by: str) -> str:
    """CSV with one row per group: group,nk_rate,mk_rate,sv_rate,hv_rate,n_samples."""
    if not rows:
        raise EmptyCorpus("no breakdowns to report")
    if group_by not in ("model", "split"):
        raise ValueError(f"group_by must be 'model' or 'split', got {group_by!r}")
    groups: dict[str, list[ErrorBreakdown]] = {}
    for row in rows:
        if "breakdown" not in row:
            raise ArgroundError("rows must carry a 'breakdown' field (run evaluate --scored-out)")
        label = str(row.get(group_by, "unknown"))
        groups.setdefault(label, []).append(ErrorBreakdown.from_obj(row["breakdown"]))

    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["group", "nk_rate", "mk_rate", "sv_rate", "hv_rate", "n_samples"])
    for label, breakdowns in groups.items():
        total = sum(b.n_total for b in breakdowns)
        if total > 0:
            rates = [
                sum(getattr(b, name) for b in breakdowns) / total
                for name in ("n_nk", "n_mk", "n_sv", "n_hv")
            ]
        else:
            rates = [0.0, 0.0, 0.0, 0.0]
        writer.writerow([label, *rates, len(breakdowns)])
    return buf.getvalue()


def _cmd_report(args) -> int:
    rows = _jsonl_rows(args.breakdowns)
    _atomic_write(args.out, emit_error_panel(rows, args.group_by))
    _write_metadata(
        args.out,
        "report",
        {"group_by": args.group_by, "out": args.out},
        {"breakdowns": args.breakdowns},
        None,
    )
    return EXIT_OK


def _cmd_split(args) -> int:
    catalog = load_schema_catalog(args.schemas) if args.schemas else None
    dialogues = load_dialogues(args.dialogues, catalog)
    if args.split_kind == "in-domain":
        train, test = split_in_domain(dialogues, args.fraction, args.seed)
        manifest = build_split_manifest(
            "in-domain", train, test, seed=args.seed, test_fraction=args.fraction
        )
        config = {"fraction": args.fraction, "seed": args.seed}
    else:
        holdout = [h for h in (s.strip() for s in args.holdout.split(",")) if h]
        synonyms = None
        if args.synonyms:
            synonyms = json.loads(Path(args.synonyms).read_text(encoding="utf-8"))
        train, test = split_out_of_domain(dialogues, holdout, synonyms)
        manifest = build_split_manifest(
            "out-of-domain", train, test, holdout_domains=holdout, synonym_map=synonyms
        )
        config = {"holdout": args.holdout, "synonyms": args.synonyms}

    _atomic_write(args.out_train, dump_dialogues(train))
    _atomic_write(args.out_test, dump_dialogues(test))
    manifest_path = args.manifest or str(Path(args.out_train).parent / "split_manifest.json")
    _atomic_write(manifest_path, json.dumps(manifest, indent=2, ensure_ascii=False) + "\n")
    inputs = {"dialogues": args.dialogues}
    if args.schemas:
        inputs["schemas"] = args.schemas
    if args.synonyms:
        inputs["synonyms"] = args.synonyms
    _write_metadata(args.out_train, f"split {args.split_kind}", config, inputs, None)
    return EXIT_OK


# --- parser ------------------------------------------------------------------

def build_parser() -> _Parser:
    parser = _Parser(prog="arground", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add_backend_flags(p, temperature_default):
        p.add_argument("--backend", required=True, help="http:<profile> | mock:<script> | replay:<log> | record:<log>")
        p.add_argument("--temperature", type=float, default=temperature_default)
        p.add_argument("--max-tokens", type=int, default=256)
        p.add_argument("--in-flight", type=int, default=DEFAULT_IN_FLIGHT)

    p = sub.add_parser("export-sft", help="emit gold prompt/completion training data")
    p.add_argument("--dialogues", required=True)
    p.add_argument("--schemas", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_export_sft)

    p = sub.add_parser("reject-sample", help="sample K candidates, keep positive-reward ones")
    p.add_argument("--dialogues", required=True)
    p.add_argument("--schemas", required=True)
    add_backend_flags(p, temperature_default=0.8)
    p.add_argument("--k", type=int, default=4)
    p.add_argument("--strict", action="store_true", help="backend failures abort the run")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_reject_sample)

    p = sub.add_parser("fill", help="predict argument maps for dialogues")
    p.add_argument("--mode", choices=("default", "multistep"), default="default")
    p.add_argument("--dialogues", required=True)
    p.add_argument("--schemas", required=True)
    add_backend_flags(p, temperature_default=0.0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_fill)

    p = sub.add_parser("evaluate", help="score predictions and emit the metrics CSV")
    p.add_argument("--pred", required=True)
    p.add_argument("--gold", required=True)
    p.add_argument("--schemas", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--dataset", default="")
    p.add_argument("--split", default="")
    p.add_argument("--backend-label", default="")
    p.add_argument("--scored-out", default="", help="also write predictions with embedded breakdowns")
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser("split", help="construct train/test splits")
    split_sub = p.add_subparsers(dest="split_kind", required=True)
    for kind in ("in-domain", "out-of-domain"):
        sp = split_sub.add_parser(kind)
        sp.add_argument("--dialogues", required=True)
        sp.add_argument("--schemas", default="")
        sp.add_argument("--out-train", required=True)
        sp.add_argument("--out-test", required=True)
        sp.add_argument("--manifest", default="")
        if kind == "in-domain":
            sp.add_argument("--fraction", type=float, required=True)
            sp.add_argument("--seed", type=int, required=True)
        else:
            sp.add_argument("--holdout", required=True, help="comma-separated domains")
            sp.add_argument("--synonyms", default="", help="JSON file mapping domain -> synonym")
        sp.set_defaults(func=_cmd_split)

    p = sub.add_parser("report", help="emit the per-group error-rate panel CSV")
    p.add_argument("--breakdowns", required=True, help="scored predictions JSONL")
    p.add_argument("--group-by", choices=("model", "split"), required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_report)

    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        return args.func(args)
    except (BackendError, AuthError, LogCorrupt) as exc:
        print(f"backend error: {exc}", file=sys.stderr)
        return EXIT_BACKEND
    except ValueError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ArgroundError, OSError, json.JSONDecodeError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
