"""Command-line interface: one binary exposing the full pipeline.

Exit codes: 0 success, 1 data error, 2 usage error. Subcommand outputs go
to the files named by their flags (stdout for tabular summaries), while
diagnostics go to stderr. Every subcommand is deterministic given its
flags and seed.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import replace

from .decoder import DecodeConfig, decode_batch
from .errors import (
    DataError,
    EmptyCorpus,
    MissingField,
    ToolkitError,
    UsageError,
)
from .io import (
    DatasetManifest,
    ManifestItem,
    load_manifest,
    read_emissions,
    save_manifest,
    write_emissions,
)
from .lexicon import build_trie, load_lexicon, unit_scores_from_lm
from .lm import (
    MAX_ORDER,
    SMOOTHING_KNESER_NEY,
    SMOOTHINGS,
    count_ngrams,
    estimate,
    perplexity,
    read_arpa,
    write_arpa,
)
from .metrics import OBJECTIVE_WER, OBJECTIVES, TuneGrid, evaluate, tune
from .simulate import NoiseModel, build_vocab, synthesize
from .tokenizer import (
    LEVEL_SUBWORD,
    LEVEL_WORD,
    LEVELS,
    SPACE_MODE_SEPARATE,
    SPACE_MODES,
    load_subword_model,
    save_subword_model,
    tokenize,
    train_subword,
)


def _read_lines(path: str) -> list[str]:
    with open(path, "r", encoding="utf-8") as fh:
        return [line.rstrip("\n") for line in fh]


def cmd_tokenize(args: argparse.Namespace) -> int:
    lines = _read_lines(args.input)
    model = None
    if args.level == LEVEL_SUBWORD:
        if args.train_subword is not None:
            if not args.model:
                raise UsageError("--train-subword needs --model to store the result")
            model = train_subword(lines, args.train_subword, args.space_mode)
            save_subword_model(model, args.model)
        elif args.model:
            model = load_subword_model(args.model)
        else:
            raise UsageError("--level subword needs --model or --train-subword")
    elif args.train_subword is not None:
        raise UsageError("--train-subword only applies to --level subword")
    with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
        for line in lines:
            fh.write(" ".join(tokenize(line, args.level, model)) + "\n")
    return 0


def cmd_train_lm(args: argparse.Namespace) -> int:
    if not 1 <= args.order <= MAX_ORDER:
        raise UsageError(
            f"--order {args.order} is unsupported; the supported range is 1-{MAX_ORDER}"
        )
    sequences = [line.split() for line in _read_lines(args.input)]
    counts = count_ngrams(sequences, args.order)
    model = estimate(counts, args.smoothing)
    write_arpa(model, args.out)
    print(f"perplexity: {perplexity(model, sequences):.6g}")
    return 0


def cmd_decode(args: argparse.Namespace) -> int:
    manifest = load_manifest(args.emissions)
    lm_model = read_arpa(args.lm) if args.lm else None
    config = DecodeConfig(
        lm_level=args.lm_level,
        beam_size=args.beam_size,
        lm_weight=args.lm_weight,
        unit_insertion_score=args.unit_insertion_score,
        nbest=args.nbest,
    )
    trie = None
    if lm_model is not None and args.lm_level in (LEVEL_SUBWORD, LEVEL_WORD):
        if not args.lexicon:
            raise UsageError(f"--lm-level {args.lm_level} needs --lexicon")
        lex = load_lexicon(args.lexicon)
        trie = build_trie(lex, unit_scores_from_lm(lex, lm_model))
    items = [(item.id, item.emissions_path) for item in manifest.items]
    results = decode_batch(items, config, lm_model, trie, adapt_s2s=args.adapt_s2s)
    failed = 0
    with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
        for res in results:
            if res.error is not None:
                failed += 1
                print(f"item {res.id}: {res.error}", file=sys.stderr)
                continue
            for text, score in res.nbest:
                fh.write(
                    json.dumps(
                        {
                            "id": res.id,
                            "text": text,
                            "score": score,
                            "seconds": res.seconds,
                        },
                        ensure_ascii=False,
                    )
                    + "\n"
                )
    if failed:
        print(f"{failed} of {len(results)} items failed", file=sys.stderr)
        return 1
    return 0


def _load_hypotheses(path: str) -> dict[str, tuple[str, float | None]]:
    # The first line per id is its top-ranked hypothesis.
    hyps: dict[str, tuple[str, float | None]] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataError(f"{path}:{lineno}: {exc}") from None
            if not isinstance(obj, dict) or "id" not in obj or "text" not in obj:
                raise MissingField(f"{path}:{lineno}: hypothesis lines need id and text")
            hid = str(obj["id"])
            if hid not in hyps:
                seconds = obj.get("seconds")
                hyps[hid] = (
                    str(obj["text"]),
                    float(seconds) if seconds is not None else None,
                )
    return hyps


def cmd_evaluate(args: argparse.Namespace) -> int:
    manifest = load_manifest(args.refs, require_references=True)
    refs = {item.id: item.reference for item in manifest.items}
    hyps = _load_hypotheses(args.hyps)
    for rid in refs:
        if rid not in hyps:
            raise DataError(f"no hypothesis for id {rid!r}")
    for hid in hyps:
        if hid not in refs:
            raise DataError(f"hypothesis id {hid!r} has no reference")
    ids = [item.id for item in manifest.items]
    pairs = [(refs[i], hyps[i][0]) for i in ids]
    seconds: list[float | None] | None = [hyps[i][1] for i in ids]
    if all(s is None for s in seconds):
        seconds = None
    report = evaluate(pairs, ids=ids, seconds=seconds)
    print(report.format_table())
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(report.to_json() + "\n")
        if not args.no_plot:
            from .plots import save_report_figure

            save_report_figure(report, os.path.splitext(args.out)[0] + ".png")
    return 0


def _parse_weights(spec: str) -> tuple[float, ...]:
    try:
        if ":" in spec:
            parts = spec.split(":")
            if len(parts) != 3:
                raise ValueError
            start, stop, step = (float(x) for x in parts)
            if step <= 0:
                raise ValueError
            out = []
            i = 0
            while True:
                w = start + i * step
                if w > stop + 1e-9:
                    break
                out.append(round(w, 10))
                i += 1
            if not out:
                raise ValueError
            return tuple(out)
        return tuple(float(x) for x in spec.split(","))
    except ValueError:
        raise UsageError(
            f"cannot parse weight grid {spec!r}; use start:stop:step or a comma list"
        ) from None


def cmd_tune(args: argparse.Namespace) -> int:
    manifest = load_manifest(args.valset, require_references=True)
    valset = [
        (read_emissions(item.emissions_path), item.reference)
        for item in manifest.items
    ]
    family = {}
    for name in sorted(os.listdir(args.lm_family)):
        if not name.endswith(".arpa"):
            continue
        model = read_arpa(os.path.join(args.lm_family, name))
        if model.order in family:
            raise DataError(f"{args.lm_family}: two models of order {model.order}")
        family[model.order] = model
    if not family:
        raise DataError(f"{args.lm_family}: no .arpa files found")
    if args.orders:
        try:
            orders = tuple(int(x) for x in args.orders.split(","))
        except ValueError:
            raise UsageError(f"cannot parse --orders {args.orders!r}") from None
    else:
        orders = tuple(sorted(family))
    grid = TuneGrid(
        lm_weights=_parse_weights(args.weights), orders=orders, objective=args.objective
    )
    config = DecodeConfig(
        lm_level=args.lm_level, beam_size=args.beam_size, lm_weight=0.0
    )
    tries = None
    if args.lm_level in (LEVEL_SUBWORD, LEVEL_WORD):
        if not args.lexicon:
            raise UsageError(f"--lm-level {args.lm_level} needs --lexicon")
        lex = load_lexicon(args.lexicon)
        tries = {
            order: build_trie(lex, unit_scores_from_lm(lex, family[order]))
            for order in orders
            if order in family
        }
    result = tune(valset, grid, family, config, tries)
    best = next(
        p
        for p in result.points
        if p.order == result.best_order
        and p.lm_weight == result.best_weight
        and p.objective_value is not None
    )
    print(
        f"best: order={result.best_order} lm_weight={result.best_weight:g} "
        f"{result.objective}={100.0 * best.objective_value:.2f}%"
    )
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
            json.dump(result.to_dict(), fh, ensure_ascii=False, indent=2)
            fh.write("\n")
        if not args.no_plot:
            from .plots import save_tune_figure

            save_tune_figure(result, os.path.splitext(args.out)[0] + ".png")
    return 0


def cmd_simulate(args: argparse.Namespace) -> int:
    lines = _read_lines(args.text)
    if not lines:
        raise EmptyCorpus(f"{args.text}: no lines to simulate")
    os.makedirs(args.out, exist_ok=True)
    vocab = build_vocab(lines)
    noise = NoiseModel(
        tau=args.tau,
        p_blank=args.p_blank,
        frames_per_char=args.frames_per_char,
        seed=args.seed,
    )
    width = max(4, len(str(len(lines) - 1)))
    items = []
    for i, line in enumerate(lines):
        item_id = f"{i:0{width}d}"
        path = os.path.join(args.out, item_id + ".npy")
        write_emissions(synthesize(line, replace(noise, seed=args.seed + i), vocab), path)
        items.append(ManifestItem(id=item_id, emissions_path=path, reference=line))
    save_manifest(
        DatasetManifest(items=tuple(items)), os.path.join(args.out, "manifest.jsonl")
    )
    print(f"wrote {len(items)} items to {args.out}", file=sys.stderr)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="atrlm",
        description=(
            "n-gram language models and LM-fused beam decoding for"
            " text recognition emission matrices"
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    t = sub.add_parser("tokenize", help="tokenize a line corpus")
    t.add_argument("--level", choices=LEVELS, required=True, help="token granularity")
    t.add_argument("--in", dest="input", required=True, metavar="PATH", help="input corpus, one sample per line")
    t.add_argument("--out", required=True, metavar="PATH", help="output token lines, space-joined")
    t.add_argument("--model", metavar="PATH", help="subword model file to load (or save with --train-subword)")
    t.add_argument("--train-subword", type=int, metavar="N", help="train a subword model with vocabulary budget N on the input first")
    t.add_argument("--space-mode", choices=SPACE_MODES, default=SPACE_MODE_SEPARATE, help="space handling for subword training (default: %(default)s)")
    t.set_defaults(func=cmd_tokenize)

    tl = sub.add_parser("train-lm", help="estimate an n-gram model and write ARPA")
    tl.add_argument("--order", type=int, required=True, help="n-gram order, 1-6")
    tl.add_argument("--smoothing", choices=SMOOTHINGS, default=SMOOTHING_KNESER_NEY, help="smoothing method (default: %(default)s)")
    tl.add_argument("--in", dest="input", required=True, metavar="PATH", help="tokenized corpus, tokens space-separated")
    tl.add_argument("--out", required=True, metavar="PATH", help="ARPA output path")
    tl.set_defaults(func=cmd_train_lm)

    d = sub.add_parser("decode", help="decode a manifest of emission matrices")
    d.add_argument("--emissions", required=True, metavar="MANIFEST", help="dataset manifest (JSON lines)")
    d.add_argument("--lm", metavar="ARPA", help="language model; omit for greedy decoding")
    d.add_argument("--lm-level", choices=LEVELS, default="character", help="LM unit granularity (default: %(default)s)")
    d.add_argument("--lexicon", metavar="PATH", help="unit spelling lexicon, required for subword/word LMs")
    d.add_argument("--lm-weight", type=float, default=None, help="fusion weight; defaults to 1.5 (character/subword) or 0.5 (word)")
    d.add_argument("--beam-size", type=int, default=25, help="beam width (default: %(default)s)")
    d.add_argument("--nbest", type=int, default=1, help="hypotheses per item, one JSON line each (default: %(default)s)")
    d.add_argument("--unit-insertion-score", type=float, default=0.0, help="score bonus per emitted unit (default: %(default)s)")
    d.add_argument("--adapt-s2s", action="store_true", help="route seq2seq matrices through the blank-frame adapter")
    d.add_argument("--out", required=True, metavar="PATH", help="hypotheses output (JSON lines)")
    d.set_defaults(func=cmd_decode)

    e = sub.add_parser("evaluate", help="score hypotheses against references")
    e.add_argument("--refs", required=True, metavar="MANIFEST", help="manifest with references")
    e.add_argument("--hyps", required=True, metavar="PATH", help="hypotheses (JSON lines)")
    e.add_argument("--out", metavar="PATH", help="JSON report path; a figure lands next to it")
    e.add_argument("--no-plot", action="store_true", help="skip the report figure")
    e.set_defaults(func=cmd_evaluate)

    tu = sub.add_parser("tune", help="grid-search LM order and weight")
    tu.add_argument("--valset", required=True, metavar="MANIFEST", help="validation manifest with references")
    tu.add_argument("--lm-family", required=True, metavar="DIR", help="directory of .arpa models, one per order")
    tu.add_argument("--weights", default="0:5:0.5", help="weight grid, start:stop:step or comma list (default: %(default)s)")
    tu.add_argument("--orders", metavar="LIST", help="comma list of orders (default: every order in --lm-family)")
    tu.add_argument("--objective", choices=OBJECTIVES, default=OBJECTIVE_WER, help="metric to minimize (default: %(default)s)")
    tu.add_argument("--lm-level", choices=LEVELS, default="character", help="LM unit granularity (default: %(default)s)")
    tu.add_argument("--lexicon", metavar="PATH", help="unit spelling lexicon for subword/word LMs")
    tu.add_argument("--beam-size", type=int, default=25, help="beam width (default: %(default)s)")
    tu.add_argument("--out", metavar="PATH", help="JSON surface path; a figure lands next to it")
    tu.add_argument("--no-plot", action="store_true", help="skip the surface figure")
    tu.set_defaults(func=cmd_tune)

    s = sub.add_parser("simulate", help="synthesize noisy emissions from text")
    s.add_argument("--text", required=True, metavar="PATH", help="reference corpus, one line per item")
    s.add_argument("--tau", type=float, default=0.25, help="confusion temperature (default: %(default)s)")
    s.add_argument("--p-blank", type=float, default=0.3, help="blank affinity of content frames (default: %(default)s)")
    s.add_argument("--frames-per-char", type=int, default=1, help="content frames per character (default: %(default)s)")
    s.add_argument("--seed", type=int, default=0, help="base seed; item i uses seed+i (default: %(default)s)")
    s.add_argument("--out", required=True, metavar="DIR", help="output directory for matrices and manifest")
    s.set_defaults(func=cmd_simulate)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ToolkitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
