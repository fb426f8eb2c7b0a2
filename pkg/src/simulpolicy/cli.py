"""Command-line front end.

Subcommands::

    simulpolicy eval        run one policy over a manifest
    simulpolicy sweep       policies x chunk sizes, written as CSV
    simulpolicy ctc-decode  n-best transcripts from a logits file
    simulpolicy metrics     AL/AP/DAL (and BLEU) from a stored delay log
    simulpolicy lcp         longest common prefix of token sequences
    simulpolicy synth       generate a synthetic corpus

Exit status: 0 success, 1 runtime failure, 2 usage error. Errors are
also reported as one JSON line on stderr.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path

from .core import CommitRecord, EngineConfig
from .ctc import UnigramScorer, attention_rescore, ctc_greedy, ctc_prefix_beam_search, read_logits
from .errors import InvalidParam, SimulPolicyError, UsageError
from .harness import (
    CascadeBackend,
    EndToEndBackend,
    SweepConfig,
    SyntheticTranslator,
    SyntheticTranslatorSpec,
    evaluate_corpus,
    load_manifest,
    make_cascade_corpus,
    make_e2e_corpus,
    sweep,
    write_summary,
    write_sweep_csv,
    write_utterances_jsonl,
)
from .metrics import DelaySchedule, bleu, report, tokenize_for_bleu, word_delays
from .policies import PolicySpec, longest_common_prefix
from .regularize import parse_regularizers

CTC_MODES = {"prefix_beam": "ctc_prefix_beam_search", "rescoring": "attention_rescoring"}
POLICY_NAMES = {"hold": "hold_n", "la": "la_n", "rbi": "r_bi"}
SYNTH_FIELDS = {
    "unstable_k": "unstable_suffix_len",
    "sensitivity": "perturbation_sensitivity",
    "tokens_per_chunk": "tokens_per_chunk",
    "unit_ms": "unit_ms",
    "guess_accuracy": "guess_accuracy",
    "backend_seed": "seed",
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        _emit_error("UsageError", message)
        raise SystemExit(2)


def _emit_error(kind, message):
    sys.stderr.write(json.dumps({"error": kind, "message": message}) + "\n")


def _int_list(text):
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _add_synth_flags(p):
    g = p.add_argument_group("synthetic backend")
    g.add_argument("--backend-config", type=Path, help="JSON synthetic-backend spec (default: backend.json next to the manifest)")
    g.add_argument("--unstable-k", type=int)
    g.add_argument("--sensitivity", choices=["none", "length_only", "full_input", "anchored"])
    g.add_argument("--tokens-per-chunk", type=int)
    g.add_argument("--unit-ms", type=int)
    g.add_argument("--guess-accuracy", type=float)
    g.add_argument("--backend-seed", type=int)


def _add_run_flags(p, sweep_mode=False):
    p.add_argument("--manifest", type=Path, required=True)
    p.add_argument("--mode", choices=["e2e", "cascade"])
    p.add_argument("--backend", choices=["synthetic", "logits"])
    p.add_argument("--policy", choices=sorted(POLICY_NAMES))
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--reg", default="", help="regularizers, e.g. tst:0.9:1.1,na:gaussian:0.005")
    p.add_argument("--nbest", type=int, default=4)
    p.add_argument("--beam", type=int, default=8)
    p.add_argument("--ctc-mode", choices=sorted(CTC_MODES), default="prefix_beam")
    p.add_argument("--ctc-weight", type=float, default=0.5)
    p.add_argument("--chunk-ms", type=int, default=None if sweep_mode else 500)
    if sweep_mode:
        p.add_argument("--chunk-sweep", type=_int_list, default=None)
        p.add_argument("--policies", default=None, help="comma-separated, e.g. hold-0,la-2,rbi")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", type=Path, default=Path("out"))
    p.add_argument("--skip-errors", action="store_true")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--detokenizer", choices=["word", "sentencepiece", "bpe"], default="word")
    p.add_argument("--smooth", action="store_true", help="add-one BLEU smoothing")
    p.add_argument("--no-finalize", action="store_true", help="do not commit the final hypothesis after the last chunk")
    p.add_argument("--word-level", action="store_true", help="only cut common prefixes at word boundaries")
    _add_synth_flags(p)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="simulpolicy", description="Simultaneous translation commit policies and evaluation.")
    sub = parser.add_subparsers(dest="subcommand", required=True, parser_class=_Parser)

    _add_run_flags(sub.add_parser("eval", help="evaluate one policy on a manifest"))
    _add_run_flags(sub.add_parser("sweep", help="policies x chunk sizes"), sweep_mode=True)

    p = sub.add_parser("ctc-decode", help="n-best transcripts from a logits file")
    p.add_argument("--logits", type=Path, required=True)
    p.add_argument("--ctc-mode", choices=["greedy"] + sorted(CTC_MODES), default="prefix_beam")
    p.add_argument("--beam", type=int, default=8)
    p.add_argument("--nbest", type=int, default=4)
    p.add_argument("--ctc-weight", type=float, default=0.5)
    p.add_argument("--scorer-table", type=Path, help="JSON object token -> log-prob for rescoring (default uniform)")
    p.add_argument("--out", type=Path)

    p = sub.add_parser("metrics", help="latency metrics from a delay log")
    p.add_argument("--log", type=Path, required=True, help="JSON object or JSON lines with delays_ms/src_duration_ms or tokens/consumed_ms")
    p.add_argument("--detokenizer", choices=["word", "sentencepiece", "bpe"], default="word")
    p.add_argument("--smooth", action="store_true")
    p.add_argument("--out", type=Path)

    p = sub.add_parser("lcp", help="longest common prefix of whitespace-tokenized sequences")
    p.add_argument("sequences", nargs="*")
    p.add_argument("--file", type=Path, help="one sequence per line")

    p = sub.add_parser("synth", help="write a synthetic corpus")
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--mode", choices=["e2e", "cascade"], default="e2e")
    p.add_argument("--num", type=int, default=20)
    p.add_argument("--seed", type=int, default=None)
    _add_synth_flags(p)
    return parser


@dataclass
class CliConfig:
    subcommand: str
    args: argparse.Namespace
    policies: list[PolicySpec] = field(default_factory=list)
    chunk_sizes: list[int] = field(default_factory=list)
    engine: EngineConfig | None = None
    synth_spec: SyntheticTranslatorSpec | None = None


def _policy_from(kind, n, regs, word_level):
    kind = POLICY_NAMES[kind]
    if n is None:
        n = 2 if kind == "la_n" else 0
    return PolicySpec(kind, n, tuple(regs), word_level)


def _parse_policy_list(text, regs, word_level):
    specs = []
    for item in text.split(","):
        item = item.strip().lower()
        if not item:
            continue
        name, _, num = item.partition("-")
        if name not in POLICY_NAMES:
            raise UsageError(f"unknown policy {item!r}")
        try:
            n = int(num) if num else None
        except ValueError:
            raise UsageError(f"bad policy parameter in {item!r}") from None
        specs.append(_policy_from(name, n, regs, word_level))
    return specs


def _synth_spec(args, manifest_dir=None):
    base = {}
    cfg = getattr(args, "backend_config", None)
    if cfg is None and manifest_dir is not None and (manifest_dir / "backend.json").is_file():
        cfg = manifest_dir / "backend.json"
    if cfg is not None:
        try:
            base = json.loads(Path(cfg).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read backend config {cfg}: {exc}") from exc
    for flag, name in SYNTH_FIELDS.items():
        value = getattr(args, flag, None)
        if value is not None:
            base[name] = value
    try:
        return SyntheticTranslatorSpec.from_dict(base)
    except TypeError as exc:
        raise UsageError(f"bad backend config: {exc}") from exc


def _default_seed(args):
    if args.seed is not None:
        return args.seed
    env = os.environ.get("SIMULPOLICY_SEED")
    if env:
        try:
            return int(env)
        except ValueError:
            raise UsageError(f"SIMULPOLICY_SEED must be an integer, got {env!r}") from None
    return 0


def parse_args(argv) -> CliConfig:
    """Parse and validate; usage problems raise :class:`UsageError` (argparse errors exit 2 directly)."""
    args = build_parser().parse_args(argv)
    cfg = CliConfig(args.subcommand, args)
    try:
        if args.subcommand in ("eval", "sweep"):
            _validate_run(cfg)
        elif args.subcommand == "synth":
            args.seed = _default_seed(args)
            cfg.synth_spec = _synth_spec(args)
            if args.num < 1:
                raise UsageError("--num must be >= 1")
        elif args.subcommand == "ctc-decode":
            if args.beam < 1 or not 1 <= args.nbest <= args.beam:
                raise UsageError("need beam >= 1 and 1 <= nbest <= beam")
            if not 0 <= args.ctc_weight <= 1:
                raise UsageError("--ctc-weight must lie in [0, 1]")
        elif args.subcommand == "lcp":
            if bool(args.sequences) == bool(args.file):
                raise UsageError("give sequences either as arguments or with --file")
    except InvalidParam as exc:
        raise UsageError(str(exc)) from exc
    return cfg


def _validate_run(cfg):
    args = cfg.args
    mode, backend = args.mode, args.backend
    if mode is None:
        mode = "cascade" if backend == "logits" else "e2e"
    if backend is None:
        backend = "logits" if mode == "cascade" else "synthetic"
    if (mode == "cascade") != (backend == "logits"):
        raise UsageError(f"--mode {mode} cannot be combined with --backend {backend}")
    args.mode, args.backend = mode, backend
    regs = parse_regularizers(args.reg)
    if args.subcommand == "sweep" and args.policies:
        cfg.policies = _parse_policy_list(args.policies, regs, args.word_level)
    else:
        if args.policy is None:
            raise UsageError("--policy is required")
        cfg.policies = [_policy_from(args.policy, args.n, regs, args.word_level)]
    if not cfg.policies:
        raise UsageError("no policies given")
    if mode == "e2e" and any(p.kind == "r_bi" and not p.regularizer_specs for p in cfg.policies):
        raise UsageError("R-BI needs at least one regularizer (--reg)")
    if args.beam < 1 or not 1 <= args.nbest <= args.beam:
        raise UsageError("need beam >= 1 and 1 <= nbest <= beam")
    if not 0 <= args.ctc_weight <= 1:
        raise UsageError("--ctc-weight must lie in [0, 1]")
    if args.jobs < 1:
        raise UsageError("--jobs must be >= 1")
    if args.subcommand == "sweep":
        sizes = args.chunk_sweep or ([args.chunk_ms] if args.chunk_ms else [250, 500, 1000])
    else:
        sizes = [args.chunk_ms]
    cfg.chunk_sizes = sizes
    seed = _default_seed(args)
    for s in sizes:
        EngineConfig(s, seed=seed)
    cfg.engine = EngineConfig(sizes[0], cfg.policies[0], seed, not args.no_finalize)
    cfg.synth_spec = _synth_spec(args, args.manifest.parent)


def _backend(cfg):
    args = cfg.args
    translator = SyntheticTranslator(cfg.synth_spec)
    if args.mode == "e2e":
        return EndToEndBackend(translator)
    return CascadeBackend(translator, beam=args.beam, n_best=args.nbest,
                          ctc_mode=CTC_MODES[args.ctc_mode], ctc_weight=args.ctc_weight)


def _run_kwargs(args):
    return {"jobs": args.jobs, "skip_errors": args.skip_errors, "detokenizer": args.detokenizer, "smooth": args.smooth}


def _cmd_eval(cfg):
    args = cfg.args
    manifest = load_manifest(args.manifest)
    rep = evaluate_corpus(manifest, _backend(cfg), cfg.engine, cfg.policies[0], **_run_kwargs(args))
    args.out.mkdir(parents=True, exist_ok=True)
    write_utterances_jsonl(args.out / "utterances.jsonl", rep)
    write_summary(args.out / "summary.json", rep)
    print(f"{rep.policy} chunk={rep.chunk_ms}ms utterances={len(rep.utterances)} failed={len(rep.failures)}")
    print(f"BLEU={rep.bleu:.2f} AL={rep.al_ms:.0f}ms AP={rep.ap:.3f} DAL={rep.dal_ms:.0f}ms low_latency={rep.low_latency}")
    print(f"wrote {args.out / 'utterances.jsonl'} and {args.out / 'summary.json'}")
    return 0


def _cmd_sweep(cfg):
    args = cfg.args
    manifest = load_manifest(args.manifest)
    rows = sweep(manifest, _backend(cfg), SweepConfig(cfg.chunk_sizes, cfg.policies), cfg.engine, **_run_kwargs(args))
    args.out.mkdir(parents=True, exist_ok=True)
    write_sweep_csv(args.out / "sweep.csv", rows)
    print(f"{'policy':<40} {'chunk_ms':>8} {'bleu':>7} {'al_ms':>8} {'ap':>6} {'dal_ms':>8}")
    for r in rows:
        print(f"{r['policy']:<40} {r['chunk_ms']:>8} {r['bleu']:>7.2f} {r['al_ms']:>8.0f} {r['ap']:>6.3f} {r['dal_ms']:>8.0f}")
    print(f"wrote {args.out / 'sweep.csv'}")
    return 0


def _cmd_ctc_decode(cfg):
    args = cfg.args
    logits = read_logits(args.logits)
    if args.ctc_mode == "greedy":
        hyp = ctc_greedy(logits)
        result = [{"transcript": " ".join(hyp.tokens), "ctc_log_prob": hyp.score}]
    else:
        cands = ctc_prefix_beam_search(logits, args.beam, args.nbest)
        if args.ctc_mode == "rescoring":
            if args.scorer_table:
                scorer = UnigramScorer(json.loads(args.scorer_table.read_text()))
            else:
                scorer = UnigramScorer.uniform(logits.vocab)
            cands = attention_rescore(cands, scorer, args.ctc_weight)
        result = [{"transcript": " ".join(c.transcript), "ctc_log_prob": c.ctc_log_prob,
                   "rescored_log_prob": c.rescored_log_prob} for c in cands]
    text = json.dumps(result, indent=2, ensure_ascii=False)
    if args.out:
        args.out.write_text(text + "\n")
    print(text)
    return 0


def _metrics_for(entry, detokenizer, smooth):
    if "delays_ms" in entry:
        sched = DelaySchedule(tuple(entry["delays_ms"]), float(entry["src_duration_ms"]))
    else:
        records = [CommitRecord(t, float(d), 0) for t, d in zip(entry["tokens"], entry["consumed_ms"])]
        sched = word_delays(records, float(entry["src_duration_ms"]), detokenizer)
    score = float("nan")
    if "hypothesis" in entry and "reference" in entry:
        h = entry["hypothesis"]
        r = entry["reference"]
        h = tokenize_for_bleu(h) if isinstance(h, str) else h
        r = tokenize_for_bleu(r) if isinstance(r, str) else r
        score = bleu([h], [r], smooth=smooth)
    out = report(sched, score).to_dict()
    if score != score:
        out["bleu"] = None
    return out


def _cmd_metrics(cfg):
    args = cfg.args
    try:
        text = args.log.read_text()
    except OSError as exc:
        raise UsageError(f"cannot read {args.log}: {exc}") from exc
    try:
        data = json.loads(text)
        entries = data if isinstance(data, list) else [data]
    except json.JSONDecodeError:
        entries = [json.loads(line) for line in text.splitlines() if line.strip()]
    try:
        results = [_metrics_for(e, args.detokenizer, args.smooth) for e in entries]
    except (KeyError, TypeError, ValueError) as exc:
        raise UsageError(f"malformed delay log: {exc!r}") from exc
    out = results[0] if len(results) == 1 else results
    text = json.dumps(out, indent=2)
    if args.out:
        args.out.write_text(text + "\n")
    print(text)
    return 0


def _cmd_lcp(cfg):
    args = cfg.args
    lines = args.sequences if args.sequences else args.file.read_text().splitlines()
    print(" ".join(longest_common_prefix([ln.split() for ln in lines])))
    return 0


def _cmd_synth(cfg):
    args = cfg.args
    make = make_e2e_corpus if args.mode == "e2e" else make_cascade_corpus
    path = make(args.out, args.num, cfg.synth_spec, seed=args.seed)
    print(f"wrote {path}")
    return 0


COMMANDS = {
    "eval": _cmd_eval,
    "sweep": _cmd_sweep,
    "ctc-decode": _cmd_ctc_decode,
    "metrics": _cmd_metrics,
    "lcp": _cmd_lcp,
    "synth": _cmd_synth,
}


def run(cfg: CliConfig) -> int:
    try:
        return COMMANDS[cfg.subcommand](cfg)
    except UsageError as exc:
        _emit_error("UsageError", str(exc))
        return 2
    except SimulPolicyError as exc:
        _emit_error(type(exc).__name__, str(exc))
        return 1
    except OSError as exc:
        _emit_error("IOError", str(exc))
        return 1


def main(argv=None) -> int:
    try:
        cfg = parse_args(sys.argv[1:] if argv is None else argv)
    except UsageError as exc:
        _emit_error("UsageError", str(exc))
        return 2
    except SystemExit as exc:
        return int(exc.code or 0)
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
