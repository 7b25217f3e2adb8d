"""Command-line entry point.

    pairforge train-lm | align | phrases | tune | decode | synthesize | evaluate | profile

Each command reads its inputs from the config (or earlier artifacts in the
output directory), writes its own artifacts there and a
``<command>.manifest.json`` listing input and output checksums.  Exit
status is 0 on success, 1 on validation errors and 2 on runtime errors.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import sys
from itertools import chain
from pathlib import Path

from . import __version__, metrics, synth
from .align import AlignmentMatrix, TranslationTable, align_corpus, build_phrase_table, PhraseTable
from .config import PipelineConfig, from_dict, load_config
from .decode import DecoderParams, LogLinearWeights, Translator, scale_lm_weight
from .errors import ConfigError, MissingArtifact, PairforgeError, ValidationError
from .lm import perplexity, read_arpa, train_lm, write_arpa
from .mert import mert_run, sample_dev
from .mtclient import ExternalService, GoldReference, LocalTuned
from .textcore import iter_sentences, load_parallel, split_tokens, write_sentences

log = logging.getLogger("pairforge")

COMMANDS = ("train-lm", "align", "phrases", "tune", "decode", "synthesize", "evaluate", "profile")

LM_FILE = "lm.arpa"
TTABLE_FWD = "ttable.fwd.txt"
TTABLE_REV = "ttable.rev.txt"
ALIGN_FILE = "alignments.txt"
PHRASE_FILE = "phrase_table.txt"
MERT_LOG = "mert_log.csv"
DECODE_FILE = "decoded.txt"
PAIRS_PREFIX = "pairs"
REPORT_FILE = "drop_report.json"
EVAL_FILE = "evaluation.json"
PROFILE_FILE = "profile.json"


# --------------------------------------------------------------------------
# helpers


def sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def write_json(path, obj) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _label(cfg: PipelineConfig, path) -> str:
    # artifacts of earlier commands are named relative to the output directory
    path = Path(path)
    try:
        return path.resolve().relative_to(cfg.out.resolve()).as_posix()
    except ValueError:
        return str(path)


def write_manifest(cfg: PipelineConfig, command: str, inputs, outputs) -> Path:
    """Checksums of everything read and written; no timestamps, so reruns match."""
    settings = cfg.to_json()
    for key in ("out_dir", "threads"):
        settings.pop(key)
    manifest = {
        "command": command,
        "version": __version__,
        "config": settings,
        "inputs": {_label(cfg, p): sha256(p) for p in inputs},
        "outputs": {Path(p).name: sha256(p) for p in outputs},
    }
    path = cfg.artifact(f"{command}.manifest.json")
    write_json(path, manifest)
    return path


def need(path) -> Path:
    path = Path(path)
    if not path.exists():
        raise MissingArtifact(path, "run the producing command first")
    return path


def parallel_corpus(cfg: PipelineConfig):
    return load_parallel(cfg.require("parallel_src"), cfg.require("parallel_tgt"), name="parallel")


def decoder_params(cfg: PipelineConfig) -> DecoderParams:
    return DecoderParams(beam_size=cfg.beam_size, distortion_limit=cfg.distortion_limit, table_limit=cfg.table_limit)


def load_translator(cfg: PipelineConfig, weights: LogLinearWeights | None = None):
    pt_path, lm_path = need(cfg.artifact(PHRASE_FILE)), need(cfg.artifact(LM_FILE))
    pt = PhraseTable.read(pt_path, cfg.max_phrase_len)
    lm = read_arpa(lm_path)
    return Translator(pt, lm, weights or LogLinearWeights(), decoder_params(cfg)), [pt_path, lm_path]


def load_weights(cfg: PipelineConfig):
    path = cfg.weights_path()
    if not path.exists():
        raise MissingArtifact(path, "tuned weights; run 'tune' first or set weights_file")
    try:
        return LogLinearWeights.load(path), path
    except (ValueError, KeyError, TypeError) as exc:
        raise ConfigError("weights_file", f"{path}: {exc}") from exc


def count_lines(path) -> int:
    n = 0
    for _ in iter_sentences(path):
        n += 1
    return n


# --------------------------------------------------------------------------
# commands


def cmd_train_lm(cfg: PipelineConfig, args) -> None:
    tgt = cfg.require("parallel_tgt")
    out = cfg.artifact(LM_FILE)
    model = train_lm(iter_sentences(tgt), cfg.lm_order)
    write_arpa(model, out)
    write_manifest(cfg, "train-lm", [tgt], [out])


def cmd_align(cfg: PipelineConfig, args) -> None:
    corpus = parallel_corpus(cfg)
    fwd, rev, alignments = align_corpus(corpus, cfg.em_iterations)
    outs = [cfg.artifact(TTABLE_FWD), cfg.artifact(TTABLE_REV), cfg.artifact(ALIGN_FILE)]
    fwd.write(outs[0])
    rev.write(outs[1])
    with open(outs[2], "w", encoding="utf-8", newline="\n") as fh:
        for a in alignments:
            fh.write(a.to_pharaoh() + "\n")
    write_manifest(cfg, "align", [cfg.parallel_src, cfg.parallel_tgt], outs)


def _read_alignments(path, corpus) -> list:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if len(lines) != len(corpus):
        raise ValidationError(f"{path} has {len(lines)} alignments for {len(corpus)} sentence pairs")
    return [AlignmentMatrix.from_pharaoh(line, len(s), len(t)) for line, (s, t) in zip(lines, corpus)]


def _load_alignment_artifacts(cfg: PipelineConfig, corpus):
    paths = [need(cfg.artifact(n)) for n in (TTABLE_FWD, TTABLE_REV, ALIGN_FILE)]
    fwd, rev = TranslationTable.read(paths[0]), TranslationTable.read(paths[1])
    return fwd, rev, _read_alignments(paths[2], corpus), paths


def cmd_phrases(cfg: PipelineConfig, args) -> None:
    corpus = parallel_corpus(cfg)
    fwd, rev, alignments, inputs = _load_alignment_artifacts(cfg, corpus)
    table = build_phrase_table(corpus, alignments, cfg.max_phrase_len, fwd, rev)
    out = cfg.artifact(PHRASE_FILE)
    table.write(out)
    write_manifest(cfg, "phrases", [cfg.parallel_src, cfg.parallel_tgt, *inputs], [out])


def cmd_tune(cfg: PipelineConfig, args) -> None:
    translator, inputs = load_translator(cfg)
    if cfg.dev_src or cfg.dev_tgt:
        dev = load_parallel(cfg.require("dev_src"), cfg.require("dev_tgt"), name="dev")
        inputs += [cfg.dev_src, cfg.dev_tgt]
    else:
        dev, _ = sample_dev(parallel_corpus(cfg), cfg.dev_size, cfg.seed)
        inputs += [cfg.parallel_src, cfg.parallel_tgt]
    state = mert_run(dev, translator, LogLinearWeights(), outer_iters=cfg.mert_iterations,
                     directions_per_iter=cfg.mert_directions, seed=cfg.seed, nbest_size=cfg.nbest_size)
    out_w, out_log = cfg.weights_path(), cfg.artifact(MERT_LOG)
    state.weights.save(out_w)
    state.write_log(out_log)
    log.info("tuned dev BLEU %.2f after %d iterations", state.dev_bleu_history[-1], state.iteration)
    write_manifest(cfg, "tune", inputs, [out_w, out_log])


def cmd_decode(cfg: PipelineConfig, args) -> None:
    weights, w_path = load_weights(cfg)
    if args.input is None:
        raise ConfigError("--input", "decode needs a source file")
    src = need(args.input)
    if args.beginner:
        weights = scale_lm_weight(weights, cfg.lm_scale)
    translator, inputs = load_translator(cfg, weights)
    out = cfg.artifact(args.output or DECODE_FILE)
    n = write_sentences(out, (translator.translate(s) for s in iter_sentences(src)))
    log.info("decoded %d sentences", n)
    write_manifest(cfg, "decode", [*inputs, w_path, src], [out])


def _provider(cfg: PipelineConfig, translator: Translator):
    spec = dict(cfg.provider)
    kind = spec.pop("type", "local")
    if kind == "local":
        return LocalTuned(translator)
    if cfg.threads:
        spec["max_in_flight"] = min(spec.get("max_in_flight", 4), cfg.threads)
    return ExternalService(**spec)


def synthesis_streams(cfg: PipelineConfig, translator: Translator, parallel=None):
    """Record streams in fixed generator order plus the files they read."""
    beginner = translator.with_weights(scale_lm_weight(translator.weights, cfg.lm_scale))
    mix = {synth.Generator(k): v for k, v in cfg.generator_mix.items()}
    available = {}
    if parallel is not None:
        available[synth.Generator.SMT_GOLD] = len(parallel)
    if cfg.mono_src:
        available[synth.Generator.SMT_NMT] = count_lines(cfg.require("mono_src"))
    if cfg.mono_tgt:
        n_clean = count_lines(cfg.require("mono_tgt"))
        available[synth.Generator.CORRUPTION] = n_clean
        if parallel is not None:
            available[synth.Generator.ROUND_TRIP] = n_clean
        if cfg.seed_correct and cfg.seed_erroneous:
            available[synth.Generator.BACK_TRANSLATION] = n_clean
    for g, w in mix.items():
        if w > 0 and not available.get(g):
            log.warning("generator %s has no configured input and is skipped", g.value)
    quotas = synth.mix_quotas(mix, available, cfg.max_pairs)
    streams, inputs = [], []
    for g in synth.Generator:
        n = quotas.get(g)
        if not n:
            continue
        log.info("%s: %d pairs requested", g.value, n)
        if g is synth.Generator.SMT_GOLD:
            sources = parallel.sources[:n]
            streams.append(synth.translate_pairs(sources, beginner, GoldReference(parallel)))
            inputs += [cfg.parallel_src, cfg.parallel_tgt]
        elif g is synth.Generator.SMT_NMT:
            sources = synth.take(iter_sentences(cfg.mono_src), n)
            streams.append(synth.translate_pairs(sources, beginner, _provider(cfg, translator)))
            inputs.append(cfg.mono_src)
        elif g is synth.Generator.CORRUPTION:
            rules = synth.CorruptionRuleSet.from_probabilities(cfg.corruption) if cfg.corruption \
                else synth.CorruptionRuleSet.default()
            streams.append(synth.corrupt_pairs(synth.take(iter_sentences(cfg.mono_tgt), n), rules, cfg.seed))
            inputs.append(cfg.mono_tgt)
        elif g is synth.Generator.ROUND_TRIP:
            fwd = _reverse_system(cfg, parallel, translator.weights)
            streams.append(synth.roundtrip_pairs(synth.take(iter_sentences(cfg.mono_tgt), n), fwd, translator))
            inputs.append(cfg.mono_tgt)
        else:
            seed_pairs = load_parallel(cfg.require("seed_correct"), cfg.require("seed_erroneous"), name="seed")
            generator = synth.train_error_generator(
                seed_pairs, lm_order=cfg.lm_order, iterations=cfg.em_iterations, max_phrase_len=cfg.max_phrase_len,
                params=decoder_params(cfg), seed=cfg.seed, outer_iters=cfg.mert_iterations,
                dev_size=min(cfg.dev_size, len(seed_pairs)))
            streams.append(synth.back_translation_pairs(synth.take(iter_sentences(cfg.mono_tgt), n), generator))
            inputs += [cfg.seed_correct, cfg.seed_erroneous, cfg.mono_tgt]
    return streams, list(dict.fromkeys(inputs))


def _reverse_system(cfg: PipelineConfig, parallel, weights: LogLinearWeights) -> Translator:
    """English -> source translator for the round-trip bridge, sharing the tuned weights."""
    flipped = parallel.swapped("parallel.rev")
    fwd, rev, alignments = align_corpus(flipped, cfg.em_iterations)
    table = build_phrase_table(flipped, alignments, cfg.max_phrase_len, fwd, rev)
    return Translator(table, train_lm(flipped.targets, cfg.lm_order), weights, decoder_params(cfg))


def run_synthesis(streams, threshold, prefix):
    """Filter and write; returns (report, output paths)."""
    retained, report = synth.filter_pairs(chain.from_iterable(streams), threshold)
    with synth.PairWriter(prefix) as writer:
        for i, rec in enumerate(retained, 1):
            writer.write(rec)
            if i % 10000 == 0:
                log.info("%d pairs written", i)
    return report, list(writer.paths.values())


def cmd_synthesize(cfg: PipelineConfig, args) -> None:
    weights, w_path = load_weights(cfg)
    translator, inputs = load_translator(cfg, weights)
    parallel = parallel_corpus(cfg) if cfg.parallel_src and cfg.parallel_tgt else None
    streams, data_inputs = synthesis_streams(cfg, translator, parallel)
    threshold = cfg.edit_rate_threshold if cfg.filter else None
    report, outs = run_synthesis(streams, threshold, cfg.artifact(PAIRS_PREFIX))
    report_path = cfg.artifact(REPORT_FILE)
    write_json(report_path, report.to_json())
    log.info("%d records, %d dropped, %d written", report.total, report.dropped, report.retained)
    write_manifest(cfg, "synthesize", [*inputs, w_path, *data_inputs], [*outs, report_path])


def cmd_evaluate(cfg: PipelineConfig, args) -> None:
    result, inputs = {}, []
    if args.hyp or args.ref:
        if not (args.hyp and args.ref):
            raise ConfigError("--hyp/--ref", "both are needed for BLEU")
        hyp, ref = need(args.hyp), need(args.ref)
        hyps, refs = list(iter_lines(hyp)), list(iter_lines(ref))
        result["bleu"] = metrics.bleu(refs, hyps)
        inputs += [hyp, ref]
        lm_path = cfg.artifact(LM_FILE)
        if lm_path.exists():
            result["perplexity"] = perplexity(read_arpa(lm_path), hyps)
            inputs.append(lm_path)
    if args.sys_m2 or args.gold_m2:
        if not (args.sys_m2 and args.gold_m2):
            raise ConfigError("--sys-m2/--gold-m2", "both are needed for F0.5")
        sys_m2, gold_m2 = need(args.sys_m2), need(args.gold_m2)
        p, r, f = metrics.f_beta(metrics.read_m2(sys_m2), metrics.read_m2(gold_m2), 0.5)
        result.update({"precision": p, "recall": r, "f0.5": f})
        inputs += [sys_m2, gold_m2]
    if not result:
        raise ConfigError("--hyp/--ref", "give hypothesis and reference files or two M2 files")
    out = cfg.artifact(args.output or EVAL_FILE)
    write_json(out, result)
    print(json.dumps(result, sort_keys=True))
    write_manifest(cfg, "evaluate", inputs, [out])


def iter_lines(path):
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            yield split_tokens(line)


def profile_report(records) -> dict:
    by_gen = {}
    everything = []
    for rec in records:
        by_gen.setdefault(rec.generator.value, []).append((rec.poor, rec.good))
        everything.append((rec.poor, rec.good))
    report = {"overall": metrics.error_stats(everything)}
    report["per_generator"] = {g.value: metrics.error_stats(by_gen[g.value]) for g in synth.Generator if g.value in by_gen}
    return report


def cmd_profile(cfg: PipelineConfig, args) -> None:
    if args.poor or args.good:
        if not (args.poor and args.good):
            raise ConfigError("--poor/--good", "both are needed")
        poor, good = need(args.poor), need(args.good)
        pairs = list(zip(iter_lines(poor), iter_lines(good)))
        report = {"overall": metrics.error_stats(pairs)}
        inputs = [poor, good]
    else:
        tsv = need(args.pairs or cfg.artifact(PAIRS_PREFIX + ".tsv"))
        report = profile_report(synth.read_pairs_tsv(tsv))
        inputs = [tsv]
    out = cfg.artifact(args.output or PROFILE_FILE)
    write_json(out, report)
    print(json.dumps(report["overall"], sort_keys=True))
    write_manifest(cfg, "profile", inputs, [out])


HANDLERS = {
    "train-lm": cmd_train_lm,
    "align": cmd_align,
    "phrases": cmd_phrases,
    "tune": cmd_tune,
    "decode": cmd_decode,
    "synthesize": cmd_synthesize,
    "evaluate": cmd_evaluate,
    "profile": cmd_profile,
}


# --------------------------------------------------------------------------
# argument handling


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        # usage problems are validation errors
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="pairforge", description="Synthesize poor-to-good sentence pairs for GEC training.")
    p.add_argument("--version", action="version", version=f"pairforge {__version__}")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", help="TOML or JSON config file")
    p.add_argument("--threads", type=int, help="cap on worker threads")
    p.add_argument("--seed", type=int)
    p.add_argument("--lm-scale", type=float, dest="lm_scale")
    p.add_argument("--threshold", type=float, help="edit-rate filter threshold")
    p.add_argument("--no-filter", action="store_true", help="keep pairs regardless of edit rate")
    p.add_argument("--out", help="output directory")
    p.add_argument("--input", help="decode: source sentences, one per line")
    p.add_argument("--beginner", action="store_true", help="decode: apply the lm scale to the tuned weights")
    p.add_argument("--output", help="file name inside the output directory")
    p.add_argument("--hyp", help="evaluate: system output")
    p.add_argument("--ref", help="evaluate: references")
    p.add_argument("--sys-m2", dest="sys_m2", help="evaluate: system edits (M2)")
    p.add_argument("--gold-m2", dest="gold_m2", help="evaluate: gold edits (M2)")
    p.add_argument("--pairs", help="profile: TSV pair file (default: the synthesized pairs)")
    p.add_argument("--poor", help="profile: poor side, one sentence per line")
    p.add_argument("--good", help="profile: good side, one sentence per line")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def resolve_config(args) -> PipelineConfig:
    cfg = load_config(args.config) if args.config else from_dict({})
    cfg = cfg.override(seed=args.seed, lm_scale=args.lm_scale, edit_rate_threshold=args.threshold,
                       out_dir=args.out, threads=args.threads)
    if args.no_filter:
        cfg = cfg.override(filter=False)
    # re-run validation on the overridden values
    return from_dict(cfg.to_json())


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        cfg = resolve_config(args)
        cfg.out.mkdir(parents=True, exist_ok=True)
        HANDLERS[args.command](cfg, args)
    except ValidationError as exc:
        log.error("%s", exc)
        return 1
    except (PairforgeError, OSError, RuntimeError, ValueError) as exc:
        log.error("%s: %s", type(exc).__name__, exc)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
