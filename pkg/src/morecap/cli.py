"""Command-line pipeline: prepare, train-term, train-sent, train-clf,
generate, evaluate, report. Logs go to stderr, artifacts to files, exit
status 0 on success."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import checkpoint as ckpt
from . import metrics as M
from . import sentence_generator as sg
from . import term_generator as tg
from .config import Config, apply_overrides, load_config
from .data import load_dataset, load_embeddings, load_style_corpus, write_dataset
from .metrics import ClfModel
from .optim import Adam
from .sentence_generator import Seq2SeqModel
from .term_generator import MoREModel
from .text import Vocabulary, extract_terms, tokenize
from .toy import make_toy_data

log = logging.getLogger("morecap")


def _resolve_config(args) -> Config:
    cfg = Config()
    if getattr(args, "config", None):
        cfg = load_config(args.config, cfg)
    if getattr(args, "set", None):
        apply_overrides(cfg, args.set)
    if getattr(args, "seed", None) is not None:
        cfg.seed = args.seed
    return cfg


def _train_rng(cfg: Config, salt: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([cfg.seed, salt]))


def _parse_corpus_args(pairs: list[str]) -> list[tuple[str, str]]:
    out = []
    for pair in pairs:
        if "=" not in pair:
            raise ValueError(f"--corpus needs STYLE=path, got {pair!r}")
        style, _, path = pair.partition("=")
        out.append((style.strip(), path))
    return out


# ---------------------------------------------------------------------------


def cmd_prepare(args) -> int:
    cfg = _resolve_config(args)
    # Desk-scale defaults for the synthetic corpus; --set still wins.
    toy = Config(feature_dim=64, hidden_size=64, embed_size=32, attn_size=48,
                 term_vocab_size=200, sent_vocab_size=300,
                 learning_rate=0.02, batch_size=16, epochs=30,
                 embed_dropout=0.0, feature_dropout=0.0, seed=cfg.seed)
    if args.config:
        toy = load_config(args.config, toy)
    if args.set:
        apply_overrides(toy, args.set)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    records, corpora = make_toy_data(args.records, toy.feature_dim, toy.seed)
    n_test = max(1, args.records // 4)
    write_dataset(out / "train.jsonl", records[:-n_test])
    write_dataset(out / "test.jsonl", records[-n_test:])
    for style, sentences in corpora.items():
        with open(out / f"corpus_{style.lower()}.txt", "w", encoding="utf-8") as fh:
            fh.write("\n".join(sentences) + "\n")
    with open(out / "toy.cfg", "w", encoding="utf-8") as fh:
        fh.write(toy.to_text())
    log.info("prepared %d train / %d test records in %s",
             args.records - n_test, n_test, out)
    return 0


# ---------------------------------------------------------------------------


def _term_pairs(records, cfg: Config):
    pairs = []
    for rec in records:
        if rec.terms:
            pairs.append((rec.features, rec.terms))
        else:
            for cap in rec.captions:
                terms = extract_terms(tokenize(cap), max_len=cfg.max_term_len)
                if terms:
                    pairs.append((rec.features, terms))
    if not pairs:
        raise ValueError("no usable term sequences in dataset")
    return pairs


def _append_loss_log(path: Path, entry: dict, cfg: Config, fresh: bool) -> None:
    mode = "w" if fresh else "a"
    with open(path, mode, encoding="utf-8") as fh:
        if fresh:
            fh.write(json.dumps({"config": cfg.to_dict()}) + "\n")
        fh.write(json.dumps(entry) + "\n")


def cmd_train_term(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if args.resume:
        model, opts, cfg, ck = ckpt.load_term_model(args.resume)
        if args.set:
            apply_overrides(cfg, args.set)
        rng = np.random.default_rng()
        rng.bit_generator.state = ck.rng_state
        start_epoch = int(ck.meta["epoch"])
        log.info("resumed from %s at epoch %d", args.resume, start_epoch)
        records = load_dataset(args.data, cfg.feature_dim)
        pairs = _term_pairs(records, cfg)
    else:
        cfg = _resolve_config(args)
        records = load_dataset(args.data, cfg.feature_dim)
        pairs = _term_pairs(records, cfg)
        vocab = Vocabulary.build(
            (t for _, terms in pairs for t in terms),
            max_size=cfg.term_vocab_size)
        model = MoREModel(vocab, cfg.expert_count, cfg.feature_dim,
                          cfg.hidden_size, cfg.embed_size, cfg.seed,
                          embed_dropout=cfg.embed_dropout,
                          feature_dropout=cfg.feature_dropout)
        opts = [Adam(lr=cfg.learning_rate, clip_bound=cfg.clip_bound,
                     weight_decay=cfg.weight_decay)
                for _ in range(cfg.expert_count)]
        rng = _train_rng(cfg, 1)
        start_epoch = 0

    for epoch in range(start_epoch + 1, cfg.epochs + 1):
        losses = tg.train_epoch(model, pairs, opts, rng,
                                batch_size=cfg.batch_size,
                                max_len=cfg.max_term_len,
                                run_filter=cfg.filter_enabled)
        if cfg.filter_enabled and cfg.reset_moments_after_filter:
            for expert, opt in zip(model.experts, opts):
                opt.reset_moments(expert.spec.target_names)
        log.info("term epoch %d: %s", epoch,
                 " ".join(f"expert{i + 1}={l:.4f}" for i, l in enumerate(losses)))
        ckpt.save_term_model(out / f"term_epoch{epoch:03d}.ckpt", model, opts,
                             cfg, rng.bit_generator.state, epoch)
        _append_loss_log(out / "term_losses.jsonl",
                         {"epoch": epoch, "losses": losses}, cfg,
                         fresh=(epoch == start_epoch + 1 and not args.resume))
    ckpt.save_term_model(out / "term_final.ckpt", model, opts, cfg,
                         rng.bit_generator.state, cfg.epochs)
    return 0


# ---------------------------------------------------------------------------


def _sentence_pairs(corpus_args, cfg: Config):
    pairs = []
    for style, path in corpus_args:
        if style not in cfg.styles:
            raise ValueError(f"corpus style {style!r} not in configured "
                             f"styles {list(cfg.styles)}")
        for lineno, line in enumerate(load_style_corpus(path), start=1):
            tokens = tokenize(line)
            try:
                sg.check_sentence(tokens, cfg.max_sent_len)
            except ValueError as exc:
                raise ValueError(f"{path} line {lineno}: {exc}") from None
            terms = extract_terms(tokens, max_len=cfg.max_term_len)
            if not terms:
                log.warning("%s line %d: no terms, skipped", path, lineno)
                continue
            pairs.append((terms, style, tokens))
    if not pairs:
        raise ValueError("no usable sentences in the style corpora")
    return pairs


def cmd_train_sent(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    corpus_args = _parse_corpus_args(args.corpus)

    if args.resume:
        model, opt, cfg, ck = ckpt.load_sent_model(args.resume)
        if args.set:
            apply_overrides(cfg, args.set)
        pairs = _sentence_pairs(corpus_args, cfg)
        rng = np.random.default_rng()
        rng.bit_generator.state = ck.rng_state
        start_epoch = int(ck.meta["epoch"])
        log.info("resumed from %s at epoch %d", args.resume, start_epoch)
    else:
        cfg = _resolve_config(args)
        pairs = _sentence_pairs(corpus_args, cfg)
        enc_vocab = Vocabulary.build(
            (t for terms, _, _ in pairs for t in terms),
            max_size=cfg.sent_vocab_size, extra=list(cfg.styles))
        dec_vocab = Vocabulary.build(
            (t for _, _, sent in pairs for t in sent),
            max_size=cfg.sent_vocab_size)
        model = Seq2SeqModel(enc_vocab, dec_vocab, list(cfg.styles),
                             cfg.hidden_size, cfg.embed_size, cfg.attn_size,
                             cfg.seed, embed_dropout=cfg.embed_dropout)
        opt = Adam(lr=cfg.learning_rate, clip_bound=cfg.clip_bound)
        rng = _train_rng(cfg, 2)
        start_epoch = 0
        if args.embeddings:
            table, coverage, _ = load_embeddings(args.embeddings, dec_vocab,
                                                 _train_rng(cfg, 3))
            if table.shape[1] != cfg.embed_size:
                raise ValueError(
                    f"embedding file dim {table.shape[1]} != embed_size "
                    f"{cfg.embed_size}")
            model.dec_embed.table.value[...] = table
            if cfg.freeze_embeddings:
                model.dec_embed.table.trainable = False
            log.info("loaded decoder embeddings, coverage %.3f", coverage)

    for epoch in range(start_epoch + 1, cfg.epochs + 1):
        loss = sg.train_epoch(model, pairs, opt, rng,
                              shuffle_terms=cfg.shuffle_terms,
                              batch_size=cfg.batch_size,
                              max_len=cfg.max_sent_len)
        log.info("sent epoch %d: loss=%.4f", epoch, loss)
        ckpt.save_sent_model(out / f"sent_epoch{epoch:03d}.ckpt", model, opt,
                             cfg, rng.bit_generator.state, epoch)
        _append_loss_log(out / "sent_losses.jsonl",
                         {"epoch": epoch, "loss": loss}, cfg,
                         fresh=(epoch == start_epoch + 1 and not args.resume))
    ckpt.save_sent_model(out / "sent_final.ckpt", model, opt, cfg,
                         rng.bit_generator.state, cfg.epochs)
    return 0


# ---------------------------------------------------------------------------


def cmd_train_clf(args) -> int:
    cfg = _resolve_config(args)
    corpus_args = _parse_corpus_args(args.corpus)
    if len(corpus_args) < 2:
        raise ValueError("train-clf needs two --corpus STYLE=path arguments")
    styled_name = args.style or next(
        (s for s, _ in corpus_args if s != "DESCRIPTIVE"), corpus_args[0][0])
    styled, other = [], []
    for style, path in corpus_args:
        sentences = [tokenize(s) for s in load_style_corpus(path)]
        (styled if style == styled_name else other).extend(sentences)
    if not styled:
        raise ValueError(f"no corpus with style {styled_name!r}")
    model, precision, recall = M.train_clf(styled, other, seed=cfg.seed)
    log.info("clf cross-validation: precision=%.3f recall=%.3f",
             precision, recall)
    with open(args.out, "w", encoding="utf-8") as fh:
        json.dump({"config": cfg.to_dict(), "style": styled_name,
                   "cv_precision": precision, "cv_recall": recall,
                   "model": model.to_dict()}, fh)
    return 0


def _load_clf(path) -> ClfModel:
    with open(path, encoding="utf-8") as fh:
        return ClfModel.from_dict(json.load(fh)["model"])


# ---------------------------------------------------------------------------


def cmd_generate(args) -> int:
    term_model, _, term_cfg, _ = ckpt.load_term_model(args.term_model)
    sent_model, _, sent_cfg, _ = ckpt.load_sent_model(args.sent_model)
    records = load_dataset(args.data, term_cfg.feature_dim)
    styles = args.style or list(sent_model.styles)
    for s in styles:
        if s not in sent_model.styles:
            raise ValueError(f"unknown style {s!r}; valid: {sent_model.styles}")
    experts = [args.expert] if args.expert else \
        list(range(1, term_model.expert_count + 1))
    count = 0
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write(json.dumps({"config": term_cfg.to_dict(),
                             "sent_config": sent_cfg.to_dict()}) + "\n")
        for rec in records:
            all_terms = {i: tg.generate_terms(term_model, rec.features, i,
                                              term_cfg.max_term_len)
                         for i in experts}
            for i in experts:
                for style in styles:
                    terms = all_terms[i]
                    caption = sent_model.decode(
                        terms, style, sent_cfg.max_sent_len) if terms else []
                    fh.write(json.dumps({
                        "id": rec.id, "expert": i, "style": style,
                        "terms": terms, "caption": " ".join(caption),
                    }) + "\n")
                    count += 1
    log.info("wrote %d captions to %s", count, args.out)
    return 0


def read_captions(path) -> tuple[dict, list[dict]]:
    """Caption file reader: returns (header, entries)."""
    with open(path, encoding="utf-8") as fh:
        lines = [json.loads(l) for l in fh if l.strip()]
    if not lines:
        raise ValueError(f"{path}: empty caption file")
    header, entries = {}, lines
    if "config" in lines[0] and "id" not in lines[0]:
        header, entries = lines[0], lines[1:]
    if not entries:
        raise ValueError(f"{path}: caption file has a header but no captions")
    return header, entries


# ---------------------------------------------------------------------------


def cmd_evaluate(args) -> int:
    header, entries = read_captions(args.captions)
    feature_dim = (header.get("config") or {}).get("feature_dim")
    if feature_dim is None:
        # Peek at the dataset to learn its feature length.
        with open(args.data, encoding="utf-8") as fh:
            first = json.loads(fh.readline())
        feature_dim = len(first["features"])
    records = {r.id: r for r in load_dataset(args.data, feature_dim)}
    clf = _load_clf(args.clf) if args.clf else None

    groups: dict[tuple[int, str], list[dict]] = {}
    for e in entries:
        groups.setdefault((int(e["expert"]), e["style"]), []).append(e)

    report = {}
    for (expert, style), items in sorted(groups.items()):
        hyps, refs = [], []
        for e in items:
            rec = records.get(e["id"])
            if rec is None:
                raise ValueError(f"caption id {e['id']!r} not in dataset")
            hyps.append(tokenize(e["caption"]))
            refs.append([tokenize(c) for c in rec.captions])
        scores = {f"bleu{n}": float(np.mean([M.bleu(h, r, n)
                                             for h, r in zip(hyps, refs)]))
                  for n in (1, 2, 3, 4)}
        scores["rouge_l"] = float(np.mean([M.rouge_l(h, r)
                                           for h, r in zip(hyps, refs)]))
        scores["meteor_exact"] = float(np.mean([M.meteor_exact(h, r)
                                                for h, r in zip(hyps, refs)]))
        if len(hyps) >= 2:
            _, scores["cider"] = M.cider(hyps, refs)
        if clf is not None:
            scores["clf_fraction"] = M.clf_fraction(clf, hyps)
        scores["captions"] = len(hyps)
        report[f"expert={expert}/style={style}"] = scores
        log.info("%s: %s", f"expert={expert}/style={style}",
                 " ".join(f"{k}={v:.4f}" for k, v in scores.items()
                          if isinstance(v, float)))
    with open(args.out, "w", encoding="utf-8") as fh:
        json.dump({"config": header.get("config"), "groups": report}, fh,
                  indent=2)
    return 0


def cmd_report(args) -> int:
    header, entries = read_captions(args.captions)
    by_expert: dict[int, list[list[str]]] = {}
    for e in entries:
        if e["style"] != args.style:
            continue
        by_expert.setdefault(int(e["expert"]), []).append(tokenize(e["caption"]))
    if not by_expert:
        raise ValueError(f"no captions with style {args.style!r} in "
                         f"{args.captions}")
    rep = M.diversity_report(by_expert)
    expert_count = max(by_expert)
    rows = []
    for row in rep.rows:
        rows.append({"expert": row.expert,
                     "svd_factor": row.expert / expert_count,
                     "distinct_words": row.distinct_words,
                     "wps_mean": row.wps_mean,
                     "wps_std": row.wps_std})
        log.info("expert %d (factor %.3f): distinct=%d wps_mean=%.2f "
                 "wps_std=%.2f", row.expert, row.expert / expert_count,
                 row.distinct_words, row.wps_mean, row.wps_std)
    overlap = {f"{a}&{b}": n for (a, b), n in rep.vocabulary_overlap().items()}
    with open(args.out, "w", encoding="utf-8") as fh:
        json.dump({"config": header.get("config"), "style": args.style,
                   "rows": rows, "vocabulary_overlap": overlap,
                   "vocabularies": {r.expert: sorted(r.vocabulary)
                                    for r in rep.rows}}, fh, indent=2)
    return 0


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="morecap",
        description="Train and evaluate the mixture-of-recurrent-experts "
                    "captioning pipeline.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="key=value config file")
        p.add_argument("--set", action="append", default=[],
                       metavar="KEY=VALUE", help="override a config key")
        p.add_argument("--seed", type=int, help="override the config seed")

    p = sub.add_parser("prepare", help="write a synthetic toy dataset")
    common(p)
    p.add_argument("--out", required=True)
    p.add_argument("--records", type=int, default=200)
    p.set_defaults(func=cmd_prepare)

    p = sub.add_parser("train-term", help="train the term-generator experts")
    common(p)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--resume", help="checkpoint to continue from")
    p.set_defaults(func=cmd_train_term)

    p = sub.add_parser("train-sent", help="train the sentence generator")
    common(p)
    p.add_argument("--corpus", action="append", required=True,
                   metavar="STYLE=PATH")
    p.add_argument("--out", required=True)
    p.add_argument("--resume", help="checkpoint to continue from")
    p.add_argument("--embeddings", help="pretrained embedding text file")
    p.set_defaults(func=cmd_train_sent)

    p = sub.add_parser("train-clf", help="train the style classifier")
    common(p)
    p.add_argument("--corpus", action="append", required=True,
                   metavar="STYLE=PATH")
    p.add_argument("--style", help="positive (styled) class name")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train_clf)

    p = sub.add_parser("generate", help="generate captions for a dataset")
    common(p)
    p.add_argument("--term-model", required=True)
    p.add_argument("--sent-model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--style", action="append",
                   help="style(s) to decode; default all")
    p.add_argument("--expert", type=int, help="restrict to one expert")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("evaluate", help="score captions against references")
    common(p)
    p.add_argument("--captions", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--clf", help="style classifier file")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("report", help="per-expert diversity report")
    common(p)
    p.add_argument("--captions", required=True)
    p.add_argument("--style", default="DESCRIPTIVE")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    logging.basicConfig(stream=sys.stderr, level=logging.INFO,
                        format="%(levelname)s %(message)s")
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except Exception as exc:  # CLI boundary: report and signal failure
        log.error("%s", exc)
        return 1


if __name__ == "__main__":
    sys.exit(main())
