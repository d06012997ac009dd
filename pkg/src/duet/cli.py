"""`duet` command line: ingest / pretrain / rl-train / generate / score / eval / serve.

Machine-readable output is line-delimited JSON on stdout; logs go to stderr
(level from --log-level or the DUET_LOG environment variable).  Flags beat the
--config file, which beats built-in defaults.  Exit codes: 0 success, 1
validation error, 2 runtime failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_RUNTIME = 2

log = logging.getLogger("duet")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on bad usage; the CLI contract wants 1
    def error(self, message):
        raise UsageError(message)


def _emit(obj) -> None:
    sys.stdout.write(json.dumps(obj) + "\n")
    sys.stdout.flush()


def _load_config_file(path: str | None) -> dict:
    if not path:
        return {}
    try:
        return json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as e:
        raise UsageError(f"--config {path}: {e}") from e


def _merged(args: argparse.Namespace, config: dict, key: str, default=None):
    val = getattr(args, key.replace("-", "_"), None)
    if val is not None:
        return val
    if key in config:
        return config[key]
    return default


def _model_config(preset: str):
    from .models import DEFAULT_CONFIG, DESK_CONFIG

    if preset == "default":
        return DEFAULT_CONFIG
    if preset == "desk":
        return DESK_CONFIG
    raise UsageError(f"unknown preset {preset!r} (have: default, desk)")


def build_parser() -> _Parser:
    p = _Parser(prog="duet", description="Online duet accompaniment engine")
    p.add_argument("--config", help="JSON config file; flag values override it")
    p.add_argument("--log-level", default=None, help="debug|info|warning|error (or DUET_LOG)")
    sub = p.add_subparsers(dest="command")

    sp = sub.add_parser("ingest", help="validate score files into a corpus.jsonl")
    sp.add_argument("--in", dest="in_dir", required=True, help="directory of chorale JSON files")
    sp.add_argument("--out", required=True, help="output corpus.jsonl")

    sp = sub.add_parser("pretrain", help="train one reward/generation model by MLE")
    sp.add_argument("--view", required=True, choices=["a", "b", "c", "d"])
    sp.add_argument("--lr", type=float, required=True)
    sp.add_argument("--epochs", type=int, default=20)
    sp.add_argument("--corpus", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--seed", type=int, default=None)
    sp.add_argument("--preset", default="default")
    sp.add_argument("--valid-count", type=int, default=0,
                    help="chorales held out for best-validation tracking")

    sp = sub.add_parser("rl-train", help="actor-critic training against the reward ensemble")
    sp.add_argument("--corpus", required=True)
    sp.add_argument("--ensemble", required=True, help="directory of reward checkpoints")
    sp.add_argument("--init", required=True, help="warm-start checkpoint (view (a), lr 0.01)")
    sp.add_argument("--budget", type=int, default=100_000)
    sp.add_argument("--gamma", type=float, default=0.5)
    sp.add_argument("--lam", type=float, default=1.0)
    sp.add_argument("--out", required=True)
    sp.add_argument("--seed", type=int, default=None)
    sp.add_argument("--eval-every", type=int, default=0)

    sp = sub.add_parser("generate", help="greedy accompaniment for a duet token file")
    sp.add_argument("--human", required=True, help="duet token file; machine prefix is the seed")
    sp.add_argument("--ckpt", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--seed-steps", type=int, default=32)

    sp = sub.add_parser("score", help="per-step reward breakdowns for a duet file")
    sp.add_argument("--duet", required=True)
    sp.add_argument("--ensemble", required=True)
    sp.add_argument("--seed-steps", type=int, default=32)

    sp = sub.add_parser("eval", help="objective metric report")
    sp.add_argument("--generated", required=True, help="directory of generated duet files")
    sp.add_argument("--reference", required=True, help="reference corpus.jsonl")
    sp.add_argument("--out", required=True)

    sp = sub.add_parser("serve", help="live session service + UI assets")
    sp.add_argument("--ckpt", required=True)
    sp.add_argument("--ensemble", default=None)
    sp.add_argument("--addr", default="127.0.0.1:8642")
    sp.add_argument("--static", default=None, help="directory of UI assets")
    return p


def cmd_ingest(args, config) -> int:
    from .corpus import load_corpus, save_corpus

    chorales = load_corpus(args.in_dir)
    save_corpus(chorales, args.out)
    _emit({"event": "ingest", "chorales": len(chorales), "out": args.out})
    return EXIT_OK


def cmd_pretrain(args, config) -> int:
    from .corpus import load_corpus
    from .models import ContextView
    from .pretrain import PretrainConfig, pretrain

    chorales = load_corpus(args.corpus)
    seed = int(_merged(args, config, "seed", 0) or 0)
    valid_count = args.valid_count
    valid = chorales[:valid_count] if valid_count else None
    train_set = chorales[valid_count:]
    cfg = PretrainConfig(view=ContextView(args.view), lr=args.lr, epochs=args.epochs,
                         rng_seed=seed, model=_model_config(args.preset))
    model, history = pretrain(train_set, cfg, valid=valid, log=_emit)
    model.save(args.out, metadata={"lr": args.lr, "epochs": args.epochs, "view": args.view})
    _emit({"event": "saved", "out": args.out, "epochs": len(history)})
    return EXIT_OK


def cmd_rl_train(args, config) -> int:
    from .checkpoint import load_checkpoint
    from .corpus import load_corpus
    from .models import DuetModel
    from .rewards import RewardEnsemble
    from .rl import RLConfig, train

    chorales = load_corpus(args.corpus)
    ensemble = RewardEnsemble.load(args.ensemble)
    init = DuetModel.from_checkpoint(load_checkpoint(args.init))
    seed = int(_merged(args, config, "seed", 0) or 0)
    cfg = RLConfig(gamma=args.gamma, lam=args.lam, duet_budget=args.budget,
                   rng_seed=seed, eval_every=args.eval_every)
    policy, _ = train(chorales, ensemble, cfg, init, log=_emit)
    policy.save(args.out, metadata={"rl": cfg.to_dict(), "init": str(args.init)})
    _emit({"event": "saved", "out": args.out})
    return EXIT_OK


def cmd_generate(args, config) -> int:
    from .checkpoint import load_checkpoint
    from .generate import generate_accompaniment, read_duet_file, write_duet_file
    from .corpus import Duet
    from .models import DuetModel

    policy = DuetModel.from_checkpoint(load_checkpoint(args.ckpt))
    duet_in = read_duet_file(args.human)
    seed = tuple(duet_in.machine.ids[:args.seed_steps])
    machine = generate_accompaniment(policy, duet_in.human, seed)
    out = Duet(human=duet_in.human, machine=machine, beats=duet_in.beats,
               source=str(args.human), seed_steps=len(seed))
    write_duet_file(out, args.out)
    _emit({"event": "generated", "out": args.out, "steps": len(machine)})
    return EXIT_OK


def cmd_score(args, config) -> int:
    from .generate import read_duet_file
    from .rewards import RewardEnsemble, score_episode

    ensemble = RewardEnsemble.load(args.ensemble)
    duet = read_duet_file(args.duet)
    for b in score_episode(ensemble, duet, start=args.seed_steps):
        _emit({"step": b.step, "model_probs": list(b.model_probs),
               "model_reward": b.model_reward, "rule_penalty": b.rule_penalty,
               "total": b.total})
    return EXIT_OK


def cmd_eval(args, config) -> int:
    from .corpus import load_corpus
    from .generate import read_duet_file
    from .metrics import report

    gen_dir = Path(args.generated)
    duets = [read_duet_file(p) for p in sorted(gen_dir.glob("*.json"))]
    if not duets:
        raise UsageError(f"no .json duet files under {gen_dir}")
    reference = load_corpus(args.reference)
    ref_parts = [list(part) for c in reference for part in c.parts]
    rep = report({"generated": duets}, ref_parts)
    Path(args.out).write_text(json.dumps(rep.to_dict(), indent=2) + "\n")
    _emit({"event": "eval", "out": args.out, "pieces": len(duets)})
    return EXIT_OK


def cmd_serve(args, config) -> int:
    import asyncio

    from .checkpoint import load_checkpoint
    from .models import DuetModel
    from .rewards import RewardEnsemble
    from .service import DuetService, serve

    host, _, port = args.addr.rpartition(":")
    if not host or not port.isdigit():
        raise UsageError(f"--addr must be host:port, got {args.addr!r}")
    policy = DuetModel.from_checkpoint(load_checkpoint(args.ckpt))
    ensemble = RewardEnsemble.load(args.ensemble) if args.ensemble else None
    service = DuetService({Path(args.ckpt).stem: policy}, ensemble=ensemble)
    log.info("serving on %s (websocket path /ws)", args.addr)
    asyncio.run(serve(service, host, int(port), static_dir=args.static))
    return EXIT_OK


COMMANDS = {
    "ingest": cmd_ingest,
    "pretrain": cmd_pretrain,
    "rl-train": cmd_rl_train,
    "generate": cmd_generate,
    "score": cmd_score,
    "eval": cmd_eval,
    "serve": cmd_serve,
}


def dispatch(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as e:
        sys.stderr.write(f"duet: error: {e}\n")
        return EXIT_USAGE
    level = args.log_level or os.environ.get("DUET_LOG", "warning")
    logging.basicConfig(stream=sys.stderr, level=getattr(logging, level.upper(), logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")
    if not args.command:
        parser.print_help(sys.stderr)
        return EXIT_USAGE
    try:
        config = _load_config_file(args.config)
        return COMMANDS[args.command](args, config)
    except UsageError as e:
        sys.stderr.write(f"duet: error: {e}\n")
        return EXIT_USAGE
    except (ValueError, OSError) as e:
        sys.stderr.write(f"duet: error: {e}\n")
        return EXIT_USAGE
    except KeyboardInterrupt:
        return EXIT_RUNTIME
    except Exception as e:
        log.exception("runtime failure")
        sys.stderr.write(f"duet: runtime failure: {e}\n")
        return EXIT_RUNTIME


def main() -> None:
    sys.exit(dispatch())


if __name__ == "__main__":
    main()
