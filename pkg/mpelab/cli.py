import argparse, logging, sys
from pathlib import Path
from typing import List, Optional

from .errors import InvalidInput, MpeLabError
from .models import RunConfig
from .pipeline import COMMANDS, GROUPS, run_verification
from .reporting import build_document, print_report, print_summary, verification_rows, write_csv, write_json
from .utils import inputs_digest, parse_number, parse_number_list, thread_count

SUBCOMMANDS = ("mixing", "solve", "ape", "average", "classify", "escape-test",
               "simulate", "dominance", "corpus", "verify-paper")


class _Parser(argparse.ArgumentParser):
    """Usage errors become InvalidInput (exit 1) instead of argparse's exit 2, which means Diverged here."""
    def error(self, message):
        raise InvalidInput(f"{self.prog}: {message}")


def _key_value(raw: str):
    if "=" not in raw:
        raise InvalidInput(f"Expected key=value, got {raw!r}")
    key, val = (p.strip() for p in raw.split("=", 1))
    if not key:
        raise InvalidInput(f"Empty key in {raw!r}")
    return key, val


def _common(ap: argparse.ArgumentParser):
    ap.add_argument("chain", nargs="?", default=None, help="Corpus chain name (same as --corpus)")
    ap.add_argument("inline_params", nargs="*", metavar="KEY=VALUE", help="Corpus parameters, e.g. lam=0.5 g=(0,ln1.9)")
    ap.add_argument("--kernel", type=Path, help="Kernel file: JSON, or CSV with --labels")
    ap.add_argument("--labels", type=Path, help="State labels for a CSV kernel, one per line")
    ap.add_argument("--reward", type=Path, help="Reward JSON file")
    ap.add_argument("--corpus", help="Build the kernel from a corpus chain instead of a file")
    ap.add_argument("--param", action="append", default=[], metavar="KEY=VALUE", help="Corpus parameter (repeatable)")
    ap.add_argument("--reward-name", help="Pick a named corpus reward")
    ap.add_argument("--g", help="Inline reward values, comma separated; ln(x) accepted")
    ap.add_argument("--out", type=Path, help="Output file (default: stdout)")
    ap.add_argument("--format", dest="out_format", default="json", choices=("json", "csv"))
    ap.add_argument("--seed", type=int, default=0, help="64-bit master seed (default: 0)")
    ap.add_argument("--tol", type=parse_number, default=1e-10, help="Solver tolerance (default: 1e-10)")
    ap.add_argument("--max-iter", type=int, default=100_000)
    ap.add_argument("--span-cap", type=parse_number, default=1e4)
    ap.add_argument("--anchor", help="State label used to pin w")
    ap.add_argument("--n-max", type=int, default=4, help="Largest power / horizon for bounds (default: 4)")
    ap.add_argument("--paths", type=int, default=10_000)
    ap.add_argument("--horizon", type=int, default=20)
    ap.add_argument("--start", help="Starting state label (default: first state)")
    ap.add_argument("--alphas", default="0.9,0.5,0.1", help="Escape rates to test (default: 0.9,0.5,0.1)")
    ap.add_argument("--support", default="", help="Comma-separated state labels of the target set")
    ap.add_argument("--compare-reward", help="Second corpus reward for dominance")
    ap.add_argument("--filter", choices=GROUPS, help="verify-paper: run one group only")
    ap.add_argument("--workers", type=int, default=None, help=f"Worker threads (default: MPELAB_THREADS or {thread_count()})")
    ap.add_argument("--verbose", action="store_true", help="INFO logs")
    ap.add_argument("--debug", action="store_true", help="DEBUG logs (very chatty)")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="mpelab", description="Multiplicative Poisson equation toolkit for finite Markov chains.")
    sub = ap.add_subparsers(dest="subcommand", required=True, parser_class=_Parser)
    for name in SUBCOMMANDS:
        _common(sub.add_parser(name))
    return ap


def parse_config(argv: Optional[List[str]] = None) -> RunConfig:
    args = build_parser().parse_args(argv)
    params = dict(_key_value(p) for p in list(args.inline_params) + list(args.param))
    corpus_name = args.corpus or args.chain
    if args.chain and args.corpus and args.chain != args.corpus:
        raise InvalidInput(f"Chain given twice: {args.chain!r} and --corpus {args.corpus!r}")

    cfg = RunConfig(
        subcommand=args.subcommand,
        verbose=args.verbose,
        debug=args.debug,
        kernel_path=args.kernel,
        labels_path=args.labels,
        reward_path=args.reward,
        corpus=corpus_name,
        params=params,
        reward_name=args.reward_name,
        inline_g=parse_number_list(args.g) if args.g else None,
        out_path=args.out,
        out_format=args.out_format,
        tol=args.tol,
        max_iter=args.max_iter,
        span_cap=args.span_cap,
        anchor=args.anchor,
        n_max=args.n_max,
        seed=args.seed,
        paths=args.paths,
        horizon=args.horizon,
        start=args.start,
        alphas=parse_number_list(args.alphas),
        support=[s.strip() for s in args.support.split(",") if s.strip()],
        compare_reward=args.compare_reward,
        filter=args.filter,
        workers=args.workers or thread_count(),
    )
    cfg.validate()
    return cfg


def verify_paper(cfg: RunConfig, logger: logging.Logger) -> int:
    res = run_verification(cfg, logger)
    print_report(res, cfg)
    if cfg.out_path is not None:
        if cfg.out_format == "csv":
            write_csv(verification_rows(res), cfg.out_path)
        else:
            write_json(build_document(cfg, inputs_digest(cfg.public_dict()), res), cfg.out_path)
    return 0 if res.passed else 1


def dispatch(cfg: RunConfig, logger: logging.Logger) -> int:
    """Runs one subcommand; returns the process exit code."""
    try:
        cfg.validate()
        if cfg.subcommand == "verify-paper":
            return verify_paper(cfg, logger)

        runner = COMMANDS.get(cfg.subcommand)
        if runner is None:
            raise InvalidInput(f"Unknown subcommand {cfg.subcommand!r}")
        payload, rows, code, digest = runner(cfg, logger)
        if cfg.subcommand == "corpus":
            # --out is the file prefix there; the manifest goes to stdout
            write_json(build_document(cfg, digest, payload), None)
        elif cfg.out_format == "csv":
            write_csv(rows, cfg.out_path)
        else:
            write_json(build_document(cfg, digest, payload), cfg.out_path)
        print_summary(cfg.subcommand, payload, code)
        return code
    except (MpeLabError, OSError) as e:
        print(f"Error: {e}", file=sys.stderr)
        return 1
    except (ValueError, ArithmeticError) as e:
        # numpy / scipy numerical failures (LinAlgError is a ValueError)
        logger.debug("Numerical failure", exc_info=True)
        print(f"Error: {type(e).__name__}: {e}", file=sys.stderr)
        return 1
