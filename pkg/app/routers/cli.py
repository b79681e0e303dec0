import argparse
from typing import List, Optional

from app.config.logging_config import setup_logging
from app.handler.evaluate import handle_evaluate
from app.handler.experiment import handle_ablate, handle_sweep
from app.handler.prepare import handle_prepare
from app.handler.stub import handle_serve_stub
from app.handler.synth import handle_synth
from app.handler.train import handle_train
from pkg.core.errors import ExitCode
from pkg.service.eval_service import SPLITS
from pkg.service.stub_llm_service import STUB_MODES

COMMANDS = {
    "synth": (handle_synth, "generate a synthetic dataset with latent ground truth"),
    "prepare": (handle_prepare, "k-core filter, split and truncate a raw interaction log"),
    "train": (handle_train, "run federated (or centralized / local-only) training"),
    "evaluate": (handle_evaluate, "full-ranking evaluation of a checkpoint"),
    "ablate": (handle_ablate, "train the four view-ablation variants"),
    "sweep": (handle_sweep, "sweep modes x clients per round x seeds"),
}


def _add_config_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("config", nargs="?", help="TOML or JSON run configuration")
    parser.add_argument(
        "--set", dest="overrides", action="append", default=[], metavar="SECTION.KEY=VALUE",
        help="override one configuration key (repeatable)",
    )
    parser.add_argument("--seed", type=int, help="run.seed")
    parser.add_argument("--rounds", type=int, help="federation.rounds")
    parser.add_argument("--output-dir", dest="output_dir", help="run.output_dir")
    parser.add_argument("--mode", help="run.mode")
    parser.add_argument("--log-level", dest="log_level", help="override LOG_LEVEL")


def build_parser() -> argparse.ArgumentParser:
    """命令树：synth / prepare / train / evaluate / ablate / sweep / serve-stub"""
    parser = argparse.ArgumentParser(prog="fedseq", description="Federated sequential recommendation lab")
    sub = parser.add_subparsers(dest="command", required=True)

    for name, (handler, help_text) in COMMANDS.items():
        cmd = sub.add_parser(name, help=help_text)
        _add_config_arguments(cmd)
        cmd.set_defaults(handler=handler)
        if name == "evaluate":
            cmd.add_argument("--checkpoint", required=True, help="checkpoint.fsql written by train")
            cmd.add_argument("--split", choices=SPLITS, default="test")
            cmd.add_argument("--k", type=int, help="cutoff for HR/NDCG (default run.k)")
            cmd.add_argument("--output", help="metrics JSON path (default <output_dir>/eval_<split>.json)")

    stub = sub.add_parser("serve-stub", help="serve the offline /generate endpoint")
    stub.add_argument("--stub-mode", dest="stub_mode", choices=STUB_MODES, default="fixture")
    stub.add_argument("--fixture", help="JSON object mapping view kind to a list of titles")
    stub.add_argument("--host")
    stub.add_argument("--port", type=int)
    stub.add_argument("--log-level", dest="log_level", help="override LOG_LEVEL")
    stub.set_defaults(handler=handle_serve_stub)
    return parser


def dispatch(argv: Optional[List[str]] = None) -> int:
    """
    解析参数并执行命令

    Returns:
        进程退出码
    """
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        # argparse 用 2 表示参数错误，与配置错误的退出码一致
        return ExitCode.SUCCESS if e.code in (0, None) else ExitCode.CONFIG
    setup_logging(args.log_level)
    return args.handler(args)
