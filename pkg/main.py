"""
STGFormer Pose Lifter

Lift 2D human pose sequences to 3D with spatio-temporal criss-cross graph
attention and a dual-path hop-wise GCN.

Commands:
    synth        Generate a paired synthetic 2D/3D sequence
    train        Train from pose files and write a checkpoint
    eval         Score a checkpoint (MPJPE, PA-MPJPE, PCK, AUC)
    gradcheck    Verify gradients against central finite differences
    attn-export  Dump post-softmax attention maps of one layer and head
    profile      Print the parameter breakdown of a config
"""

import argparse
import logging
import sys
import time
from typing import List, Optional

import torch

# Add current directory to path for imports
sys.path.insert(0, '.')

import constants as C
from config import SynthConfig, TrainConfig, ModelConfig, gradcheck_config, load_config, replace
from errors import (
    CheckpointError, ConfigError, GradcheckFailure, GraphError, InvalidInputError,
    PoseFileError, ShapeError, TrainingError,
)
from model import ABLATION_ROWS, count_parameters
from pose_io import (
    load_checkpoint, read_pose_file, save_checkpoint, write_attention_file, write_trace, atomic_write_text,
)
from synth import write_synth
from training import evaluate, finite_diff_gradcheck, input_windows, prepare_windows, train_epochs

logger = logging.getLogger(__name__)

VALIDATION_ERRORS = (
    ConfigError, GradcheckFailure, CheckpointError, TrainingError, GraphError, ShapeError, InvalidInputError,
)
IO_ERRORS = (OSError, PoseFileError)


class UsageError(Exception):
    """Bad command line; maps to the usage exit code."""


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:
        raise UsageError(f"{self.prog}: {message}")


class StgformerCli:
    """
    Command-line application.

    Parses arguments, dispatches to one handler per subcommand, and keeps a
    status message that is printed as the last line of every run.
    """

    def __init__(self):
        self.parser = self._build_parser()
        self.stats = {
            'time': 0.0,
            'status': 'Ready',
        }
        self.commands = {
            'synth': self._synth,
            'train': self._train,
            'eval': self._eval,
            'gradcheck': self._gradcheck,
            'attn-export': self._attn_export,
            'profile': self._profile,
        }

    def _build_parser(self) -> argparse.ArgumentParser:
        parser = _Parser(prog="stgformer", description="2D-to-3D pose lifting")
        parser.add_argument("--log-level", default="INFO", choices=["DEBUG", "INFO", "WARNING", "ERROR"])
        sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

        p = sub.add_parser("synth", help="generate a paired synthetic sequence")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--frames", type=int, default=C.SYNTH_FRAMES)
        p.add_argument("--skeleton", default="h36m17")
        p.add_argument("--num-joints", type=int, help="joint count for --skeleton chain")
        p.add_argument("--step-mm", type=float, default=C.SYNTH_STEP_MM)
        p.add_argument("--noise-px", type=float, default=0.0)
        p.add_argument("--num-actions", type=int, default=1)
        p.add_argument("--out-2d", required=True)
        p.add_argument("--out-3d", required=True)

        p = sub.add_parser("train", help="train a model")
        p.add_argument("--data-2d", required=True)
        p.add_argument("--data-3d", required=True)
        p.add_argument("--config")
        p.add_argument("--epochs", type=int)
        p.add_argument("--batch", type=int)
        p.add_argument("--seed", type=int)
        p.add_argument("--max-steps", type=int)
        p.add_argument("--out-checkpoint", required=True)
        p.add_argument("--trace")
        p.add_argument("--no-progress", action="store_true")

        p = sub.add_parser("eval", help="evaluate a checkpoint")
        p.add_argument("--data-2d", required=True)
        p.add_argument("--data-3d", required=True)
        p.add_argument("--checkpoint", required=True)
        p.add_argument("--report")

        p = sub.add_parser("gradcheck", help="finite-difference gradient check")
        p.add_argument("--config")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--tolerance", type=float, default=C.GRADCHECK_TOLERANCE)
        p.add_argument("--ablation", default="full", choices=sorted(ABLATION_ROWS) + ["all"])

        p = sub.add_parser("attn-export", help="export attention maps")
        p.add_argument("--checkpoint", required=True)
        p.add_argument("--data-2d", required=True)
        p.add_argument("--layer", type=int, default=0)
        p.add_argument("--head", type=int, default=0)
        p.add_argument("--group", default="spatial", choices=["spatial", "temporal"])
        p.add_argument("--out", required=True)

        p = sub.add_parser("profile", help="parameter breakdown")
        p.add_argument("--config")
        return parser

    def run(self, argv: Optional[List[str]] = None) -> int:
        """Parse, dispatch and map failures to exit codes."""
        try:
            args = self.parser.parse_args(argv)
        except UsageError as exc:
            print(exc, file=sys.stderr)
            return C.EXIT_USAGE
        logging.basicConfig(level=args.log_level, format="%(levelname)s %(name)s: %(message)s")

        start_time = time.time()
        try:
            self.commands[args.command](args)
            code = C.EXIT_OK
        except VALIDATION_ERRORS as exc:
            self.stats['status'] = f'Failed: {exc}'
            code = C.EXIT_VALIDATION
        except IO_ERRORS as exc:
            self.stats['status'] = f'I/O error: {exc}'
            code = C.EXIT_IO
        self.stats['time'] = (time.time() - start_time) * 1000

        if code == C.EXIT_OK:
            logger.info("%s finished in %.0f ms", args.command, self.stats['time'])
        print(self.stats['status'], file=sys.stdout if code == C.EXIT_OK else sys.stderr)
        return code

    # ========================================================================
    # COMMANDS
    # ========================================================================

    def _synth(self, args) -> None:
        cfg = SynthConfig(
            seed=args.seed, frames=args.frames, skeleton=args.skeleton, step_mm=args.step_mm,
            noise_px=args.noise_px, num_actions=args.num_actions, num_joints=args.num_joints,
        ).validate()
        seq = write_synth(cfg, args.out_2d, args.out_3d)
        self.stats['status'] = f'Synthesized {seq.p3d.shape[0]} frames × {seq.p3d.shape[1]} joints'

    def _train(self, args) -> None:
        model_cfg, train_cfg = load_config(args.config) if args.config else (ModelConfig(), TrainConfig())
        overrides = {
            'epochs': args.epochs, 'batch_size': args.batch, 'seed': args.seed, 'max_steps': args.max_steps,
        }
        overrides = {key: value for key, value in overrides.items() if value is not None}
        if args.no_progress:
            overrides['progress'] = False
        train_cfg = replace(train_cfg, **overrides)

        data_2d, data_3d = read_pose_file(args.data_2d), read_pose_file(args.data_3d)
        inputs, targets = prepare_windows(data_2d.data, data_3d.data, model_cfg, train_cfg)
        logger.info("training on %d windows of %d frames", inputs.shape[0], model_cfg.num_frames)

        model, trace = train_epochs(inputs, targets, model_cfg, train_cfg)
        save_checkpoint(args.out_checkpoint, model, model_cfg, train_cfg)
        if args.trace:
            write_trace(args.trace, trace)
        final = trace[-1]['loss'] if trace else float('nan')
        self.stats['status'] = f'Trained {len(trace)} steps, final loss {final:.6f}'

    def _eval(self, args) -> None:
        model, model_cfg, train_cfg = load_checkpoint(args.checkpoint)
        data_2d, data_3d = read_pose_file(args.data_2d), read_pose_file(args.data_3d)
        if data_2d.data.shape[:2] != data_3d.data.shape[:2]:
            raise ConfigError(f"2D {data_2d.shape} and 3D {data_3d.shape} sequences do not pair up")
        report = evaluate(model, data_2d.data, data_3d.data, data_3d.labels, train_cfg)
        text = report.to_text()
        if args.report:
            atomic_write_text(args.report, text)
        else:
            sys.stdout.write(text)
        self.stats['status'] = f'MPJPE {report.mpjpe_mm:.2f} mm, PA-MPJPE {report.pa_mpjpe_mm:.2f} mm'

    def _gradcheck(self, args) -> None:
        base = load_config(args.config)[0] if args.config else gradcheck_config()
        rows = sorted(ABLATION_ROWS) if args.ablation == "all" else [args.ablation]
        worst = 0.0
        for row in rows:
            report = finite_diff_gradcheck(replace(base, **ABLATION_ROWS[row]), args.seed, args.tolerance)
            logger.info("%s: max rel error %.3e in '%s'", row, report.max_rel_error, report.worst_parameter)
            report.raise_for_failure()
            worst = max(worst, report.max_rel_error)
        self.stats['status'] = f'Gradient check passed ({", ".join(rows)}), max rel error {worst:.3e}'

    def _attn_export(self, args) -> None:
        model, model_cfg, train_cfg = load_checkpoint(args.checkpoint)
        if not 0 <= args.layer < model_cfg.num_blocks:
            raise ConfigError(f"layer {args.layer} outside [0, {model_cfg.num_blocks})")
        if not 0 <= args.head < model_cfg.heads_per_group:
            raise ConfigError(f"head {args.head} outside [0, {model_cfg.heads_per_group})")

        windows, _ = input_windows(read_pose_file(args.data_2d).data, model_cfg, train_cfg)
        model.eval()
        with torch.no_grad():
            _, weights = model(windows, attention_layer=args.layer)
        if args.group not in weights:
            raise ConfigError(f"{args.group} attention is disabled in this checkpoint")

        # spatial [W, T, heads, N, N] -> [W·T, N, N]; temporal [W, N, heads, T, T] -> [W·N, T, T]
        maps = weights[args.group][:, :, args.head]
        maps = maps.reshape(-1, *maps.shape[-2:]).cpu().numpy()
        write_attention_file(args.out, maps)
        self.stats['status'] = f'Exported {maps.shape[0]} {args.group} maps from layer {args.layer}'

    def _profile(self, args) -> None:
        model_cfg = load_config(args.config)[0] if args.config else ModelConfig()
        counts = count_parameters(model_cfg)
        for key, value in counts.items():
            print(f"{key}: {value}")
        self.stats['status'] = f'{counts["total"]:,} parameters'


def main(argv: Optional[List[str]] = None) -> int:
    """Entry point."""
    return StgformerCli().run(argv)


if __name__ == "__main__":
    sys.exit(main())
