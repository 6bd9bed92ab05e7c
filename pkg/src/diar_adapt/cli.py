"""Command-line entry point: ``diar-adapt {diarise,score,synth,ablate}``.

Exit codes: 0 success, 1 usage error, 2 data error.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from ._validation import DataError
from .aggregate import AggregationConfig
from .cluster import SpectralConfig
from .dim_reduce import TrainConfig
from .pipeline import (
    PipelineConfig,
    format_ablation,
    prototype_from_file,
    read_config_file,
    run_ablation,
    run_diarise,
    write_ablation_csv,
)
from .scoring import format_report, parse_rttm, rttm_lines, score_many
from .synthetic import SadNoiseSpec, make_benchmark, write_dataset

EXIT_USAGE = 1
EXIT_DATA = 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _num_speakers(value: str):
    if value == "auto":
        return value
    try:
        k = int(value)
    except ValueError:
        raise argparse.ArgumentTypeError("expected an integer or 'auto'") from None
    if k < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return k


def _add_pipeline_options(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("pipeline")
    g.add_argument("--config", type=Path, help="key=value file; command-line flags take precedence")
    g.add_argument("--clusterer", choices=("ahc", "spc"), default="ahc")
    g.add_argument("--num-speakers", type=_num_speakers, default="auto")
    g.add_argument("--dr", action=argparse.BooleanOptionalAction, default=False,
                   help="per-session autoencoder dimensionality reduction")
    g.add_argument("--aa", action=argparse.BooleanOptionalAction, default=False,
                   help="attention-based embedding aggregation")
    g.add_argument("--nonspeech", default="off", metavar="{off|sad|prototype:PATH}",
                   help="non-speech clustering mode")
    g.add_argument("--aa-iterations", type=int, default=5)
    g.add_argument("--aa-temperature", type=float, default=15.0)
    g.add_argument("--eigen-threshold", type=float, default=20.0)
    g.add_argument("--ahc-threshold", type=float, default=None,
                   help="stop AHC merging at this cosine distance instead of silhouette search")
    g.add_argument("--code-dim", type=int, default=20)
    g.add_argument("--ae-epochs", type=int, default=200)
    g.add_argument("--ae-lr", type=float, default=0.001)
    g.add_argument("--sad-threshold", type=float, default=0.5)
    g.add_argument("--sad-window", type=float, default=0.100)
    g.add_argument("--sad-ratio", type=float, default=0.7)
    g.add_argument("--subsegment", type=float, default=1.5,
                   help="maximum sub-segment length in seconds")
    g.add_argument("--collar", type=float, default=0.0)
    g.add_argument("--seed", type=int, default=0)


def _parse_nonspeech(value: str):
    if value == "off":
        return False, None
    if value == "sad":
        return True, None
    if value.startswith("prototype:"):
        return True, prototype_from_file(value.split(":", 1)[1])
    raise UsageError(f"--nonspeech must be off, sad or prototype:<path>, got {value!r}")


def config_from_args(args) -> PipelineConfig:
    use_ns, prototype = _parse_nonspeech(args.nonspeech)
    try:
        return PipelineConfig(
            clusterer=args.clusterer,
            use_dr=args.dr,
            use_aa=args.aa,
            use_ns=use_ns,
            nonspeech_prototype=prototype,
            num_speakers=args.num_speakers,
            train=TrainConfig(epochs=args.ae_epochs, learning_rate=args.ae_lr, code_dim=args.code_dim),
            aggregation=AggregationConfig(args.aa_iterations, args.aa_temperature),
            spectral=SpectralConfig(eigen_threshold=args.eigen_threshold),
            ahc_distance_threshold=args.ahc_threshold,
            collar=args.collar,
            sad_threshold=args.sad_threshold,
            sad_window=args.sad_window,
            sad_ratio=args.sad_ratio,
            subsegment_seconds=args.subsegment,
            seed=args.seed,
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _apply_config_file(parser: argparse.ArgumentParser, sub: argparse.ArgumentParser, argv) -> argparse.Namespace:
    args = parser.parse_args(argv)
    path = getattr(args, "config", None)
    if path is None:
        return args
    values = read_config_file(path)
    known = {a.dest: a for a in sub._actions}
    defaults = {}
    for key, raw in values.items():
        if key not in known or key in ("config", "help"):
            raise UsageError(f"{path}: unknown key {key!r}")
        action = known[key]
        if isinstance(action, argparse.BooleanOptionalAction):
            defaults[key] = raw.lower() in ("1", "true", "yes", "on")
        elif action.type is not None:
            try:
                defaults[key] = action.type(raw)
            except (ValueError, argparse.ArgumentTypeError) as exc:
                raise UsageError(f"{path}: bad value for {key}: {exc}") from None
        else:
            defaults[key] = raw
    sub.set_defaults(**defaults)
    return parser.parse_args(argv)


def cmd_diarise(args) -> int:
    config = config_from_args(args)
    result = run_diarise(
        args.embeddings,
        args.sad,
        config,
        speech_segments=parse_rttm(args.speech_segments)[0] if args.speech_segments else None,
        session_id=args.session_id,
        out_path=args.out,
    )
    if args.out is None:
        for line in rttm_lines(result.timeline):
            print(line)
    return 0


def cmd_score(args) -> int:
    if args.collar < 0:
        raise UsageError("--collar must be >= 0")
    refs = parse_rttm(args.ref)
    hyps = parse_rttm(args.hyp)
    reports, total = score_many(refs, hyps, args.collar)
    print(format_report(reports, total))
    return 0


def cmd_synth(args) -> int:
    sessions = make_benchmark(
        n_sessions=args.sessions,
        seed=args.seed,
        noise_sigma=args.noise_sigma,
        nonspeech_fraction=args.nonspeech_fraction,
        speakers=(args.min_speakers, args.max_speakers),
        windows_per_speaker=(args.min_windows, args.max_windows),
        dim=args.dim,
        sad_noise=SadNoiseSpec(args.sad_miss, args.sad_false_alarm, args.sad_frame_flip),
    )
    for path in write_dataset(sessions, args.out_dir):
        print(path)
    return 0


def cmd_ablate(args) -> int:
    config = config_from_args(args)
    rows = run_ablation(args.data_dir, config)
    if not rows:
        raise DataError(f"{args.data_dir}: no scorable sessions")
    print(format_ablation(rows))
    if args.out:
        write_ablation_csv(rows, args.out)
    return 0


def build_parser() -> tuple[argparse.ArgumentParser, dict[str, argparse.ArgumentParser]]:
    parser = _Parser(prog="diar-adapt", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    subs = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    d = subs.add_parser("diarise", help="diarise one session from embeddings (+ SAD)")
    d.add_argument("--embeddings", type=Path, required=True, help="SEG embedding file")
    d.add_argument("--sad", type=Path, help="SADP frame probability file")
    d.add_argument("--speech-segments", type=Path, help="RTTM whose turns give the speech regions")
    d.add_argument("--out", type=Path, help="output RTTM (default: stdout)")
    d.add_argument("--session-id")
    _add_pipeline_options(d)
    d.set_defaults(func=cmd_diarise)

    s = subs.add_parser("score", help="DER of hypothesis RTTM against reference RTTM")
    s.add_argument("--ref", type=Path, required=True)
    s.add_argument("--hyp", type=Path, required=True)
    s.add_argument("--collar", type=float, default=0.0)
    s.set_defaults(func=cmd_score)

    y = subs.add_parser("synth", help="write a synthetic dataset (SEG, SADP, RTTM per session)")
    y.add_argument("--out-dir", type=Path, required=True)
    y.add_argument("--sessions", type=int, default=20)
    y.add_argument("--seed", type=int, default=42)
    y.add_argument("--noise-sigma", type=float, default=0.25)
    y.add_argument("--nonspeech-fraction", type=float, default=0.1)
    y.add_argument("--dim", type=int, default=32)
    y.add_argument("--min-speakers", type=int, default=2)
    y.add_argument("--max-speakers", type=int, default=4)
    y.add_argument("--min-windows", type=int, default=100)
    y.add_argument("--max-windows", type=int, default=250)
    y.add_argument("--sad-miss", type=float, default=0.05)
    y.add_argument("--sad-false-alarm", type=float, default=0.3)
    y.add_argument("--sad-frame-flip", type=float, default=0.05)
    y.set_defaults(func=cmd_synth)

    a = subs.add_parser("ablate", help="score all technique combinations on a dataset directory")
    a.add_argument("--data-dir", type=Path, required=True)
    a.add_argument("--out", type=Path, help="CSV output")
    _add_pipeline_options(a)
    a.set_defaults(func=cmd_ablate)
    return parser, {"diarise": d, "score": s, "synth": y, "ablate": a}


def main(argv=None) -> int:
    parser, subparsers = build_parser()
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        args = parser.parse_args(argv)
        if hasattr(args, "config"):
            args = _apply_config_file(parser, subparsers[args.command], argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        return args.func(args)
    except SystemExit as exc:  # argparse: --help or a usage error
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    except UsageError as exc:
        print(f"diar-adapt: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, OSError) as exc:
        print(f"diar-adapt: data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
