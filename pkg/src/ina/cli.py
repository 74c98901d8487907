"""Command-line interface: ``ina {train,predict,evaluate,inspect,bench}``.

Exit codes: 0 success, 1 internal error, 2 bad input data or flags,
3 I/O failure, 4 unsupported model version, 5 model checksum failure,
6 truncated model file.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import math
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import bench, modelfile
from .datasets import FORMAT_ALIASES, FORMATS, encode_records, guess_format, load_training_set, read_records
from .errors import (ChecksumError, INAError, ModelFileError, TruncatedModelError,
                     ValidationError, VersionMismatchError)
from .info_math import EmergenceConfig
from .model import decide, inspect_text, rank, score_many
from .training import TrainConfig, evaluate, fit

log = logging.getLogger("ina")

EXIT_OK, EXIT_INTERNAL, EXIT_DATA, EXIT_IO = 0, 1, 2, 3
EXIT_VERSION, EXIT_CHECKSUM, EXIT_TRUNCATED = 4, 5, 6

_EMERGENCE = {"none": "none", "global": "global", "group": "per_group"}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_DATA, f"{self.prog}: error: {message}\n")


def _positive_int(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return v


def _nonneg_int(text):
    v = int(text)
    if v < 0:
        raise argparse.ArgumentTypeError(f"expected a non-negative integer, got {text}")
    return v


def _finite(text):
    v = float(text)
    if not math.isfinite(v):
        raise argparse.ArgumentTypeError(f"expected a finite number, got {text}")
    return v


def _data_flags(p):
    p.add_argument("--input", required=True, help="dataset path (.jsonl or .csv, optionally .gz)")
    p.add_argument("--format", choices=FORMATS + tuple(FORMAT_ALIASES), help="dataset format; guessed from the suffix")
    p.add_argument("--epsilon", type=_finite,
                   help="binarization threshold for csv input (default: auto, or the model's)")
    p.add_argument("--max-errors", type=_nonneg_int, default=0,
                   help="malformed lines to skip before failing")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="ina", description=__doc__.split("\n")[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    t = sub.add_parser("train", help="build a model from a labeled dataset")
    _data_flags(t)
    t.add_argument("--model", required=True, help="output model path")
    t.add_argument("--beta", type=_finite, default=1.0)
    t.add_argument("--smoothing", type=_finite, default=0.0)
    t.add_argument("--emergence", choices=sorted(_EMERGENCE), default="none")
    t.add_argument("--z", type=_positive_int, default=1, help="max complexity for --emergence global")
    t.add_argument("--psi-min", type=_finite, default=0.0)
    t.add_argument("--em-iters", type=_nonneg_int, default=10,
                   help="max accepted M-step passes; 0 builds weights with the E-step only")
    t.add_argument("--margin", type=_finite, default=0.1)
    t.add_argument("--tolerance", type=_finite, default=1e-6)
    t.add_argument("--activation", choices=("identity", "softmax"), default="identity")
    t.add_argument("--bias", default=None,
                   help="uniform class bias in bits, or a JSON file mapping class -> bits")
    t.add_argument("--log", help="append one JSON line per M-step pass to this file")
    t.add_argument("--threads", type=_positive_int, default=None)
    t.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("predict", help="classify records")
    _data_flags(p)
    p.add_argument("--model", required=True)
    p.add_argument("--top-k", type=_positive_int, default=1)
    p.add_argument("--out", help="output path (default stdout)")
    p.add_argument("--threads", type=_positive_int, default=None)
    p.add_argument("--seed", type=int, default=0)

    e = sub.add_parser("evaluate", help="report precision/recall/F on a labeled dataset")
    _data_flags(e)
    e.add_argument("--model", required=True)
    e.add_argument("--beta", type=_finite, default=1.0)
    e.add_argument("--out", help="output path (default stdout)")
    e.add_argument("--threads", type=_positive_int, default=None)
    e.add_argument("--seed", type=int, default=0)

    i = sub.add_parser("inspect", help="list the strongest weights per class")
    i.add_argument("--model", required=True)
    i.add_argument("--top-n", type=_positive_int, default=10)
    i.add_argument("--out")

    b = sub.add_parser("bench", help="time counting + E-step against dataset size")
    b.add_argument("--sizes", type=_positive_int, nargs="+", default=list(bench.DEFAULT_SIZES))
    b.add_argument("--features", type=_positive_int, default=1000)
    b.add_argument("--classes", type=_positive_int, default=10)
    b.add_argument("--active", type=_positive_int, default=20)
    b.add_argument("--repeats", type=_positive_int, default=3)
    b.add_argument("--threads", type=_positive_int, default=1)
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--out")
    return parser


def _write_output(text: str, out: str | None):
    if out is None:
        sys.stdout.write(text)
        return
    path = Path(out)
    tmp = path.with_name(f".{path.name}.tmp")
    tmp.write_text(text, encoding="utf-8")
    os.replace(tmp, path)


def _format_of(args) -> str:
    fmt = args.format or guess_format(args.input)
    return FORMAT_ALIASES.get(fmt, fmt)


def _parse_bias(spec: str | None, class_names):
    if spec is None:
        return None
    try:
        value = float(spec)
    except ValueError:
        pass
    else:
        if not math.isfinite(value):
            raise ValidationError("bias must be finite")
        return value
    with open(spec, encoding="utf-8") as fh:
        try:
            mapping = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValidationError(f"bias file is not JSON: {exc.msg}") from None
    if not isinstance(mapping, dict):
        raise ValidationError("bias file must hold a JSON object of class -> bits")
    unknown = set(mapping) - set(class_names)
    if unknown:
        raise ValidationError(f"bias file names unknown classes: {sorted(unknown)}")
    return np.array([float(mapping.get(c, 0.0)) for c in class_names])


def cmd_train(args) -> int:
    threads = args.threads or os.cpu_count() or 1
    cfg = TrainConfig(
        emergence=EmergenceConfig(_EMERGENCE[args.emergence], z=args.z, psi_min=args.psi_min),
        smoothing=args.smoothing, beta=args.beta, margin=args.margin,
        max_m_iters=args.em_iters, tolerance=args.tolerance, activation=args.activation,
        shards=threads, threads=threads)
    fmt = _format_of(args)
    t0 = time.perf_counter()
    dataset, read = load_training_set(args.input, fmt, epsilon=args.epsilon,
                                      max_errors=args.max_errors)
    bias = _parse_bias(args.bias, dataset.vocab.class_names)
    history: list = []
    model, report = fit(dataset, cfg, history=history, bias=bias)
    prov = dict(model.provenance, format=fmt)
    if read.epsilon is not None:
        prov["epsilon"] = read.epsilon
    model = model.replace(provenance=prov)
    modelfile.save(model, args.model)
    elapsed = time.perf_counter() - t0
    if args.log:
        with open(args.log, "a", encoding="utf-8") as fh:
            for rec in history:
                fh.write(json.dumps(rec, sort_keys=True) + "\n")
    summary = {
        "M": model.n_features, "W": model.n_classes, "nonzero_weights": model.nnz,
        "examples": len(dataset), "skipped_lines": len(read.skipped),
        "E_F_micro": report.mean_f, "accuracy": report.accuracy, "beta": cfg.beta,
        "m_iterations": model.provenance.get("m_iterations", 0),
        "wall_time_s": round(elapsed, 3),
    }
    print(json.dumps(summary, sort_keys=True))
    return EXIT_OK


def _load_inputs(args, require_label: bool):
    model = modelfile.load(args.model)
    fmt = _format_of(args)
    eps = args.epsilon if args.epsilon is not None else model.provenance.get("epsilon")
    read = read_records(args.input, fmt, epsilon=eps, max_errors=args.max_errors,
                        require_label=require_label)
    return model, read


def cmd_predict(args) -> int:
    model, read = _load_inputs(args, require_label=False)
    unlabeled = [dataclasses.replace(r, label=None) for r in read.records]
    dataset = encode_records(unlabeled, model.vocab, require_label=False)
    scores = score_many(model, dataset.examples)
    chosen = decide(scores)
    names = model.vocab.class_names
    lines = []
    for s, j in zip(scores, chosen):
        fields = [names[j], f"{s[j]:.6f}"]
        if args.top_k > 1:
            for c, v in rank(s, args.top_k)[1:]:
                fields += [names[c], f"{v:.6f}"]
        lines.append("\t".join(fields))
    _write_output("".join(line + "\n" for line in lines), args.out)
    return EXIT_OK


def cmd_evaluate(args) -> int:
    model, read = _load_inputs(args, require_label=True)
    if not read.records:
        raise ValidationError("empty dataset")
    dataset = encode_records(read.records, model.vocab, require_label=True)
    report = evaluate(model, dataset, args.beta)
    _write_output(report.to_json() + "\n", args.out)
    return EXIT_OK


def cmd_inspect(args) -> int:
    model = modelfile.load(args.model)
    _write_output(inspect_text(model, args.top_n), args.out)
    return EXIT_OK


def cmd_bench(args) -> int:
    rows, slope = bench.run(sizes=args.sizes, n_features=args.features,
                            n_classes=args.classes, active=args.active, seed=args.seed,
                            repeats=args.repeats, threads=args.threads)
    _write_output(bench.to_csv(rows, slope), args.out)
    return EXIT_OK


COMMANDS = {"train": cmd_train, "predict": cmd_predict, "evaluate": cmd_evaluate,
            "inspect": cmd_inspect, "bench": cmd_bench}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        return COMMANDS[args.command](args)
    except VersionMismatchError as exc:
        return _fail(exc, EXIT_VERSION)
    except ChecksumError as exc:
        return _fail(exc, EXIT_CHECKSUM)
    except TruncatedModelError as exc:
        return _fail(exc, EXIT_TRUNCATED)
    except (ModelFileError, ValidationError, INAError) as exc:
        return _fail(exc, EXIT_DATA)
    except OSError as exc:
        return _fail(exc, EXIT_IO)
    except Exception as exc:  # invariant violations
        log.debug("internal error", exc_info=True)
        return _fail(exc, EXIT_INTERNAL)


def _fail(exc, code: int) -> int:
    print(f"ina: error: {exc}", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
