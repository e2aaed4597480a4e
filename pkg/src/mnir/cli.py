"""
Command line interface.

Exit codes: 0 success, 1 numerical failure, 2 input error.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import sys
from pathlib import Path

from . import __version__
from .collapsed import DEFAULT_BOUND, MnirFit, fit_collapsed_mnir
from .corpus import collapse, load_corpus, load_responses, mean_shift_frequencies, write_corpus
from .dmr import CovariateBlock, dmr_fit, tfidf_pca
from .errors import InputError, MnirError, NumericalError
from .forward import ForwardFit, fit_forward_ols, predict_corpus
from .simlab import (draw_corpus, efficiency_compare, load_config, verify_prop1,
                     verify_prop2)
from .simlab.report import dumps
from .seeding import rng_for

EXIT_OK = 0
EXIT_NUMERICAL = 1
EXIT_INPUT = 2

STREAM_SIMULATE = 7


def _digest(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 16), b""):
            h.update(block)
    return h.hexdigest()


def manifest(subcommand, config, inputs, seed, outputs):
    """Provenance block embedded in every JSON output.

    File names are recorded without directories and the worker count is
    left out, so identical runs produce identical bytes.
    """
    return {
        "subcommand": subcommand,
        "config": config,
        "inputs": {Path(p).name: _digest(p) for p in inputs if p is not None},
        "tool_version": __version__,
        "seed": seed,
        "outputs": [Path(p).name for p in outputs if p is not None],
    }


def _emit(text, out):
    if out is None:
        sys.stdout.write(text)
    else:
        Path(out).write_text(text, encoding="utf-8")


def _log(msg, to_stderr):
    print(msg, file=sys.stderr if to_stderr else sys.stdout)


# -- subcommands ---------------------------------------------------------------


def cmd_fit(args):
    corpus = load_corpus(args.corpus, args.responses)
    counts = collapse(corpus)
    fit = fit_collapsed_mnir(counts, baseline=args.baseline, bound=args.bound)
    if not fit.converged:
        raise NumericalError(f"collapsed fit did not converge (gradient {fit.grad_norm:.3g})")
    F = mean_shift_frequencies(corpus)
    z = F.dot(fit.phi)
    y = corpus.responses
    if args.target is not None:
        y = load_responses(args.target, corpus.n_docs, binary=False)
    fwd = fit_forward_ols(z, y, fbar=F.offset)
    summary = {
        "n": corpus.n_docs,
        "p": corpus.vocab_size,
        "M": corpus.total_words,
        "loglik": fit.log_likelihood,
        "beta": fwd.beta_hat,
        "sigma2": fwd.sigma2_hat,
    }
    config = {"baseline": fit.baseline, "bound": args.bound}
    doc = {
        "manifest": manifest("fit", config, [args.corpus, args.responses, args.target],
                             args.seed, [args.out]),
        "mnir": fit.to_dict(),
        "forward": fwd.to_dict(),
        "summary": summary,
    }
    _emit(dumps(doc), args.out)
    _log("  ".join(f"{k}={v:.6g}" if isinstance(v, float) else f"{k}={v}"
                   for k, v in summary.items()), args.out is None)
    if fit.clamped:
        _log(f"clamped at |phi| = {fit.bound:g}: words {list(fit.clamped)}", True)
    return EXIT_OK


def _read_model(path):
    path = Path(path)
    if not path.is_file():
        raise InputError(f"{path}: model file not found")
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
        return MnirFit.from_dict(doc["mnir"]), ForwardFit.from_dict(doc["forward"])
    except (json.JSONDecodeError, KeyError, TypeError) as exc:
        raise InputError(f"{path}: not a model file ({exc})") from None


def cmd_predict(args):
    mnir, fwd = _read_model(args.model)
    corpus = load_corpus(args.corpus)
    z, y_hat, var_hat = predict_corpus(fwd, mnir, corpus)
    lines = ["doc\tz\ty_hat\tvar_hat"]
    lines += [f"{i}\t{float(z[i])!r}\t{float(y_hat[i])!r}\t{float(var_hat[i])!r}"
              for i in range(corpus.n_docs)]
    _emit("\n".join(lines) + "\n", args.out)
    return EXIT_OK


def cmd_dmr(args):
    corpus = load_corpus(args.corpus, args.responses, binary=not args.real_responses)
    cov = CovariateBlock.from_responses(corpus)
    if args.pca:
        cov = cov.hstack(tfidf_pca(corpus, args.pca).as_covariates())
    fit = dmr_fit(corpus, cov, lam=args.lam, workers=args.workers, bound=args.bound)
    config = {"lambda": args.lam, "pca": args.pca, "bound": args.bound,
              "real_responses": args.real_responses}
    doc = {"manifest": manifest("dmr", config, [args.corpus, args.responses], args.seed,
                                [args.out])}
    doc.update(fit.to_dict())
    _emit(dumps(doc), args.out)
    n_bad = int((~fit.converged).sum())
    _log(f"dmr: p={corpus.vocab_size} d={cov.d} lambda={args.lam:g} "
         f"unconverged={n_bad} diagnostics={len(fit.diagnostics)}", args.out is None)
    return EXIT_OK if n_bad == 0 else EXIT_NUMERICAL


def cmd_simulate(args):
    config = load_config(args.config, seed=args.seed)
    if args.out is None:
        raise InputError("simulate needs --out for the corpus file")
    draw = draw_corpus(config, rng_for(args.seed, STREAM_SIMULATE))
    responses_out = args.responses_out or f"{args.out}.responses"
    write_corpus(draw.corpus, args.out, responses_out)
    print(f"simulate: wrote {draw.corpus.n_docs} docs, p={draw.corpus.vocab_size}, "
          f"M={draw.corpus.total_words} to {args.out} and {responses_out}")
    return EXIT_OK


def _run_verify(args, which):
    config = load_config(args.config, seed=args.seed)
    if which == "prop1":
        report = verify_prop1(config, workers=args.workers, nuisance=args.nuisance)
    elif which == "prop2":
        report = verify_prop2(config, workers=args.workers)
    elif which == "efficiency":
        report = efficiency_compare(config, workers=args.workers)
    else:  # pragma: no cover - argparse restricts choices
        raise InputError(f"unknown check {which!r}")
    doc = {"manifest": manifest(args.command, {**config.to_dict(), "check": which,
                                               "nuisance": args.nuisance},
                                [args.config], args.seed, [args.out, args.csv])}
    doc.update(report.to_dict())
    if args.out is not None:
        Path(args.out).write_text(dumps(doc), encoding="utf-8")
    sys.stdout.write(report.to_text())
    if args.csv is not None:
        Path(args.csv).write_text(report.to_csv(), encoding="utf-8")
    return EXIT_OK


def cmd_verify(args):
    return _run_verify(args, args.which)


def cmd_compare(args):
    return _run_verify(args, "efficiency")


# -- parser ----------------------------------------------------------------------


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="base seed for all randomness (default 0)")
    common.add_argument("--workers", type=int, default=1, help="process pool size; never changes results")
    common.add_argument("--out", default=None, help="output file (default: stdout)")

    parser = argparse.ArgumentParser(prog="mnir", description="Multinomial inverse regression tools")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit", parents=[common], help="fit collapsed MNIR and the forward OLS stage")
    p.add_argument("corpus")
    p.add_argument("responses")
    p.add_argument("--baseline", type=int, default=None, help="baseline word index (default: most frequent)")
    p.add_argument("--bound", type=float, default=DEFAULT_BOUND)
    p.add_argument("--target", default=None, help="real-valued doc<TAB>y file for the forward stage")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("predict", parents=[common], help="predict documents with a fitted model")
    p.add_argument("model")
    p.add_argument("corpus")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("dmr", parents=[common], help="per-word Poisson regressions")
    p.add_argument("corpus")
    p.add_argument("responses")
    p.add_argument("--lambda", dest="lam", type=float, default=0.0, help="L1 weight on loadings")
    p.add_argument("--pca", type=int, default=0, help="add K tf-idf PCA scores as covariates")
    p.add_argument("--bound", type=float, default=DEFAULT_BOUND)
    p.add_argument("--real-responses", action="store_true", help="allow non-binary responses")
    p.set_defaults(func=cmd_dmr)

    p = sub.add_parser("simulate", parents=[common], help="draw a corpus from a simulation config")
    p.add_argument("config")
    p.add_argument("--responses-out", default=None)
    p.set_defaults(func=cmd_simulate)

    for name, helptext in (("verify", "Monte Carlo verification run"),
                           ("compare", "MNIR-OLS versus frequency OLS")):
        p = sub.add_parser(name, parents=[common], help=helptext)
        p.add_argument("config")
        if name == "verify":
            p.add_argument("which", choices=["prop1", "prop2", "efficiency"])
        p.add_argument("--nuisance", choices=["estimated", "known"], default="estimated",
                       help="prop1 only: estimate intercepts or fix them at the truth")
        p.add_argument("--csv", default=None, help="write the prop2 ratio ladder as CSV")
        p.set_defaults(func=cmd_verify if name == "verify" else cmd_compare)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.workers < 1:
        parser.error("--workers must be at least 1")
    try:
        return args.func(args)
    except NumericalError as exc:
        print(f"mnir {args.command}: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (MnirError, OSError) as exc:
        print(f"mnir {args.command}: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
