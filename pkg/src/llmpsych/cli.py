"""Command-line entry point: ``llmpsych <subcommand> ...``.

Exit codes: 0 success, 1 usage or validation error, 2 data error,
3 provider error.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import re
import sys
from pathlib import Path

import numpy as np

from . import colornaming, geometry, simstats
from .config import RunConfig, load_config
from .errors import DataError, ProviderError
from .prompts import BASIC_COLOR_TERMS, Language
from .provider import (
    CachingProvider,
    HttpProvider,
    MockProvider,
    ProviderConfig,
    ReplayProvider,
    ResponseCache,
    SyntheticRespondent,
    elicit_naming,
    elicit_similarity,
)
from .records import (
    read_confusion_csv,
    read_matrix_csv,
    read_naming_csv,
    read_palette_csv,
    read_ratings_csv,
    sniff_header,
    write_matrix_csv,
    write_naming_csv,
    write_ratings_csv,
)
from .stimuli import Modality, StimulusSet, build_stimulus_set, confusion_to_similarity
from .svg import profile_svg, scatter_svg
from .textstats import count_terms, write_frequency_csv

logger = logging.getLogger("llmpsych")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_PROVIDER = 0, 1, 2, 3

_HEX = re.compile(r"#[0-9a-fA-F]{6}")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


# --- option resolution -------------------------------------------------------

def _opt(args, cfg: RunConfig, dest, default=None):
    value = getattr(args, dest, None)
    if value is not None:
        return value
    return cfg.get(dest, default)


def _seed(args, cfg) -> int:
    seed = _opt(args, cfg, "seed")
    if seed is None:
        raise UsageError("this subcommand is stochastic; pass --seed or set [campaign] seed in the config")
    return int(seed)


def _out_dir(args, cfg) -> Path:
    out = Path(_opt(args, cfg, "out", "out"))
    out.mkdir(parents=True, exist_ok=True)
    return out


def _stimuli(args, cfg, fallback_file=None) -> StimulusSet:
    modality = _opt(args, cfg, "modality")
    if modality is None and fallback_file is not None:
        with open(fallback_file, newline="", encoding="utf-8") as fh:
            first = next(csv.DictReader(fh), None)
        modality = first and first.get("modality")
    if modality is None:
        raise UsageError("--modality is required")
    try:
        modality = Modality(modality)
    except ValueError:
        raise UsageError(f"unknown modality {modality!r}") from None
    return build_stimulus_set(modality, extended_colors=bool(_opt(args, cfg, "extended_colors", False)))


def _provider_config(args, cfg, seed) -> ProviderConfig:
    defaults = ProviderConfig()
    kwargs = {}
    for dest in ("base_url", "model", "temperature", "repetitions", "max_attempts", "max_in_flight", "api_key_env"):
        kwargs[dest] = _opt(args, cfg, dest, getattr(defaults, dest))
    kwargs["include_diagonal"] = bool(_opt(args, cfg, "include_diagonal", False))
    try:
        return ProviderConfig(seed=seed, **kwargs)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _provider(args, cfg, seed, ground_truth=None):
    kind = _opt(args, cfg, "provider", "mock")
    cache_path = _opt(args, cfg, "cache")
    cache = ResponseCache(cache_path)
    if kind == "replay":
        if cache_path is None:
            raise UsageError("--provider replay needs --cache")
        return ReplayProvider(cache)
    if kind == "http":
        inner = HttpProvider()
    elif kind == "mock":
        if ground_truth is not None:
            inner = SyntheticRespondent(ground_truth, float(_opt(args, cfg, "noise_sd", 0.0)), seed)
        else:
            inner = MockProvider(str(_opt(args, cfg, "mock_response", "0.5")))
    else:
        raise UsageError(f"unknown provider {kind!r}")
    return CachingProvider(inner, cache) if cache_path is not None else inner


def _human_matrix(path, fmt, stimuli) -> np.ndarray:
    if fmt is None:
        fmt = "ratings" if {"modality", "rater_id"} <= set(sniff_header(path)) else "matrix"
    if fmt == "ratings":
        return simstats.aggregate(read_ratings_csv(path, stimuli, allow_invalid=False), len(stimuli)).values
    if fmt == "confusion":
        labels, counts = read_confusion_csv(path, stimuli)
        return confusion_to_similarity(counts, labels)
    if fmt == "matrix":
        return read_matrix_csv(path, stimuli)[1]
    raise UsageError(f"unknown human data format {fmt!r}")


def _write_json(path: Path, text: str) -> None:
    path.write_text(text + "\n", encoding="utf-8")
    print(text)


# --- subcommands -----------------------------------------------------------

def cmd_elicit(args, cfg):
    seed = _seed(args, cfg)
    stimuli = _stimuli(args, cfg)
    gt_path = _opt(args, cfg, "ground_truth")
    ground_truth = read_matrix_csv(gt_path, stimuli)[1] if gt_path else None
    config = _provider_config(args, cfg, seed)
    provider = _provider(args, cfg, seed, ground_truth)
    out = _out_dir(args, cfg)
    name = _opt(args, cfg, "name") or f"{stimuli.modality.value}_{config.model}"
    checkpoint = _opt(args, cfg, "checkpoint") or out / f"records_{name}.checkpoint.jsonl"
    records = elicit_similarity(stimuli, provider, config, source=config.model, checkpoint=checkpoint)
    path = out / f"records_{name}.csv"
    write_ratings_csv(path, records, stimuli)
    n_invalid = sum(not r.valid for r in records)
    print(f"wrote {len(records)} records ({n_invalid} invalid) to {path}")


def cmd_aggregate(args, cfg):
    stimuli = _stimuli(args, cfg, fallback_file=args.records)
    agg = simstats.aggregate(read_ratings_csv(args.records, stimuli), len(stimuli))
    out = _out_dir(args, cfg)
    path = Path(args.output) if args.output else out / f"aggregate_{stimuli.modality.value}.csv"
    write_matrix_csv(path, stimuli.keys, agg.values)
    print(f"wrote {len(stimuli)}x{len(stimuli)} aggregate matrix to {path}")


def cmd_correlate(args, cfg):
    seed = _seed(args, cfg)
    stimuli = _stimuli(args, cfg, fallback_file=args.model)
    records = read_ratings_csv(args.model, stimuli)
    human = _human_matrix(args.human, args.human_format, stimuli)
    n_boot = int(_opt(args, cfg, "n_boot", 1000))
    report = simstats.bootstrap_ci(records, human, n_boot=n_boot, seed=seed)
    model = args.model_name or records[0].source
    out = _out_dir(args, cfg)
    _write_json(out / f"correlation_{stimuli.modality.value}_{model}.json", report.to_json())
    summary = out / "summary.csv"
    new = not summary.exists()
    with open(summary, "a", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        if new:
            w.writerow(simstats.SUMMARY_FIELDS)
        w.writerow(
            [stimuli.modality.value, model, repr(report.r), repr(report.ci_low), repr(report.ci_high),
             report.n_pairs, report.n_boot, report.seed]
        )  # fmt: skip


def cmd_irr(args, cfg):
    seed = _seed(args, cfg)
    stimuli = _stimuli(args, cfg, fallback_file=args.human)
    records = read_ratings_csv(args.human, stimuli, allow_invalid=False)
    report = simstats.split_half_irr(
        records, len(stimuli), n_splits=args.n_splits, seed=seed, spearman_brown=args.spearman_brown
    )
    _write_json(_out_dir(args, cfg) / f"irr_{stimuli.modality.value}.json", report.to_json())


def cmd_delta_r(args, cfg):
    seed = _seed(args, cfg)
    stimuli = _stimuli(args, cfg, fallback_file=args.a)
    human = _human_matrix(args.human, args.human_format, stimuli)
    report = simstats.delta_r(
        read_ratings_csv(args.a, stimuli),
        read_ratings_csv(args.b, stimuli),
        human,
        n_boot=int(_opt(args, cfg, "n_boot", 1000)),
        seed=seed,
    )
    _write_json(_out_dir(args, cfg) / f"delta_r_{stimuli.modality.value}.json", report.to_json())


def write_embedding_csv(path, labels, coords) -> None:
    axes = ["x", "y", "z", "w"][: coords.shape[1]] if coords.shape[1] <= 4 else [f"d{k}" for k in range(coords.shape[1])]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["id"] + axes)
        for lab, row in zip(labels, coords):
            w.writerow([lab] + [repr(float(v)) for v in row])


def read_embedding_csv(path) -> tuple[list[str], np.ndarray]:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0][0] != "id":
        raise DataError(f"{path}: embedding files start with an 'id' column")
    try:
        return [r[0] for r in rows[1:]], np.array([[float(v) for v in r[1:]] for r in rows[1:]])
    except ValueError:
        raise DataError(f"{path}: non-numeric coordinate") from None


def cmd_mds(args, cfg):
    dim = int(_opt(args, cfg, "dim", 2))
    if dim < 1:
        raise UsageError("--dim must be >= 1")
    method = _opt(args, cfg, "method", "classical")
    labels, M = read_matrix_csv(args.matrix)
    if dim > len(labels) - 1:
        raise UsageError(f"--dim must be <= {len(labels) - 1} for {len(labels)} stimuli")
    if args.kind == "similarity":
        # pitch indices are semitones, so band-averaging is meaningful there by default
        smooth = _opt(args, cfg, "smooth", all(lab.endswith(" Hz") for lab in labels))
        if smooth:
            M, _ = geometry.subdiagonal_smooth(M)
        D = geometry.sim_to_dissim(M)
    else:
        D = geometry.check_dissimilarity(M)
    if method == "classical":
        emb = geometry.classical_mds(D, dim)
    elif method == "smacof":
        init = args.init
        seed = _seed(args, cfg) if init == "random" else None
        emb = geometry.smacof(D, dim, init=init, max_iter=args.max_iter, tol=args.tol, seed=seed)
    else:
        raise UsageError(f"unknown MDS method {method!r}")
    out = _out_dir(args, cfg)
    stem = args.name or Path(args.matrix).stem
    write_embedding_csv(out / f"{stem}_mds.csv", labels, emb.coords)
    hexes = [lab[:7] for lab in labels]
    colors = hexes if all(_HEX.fullmatch(h) for h in hexes) else None
    (out / f"{stem}_mds.svg").write_text(scatter_svg(emb.coords, labels, colors), encoding="utf-8")
    result = {"method": emb.method, "dim": emb.dim, "stress1": emb.stress, "n_iter": emb.n_iter}
    if args.reference:
        _, ref = read_embedding_csv(args.reference)
        if ref.shape[0] != emb.coords.shape[0]:
            raise DataError("reference configuration has a different number of points")
        result["disparity"] = geometry.procrustes_align(ref, emb.coords)[1]
    if args.helix_period:
        result["helix_disparity"], result["helix_rise"] = geometry.helix_disparity(emb.coords, args.helix_period)
    print(json.dumps(result, sort_keys=True))


def cmd_intervals(args, cfg):
    labels, S = read_matrix_csv(args.matrix)
    smoothed, profile = geometry.subdiagonal_smooth(S)
    peaks = geometry.detect_peaks(profile, prominence=args.prominence)
    out = _out_dir(args, cfg)
    stem = args.name or Path(args.matrix).stem
    with open(out / f"{stem}_intervals.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["k", "mean", "count"])
        for k, (m, c) in enumerate(zip(profile.mean, profile.count)):
            w.writerow([k, repr(float(m)), int(c)])
    write_matrix_csv(out / f"{stem}_smoothed.csv", labels, smoothed)
    (out / f"{stem}_intervals.svg").write_text(profile_svg(profile.mean), encoding="utf-8")
    _write_json(out / f"{stem}_peaks.json", json.dumps({"peaks": peaks}))


def _read_terms(path) -> list[str]:
    with open(path, encoding="utf-8") as fh:
        return [t.strip() for t in fh if t.strip()]


def cmd_colors_name(args, cfg):
    seed = _seed(args, cfg)
    language = Language(args.language)
    terms = _read_terms(args.terms) if args.terms else list(BASIC_COLOR_TERMS[language])
    palette = read_palette_csv(args.palette)
    config = _provider_config(args, cfg, seed)
    provider = _provider(args, cfg, seed)
    out = _out_dir(args, cfg)
    name = _opt(args, cfg, "name") or f"{language.value}_{config.model}"
    checkpoint = _opt(args, cfg, "checkpoint") or out / f"naming_{name}.checkpoint.jsonl"
    try:
        records = elicit_naming(palette, language, provider, config, terms=terms, checkpoint=checkpoint)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    path = out / f"naming_{name}.csv"
    write_naming_csv(path, records)
    n_err = sum(not r.valid for r in records)
    print(f"wrote {len(records)} naming records ({n_err} errors) to {path}")


def cmd_colors_dominant(args, cfg):
    nmap = colornaming.dominant_terms(read_naming_csv(args.records))
    out = _out_dir(args, cfg)
    stem = args.name or Path(args.records).stem
    colornaming.write_naming_map(out / f"{stem}_map.csv", nmap)
    colors = colornaming.cluster_average_color(nmap, read_palette_csv(args.palette)) if args.palette else {}
    colornaming.write_legend(out / f"{stem}_legend.csv", nmap, colors)
    for chip in nmap.excluded:
        print(f"excluded chip {chip}: no valid responses")
    print(f"{len(nmap.chips)} chips mapped onto {len(nmap.term_counts())} dominant terms")


def _is_partition(path) -> bool:
    header = sniff_header(path)
    return "label" in header and "term" not in header


def _partition(path) -> dict[str, str]:
    if _is_partition(path):
        return colornaming.read_partition_csv(path)
    return colornaming.partition_from_records(read_naming_csv(path))


def cmd_colors_ari(args, cfg):
    out = _out_dir(args, cfg)
    if _is_partition(args.a) or _is_partition(args.b):
        pa, pb = _partition(args.a), _partition(args.b)
        shared = sorted(set(pa) & set(pb))
        pa = {c: pa[c] for c in shared}
        pb = {c: pb[c] for c in shared}
        ari = colornaming.adjusted_rand(pa, pb)
        report = colornaming.AriReport(colornaming.rand_index(pa, pb), ari, ari, ari, 0, None, len(shared))
    else:
        seed = _seed(args, cfg)
        report = colornaming.ari_bootstrap(
            read_naming_csv(args.a), read_naming_csv(args.b), n_boot=int(_opt(args, cfg, "n_boot", 1000)), seed=seed
        )
    _write_json(out / f"{args.name or 'ari'}.json", report.to_json())


def cmd_terms(args, cfg):
    texts = []
    for path in args.input:
        with open(path, encoding="utf-8") as fh:
            texts += [line for line in fh if line.strip()]
    table = count_terms(texts)
    out = _out_dir(args, cfg)
    write_frequency_csv(out / f"{args.name or 'terms'}.csv", table)
    for tok, c in table[: args.top]:
        print(f"{tok}\t{c}")


# --- parser ----------------------------------------------------------------

def _common(p):
    p.add_argument("--config", help="TOML run configuration")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", help="output directory (created if absent)")
    p.add_argument("--provider", choices=["http", "mock", "replay"])
    p.add_argument("--cache", help="JSON-lines response cache")
    p.add_argument("--name", help="stem for output file names")
    p.add_argument("-v", "--verbose", action="store_true")


def _provider_args(p):
    p.add_argument("--model")
    p.add_argument("--base-url", dest="base_url")
    p.add_argument("--temperature", type=float)
    p.add_argument("--api-key-env", dest="api_key_env")
    p.add_argument("--repetitions", type=int)
    p.add_argument("--max-attempts", dest="max_attempts", type=int)
    p.add_argument("--max-in-flight", dest="max_in_flight", type=int)
    p.add_argument("--mock-response", dest="mock_response")
    p.add_argument("--checkpoint")


def _stim_args(p):
    p.add_argument("--modality", choices=[m.value for m in Modality])
    p.add_argument("--extended-colors", dest="extended_colors", action="store_true", default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="llmpsych", description="LLM psychophysics elicitation and analysis")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("elicit", help="collect similarity ratings")
    _common(p), _stim_args(p), _provider_args(p)
    p.add_argument("--ground-truth", dest="ground_truth", help="matrix CSV for the synthetic mock respondent")
    p.add_argument("--noise-sd", dest="noise_sd", type=float)
    p.add_argument("--include-diagonal", dest="include_diagonal", action="store_true", default=None)
    p.set_defaults(func=cmd_elicit)

    p = sub.add_parser("aggregate", help="average ratings into a similarity matrix")
    _common(p), _stim_args(p)
    p.add_argument("--records", required=True)
    p.add_argument("--output")
    p.set_defaults(func=cmd_aggregate)

    def human_args(p):
        p.add_argument("--human", required=True)
        p.add_argument("--human-format", dest="human_format", choices=["ratings", "matrix", "confusion"])
        p.add_argument("--n-boot", dest="n_boot", type=int)

    p = sub.add_parser("correlate", help="correlate model ratings with human data")
    _common(p), _stim_args(p), human_args(p)
    p.add_argument("--model", required=True, help="model rating records CSV")
    p.add_argument("--model-name", dest="model_name")
    p.set_defaults(func=cmd_correlate)

    p = sub.add_parser("irr", help="split-half inter-rater reliability")
    _common(p), _stim_args(p)
    p.add_argument("--human", required=True)
    p.add_argument("--n-splits", dest="n_splits", type=int, default=1000)
    p.add_argument("--spearman-brown", dest="spearman_brown", action="store_true")
    p.set_defaults(func=cmd_irr)

    p = sub.add_parser("delta-r", help="paired bootstrap of a correlation difference")
    _common(p), _stim_args(p), human_args(p)
    p.add_argument("--a", required=True)
    p.add_argument("--b", required=True)
    p.set_defaults(func=cmd_delta_r)

    p = sub.add_parser("mds", help="multidimensional scaling of a matrix")
    _common(p)
    p.add_argument("--matrix", required=True)
    p.add_argument("--dim", type=int)
    p.add_argument("--method", choices=["classical", "smacof"])
    p.add_argument("--kind", choices=["similarity", "dissimilarity"], default="similarity")
    p.add_argument(
        "--smooth", action=argparse.BooleanOptionalAction, default=None,
        help="average sub-diagonals first (default: on for pitch matrices only)",
    )
    p.add_argument("--init", choices=["classical", "random"], default="classical")
    p.add_argument("--max-iter", dest="max_iter", type=int, default=300)
    p.add_argument("--tol", type=float, default=1e-6)
    p.add_argument("--reference", help="embedding CSV to report Procrustes disparity against")
    p.add_argument("--helix-period", dest="helix_period", type=int, help="report disparity against a helix")
    p.set_defaults(func=cmd_mds)

    p = sub.add_parser("intervals", help="sub-diagonal interval profile and peaks")
    _common(p)
    p.add_argument("--matrix", required=True)
    p.add_argument("--prominence", type=float, default=0.0)
    p.set_defaults(func=cmd_intervals)

    p = sub.add_parser("colors", help="color-naming elicitation and analysis")
    csub = p.add_subparsers(dest="colors_command", required=True, parser_class=_Parser)
    q = csub.add_parser("name", help="elicit color names for a palette")
    _common(q), _provider_args(q)
    q.add_argument("--palette", required=True)
    q.add_argument("--language", choices=[lang.value for lang in Language], default="en")
    q.add_argument("--terms", help="file with one term per line (15 terms)")
    q.set_defaults(func=cmd_colors_name)
    q = csub.add_parser("dominant", help="dominant-term map and legend")
    _common(q)
    q.add_argument("--records", required=True)
    q.add_argument("--palette")
    q.set_defaults(func=cmd_colors_dominant)
    q = csub.add_parser("ari", help="adjusted Rand index between two naming datasets")
    _common(q)
    q.add_argument("--a", required=True)
    q.add_argument("--b", required=True)
    q.add_argument("--n-boot", dest="n_boot", type=int)
    q.set_defaults(func=cmd_colors_ari)

    p = sub.add_parser("terms", help="word frequencies of explanation texts")
    _common(p)
    p.add_argument("--input", nargs="+", required=True, help="text files, one explanation per line")
    p.add_argument("--top", type=int, default=20)
    p.set_defaults(func=cmd_terms)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = load_config(args.config) if args.config else RunConfig()
        args.func(args, cfg)
    except (UsageError, ValueError) as exc:
        print(f"llmpsych: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, OSError) as exc:
        print(f"llmpsych: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except ProviderError as exc:
        print(f"llmpsych: provider error: {exc}", file=sys.stderr)
        return EXIT_PROVIDER
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
