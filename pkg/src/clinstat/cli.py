"""Command-line entry point: ``clinstat <subcommand> --config FILE [options]``.

Exit status: 0 success, 1 unexpected failure, 2 configuration error,
3 data or model-file error, 4 model fitting failure (degenerate target,
singular design or non-convergence).
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys
from pathlib import Path

from . import __version__
from .config import FORMATS, CliConfig, load_config
from .dataset import load_csv
from .errors import ArtifactError, ClinstatError, ConfigError, DataError, FitError
from .pipeline import (build_report, crosstab_sections, fit_models, model_artifacts, predict_with_artifact,
                       prepare, run_mining, run_screen)
from .report import _atomic_write, load_model, render_report, render_sections, save_model

log = logging.getLogger("clinstat")

SUBCOMMANDS = ("summarize", "fit", "diagnose", "mine", "predict", "report", "all")
EXIT_CONFIG, EXIT_DATA, EXIT_FIT = 2, 3, 4
_EXT = {"text": "txt", "json": "json", "csv": "csv"}


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="clinstat", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"clinstat {__version__}")
    p.add_argument("command", choices=SUBCOMMANDS)
    p.add_argument("--config", required=True, help="analysis config file (INI)")
    p.add_argument("--out", help="output directory (overrides [output] dir)")
    p.add_argument("--format", choices=FORMATS, help="report format (overrides [output] format)")
    p.add_argument("--seed", type=int, help="partition seed (overrides [split] seed)")
    p.add_argument("--undersample", action="store_true", help="balance the training rows by under-sampling")
    p.add_argument("--input", help="CSV to score (predict)")
    p.add_argument("--model", help="model file to score with (predict); default <out>/full_model.json")
    return p


def _configure_logging() -> None:
    level = os.environ.get("CLINSTAT_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")
    logging.captureWarnings(True)


def _write(cfg: CliConfig, stem: str, payload: bytes) -> Path:
    cfg.output_dir.mkdir(parents=True, exist_ok=True)
    path = cfg.output_dir / f"{stem}.{_EXT[cfg.report_format]}"
    _atomic_write(path, payload.decode("utf-8"))
    return path


def _summarize(an, cfg) -> None:
    _write(cfg, "crosstabs", render_sections(crosstab_sections(an), cfg.report_format))


def _fit(an, cfg) -> None:
    fit_models(an)
    baseline, full = model_artifacts(an)
    cfg.output_dir.mkdir(parents=True, exist_ok=True)
    save_model(baseline, cfg.output_dir / "baseline_model.json")
    save_model(full, cfg.output_dir / "full_model.json")
    _atomic_write(cfg.output_dir / "partition.json", json.dumps(an.split.to_dict(), indent=1) + "\n")


def _predict(cfg: CliConfig, args) -> int:
    if not args.input:
        raise ConfigError("predict needs --input <csv>")
    model_path = Path(args.model) if args.model else cfg.output_dir / "full_model.json"
    art = load_model(model_path, schema=cfg.schema)
    ds = load_csv(args.input, cfg.schema, require_target=False)
    rows, probs = predict_with_artifact(art, ds)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["row", "probability", "predicted"])
    for r, p in zip(rows, probs):
        label = cfg.positive_label if p >= cfg.threshold else cfg.negative_label
        writer.writerow([int(r), repr(float(p)), label])
    cfg.output_dir.mkdir(parents=True, exist_ok=True)
    _atomic_write(cfg.output_dir / "predictions.csv", buf.getvalue())
    skipped = ds.n_rows - len(rows)
    if skipped:
        log.warning("%d rows with missing predictors were not scored", skipped)
    return 0


def run(argv=None) -> int:
    args = _parser().parse_args(argv)
    cfg = load_config(args.config).with_overrides(
        output_dir=Path(args.out) if args.out else None, report_format=args.format, partition_seed=args.seed,
        undersample=True if args.undersample else None)
    log.info("clinstat %s %s; seeds %s", __version__, args.command, cfg.seeds)
    if args.command == "predict":
        return _predict(cfg, args)

    an = prepare(cfg)
    cmd = args.command
    if cmd in ("summarize", "all"):
        _summarize(an, cfg)
    if cmd in ("fit", "diagnose", "report", "all"):
        _fit(an, cfg)
    if cmd in ("diagnose", "report", "all"):
        run_screen(an)
    if cmd in ("mine", "report", "all"):
        run_mining(an)
    if cmd == "diagnose":
        _write(cfg, "diagnostics", render_report(build_report(an, ("diagnose",)), cfg.report_format))
    if cmd == "mine":
        _write(cfg, "rules", render_report(build_report(an, ("mine",)), cfg.report_format))
    if cmd in ("report", "all"):
        payload = render_report(build_report(an), cfg.report_format)
        _write(cfg, "report", payload)
        if cmd == "report":
            sys.stdout.write(payload.decode("utf-8"))
    return 0


def main(argv=None) -> int:
    _configure_logging()
    try:
        return run(argv)
    except ConfigError as exc:
        print(f"clinstat: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except FitError as exc:
        print(f"clinstat: fit failed: {exc}", file=sys.stderr)
        return EXIT_FIT
    except (DataError, ArtifactError) as exc:
        print(f"clinstat: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (ClinstatError, OSError) as exc:
        print(f"clinstat: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
