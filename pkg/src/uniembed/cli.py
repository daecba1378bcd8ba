"""Command-line entry point.

Subcommands: gen-data, train-specialist, distill, evaluate, reproduce.
Exit codes: 0 success, 2 config/input error, 3 numeric failure. Diagnostics go
to stderr; data only to files under --out.
"""

import argparse
import hashlib
import json
import sys
from pathlib import Path

import numpy as np

from . import experiments
from .errors import (ConfigError, DatasetParseError, InputError, TrainingError,
                     UniembedError)
from .evaluation import (distance_ratio_hist, fused_recall, pca_spectrum,
                         unfused_recall)
from .model import load_model, save_model
from .synthdata import ScenarioConfig, generate, load_dataset, save_dataset
from .training import TrainConfig, distill_universal, train_specialist


def _canonical(doc) -> str:
    return json.dumps(doc, sort_keys=True, separators=(",", ":"))


def _config_hash(doc) -> str:
    return hashlib.sha256(_canonical(doc).encode("utf-8")).hexdigest()


def _write_json(path: Path, doc) -> None:
    with open(path, "w", encoding="utf-8") as f:
        json.dump(doc, f, indent=2, sort_keys=True)
        f.write("\n")


def _read_json(path: Path):
    try:
        with open(path, encoding="utf-8") as f:
            return json.load(f)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON: {exc}") from exc


def _load_datasets(data_dir: Path):
    manifest = data_dir / "manifest.json"
    if manifest.exists():
        doc = _read_json(manifest)
        files = [data_dir / rel for rel in doc["files"].values()]
    else:
        files = sorted(data_dir.glob("*.ds"))
    if not files:
        raise ConfigError(f"no datasets found under {data_dir}")
    return [load_dataset(p) for p in sorted(files)]


def eval_doc(report, seed, config_sha256: str) -> dict:
    """The exact JSON document `evaluate` writes for a report."""
    doc = report.to_dict()
    doc["seed"] = seed
    doc["config_sha256"] = config_sha256
    return doc


def cmd_gen_data(args) -> int:
    cfg = ScenarioConfig.from_json(Path(args.config).read_text(encoding="utf-8"))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    datasets = generate(cfg)
    files = {}
    for ds in datasets:
        name = f"{ds.domain_id}.ds"
        save_dataset(ds, out / name)
        files[ds.domain_id] = name
    _write_json(out / "manifest.json", {
        "schema": "uniembed-manifest v1",
        "regime": cfg.regime,
        "seed": cfg.seed,
        "config_sha256": _config_hash(json.loads(cfg.to_json())),
        "files": files,
    })
    print(f"wrote {len(files)} dataset(s) to {out}", file=sys.stderr)
    return 0


def cmd_train_specialist(args) -> int:
    cfg = TrainConfig.from_json(Path(args.config).read_text(encoding="utf-8"))
    chash = _config_hash(json.loads(cfg.to_json()))
    dataset = load_dataset(args.data)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    res = train_specialist(dataset, cfg)
    meta = {"domain": dataset.domain_id, "seed": cfg.seed, "config_sha256": chash}
    save_model(res.model, out / "specialist.ckpt.json", {**meta, "role": "best"})
    save_model(res.final_model, out / "specialist_final.ckpt.json",
               {**meta, "role": "final"})
    res.curve.write_csv(out / "curve.csv")
    report = unfused_recall(res.model, [dataset], cfg.eval_ks,
                            model_id="specialist", seed=cfg.seed)
    _write_json(out / "eval.json", eval_doc(report, cfg.seed, chash))
    _write_json(out / "run.json", {
        "command": "train-specialist", "domain": dataset.domain_id,
        "seed": cfg.seed, "config_sha256": chash,
        "best_iteration": res.best_iteration, "aborted_at": res.aborted_at,
    })
    print(f"specialist for {dataset.domain_id}: best iteration {res.best_iteration}",
          file=sys.stderr)
    return 0


def _scan_specialists(dirs):
    found = {}
    for d in dirs:
        for p in sorted(Path(d).glob("*.ckpt.json")):
            model, meta = load_model(p)
            if meta.get("role") == "final":
                continue
            domain = meta.get("domain")
            if domain:
                found[domain] = model
    return found


def cmd_distill(args) -> int:
    cfg = TrainConfig.from_json(Path(args.config).read_text(encoding="utf-8"))
    chash = _config_hash(json.loads(cfg.to_json()))
    datasets = _load_datasets(Path(args.data))
    specialists = _scan_specialists(args.specialists)
    missing = [ds.domain_id for ds in datasets if ds.domain_id not in specialists]
    if missing:
        raise ConfigError(f"no specialist checkpoint for domain(s): {missing}")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    res = distill_universal(specialists, datasets, cfg)
    meta = {"seed": cfg.seed, "config_sha256": chash, "loss": cfg.loss}
    save_model(res.model, out / "universal.ckpt.json", {**meta, "role": "best"})
    save_model(res.final_model, out / "universal_final.ckpt.json",
               {**meta, "role": "final"})
    res.curve.write_csv(out / "curve.csv")
    _write_json(out / "eval_unfused.json", eval_doc(
        unfused_recall(res.model, datasets, cfg.eval_ks, "universal", cfg.seed),
        cfg.seed, chash))
    _write_json(out / "eval_fused.json", eval_doc(
        fused_recall(res.model, datasets, cfg.eval_ks, "universal", cfg.seed),
        cfg.seed, chash))
    _write_json(out / "run.json", {
        "command": "distill", "loss": cfg.loss, "seed": cfg.seed,
        "config_sha256": chash, "best_iteration": res.best_iteration,
        "aborted_at": res.aborted_at,
    })
    print(f"universal ({cfg.loss}): best iteration {res.best_iteration}",
          file=sys.stderr)
    return 0


def cmd_evaluate(args) -> int:
    model, meta = load_model(args.model)
    datasets = _load_datasets(Path(args.data))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    seed = meta.get("seed")
    chash = _config_hash({
        "model": Path(args.model).name, "fused": bool(args.fused),
        "ratio_against": Path(args.ratio_against).name if args.ratio_against else None,
        "spectrum": bool(args.spectrum),
    })

    _write_json(out / "eval_unfused.json", eval_doc(
        unfused_recall(model, datasets, (1, 2, 4), "model", seed), seed, chash))
    if args.fused:
        _write_json(out / "eval_fused.json", eval_doc(
            fused_recall(model, datasets, (1, 2, 4), "model", seed), seed, chash))
    if args.ratio_against:
        other, _ = load_model(args.ratio_against)
        for ds in datasets:
            hist = distance_ratio_hist(model, other, ds,
                                       rng=np.random.default_rng(seed or 0))
            doc = hist.to_dict()
            doc.update({"seed": seed, "config_sha256": chash, "domain": ds.domain_id})
            _write_json(out / f"ratio_{ds.domain_id}.json", doc)
    if args.spectrum:
        for ds in datasets:
            vals = pca_spectrum(model, ds)
            _write_json(out / f"spectrum_{ds.domain_id}.json", {
                "domain": ds.domain_id, "eigenvalues": [float(v) for v in vals],
                "seed": seed, "config_sha256": chash,
            })
    print(f"evaluated {len(datasets)} domain(s)", file=sys.stderr)
    return 0


def _summary_markdown(rows, suite: str, seeds: int, chash: str) -> str:
    lines = [
        f"# {suite} suite summary",
        "",
        f"- seeds: {seeds}",
        f"- protocol: {experiments.canonical_protocol(suite)} Recall@k, median over seeds",
        f"- config_sha256: {chash}",
        "",
        "| method | domain | R@1 | R@2 | R@4 |",
        "|---|---|---|---|---|",
    ]
    for method, domain, r1, r2, r4 in rows:
        lines.append(f"| {method} | {domain} | {r1:.4f} | {r2:.4f} | {r4:.4f} |")
    return "\n".join(lines) + "\n"


def cmd_reproduce(args) -> int:
    suite = args.suite
    seeds = args.seeds
    if seeds < 1:
        raise ConfigError("--seeds must be >= 1")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    chash = _config_hash({"suite": suite, "seeds": seeds})

    runs = []
    for seed in range(seeds):
        print(f"[reproduce] suite={suite} seed={seed}", file=sys.stderr)
        try:
            run = experiments.run_suite(suite, seed)
        except UniembedError as exc:
            raise type(exc)(f"suite {suite} seed {seed}: {exc}") from exc
        runs.append(run)
        seed_dir = out / f"seed_{seed}"
        seed_dir.mkdir(exist_ok=True)
        for method, outcome in run.outcomes.items():
            mdir = seed_dir / method
            mdir.mkdir(exist_ok=True)
            _write_json(mdir / "eval_unfused.json",
                        eval_doc(outcome.unfused, seed, chash))
            if outcome.fused is not None:
                _write_json(mdir / "eval_fused.json",
                            eval_doc(outcome.fused, seed, chash))
            if outcome.curve is not None and outcome.curve.snapshots:
                outcome.curve.write_csv(mdir / "curve.csv")
        if "ratio_hist" in run.extras:
            doc = run.extras["ratio_hist"].to_dict()
            doc.update({"seed": seed, "config_sha256": chash})
            _write_json(seed_dir / "ratio_hist.json", doc)

    rows = experiments.summarize(runs)
    with open(out / "summary.csv", "w", encoding="utf-8") as f:
        f.write("method,domain,recall_at_1,recall_at_2,recall_at_4\n")
        for method, domain, r1, r2, r4 in rows:
            f.write(f"{method},{domain},{r1!r},{r2!r},{r4!r}\n")
    (out / "summary.md").write_text(
        _summary_markdown(rows, suite, seeds, chash), encoding="utf-8")
    _write_json(out / "run.json", {
        "command": "reproduce", "suite": suite, "seeds": seeds,
        "config_sha256": chash, "seed": list(range(seeds)),
    })
    print(f"summary: {out / 'summary.csv'}", file=sys.stderr)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="uniembed",
        description="Specialist embedding training and universal distillation.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="generate synthetic multi-domain datasets")
    p.add_argument("--config", required=True, help="scenario config JSON")
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_gen_data)

    p = sub.add_parser("train-specialist", help="train one domain's specialist")
    p.add_argument("--data", required=True, help="dataset file")
    p.add_argument("--config", required=True, help="train config JSON")
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_train_specialist)

    p = sub.add_parser("distill", help="distill specialists into a universal model")
    p.add_argument("--specialists", required=True, nargs="+",
                   help="directories holding specialist checkpoints")
    p.add_argument("--data", required=True, help="directory of dataset files")
    p.add_argument("--config", required=True, help="train config JSON")
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_distill)

    p = sub.add_parser("evaluate", help="evaluate a checkpoint on datasets")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--fused", action="store_true")
    p.add_argument("--ratio-against", default=None,
                   help="second checkpoint for distance-ratio histograms")
    p.add_argument("--spectrum", action="store_true")
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_evaluate)

    p = sub.add_parser("reproduce", help="run a full comparison suite")
    p.add_argument("--suite", required=True, choices=["exclusive", "coarse_fine"])
    p.add_argument("--seeds", type=int, default=1)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_reproduce)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except (ConfigError, InputError, DatasetParseError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (TrainingError, FloatingPointError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
