"""Command-line front end: reproducible seeded runs over the library.

Every command reads an optional JSON config file (schema "gtap-config/1"),
applies flag overrides, writes the fully resolved configuration next to
its outputs, and embeds a hash of that configuration plus the master seed
in every artifact.  Reruns with the same config and seed produce
byte-identical CSV/JSON artifacts regardless of --threads.

Commands:
  train    fit a dense classifier, write a model file
  bands    sweep the (p, q) dilution grid, select the bias d
  prune    run one pruning method, write the kept-neuron mask
  curve    compression curves over methods x fractions x seeds
  oracle   exact-versus-estimated indices on built-in small games
  report   merge curve CSVs into per-method mean/std summaries
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .datasets import (
    Dataset,
    IdxFormatError,
    load_csv,
    load_idx,
    load_text_corpus,
    make_synthetic,
    split,
    subsample,
    vectorize_text,
)
from .games import (
    SamplingConfig,
    WeightedVotingGame,
    exact_power_index,
    mc_shapley,
    pie_estimate,
)
from .network import (
    DenseNetwork,
    DivergenceError,
    ModelFormatError,
    NetworkSpec,
    NeuronMask,
    TrainConfig,
    evaluate_accuracy,
    load_model,
    save_model,
    train,
)
from .pruning import (
    GTAP_METHODS,
    CompressionCurve,
    NeuronGame,
    PruneConfig,
    WeightMask,
    apply_weight_mask,
    compression_curve,
    mask_to_json,
    run_method,
)
from .uncertainty import band_grid, select_bias

CONFIG_SCHEMA = "gtap-config/1"

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_CONFIG = 2
EXIT_MISSING_FILE = 3
EXIT_DIVERGED = 4
EXIT_FORMAT = 5

_EXIT_DOC = """exit codes:
  0  success
  1  unexpected failure
  2  configuration or usage error (bad flag, unknown key, invalid value)
  3  missing input file
  4  training diverged (non-finite loss)
  5  malformed input file (model or IDX format)
"""

# per-schedule index defaults: one-shot selection works best with the
# dilution-matched bias, incremental pruning with the unbiased index
_DEFAULT_INDEX = {"top_n": "biased_banzhaf", "iterated_prune": "banzhaf",
                  "iterated_build": "biased_banzhaf"}

_DATASET_KEYS = {
    "synthetic": {"kind", "name", "n", "seed"},
    "idx": {"kind", "images", "labels"},
    "csv": {"kind", "path"},
    "text": {"kind", "path", "vocab_size"},
}

_SECTION_KEYS = {
    "train": {"dataset", "split", "hidden", "lr", "epochs", "batch_size", "model_out"},
    "bands": {"dataset", "model", "grid_points", "trials", "include_inputs",
              "eval_size", "score", "render"},
    "prune": {"dataset", "model", "split", "eval_size", "method", "fraction", "d",
              "d_from", "index", "step", "samples", "include_inputs", "granularity"},
    "curve": {"dataset", "model", "split", "eval_size", "methods", "fractions",
              "seeds", "d", "d_from", "step", "samples", "include_inputs",
              "granularity", "timing", "render"},
    "oracle": {"k", "ts"},
    "report": {"inputs", "force"},
}

_DEFAULTS = {
    "train": {"split": [0.8, 0.2], "hidden": [16], "lr": 0.1, "epochs": 20,
              "batch_size": 32, "model_out": "model.gtapnn"},
    "bands": {"grid_points": 21, "trials": 500, "include_inputs": False,
              "eval_size": None, "score": "true_class_prob", "render": False},
    "prune": {"split": [0.5, 0.5], "eval_size": 512, "method": "top_n",
              "fraction": 0.25, "d": None, "d_from": None, "index": None,
              "step": 1, "samples": 256, "include_inputs": False,
              "granularity": "neuron"},
    "curve": {"split": [0.5, 0.5], "eval_size": 512,
              "methods": ["top_n", "iterated_prune", "iterated_build", "random"],
              "fractions": [1.0, 0.5, 0.25], "seeds": [0], "d": None,
              "d_from": None, "step": 1, "samples": 256, "include_inputs": False,
              "granularity": "neuron", "timing": False, "render": False},
    "oracle": {"k": 50_000, "ts": [0.3, 0.5, 0.7]},
    "report": {"inputs": [], "force": False},
}


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    command: str
    seed: int
    threads: int
    out_dir: Path
    options: dict

    def resolved_doc(self) -> dict:
        # --threads never affects results, so it stays out of the recorded
        # config and its hash; otherwise reruns under a different worker
        # cap could not be byte-identical
        return {
            "schema": CONFIG_SCHEMA,
            "command": self.command,
            "seed": self.seed,
            self.command: self.options,
        }

    def config_hash(self) -> str:
        canonical = json.dumps(self.resolved_doc(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode()).hexdigest()[:12]


def _check_keys(section: dict, allowed: set, where: str) -> None:
    unknown = set(section) - allowed
    if unknown:
        raise ConfigError(f"unknown key(s) in {where}: {sorted(unknown)}")


def _load_config_file(path: str | None) -> dict:
    if path is None:
        return {}
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path}: not valid JSON ({e})") from e
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: config must be a JSON object")
    if doc.get("schema", CONFIG_SCHEMA) != CONFIG_SCHEMA:
        raise ConfigError(f"{path}: unsupported schema {doc.get('schema')!r}")
    _check_keys(doc, {"schema", "seed", "threads", "out"} | set(_SECTION_KEYS), path)
    return doc


def _resolve(args: argparse.Namespace) -> RunConfig:
    command = args.command
    file_doc = _load_config_file(args.config)
    section = dict(file_doc.get(command, {}))
    if not isinstance(section, dict):
        raise ConfigError(f"config section {command!r} must be an object")
    _check_keys(section, _SECTION_KEYS[command], f"section {command!r}")

    options = dict(_DEFAULTS[command])
    options.update(section)
    for key, value in vars(args).items():
        if key in _SECTION_KEYS[command] and value is not None:
            options[key] = value

    if "dataset" in _SECTION_KEYS[command]:
        dataset_cfg = options.get("dataset")
        if dataset_cfg is None:
            raise ConfigError(f"{command} needs a 'dataset' entry in the config file")
        if not isinstance(dataset_cfg, dict) or "kind" not in dataset_cfg:
            raise ConfigError("dataset config must be an object with a 'kind'")
        kind = dataset_cfg["kind"]
        if kind not in _DATASET_KEYS:
            raise ConfigError(f"unknown dataset kind {kind!r}")
        _check_keys(dataset_cfg, _DATASET_KEYS[kind], f"dataset({kind})")

    seed = args.seed if args.seed is not None else int(file_doc.get("seed", 0))
    threads = args.threads if args.threads is not None else int(file_doc.get("threads", 1))
    out_dir = Path(args.out if args.out is not None else file_doc.get("out", "out"))
    if threads < 1:
        raise ConfigError("--threads must be >= 1")
    return RunConfig(command, seed, threads, out_dir, options)


def _dataset_from_config(cfg: dict, seed: int) -> Dataset:
    kind = cfg["kind"]
    if kind == "synthetic":
        return make_synthetic(cfg.get("name", "blobs"), int(cfg.get("n", 1000)),
                              seed=int(cfg.get("seed", seed)))
    if kind == "idx":
        return load_idx(cfg["images"], cfg["labels"])
    if kind == "csv":
        return load_csv(cfg["path"])
    if kind == "text":
        labels, texts = load_text_corpus(cfg["path"])
        _, data = vectorize_text(texts, vocab_size=int(cfg.get("vocab_size", 1000)),
                                 labels=labels)
        return data
    raise ConfigError(f"unknown dataset kind {kind!r}")


def _write_text(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)


def _write_json(path: Path, doc: dict) -> None:
    _write_text(path, json.dumps(doc, sort_keys=True, indent=2) + "\n")


def _stamp(run: RunConfig) -> str:
    return f"# {CONFIG_SCHEMA} config_hash={run.config_hash()} seed={run.seed}\n"


def _emit_resolved_config(run: RunConfig) -> None:
    _write_json(run.out_dir / f"{run.command}.config.json", run.resolved_doc())


def _read_bias(options: dict) -> float:
    if options.get("d") is not None:
        return float(options["d"])
    if options.get("d_from"):
        doc = json.loads(Path(options["d_from"]).read_text())
        return float(doc["d"])
    return 0.5


# ---------------------------------------------------------------- commands


def cmd_train(run: RunConfig) -> int:
    opts = run.options
    data = _dataset_from_config(opts["dataset"], run.seed)
    parts = split(data, opts["split"], seed=run.seed)
    train_part, test_part = parts[0], parts[-1]
    layer_sizes = (data.n_features, *[int(h) for h in opts["hidden"]], data.n_classes)
    net = DenseNetwork.initialized(NetworkSpec(layer_sizes), seed=run.seed)
    trained = train(
        net,
        train_part,
        TrainConfig(lr=float(opts["lr"]), epochs=int(opts["epochs"]),
                    batch_size=int(opts["batch_size"]), seed=run.seed),
    )
    run.out_dir.mkdir(parents=True, exist_ok=True)
    model_path = run.out_dir / opts["model_out"]
    save_model(trained, model_path)
    _emit_resolved_config(run)
    train_acc = evaluate_accuracy(trained, None, train_part)
    test_acc = evaluate_accuracy(trained, None, test_part)
    _write_json(run.out_dir / "train.json", {
        "model": opts["model_out"], "layer_sizes": list(layer_sizes),
        "train_accuracy": train_acc, "test_accuracy": test_acc,
        "config_hash": run.config_hash(), "seed": run.seed,
    })
    print(f"trained {layer_sizes} train_acc={train_acc:.4f} test_acc={test_acc:.4f}")
    print(f"model written to {model_path}")
    return EXIT_OK


def cmd_bands(run: RunConfig) -> int:
    opts = run.options
    net = load_model(opts["model"]) if isinstance(opts.get("model"), str) else None
    if net is None:
        raise ConfigError("bands needs a 'model' path")
    data = _dataset_from_config(opts["dataset"], run.seed)
    if opts["eval_size"]:
        data = subsample(data, min(int(opts["eval_size"]), len(data)), seed=run.seed)
    universe = NeuronMask(net.spec, include_inputs=bool(opts["include_inputs"]))
    grid = band_grid(
        net, universe, data,
        axis_points=int(opts["grid_points"]), k=int(opts["trials"]),
        seed=run.seed, score=opts["score"], threads=run.threads,
    )
    selection = select_bias(grid)
    run.out_dir.mkdir(parents=True, exist_ok=True)
    _write_text(run.out_dir / "bands.csv", _stamp(run) + grid.to_csv_text())
    _write_json(run.out_dir / "bands.json", {
        "t_star": selection.t_star, "d": selection.d,
        "degenerate": selection.degenerate,
        "config_hash": run.config_hash(), "seed": run.seed,
    })
    _emit_resolved_config(run)
    if opts["render"]:
        _render_bands(grid, run.out_dir / "bands.png")
    flag = " (degenerate fallback)" if selection.degenerate else ""
    print(f"diagonal max at t*={selection.t_star:.4g}, selected d={selection.d:.4g}{flag}")
    return EXIT_OK


def _prune_setup(run: RunConfig):
    opts = run.options
    net = load_model(opts["model"]) if isinstance(opts.get("model"), str) else None
    if net is None:
        raise ConfigError(f"{run.command} needs a 'model' path")
    data = _dataset_from_config(opts["dataset"], run.seed)
    eval_source, test_part = split(data, opts["split"], seed=run.seed)[:2]
    eval_batch = subsample(
        eval_source, min(int(opts["eval_size"]), len(eval_source)), seed=run.seed
    )
    universe = NeuronMask(net.spec, include_inputs=bool(opts["include_inputs"]))
    return net, universe, eval_batch, test_part


def cmd_prune(run: RunConfig) -> int:
    opts = run.options
    net, universe, eval_batch, test_part = _prune_setup(run)
    method = opts["method"]
    d = _read_bias(opts)
    index_kind = opts["index"] or _DEFAULT_INDEX.get(method, "biased_banzhaf")
    cfg = PruneConfig(
        method=method, fraction=float(opts["fraction"]), index_kind=index_kind,
        d=d, step=int(opts["step"]), samples=int(opts["samples"]),
        granularity=opts["granularity"], seed=run.seed,
    )
    game = NeuronGame(net, universe, eval_batch) if method in GTAP_METHODS else None
    result = run_method(net, cfg, game=game, universe=universe,
                        saliency_batch=eval_batch, threads=run.threads)
    run.out_dir.mkdir(parents=True, exist_ok=True)
    if isinstance(result, WeightMask):
        accuracy = evaluate_accuracy(apply_weight_mask(net, result), universe, test_part)
        kept_doc = {"n": result.n_total(), "kept_weights": result.n_kept(),
                    "method": method, "config_hash": run.config_hash(), "seed": run.seed}
        _write_json(run.out_dir / "mask.json", kept_doc)
    else:
        accuracy = evaluate_accuracy(net, result, test_part)
        _write_text(run.out_dir / "mask.json",
                    mask_to_json(result, method, run.config_hash(), run.seed) + "\n")
    _write_json(run.out_dir / "prune.json", {
        "method": method, "index_kind": index_kind, "d": d,
        "fraction": float(opts["fraction"]), "samples": int(opts["samples"]),
        "test_accuracy": accuracy,
        "config_hash": run.config_hash(), "seed": run.seed,
    })
    _emit_resolved_config(run)
    print(f"{method} fraction={opts['fraction']} d={d:.4g} test_acc={accuracy:.4f}")
    return EXIT_OK


def cmd_curve(run: RunConfig) -> int:
    opts = run.options
    net, universe, eval_batch, test_part = _prune_setup(run)
    d = _read_bias(opts)
    configs = []
    for entry in opts["methods"]:
        if isinstance(entry, str):
            entry = {"method": entry}
        method = entry["method"]
        configs.append(PruneConfig(
            method=method, fraction=1.0,
            index_kind=entry.get("index") or _DEFAULT_INDEX.get(method, "biased_banzhaf"),
            d=float(entry.get("d", d)), step=int(entry.get("step", opts["step"])),
            samples=int(entry.get("samples", opts["samples"])),
            granularity=entry.get("granularity", opts["granularity"]),
        ))
    curve = compression_curve(
        net, eval_batch, test_part, configs,
        fractions=[float(f) for f in opts["fractions"]],
        seeds=[int(s) for s in opts["seeds"]],
        universe=universe, threads=run.threads,
    )
    run.out_dir.mkdir(parents=True, exist_ok=True)
    _write_text(run.out_dir / "curve.csv",
                _stamp(run) + curve.to_csv_text(timing=bool(opts["timing"])))
    _emit_resolved_config(run)
    if opts["render"]:
        _render_curve(curve, run.out_dir / "curve.png")
    print(f"{len(curve.rows)} curve rows written to {run.out_dir / 'curve.csv'}")
    return EXIT_OK


_ORACLE_SUITE = (
    ("dictator", WeightedVotingGame([1, 0, 0], quota=1)),
    ("quota3", WeightedVotingGame([2, 1, 1], quota=3)),
    ("majority5", WeightedVotingGame([1, 1, 1, 1, 1], quota=3)),
    ("mixed7", WeightedVotingGame([4, 3, 2, 1, 1, 1, 1], quota=7)),
)


def cmd_oracle(run: RunConfig) -> int:
    k = int(run.options["k"])
    ts = [float(t) for t in run.options["ts"]]
    lines = ["game,kind,player,exact,estimate,delta,stderr,k,seed"]
    table = []
    for name, game in _ORACLE_SUITE:
        jobs = [("shapley", None)] + [("biased_banzhaf", t) for t in ts]
        for kind, t in jobs:
            exact = exact_power_index(game, kind, t=t)
            if kind == "shapley":
                est = mc_shapley(game, k=k, seed=run.seed, threads=run.threads)
            else:
                est = pie_estimate(game, SamplingConfig(t=t, k=k, seed=run.seed),
                                   threads=run.threads)
            for i in range(game.n_players):
                delta = abs(est.values[i] - exact.values[i])
                lines.append(
                    f"{name},{exact.index_kind},{i},{exact.values[i]:.17g},"
                    f"{est.values[i]:.17g},{delta:.17g},{est.stderr[i]:.17g},{k},{run.seed}"
                )
                table.append((name, exact.index_kind, i, exact.values[i],
                              est.values[i], delta))
    run.out_dir.mkdir(parents=True, exist_ok=True)
    _write_text(run.out_dir / "oracle.csv", _stamp(run) + "\n".join(lines) + "\n")
    _emit_resolved_config(run)
    width = max(len(f"{g}/{kind}") for g, kind, *_ in table)
    print(f"{'game/kind':<{width}}  player  exact      estimate   |delta|")
    for g, kind, i, ex, es, delta in table:
        print(f"{f'{g}/{kind}':<{width}}  {i:>6}  {ex:>9.6f}  {es:>9.6f}  {delta:.6f}")
    worst = max(t[-1] for t in table)
    print(f"worst absolute deviation: {worst:.6f} at k={k}")
    return EXIT_OK


def cmd_report(run: RunConfig) -> int:
    inputs = run.options["inputs"]
    if not inputs:
        raise ConfigError("report needs at least one input curve CSV")
    hashes = set()
    rows = []
    for path in inputs:
        text = Path(path).read_text()
        first = text.splitlines()[0] if text else ""
        if first.startswith("#"):
            for token in first.split():
                if token.startswith("config_hash="):
                    hashes.add(token.split("=", 1)[1])
        else:
            hashes.add("<missing>")
        rows.extend(CompressionCurve.from_csv_text(text).rows)
    if len(hashes) > 1 and not run.options["force"]:
        raise ConfigError(
            f"refusing to merge rows from different configs {sorted(hashes)}; "
            "pass --force to override"
        )
    groups: dict[tuple, list[float]] = {}
    for r in rows:
        groups.setdefault((r.method, r.index_kind, r.d, r.fraction), []).append(r.accuracy)
    lines = ["method,index_kind,d,fraction,mean_accuracy,std_accuracy,n_seeds"]
    for key in sorted(groups, key=lambda k: (k[0], k[1], -k[3])):
        accs = np.asarray(groups[key])
        std = float(accs.std(ddof=1)) if accs.size > 1 else 0.0
        lines.append(
            f"{key[0]},{key[1]},{key[2]:.17g},{key[3]:.17g},"
            f"{float(accs.mean()):.17g},{std:.17g},{accs.size}"
        )
    run.out_dir.mkdir(parents=True, exist_ok=True)
    _write_text(run.out_dir / "report.csv", _stamp(run) + "\n".join(lines) + "\n")
    _emit_resolved_config(run)
    print("\n".join(lines))
    return EXIT_OK


def _render_bands(grid, path: Path) -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(5, 4))
    im = ax.imshow(
        grid.variance.T, origin="lower", aspect="auto",
        extent=(grid.p_values[0], grid.p_values[-1], grid.q_values[0], grid.q_values[-1]),
    )
    ax.set_xlabel("dropout probability p")
    ax.set_ylabel("eliminated fraction q")
    fig.colorbar(im, ax=ax, label="output variance")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def _render_curve(curve: CompressionCurve, path: Path) -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(6, 4))
    series: dict[str, dict[float, list[float]]] = {}
    for r in curve.rows:
        series.setdefault(r.method, {}).setdefault(r.fraction, []).append(r.accuracy)
    for method, by_fraction in sorted(series.items()):
        fractions = sorted(by_fraction)
        means = [float(np.mean(by_fraction[f])) for f in fractions]
        ax.plot(fractions, means, marker="o", label=method)
    ax.set_xlabel("retained fraction")
    ax.set_ylabel("test accuracy")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


# ----------------------------------------------------------------- parser


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON config file (schema gtap-config/1)")
    p.add_argument("--seed", type=int, help="master seed (default 0)")
    p.add_argument("--threads", type=int, help="worker cap; never changes results")
    p.add_argument("--out", help="output directory (default ./out)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gtap",
        description="Cooperative-game pruning of dense networks.",
        epilog=_EXIT_DOC,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a dense classifier")
    _add_common(p)
    p.add_argument("--epochs", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--batch-size", dest="batch_size", type=int)
    p.add_argument("--model-out", dest="model_out")

    p = sub.add_parser("bands", help="uncertainty band grid and bias selection")
    _add_common(p)
    p.add_argument("--model")
    p.add_argument("--grid-points", dest="grid_points", type=int)
    p.add_argument("--trials", type=int)
    p.add_argument("--render", action="store_const", const=True, default=None,
                   help="also write bands.png")

    p = sub.add_parser("prune", help="run one pruning method")
    _add_common(p)
    p.add_argument("--model")
    p.add_argument("--method", choices=("top_n", "iterated_prune", "iterated_build",
                                        "wmp", "wgmp", "random"))
    p.add_argument("--fraction", type=float)
    p.add_argument("--d", type=float, help="inclusion bias for biased_banzhaf")
    p.add_argument("--d-from", dest="d_from", help="read d from a bands.json")
    p.add_argument("--index", choices=("shapley", "banzhaf", "biased_banzhaf"))
    p.add_argument("--step", type=int, help="neurons committed per iteration")
    p.add_argument("--samples", type=int, help="per-player sample budget")

    p = sub.add_parser("curve", help="compression curves")
    _add_common(p)
    p.add_argument("--model")
    p.add_argument("--methods", type=lambda s: s.split(","))
    p.add_argument("--fractions", type=lambda s: [float(f) for f in s.split(",")])
    p.add_argument("--seeds", type=lambda s: [int(x) for x in s.split(",")])
    p.add_argument("--d", type=float)
    p.add_argument("--d-from", dest="d_from")
    p.add_argument("--step", type=int)
    p.add_argument("--samples", type=int)
    p.add_argument("--timing", action="store_const", const=True, default=None,
                   help="write measured wall_ms (breaks byte-reproducibility)")
    p.add_argument("--render", action="store_const", const=True, default=None)

    p = sub.add_parser("oracle", help="exact vs estimated indices on built-in games")
    _add_common(p)
    p.add_argument("--k", type=int, help="sample count per estimator")

    p = sub.add_parser("report", help="merge curve CSVs into mean/std summaries")
    _add_common(p)
    p.add_argument("--inputs", type=lambda s: s.split(","))
    p.add_argument("--force", action="store_const", const=True, default=None,
                   help="merge even if config hashes differ")

    return parser


_COMMANDS = {
    "train": cmd_train,
    "bands": cmd_bands,
    "prune": cmd_prune,
    "curve": cmd_curve,
    "oracle": cmd_oracle,
    "report": cmd_report,
}


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    run_config = _resolve(args)
    return _COMMANDS[run_config.command](run_config)


def main(argv=None) -> int:
    try:
        return run(argv)
    except SystemExit as e:
        return e.code if isinstance(e.code, int) else EXIT_CONFIG
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except FileNotFoundError as e:
        print(f"missing file: {e}", file=sys.stderr)
        return EXIT_MISSING_FILE
    except DivergenceError as e:
        print(f"training diverged: {e}", file=sys.stderr)
        return EXIT_DIVERGED
    except (ModelFormatError, IdxFormatError) as e:
        print(f"format error: {e}", file=sys.stderr)
        return EXIT_FORMAT
    except ValueError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as e:  # pragma: no cover - last resort
        print(f"error: {e}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
