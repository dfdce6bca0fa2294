"""Command-line experiment runner.

Subcommands: data, fhe-demo, train, eval, plot. Every run is a pure
function of (config, seed): rerunning a command with the same inputs
reproduces its CSV outputs byte for byte.
"""

from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path

import numpy as np

from . import data as data_mod
from .config import (DEFAULT_CONFIG_YAML, ConfigError, default_config,
                     load_config, with_seed)
from .fhe import (CompileError, NoiseOverflowError, TrainConfig, argmax_class,
                  compile_circuit, decrypt_integers, encrypt, evaluate,
                  evaluate_plaintext, keygen, predict_plaintext, train_logreg)
from .metrics import (EPISODE_CSV, STEP_CSV, write_episode_csv, write_step_csv)
from .plots import render_figures
from .ppo import load_checkpoint, save_checkpoint
from .training import greedy_episodes, train_agent

CHECKPOINT_FILE = "policy.ckpt"


def _load_experiment(args):
    config = load_config(args.config) if args.config else default_config()
    if args.seed is not None:
        config = with_seed(config, args.seed)
    return config


def _out_dir(args, config=None) -> Path:
    if args.out:
        out = Path(args.out)
    elif config is not None:
        out = Path(config.out_dir)
    else:
        out = Path(".")
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_data(args) -> int:
    seed = args.seed if args.seed is not None else 7
    if args.synthetic:
        dataset = data_mod.synth_dataset(seed=seed, n_users=args.n_users)
    elif args.input:
        table = data_mod.parse_ratings(Path(args.input))
        print(f"parsed {len(table)} ratings")
        dataset = data_mod.build_dataset(table)
    else:
        print("error: provide --input FILE or --synthetic", file=sys.stderr)
        return 2
    out = _out_dir(args) / "dataset.npz"
    data_mod.save_dataset(dataset, out)
    print(f"dataset: {dataset.n_samples} samples, "
          f"{dataset.features.shape[1]} features")
    print(f"film pool ({len(dataset.film_index)}): "
          + ",".join(str(int(f)) for f in dataset.film_index))
    print(f"wrote {out}")
    return 0


def cmd_fhe_demo(args) -> int:
    seed = args.seed if args.seed is not None else 7
    rng = np.random.default_rng(seed)
    if args.dataset:
        dataset = data_mod.load_dataset(args.dataset)
    else:
        dataset = data_mod.synth_dataset(seed=seed, n_users=200)
    print(f"dataset: {dataset.n_samples} samples, "
          f"{dataset.features.shape[1]} features, "
          f"{len(np.unique(dataset.labels))} classes")

    model = train_logreg(dataset.features, dataset.labels,
                         TrainConfig(seed=seed))
    train_scores = predict_plaintext(model, dataset.features)
    train_acc = float(np.mean(np.argmax(train_scores, axis=1) == dataset.labels))
    print(f"plaintext train accuracy: {train_acc:.3f} "
          f"(chance {1.0 / model.n_classes:.3f})")

    secret, eval_key = keygen(seed)
    bound = float(np.max(np.abs(dataset.features))) + 1.0
    bundle = compile_circuit(model, bits=args.bits, input_range=(-bound, bound),
                             activation=args.activation,
                             eval_key_id=eval_key.key_id)
    report = bundle.range_report
    widest = max(report.nodes, key=lambda n: n.required_bits)
    print(f"compiled: {args.bits}-bit weights, widest node "
          f"'{widest.node_id}' needs {widest.required_bits} bits")

    picks = rng.integers(0, dataset.n_samples, size=args.n)
    matches = 0
    float_agree = 0
    elapsed = 0.0
    for i in picks:
        x = dataset.features[i]
        expected = evaluate_plaintext(bundle, x)
        cts = encrypt(bundle.client_params, secret, x)
        t0 = time.perf_counter()
        out = evaluate(bundle, eval_key, cts, bootstrap=not args.no_bootstrap)
        elapsed += time.perf_counter() - t0
        got = decrypt_integers(secret, out)
        matches += bool(np.array_equal(got, expected))
        float_agree += (argmax_class(np.asarray(got))
                        == argmax_class(predict_plaintext(model, x)))
    print(f"encrypted == quantized-plaintext: {matches}/{args.n}")
    print(f"float-vs-quantized argmax agreement: {float_agree / args.n:.3f}")
    print(f"mean encrypted inference time: {1000 * elapsed / args.n:.2f} ms "
          f"(mock homomorphic layer)")
    return 0 if matches == args.n else 1


def cmd_train(args) -> int:
    config = _load_experiment(args)
    if args.episodes is not None:
        from dataclasses import replace
        config = replace(config, episodes=args.episodes)
    out = _out_dir(args, config)

    def progress(episode, record, stats):
        if (episode + 1) % 10 == 0 or episode == 0:
            print(f"episode {episode + 1:>4}/{config.episodes}  "
                  f"reward {record.mean_reward:+.2f}  "
                  f"replicas {record.mean_replicas:.2f}  "
                  f"latency {record.mean_latency_s:.2f}s")

    result = train_agent(config, progress=progress)
    write_step_csv(result.step_records, out / STEP_CSV)
    write_episode_csv(result.episode_records, out / EPISODE_CSV)
    save_checkpoint(result.net, out / CHECKPOINT_FILE)
    figures = render_figures(out)
    print(f"wrote {out / STEP_CSV}")
    print(f"wrote {out / EPISODE_CSV}")
    print(f"wrote {out / CHECKPOINT_FILE}")
    for fig in figures:
        print(f"wrote {fig}")
    return 0


def cmd_eval(args) -> int:
    config = _load_experiment(args)
    net = load_checkpoint(args.checkpoint)
    if net.hidden_size != config.ppo.hidden_size:
        print(f"error: checkpoint hidden size {net.hidden_size} does not match "
              f"config ppo.hidden_size {config.ppo.hidden_size}",
              file=sys.stderr)
        return 2
    episode_records, _ = greedy_episodes(config, net, args.episodes)

    header = f"{'episode':>8} {'steps':>6} {'reward':>9} {'latency':>9} {'replicas':>9}"
    print(header)
    for rec in episode_records:
        print(f"{rec.episode:>8} {rec.steps:>6} {rec.mean_reward:>9.3f} "
              f"{rec.mean_latency_s:>9.3f} {rec.mean_replicas:>9.3f}")
    if episode_records:
        print(f"{'mean':>8} {'':>6} "
              f"{np.mean([r.mean_reward for r in episode_records]):>9.3f} "
              f"{np.mean([r.mean_latency_s for r in episode_records]):>9.3f} "
              f"{np.mean([r.mean_replicas for r in episode_records]):>9.3f}")
    return 0


def cmd_plot(args) -> int:
    metrics_dir = Path(args.metrics)
    out = _out_dir(args) if args.out else metrics_dir
    for fig in render_figures(metrics_dir, out):
        print(f"wrote {fig}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fhescale",
        description="Virtual-time autoscaling simulator for encrypted inference")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--seed", type=int, default=None,
                       help="master seed (overrides config)")
        p.add_argument("--config", type=str, default=None,
                       help="experiment config YAML")
        p.add_argument("--out", type=str, default=None, help="output directory")

    p = sub.add_parser("data", help="build the recommendation dataset artifact")
    common(p)
    p.add_argument("--input", type=str, help="ratings file (tab-separated)")
    p.add_argument("--synthetic", action="store_true",
                   help="generate the synthetic clustered dataset")
    p.add_argument("--n-users", type=int, default=200)
    p.set_defaults(func=cmd_data)

    p = sub.add_parser("fhe-demo",
                       help="train, compile, and run encrypted inference")
    common(p)
    p.add_argument("--dataset", type=str, help="dataset artifact (.npz)")
    p.add_argument("--bits", type=int, default=8)
    p.add_argument("--n", type=int, default=1000, help="inference count")
    p.add_argument("--activation", action="store_true",
                   help="include the lowered sigmoid in the circuit")
    p.add_argument("--no-bootstrap", action="store_true",
                   help="disable bootstrapping (deep circuits will overflow)")
    p.set_defaults(func=cmd_fhe_demo)

    p = sub.add_parser("train", help="train the scaling agent")
    common(p)
    p.add_argument("--episodes", type=int, default=None,
                   help="override config episode count")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a policy checkpoint greedily")
    common(p)
    p.add_argument("--checkpoint", type=str, required=True)
    p.add_argument("--episodes", type=int, default=10)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("plot", help="render figures from emitted CSVs")
    common(p)
    p.add_argument("--metrics", type=str, required=True,
                   help="directory containing the metrics CSVs")
    p.set_defaults(func=cmd_plot)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except data_mod.RatingsParseError as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return 2
    except (CompileError, NoiseOverflowError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
