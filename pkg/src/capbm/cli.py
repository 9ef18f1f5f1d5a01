"""Command-line interface: ``capbm <command> ...`` or ``python -m capbm``.

Every command writes its resolved configuration as ``key=value`` lines next to
its outputs; passing that file back through ``--config`` reproduces the run.
Precedence is command-line flag, then config file, then built-in default.
"""
import argparse
import math
import os
import sys

DEFAULT_CHECKPOINTS = (1, 5, 20, 100)

# numeric keys and their types, per command; everything else is a string
_TYPES = {
    "n": int,
    "seed": int,
    "hidden": int,
    "epochs": int,
    "batch_size": int,
    "n_persistent_chains": int,
    "monitor_size": int,
    "log_every": int,
    "steps": int,
    "learning_rate": float,
    "weight_decay": float,
    "init_scale": float,
    "global_phase": float,
    "cutoff": float,
}

TRAIN_DEFAULTS = {
    "data": None,
    "hidden": 200,
    "algo": "cd1",
    "epochs": 10,
    "amp_coupling": True,
    "learning_rate": 0.01,
    "batch_size": 50,
    "weight_decay": None,
    "n_persistent_chains": None,
    "monitor_size": 500,
    "log_every": 0,
    "init_scale": 0.01,
    "seed": 0,
    "out": None,
}


class ConfigError(ValueError):
    pass


def _parse_value(key, text):
    text = text.strip()
    if text == "None":
        return None
    if text in ("True", "true"):
        return True
    if text in ("False", "false"):
        return False
    if key in _TYPES:
        try:
            return _TYPES[key](text)
        except ValueError:
            raise ConfigError(f"{key}: cannot parse {text!r}") from None
    return text


def read_config(path):
    """Read ``key=value`` lines; ``#`` starts a comment. Duplicate keys are an error."""
    out = {}
    with open(path) as f:
        for n, line in enumerate(f, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{n}: expected key=value")
            key, value = (s.strip() for s in line.split("=", 1))
            key = key.replace("-", "_")
            if key in out:
                raise ConfigError(f"{path}:{n}: duplicate key {key!r}")
            out[key] = _parse_value(key, value)
    return out


def write_config(cfg, path):
    with open(path, "w") as f:
        for key in sorted(cfg):
            f.write(f"{key}={cfg[key]!r}\n" if isinstance(cfg[key], float) else f"{key}={cfg[key]}\n")


def resolve(defaults, config_path, flags):
    """Merge defaults < config file < explicitly given flags. Unknown config keys are rejected."""
    cfg = dict(defaults)
    if config_path is not None:
        from_file = read_config(config_path)
        unknown = sorted(set(from_file) - set(defaults))
        if unknown:
            raise ConfigError(f"unknown configuration keys: {', '.join(unknown)}")
        cfg.update(from_file)
    cfg.update({k: v for k, v in flags.items() if v is not None and k in defaults})
    return cfg


def _sidecar(path):
    return path + ".config"


def _require(cfg, *keys):
    missing = [k for k in keys if cfg.get(k) in (None, "")]
    if missing:
        raise ConfigError("missing required setting(s): " + ", ".join(missing))


def _checkpoint_list(steps, text):
    if text is None:
        points = {c for c in DEFAULT_CHECKPOINTS if c <= steps}
    else:
        points = {int(c) for c in text.split(",") if c.strip()}
        if any(c < 0 or c > steps for c in points):
            raise ConfigError("checkpoints must lie in [0, steps]")
    return sorted(points | {steps})


def _render_shape(shape_text, dataset_shape, n_units):
    if shape_text:
        w, h = (int(x) for x in shape_text.lower().split("x"))
        return w, h
    if dataset_shape is not None:
        return dataset_shape
    side = math.isqrt(n_units)
    if side * side == n_units:
        return side, side
    return None


# -- commands -------------------------------------------------------------


def cmd_gen_bars(args):
    from .data import BarsConfig, gen_bars, save_dataset

    cfg = resolve({"n": None, "seed": 0, "out": None}, args.config, vars(args))
    _require(cfg, "n", "out")
    if cfg["n"] < 1:
        raise ConfigError("--n must be at least 1")
    ds = gen_bars(BarsConfig(seed=cfg["seed"]), cfg["n"])
    save_dataset(ds, cfg["out"])
    write_config(cfg, _sidecar(cfg["out"]))
    on = float((abs(ds.samples) > 0).mean())
    print(f"wrote {cfg['out']}: n_samples={ds.n_samples} n_units={ds.n_units} mean_on_fraction={on:.4f}")
    return 0


def cmd_train(args):
    from .data import load_dataset
    from .errors import ShapeError
    from .formats import load_params, save_params
    from .learning import TrainConfig, init_params, train
    from .special import derive_seed, make_rng

    flags = vars(args).copy()
    flags["amp_coupling"] = False if args.no_amp_coupling else None
    cfg = resolve(TRAIN_DEFAULTS, args.config, flags)
    _require(cfg, "data", "out")
    if cfg["algo"] != "pcd" and cfg["n_persistent_chains"] is not None:
        raise ConfigError("n_persistent_chains only applies to --algo pcd")
    ds = load_dataset(cfg["data"])
    tc = TrainConfig(
        learning_rate=cfg["learning_rate"],
        epochs=cfg["epochs"],
        batch_size=cfg["batch_size"],
        weight_decay=cfg["weight_decay"],
        algorithm=cfg["algo"],
        n_persistent_chains=cfg["n_persistent_chains"],
        seed=derive_seed(cfg["seed"], 1),
        amp_coupling=cfg["amp_coupling"],
        monitor_size=cfg["monitor_size"],
        log_every=cfg["log_every"],
    )
    # record the values the defaults resolved to
    cfg["weight_decay"] = tc.weight_decay
    if tc.algorithm == "pcd":
        cfg["n_persistent_chains"] = tc.n_persistent_chains
    if cfg["hidden"] < 1:
        raise ConfigError("--hidden must be at least 1")
    if getattr(args, "init", None):
        params = load_params(args.init)
        if params.n_visible != ds.n_units or params.n_hidden != cfg["hidden"]:
            raise ShapeError("initial model does not match the data and --hidden")
    else:
        params = init_params(ds, cfg["hidden"], make_rng(derive_seed(cfg["seed"], 0)), w_scale=cfg["init_scale"])
    out = cfg["out"]
    result = train(params, ds, tc)
    params, log = result[0], result[1]
    save_params(params, out)
    log.write(out + ".log.jsonl")
    write_config(cfg, _sidecar(out))
    last = log.values("recon_amp_cosine")
    summary = f"final recon_amp_cosine={last[-1]:.4f}" if last else "no epochs run"
    print(f"wrote {out} (V={params.n_visible}, H={params.n_hidden}); {summary}")
    return 0


def _render_rates(rates, checkpoints, shape, render_dir, global_phase, first_row=None):
    from .data import render_grid

    os.makedirs(render_dir, exist_ok=True)
    for k in checkpoints:
        render_grid([list(rates[k].complex_mean)], shape, os.path.join(render_dir, f"step_{k:03d}.ppm"), global_phase)
    n = len(rates[checkpoints[0]].complex_mean)
    rows = []
    for i in range(n):
        row = [] if first_row is None else [first_row[i]]
        rows.append(row + [rates[k].complex_mean[i] for k in checkpoints])
    render_grid(rows, shape, os.path.join(render_dir, "grid.ppm"), global_phase)


def cmd_reconstruct(args):
    from .data import load_dataset, read_band_partition, threshold_normalize
    from .errors import ShapeError
    from .formats import load_params
    from .learning import amp_cosine_similarity, as_states
    from .sampler import rbm_reconstruct
    from .special import make_rng

    defaults = {
        "model": None, "data": None, "steps": 20, "n": 16, "seed": 0, "global_phase": 0.0,
        "render_dir": None, "checkpoints": None, "cutoff": None, "bands": None, "shape": None,
    }
    cfg = resolve(defaults, args.config, vars(args))
    _require(cfg, "model", "data")
    if cfg["steps"] < 0 or cfg["n"] < 1:
        raise ConfigError("--steps must be >= 0 and --n >= 1")
    params = load_params(cfg["model"])
    ds = load_dataset(cfg["data"])
    if ds.n_units != params.n_visible:
        raise ShapeError(f"data has {ds.n_units} units, model has {params.n_visible} visibles")
    if cfg["cutoff"] is not None:
        bands = read_band_partition(cfg["bands"]) if cfg["bands"] else None
        ds = threshold_normalize(ds, cfg["cutoff"], bands)
    v0 = as_states(ds.samples[: cfg["n"]])
    points = _checkpoint_list(cfg["steps"], cfg["checkpoints"])
    rates = rbm_reconstruct(params, v0, cfg["steps"], make_rng(cfg["seed"]), checkpoints=points)
    for k in points:
        print(f"step {k}: amp_cosine={amp_cosine_similarity(v0.amps, rates[k].amp_mean):.4f}")
    if cfg["render_dir"]:
        shape = _render_shape(cfg["shape"], ds.shape, ds.n_units)
        if shape is None:
            raise ConfigError("cannot infer an image shape; pass --shape WxH")
        _render_rates(rates, points, shape, cfg["render_dir"], cfg["global_phase"], first_row=v0.z)
        write_config(cfg, os.path.join(cfg["render_dir"], "reconstruct.config"))
    return 0


def cmd_sample(args):
    from .formats import load_params
    from .sampler import rbm_free_samples
    from .special import make_rng

    defaults = {
        "model": None, "steps": 100, "n": 16, "seed": 0, "global_phase": 0.0,
        "render_dir": None, "checkpoints": None, "shape": None,
    }
    cfg = resolve(defaults, args.config, vars(args))
    _require(cfg, "model")
    if cfg["steps"] < 1 or cfg["n"] < 1:
        raise ConfigError("--steps and --n must be at least 1")
    params = load_params(cfg["model"])
    points = [k for k in _checkpoint_list(cfg["steps"], cfg["checkpoints"]) if k > 0]
    rates = rbm_free_samples(params, cfg["n"], cfg["steps"], make_rng(cfg["seed"]), checkpoints=points)
    for k in points:
        print(f"step {k}: mean_amp_rate={float(rates[k].amp_mean.mean()):.4f}")
    if cfg["render_dir"]:
        shape = _render_shape(cfg["shape"], None, params.n_visible)
        if shape is None:
            raise ConfigError("cannot infer an image shape; pass --shape WxH")
        _render_rates(rates, points, shape, cfg["render_dir"], cfg["global_phase"])
        write_config(cfg, os.path.join(cfg["render_dir"], "sample.config"))
    return 0


def cmd_normalize(args):
    from .data import load_dataset, read_band_partition, save_dataset, threshold_normalize

    cfg = resolve({"data": None, "out": None, "cutoff": 0.15, "bands": None}, args.config, vars(args))
    _require(cfg, "data", "out")
    bands = read_band_partition(cfg["bands"]) if cfg["bands"] else None
    ds = threshold_normalize(load_dataset(cfg["data"]), cfg["cutoff"], bands)
    save_dataset(ds, cfg["out"])
    write_config(cfg, _sidecar(cfg["out"]))
    print(f"wrote {cfg['out']}: mean_on_fraction={float((abs(ds.samples) > 0).mean()):.4f}")
    return 0


def cmd_check(args):
    from .checks import run_checks

    level = "full" if args.full else args.level
    results = run_checks(level)
    failed = sum(not r.passed for r in results)
    print(f"{len(results) - failed}/{len(results)} checks passed")
    return 1 if failed else 0


def build_parser():
    parser = argparse.ArgumentParser(prog="capbm", description="Complex amplitude-phase Boltzmann machines")
    parser.add_argument("--threads", type=int, default=None, help="cap on numerical library threads")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-bars", help="generate the synthetic bars dataset")
    p.add_argument("--n", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--out")
    p.add_argument("--config")
    p.set_defaults(func=cmd_gen_bars)

    p = sub.add_parser("train", help="train a restricted machine with CD-1 or PCD")
    p.add_argument("--data")
    p.add_argument("--hidden", type=int)
    p.add_argument("--algo", choices=("cd1", "pcd"))
    p.add_argument("--epochs", type=int)
    p.add_argument("--no-amp-coupling", action="store_true", help="hold J at zero (ablation)")
    p.add_argument("--lr", dest="learning_rate", type=float)
    p.add_argument("--batch-size", type=int)
    p.add_argument("--weight-decay", type=float)
    p.add_argument("--chains", dest="n_persistent_chains", type=int)
    p.add_argument("--log-every", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--init", help="start from an existing CAPM model instead of a random one")
    p.add_argument("--out")
    p.add_argument("--config")
    p.set_defaults(func=cmd_train)

    for name, func, help_ in (
        ("reconstruct", cmd_reconstruct, "reconstruct data samples and render visible rates"),
        ("sample", cmd_sample, "run free chains from random states and render visible rates"),
    ):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--model")
        if name == "reconstruct":
            p.add_argument("--data")
            p.add_argument("--cutoff", type=float, help="threshold-normalize the input first")
            p.add_argument("--bands", help="band partition file for --cutoff")
        p.add_argument("--steps", type=int)
        p.add_argument("--n", type=int)
        p.add_argument("--checkpoints", help="comma-separated step list")
        p.add_argument("--global-phase", type=float)
        p.add_argument("--render-dir")
        p.add_argument("--shape", help="image size WxH")
        p.add_argument("--seed", type=int)
        p.add_argument("--config")
        p.set_defaults(func=func)

    p = sub.add_parser("normalize", help="band-max normalize, threshold and set surviving moduli to 1")
    p.add_argument("--data")
    p.add_argument("--out")
    p.add_argument("--cutoff", type=float)
    p.add_argument("--bands")
    p.add_argument("--config")
    p.set_defaults(func=cmd_normalize)

    p = sub.add_parser("check", help="run the verification suite")
    p.add_argument("--level", choices=("quick", "full"), default="quick")
    p.add_argument("--full", action="store_true", help="same as --level full")
    p.set_defaults(func=cmd_check)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    if args.threads is not None:
        # only effective if the numerical libraries are not loaded yet
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
            os.environ[var] = str(args.threads)
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"capbm {args.command}: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
