"""Command-line interface: train the ANN, convert it, simulate the spiking
network with different neuron models and write every result as CSV with a
metadata sidecar.

    spikesim train --data-dir mnist/ --epochs 3
    spikesim convert
    spikesim simulate --neuron voltage --lambda 0.5 --workers 4
    spikesim sweep-rescale --workers 4
"""
import argparse
import sys
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence

import numpy as np

from . import ann, convert, neuron, sim
from .config import RunConfig, load_config
from .errors import ConfigError, SpikesimError
from .mnist import Dataset, load_mnist, subset
from .tables import write_table
from .util import format_percent, format_value, get_data_dir, msg

EXIT_CONFIG = 2
EXIT_IO = 3


def _load_split(cfg: RunConfig, split: str, count: int) -> Dataset:
    ds = load_mnist(get_data_dir(cfg.data_dir), split)
    if count and count < len(ds):
        ds = subset(ds, count, cfg.seed)
    return ds


def _output(cfg: RunConfig, default: str) -> Path:
    return Path(cfg.output or default)


def _metadata(command: str, cfg: RunConfig, **extra: Any) -> Dict[str, Any]:
    meta = {"command": command, "config": cfg.to_dict()}
    meta.update(extra)
    return meta


def build_model(cfg: RunConfig, name: Optional[str] = None) -> neuron.AccumulationModel:
    """Build the accumulation model named in the config (or by name)."""
    name = name or cfg.neuron
    curve = neuron.read_curve_csv(cfg.curve) if name == "table" else None
    return neuron.make_model(
        name, lam=cfg.lam, v_low=cfg.v_low, v_high=cfg.v_high, gain=cfg.gain, curve=curve
    )


def sim_config(cfg: RunConfig, model: neuron.AccumulationModel) -> sim.SimConfig:
    return sim.SimConfig(
        timesteps=cfg.timesteps,
        input_mode=cfg.input_mode,
        max_rate=cfg.max_rate,
        seed=cfg.seed,
        event_order=cfg.event_order,
        model=model,
    )


def cmd_train(cfg: RunConfig) -> Path:
    """Train the reference ANN and write the model and its per-epoch log."""
    if cfg.arch not in ann.ARCHITECTURES:
        raise ConfigError("Unknown architecture: {}".format(cfg.arch))
    train_set = _load_split(cfg, "train", cfg.subset)
    msg.info("Training {} on {} images".format(cfg.arch, len(train_set)))
    model = ann.init_model(ann.ARCHITECTURES[cfg.arch], (1, 28, 28), seed=cfg.seed)
    model, log = ann.train(
        model,
        train_set,
        epochs=cfg.epochs,
        batch_size=cfg.batch_size,
        lr=cfg.lr,
        seed=cfg.seed,
        verbose=cfg.verbose,
    )
    ann.save_model(model, cfg.model_path)
    rows = [(entry.epoch, entry.loss, entry.accuracy) for entry in log]
    log_path = _output(cfg, str(Path(cfg.model_path).with_suffix(".log.csv")))
    write_table(log_path, rows, ("epoch", "loss", "accuracy"), _metadata("train", cfg))
    msg.table(rows, header=("epoch", "loss", "accuracy"), divider=True)
    msg.good("Saved model to {}".format(cfg.model_path), "Training log: {}".format(log_path))
    return Path(cfg.model_path)


def cmd_convert(cfg: RunConfig) -> Path:
    """Normalize the trained ANN and write the spiking network."""
    model = ann.load_model(cfg.model_path)
    sample = _load_split(cfg, "train", cfg.norm_subset)
    stats = convert.collect_stats(model, sample, method=cfg.norm)
    net = convert.normalize_and_convert(model, stats)
    convert.save_snn(net, cfg.snn_path)
    rows = [(i, lam) for i, lam in enumerate(stats.lambdas)]
    msg.table(rows, header=("layer", "lambda"), divider=True)
    msg.good("Saved spiking network to {}".format(cfg.snn_path), "Normalization: {}".format(cfg.norm))
    return Path(cfg.snn_path)


def cmd_evaluate(cfg: RunConfig) -> Dict[str, float]:
    """Report the ANN test error and the argmax agreement between the ANN and
    its normalized copy."""
    model = ann.load_model(cfg.model_path)
    test_set = _load_split(cfg, "test", cfg.test_subset)
    error = ann.evaluate(model, test_set)
    sample = _load_split(cfg, "train", cfg.norm_subset)
    normalized = convert.normalize_model(model, convert.collect_stats(model, sample, cfg.norm))
    probe = test_set.images[:100]
    agreement = float(np.mean(ann.predict(model, probe) == ann.predict(normalized, probe)))
    result = {"ann_error": error, "argmax_agreement": agreement}
    msg.table(
        [("ANN test error", format_percent(error)), ("Argmax agreement", format_percent(agreement))],
        divider=True,
    )
    return result


def _simulate(cfg: RunConfig, model: neuron.AccumulationModel, net: Any, test_set: Dataset) -> sim.SimTrace:
    trace = sim.run_dataset(net, test_set, sim_config(cfg, model), workers=cfg.workers, verbose=cfg.verbose)
    msg.text(
        "{}: stabilized error {}".format(
            model.variant, format_percent(trace.stabilized_error)
        )
    )
    return trace


def cmd_simulate(cfg: RunConfig) -> Path:
    """Simulate the spiking network with one neuron model and write the
    error-vs-timestep trace."""
    model = build_model(cfg)
    net = sim.compile_network(convert.load_snn(cfg.snn_path))
    test_set = _load_split(cfg, "test", cfg.test_subset)
    trace = _simulate(cfg, model, net, test_set)
    out = _output(cfg, "trace_{}.csv".format(cfg.neuron))
    meta = _metadata(
        "simulate",
        cfg,
        sim=sim_config(cfg, model).to_dict(),
        images=len(test_set),
        stabilized_error=trace.stabilized_error,
    )
    write_table(out, trace.rows(), ("timestep", "error_rate"), meta)
    msg.good("Wrote trace to {}".format(out))
    return out


def cmd_compare(cfg: RunConfig) -> Path:
    """Simulate the ideal, voltage-domain and time-domain models on the same
    images and write their traces side by side."""
    net = sim.compile_network(convert.load_snn(cfg.snn_path))
    test_set = _load_split(cfg, "test", cfg.test_subset)
    names = ("ideal", "voltage", "time")
    traces = [_simulate(cfg, build_model(cfg, name), net, test_set) for name in names]
    rows = [
        (t + 1,) + tuple(float(trace.error_rate[t]) for trace in traces)
        for t in range(cfg.timesteps)
    ]
    out = _output(cfg, "compare.csv")
    stable = {name: trace.stabilized_error for name, trace in zip(names, traces)}
    meta = _metadata(
        "compare",
        cfg,
        models={name: build_model(cfg, name).to_dict() for name in names},
        images=len(test_set),
        stabilized_error=stable,
    )
    write_table(out, rows, ("timestep",) + names, meta)
    msg.table([(name, format_percent(err)) for name, err in stable.items()], divider=True)
    msg.good("Wrote comparison to {}".format(out))
    return out


def cmd_demo_neutral_point(cfg: RunConfig) -> Path:
    """Run the three-neuron neutral-point network and write both potential
    trajectories."""
    demo = sim.demo_neutral_point(
        cfg.w,
        cfg.eps,
        cfg.theta,
        cfg.lam,
        cfg.steps,
        order=cfg.demo_order,
        v_low=cfg.v_low,
        v_high=cfg.v_high,
    )
    out = _output(cfg, "neutral_point.csv")
    meta = _metadata(
        "demo-neutral-point",
        cfg,
        ideal_spike_count=demo.ideal_spike_count,
        nonlinear_spike_count=demo.nonlinear_spike_count,
        v_star=demo.v_star,
    )
    write_table(out, demo.rows(), ("timestep", "ideal_v", "nonlinear_v"), meta)
    msg.table(
        [
            ("Ideal spikes", demo.ideal_spike_count),
            ("Voltage-domain spikes", demo.nonlinear_spike_count),
            ("Neutral point", format_value(demo.v_star)),
        ],
        divider=True,
    )
    msg.good("Wrote trajectories to {}".format(out))
    return out


def cmd_sweep_rescale(cfg: RunConfig) -> Path:
    """Simulate the voltage-domain model rescaled by every constant factor
    and by the fit to the ideal curve's maximum."""
    net = sim.compile_network(convert.load_snn(cfg.snn_path))
    test_set = _load_split(cfg, "test", cfg.test_subset)
    base = build_model(cfg, "voltage")
    reference = _simulate(cfg, build_model(cfg, "time"), net, test_set)
    modes: List[Any] = list(cfg.factors) + ["fit"]
    rows = []
    fitted = None
    for mode in modes:
        model = neuron.rescale(base, mode, w_per_spike=cfg.probe_w, n_spikes=cfg.probe_n)
        if mode == "fit":
            fitted = model.c
        trace = _simulate(cfg, model, net, test_set)
        rows.append((mode if mode == "fit" else float(mode), trace.stabilized_error))
    out = _output(cfg, "sweep_rescale.csv")
    meta = _metadata(
        "sweep-rescale",
        cfg,
        base=base.to_dict(),
        fit_factor=fitted,
        time_domain_error=reference.stabilized_error,
        images=len(test_set),
    )
    write_table(out, rows, ("factor", "stabilized_error"), meta)
    table_rows = [(str(mode), format_percent(err)) for mode, err in rows]
    table_rows.append(("time-domain", format_percent(reference.stabilized_error)))
    msg.table(table_rows, header=("factor", "stabilized error"), divider=True)
    msg.good("Wrote sweep to {}".format(out))
    return out


def curve_columns(cfg: RunConfig) -> Dict[str, neuron.AccumulationModel]:
    """Models plotted by the curves command, by column name. "rescaled"
    expands to the voltage model at every factor plus the fit."""
    columns: Dict[str, neuron.AccumulationModel] = {}
    for name in cfg.models:
        if name == "rescaled":
            base = build_model(cfg, "voltage")
            for c in cfg.factors:
                columns["voltage_x{}".format(c)] = neuron.rescale(base, c)
            columns["voltage_fit"] = neuron.rescale(
                base, "fit", w_per_spike=cfg.probe_w, n_spikes=cfg.probe_n
            )
        else:
            columns[name] = build_model(cfg, name)
    return columns


def cmd_curves(cfg: RunConfig) -> Path:
    """Write membrane potential versus number of input spikes, one column
    per model."""
    columns = curve_columns(cfg)
    curves = [neuron.potential_curve(m, cfg.probe_w, cfg.probe_n) for m in columns.values()]
    rows = [
        (n,) + tuple(curve[n][1] for curve in curves) for n in range(cfg.probe_n + 1)
    ]
    out = _output(cfg, "curves.csv")
    meta = _metadata("curves", cfg, models={k: m.to_dict() for k, m in columns.items()})
    write_table(out, rows, ("n",) + tuple(columns), meta)
    msg.good("Wrote {} curves to {}".format(len(columns), out))
    return out


COMMANDS: Dict[str, Callable[[RunConfig], Any]] = {
    "train": cmd_train,
    "convert": cmd_convert,
    "evaluate": cmd_evaluate,
    "simulate": cmd_simulate,
    "compare": cmd_compare,
    "demo-neutral-point": cmd_demo_neutral_point,
    "sweep-rescale": cmd_sweep_rescale,
    "curves": cmd_curves,
}


def _csv_list(text: str) -> List[str]:
    return [part.strip() for part in text.split(",") if part.strip()]


def make_parser() -> argparse.ArgumentParser:
    # fmt: off
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="Flat key = value config file")
    paths = common.add_argument_group("paths")
    paths.add_argument("--data-dir", dest="data_dir", help="MNIST directory (default: $SPIKESIM_DATA)")
    paths.add_argument("--model", dest="model_path", help="ANN model file")
    paths.add_argument("--snn", dest="snn_path", help="Spiking network file")
    paths.add_argument("--output", "-o", help="Output CSV")
    paths.add_argument("--curve", help="Transfer curve CSV for the table neuron")
    training = common.add_argument_group("training")
    training.add_argument("--arch", help="Architecture name")
    training.add_argument("--epochs", type=int)
    training.add_argument("--batch-size", dest="batch_size", type=int)
    training.add_argument("--lr", type=float)
    training.add_argument("--seed", type=int)
    training.add_argument("--subset", type=int, help="Training subset size (0: all)")
    conversion = common.add_argument_group("conversion")
    conversion.add_argument("--norm", help="Normalization: data or model")
    conversion.add_argument("--norm-subset", dest="norm_subset", type=int)
    simulation = common.add_argument_group("simulation")
    simulation.add_argument("--test-subset", dest="test_subset", type=int, help="Test images (0: all)")
    simulation.add_argument("--timesteps", type=int)
    simulation.add_argument("--input-mode", dest="input_mode", help="poisson or constant_current")
    simulation.add_argument("--max-rate", dest="max_rate", type=float)
    simulation.add_argument("--event-order", dest="event_order", help="per_event, aggregated or simultaneous")
    simulation.add_argument("--workers", type=int, help="Worker processes")
    model = common.add_argument_group("neuron model")
    model.add_argument("--neuron", help="ideal, voltage, time or table")
    model.add_argument("--lambda", dest="lam", type=float, help="Channel-length modulation")
    model.add_argument("--v-low", dest="v_low", type=float)
    model.add_argument("--v-high", dest="v_high", type=float)
    model.add_argument("--gain", type=float, help="Time-domain gain")
    curves = common.add_argument_group("curves and sweep")
    curves.add_argument("--factors", type=_csv_list, help="Comma-separated rescale factors")
    curves.add_argument("--models", type=_csv_list, help="Comma-separated curve models")
    curves.add_argument("--w-probe", dest="probe_w", type=float, help="Weight per probe spike")
    curves.add_argument("--n", dest="probe_n", type=int, help="Number of probe spikes")
    demo = common.add_argument_group("neutral point")
    demo.add_argument("--w", type=float)
    demo.add_argument("--eps", type=float)
    demo.add_argument("--theta", type=float)
    demo.add_argument("--steps", type=int)
    demo.add_argument("--demo-order", dest="demo_order")
    common.add_argument("--quiet", dest="verbose", action="store_const", const=False)
    # fmt: on
    parser = argparse.ArgumentParser(
        prog="spikesim",
        description="Accuracy of ANN-to-SNN conversion with nonlinear analog neurons",
    )
    sub = parser.add_subparsers(dest="command", metavar="command")
    sub.required = True
    for name, func in COMMANDS.items():
        summary = " ".join((func.__doc__ or "").split(".")[0].split())
        sub.add_parser(name, parents=[common], help=summary)
    return parser


def resolve_config(args: argparse.Namespace) -> RunConfig:
    """Defaults, then the config file, then the command-line flags."""
    overrides = vars(args).copy()
    overrides.pop("command", None)
    config_path = overrides.pop("config", None)
    cfg = load_config(config_path)
    return cfg.update(overrides).validate()


def main(argv: Optional[Sequence[str]] = None) -> None:
    # argparse exits with 2 on usage errors, the same code as ConfigError
    args = make_parser().parse_args(argv)
    try:
        cfg = resolve_config(args)
        COMMANDS[args.command](cfg)
    except SpikesimError as e:
        msg.fail(type(e).__name__, str(e), exits=e.exit_code)
    except ValueError as e:
        msg.fail("Invalid value", str(e), exits=EXIT_CONFIG)
    except OSError as e:
        filename = getattr(e, "filename", None)
        title = "Cannot access {}".format(filename) if filename else "I/O error"
        msg.fail(title, str(e), exits=EXIT_IO)


if __name__ == "__main__":
    main(sys.argv[1:])
