"""Experiment protocol: train, probe every epoch, sweep distortions."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .attacks import pgd_attack
from .checkpoint import save_checkpoint
from .config import ExperimentConfig
from .data import Dataset, load_mnist, synth_blobs
from .distortions import grid_fits, patch_shuffle_batch, saturate
from .estimators import estimate_layer
from .models import Network, spec_by_name
from .optim import SGD
from .report import DistortionRow, ReportRow, RunReport, emit_report
from .training import predict_stats, train_epoch

log = logging.getLogger(__name__)

INPUT_KINDS = ("clean", "adversarial")


class ExperimentError(RuntimeError):
    pass


@dataclass
class Streams:
    """Independent generators derived from the run seed."""

    init: np.random.Generator
    shuffle: np.random.Generator
    attack: np.random.Generator
    probe: np.random.Generator
    eval: np.random.Generator
    sweep: np.random.Generator

    @classmethod
    def from_seed(cls, seed: int) -> "Streams":
        children = np.random.SeedSequence(seed).spawn(6)
        return cls(*(np.random.default_rng(c) for c in children))


def load_datasets(cfg: ExperimentConfig) -> tuple[Dataset, Dataset]:
    dtype = np.dtype(cfg.dtype)
    d = cfg.data
    if d.kind == "mnist":
        train, test = load_mnist(d.path, "train", dtype), load_mnist(d.path, "test", dtype)
    elif d.kind == "blobs":
        if d.test_per_class < 1:
            raise ExperimentError("data.test_per_class must be at least 1 for blobs")
        train, test = synth_blobs(d.n_per_class, d.classes, d.dim, d.separation, cfg.seed, dtype, d.test_per_class)
    else:
        raise ExperimentError(f"unknown dataset kind {d.kind!r}")
    if d.train_limit:
        train = train.subset(np.arange(min(d.train_limit, len(train))))
    if d.test_limit:
        test = test.subset(np.arange(min(d.test_limit, len(test))))
    return train, test


def probe_indices(test: Dataset, size: int, rng: np.random.Generator) -> np.ndarray:
    size = min(size, len(test))
    return np.sort(rng.choice(len(test), size=size, replace=False))


def collect_probes(net: Network, x: np.ndarray, batch: int) -> tuple[np.ndarray, dict[str, np.ndarray]]:
    """Forward ``x`` in batches; return logits and concatenated probe activations."""
    logits, parts = [], {}
    for s in range(0, len(x), batch):
        out, probes = net.forward(x[s : s + batch], probe=True)
        logits.append(out.data)
        for name, a in probes.items():
            parts.setdefault(name, []).append(a)
    return np.concatenate(logits), {k: np.concatenate(v) for k, v in parts.items()}


def attack_in_batches(net, x, y, attack, rng, batch) -> np.ndarray:
    return np.concatenate([pgd_attack(net, x[s : s + batch], y[s : s + batch], attack, rng) for s in range(0, len(y), batch)])


def _estimate(cfg, acts, labels, **meta):
    e = cfg.estimator
    sigma2 = e.sigma2
    if sigma2 is None:
        from .estimators import default_sigma2

        sigma2 = default_sigma2(acts, e.sigma2_factor)
    bin_size = e.bin_size
    if bin_size is None:
        from .estimators import default_bin_size

        bin_size = default_bin_size(acts, e.bins)
    return estimate_layer(acts, labels, sigma2, bin_size, **meta)


def probe_epoch(net: Network, cfg: ExperimentConfig, x: np.ndarray, y: np.ndarray, epoch: int, rng) -> list[ReportRow]:
    """MI estimates at every probed layer for clean and PGD versions of the probe set."""
    rows = []
    x_adv = attack_in_batches(net, x, y, cfg.eval_attack, rng, cfg.eval_batch)
    for kind, inputs in zip(INPUT_KINDS, (x, x_adv)):
        logits, probes = collect_probes(net, inputs, cfg.eval_batch)
        acc, loss = predict_stats(net, inputs, y, cfg.eval_batch)
        for point in net.spec.probe_points:
            try:
                recs = _estimate(cfg, probes[point.name], y, epoch=epoch, layer=point.name, kind=kind, estimators=cfg.estimator.estimators)
            except Exception as e:
                raise ExperimentError(f"epoch {epoch}, layer {point.name}, {kind}: {e}") from e
            for r in recs:
                b = r.in_bits()
                rows.append(ReportRow(epoch, "probe", kind, b.layer, b.estimator, b.i_tx, b.i_ty, acc, loss))
    return rows


def run_training_experiment(
    cfg: ExperimentConfig, out_dir=None, datasets: tuple[Dataset, Dataset] | None = None
) -> tuple[RunReport, Network]:
    """Train in ``cfg.train.mode``; after every epoch probe MI and record accuracy/loss.

    Per epoch: one training pass; freeze parameters; craft PGD versions of the
    fixed probe subset of the test split against the current parameters;
    estimate MI at every probed layer on clean and adversarial inputs; record
    clean accuracy/loss on the train and test splits.
    """
    streams = Streams.from_seed(cfg.seed)
    train, test = datasets if datasets is not None else load_datasets(cfg)
    spec = spec_by_name(cfg.model)
    net = Network.init(spec, streams.init, np.dtype(cfg.dtype))
    opt = SGD(net.parameters(), cfg.train.momentum)
    idx = probe_indices(test, cfg.probe_size, streams.probe)
    px, py = test.images[idx], test.labels[idx]
    fit_kind = "adversarial" if cfg.train.mode == "adversarial" else "clean"
    report = RunReport(config=cfg.to_dict(), metadata={"probe_indices_sha": _sha(idx), "probe_size": len(idx)})
    for epoch in range(1, cfg.train.epochs + 1):
        try:
            stats = train_epoch(net, opt, train, cfg.train, epoch, streams.shuffle, cfg.attack, streams.attack)
        except Exception as e:
            raise ExperimentError(f"epoch {epoch}, training: {e}") from e
        report.rows.append(ReportRow(epoch, "fit", fit_kind, accuracy=stats.accuracy, loss=stats.loss))
        before = net.checksum()
        report.rows.extend(probe_epoch(net, cfg, px, py, epoch, streams.eval))
        if net.checksum() != before:
            raise ExperimentError(f"epoch {epoch}: parameters changed during probing")
        for split, ds in (("train", train), ("test", test)):
            acc, loss = predict_stats(net, ds.images, ds.labels, cfg.eval_batch)
            report.rows.append(ReportRow(epoch, split, "clean", accuracy=acc, loss=loss))
        log.info("epoch %d: fit loss %.4f acc %.4f | test acc %.4f", epoch, stats.loss, stats.accuracy, acc)
    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / "config.ini").write_text(cfg.to_ini())
        save_checkpoint(net, out_dir / "model.ckpt", {"seed": cfg.seed, "mode": cfg.train.mode, "epochs": cfg.train.epochs})
        emit_report(report, out_dir)
    return report, net


def _sha(a: np.ndarray) -> str:
    import hashlib

    return hashlib.sha256(np.ascontiguousarray(a).tobytes()).hexdigest()[:16]


def distortion_settings(cfg: ExperimentConfig, sample_shape) -> tuple[list[tuple[str, float]], list[str]]:
    settings, skipped = [], []
    for p in cfg.sweep.saturation:
        settings.append(("saturation", p))
    for k in cfg.sweep.patch_grids:
        if grid_fits(sample_shape, int(k)):
            settings.append(("patch_shuffle", int(k)))
        else:
            skipped.append(f"patch_shuffle k={k}: {sample_shape[-2]}x{sample_shape[-1]} not divisible")
    return settings, skipped


def run_distortion_sweep(
    net: Network, cfg: ExperimentConfig, test: Dataset | None = None, out_dir=None
) -> RunReport:
    """Distort clean and PGD inputs, then record kernel MI per layer plus accuracy/loss.

    Adversarial examples are crafted on undistorted inputs first and distorted
    afterwards. A ``none`` baseline row set is included.
    """
    streams = Streams.from_seed(cfg.seed)
    if test is None:
        _, test = load_datasets(cfg)
    idx = probe_indices(test, cfg.probe_size, streams.probe)
    x, y = test.images[idx], test.labels[idx]
    x_adv = attack_in_batches(net, x, y, cfg.eval_attack, streams.eval, cfg.eval_batch)
    settings, skipped = distortion_settings(cfg, x.shape[1:])
    for s in skipped:
        log.warning("skipping %s", s)
    estimators = tuple(f"kde_{b}" for b in cfg.sweep.bounds)
    perms: dict[str, list] = {}
    rows = []
    for distortion, level in [("none", 0)] + settings:
        for kind, inputs in zip(INPUT_KINDS, (x, x_adv)):
            if distortion == "saturation":
                data = saturate(inputs, level)
            elif distortion == "patch_shuffle":
                data, p = patch_shuffle_batch(inputs, int(level), streams.sweep)
                if p is not None:
                    perms[f"{kind}/k={level}"] = p.tolist()
            else:
                data = inputs
            _, probes = collect_probes(net, data, cfg.eval_batch)
            acc, loss = predict_stats(net, data, y, cfg.eval_batch)
            for point in net.spec.probe_points:
                for r in _estimate_kde(cfg, probes[point.name], y, estimators, point.name, kind):
                    b = r.in_bits()
                    rows.append(DistortionRow(distortion, float(level), kind, b.layer, b.estimator, b.i_tx, b.i_ty, acc, loss))
    report = RunReport(config=cfg.to_dict(), distortion_rows=rows, metadata={"skipped": skipped, "permutations": perms})
    if out_dir is not None:
        emit_report(report, out_dir, formats=("csv", "json"), stem="sweep")
    return report


def _estimate_kde(cfg, acts, labels, estimators, layer, kind):
    from .estimators import default_sigma2

    sigma2 = cfg.estimator.sigma2 if cfg.estimator.sigma2 is not None else default_sigma2(acts, cfg.estimator.sigma2_factor)
    return estimate_layer(acts, labels, sigma2, None, layer=layer, kind=kind, estimators=estimators)
