"""Run reports: CSV/JSON serialisation and the information-plane SVG."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

CSV_HEADER = ["epoch", "split", "kind", "layer", "estimator", "i_tx_bits", "i_ty_bits", "accuracy", "loss"]
SWEEP_HEADER = ["distortion", "level", "kind", "layer", "estimator", "i_tx_bits", "i_ty_bits", "accuracy", "loss"]


@dataclass(frozen=True)
class ReportRow:
    """One CSV line. Epoch summaries leave layer/estimator/MI empty."""

    epoch: int
    split: str  # fit | train | test | probe
    kind: str  # clean | adversarial
    layer: str = ""
    estimator: str = ""
    i_tx_bits: float | None = None
    i_ty_bits: float | None = None
    accuracy: float | None = None
    loss: float | None = None

    @property
    def is_mi(self) -> bool:
        return bool(self.estimator)


@dataclass(frozen=True)
class DistortionRow:
    distortion: str  # none | saturation | patch_shuffle
    level: float
    kind: str
    layer: str
    estimator: str
    i_tx_bits: float
    i_ty_bits: float
    accuracy: float
    loss: float


@dataclass
class RunReport:
    config: dict = field(default_factory=dict)
    rows: list[ReportRow] = field(default_factory=list)
    distortion_rows: list[DistortionRow] = field(default_factory=list)
    metadata: dict = field(default_factory=dict)

    @property
    def mi_rows(self) -> list[ReportRow]:
        return [r for r in self.rows if r.is_mi]

    @property
    def epoch_rows(self) -> list[ReportRow]:
        return [r for r in self.rows if not r.is_mi]

    def select(self, **kw) -> list[ReportRow]:
        return [r for r in self.rows if all(getattr(r, k) == v for k, v in kw.items())]


def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _table(header: list[str], rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_cell(getattr(r, h)) for h in header])
    return buf.getvalue()


def rows_to_csv(rows: list[ReportRow]) -> str:
    return _table(CSV_HEADER, rows)


def sweep_to_csv(rows: list[DistortionRow]) -> str:
    return _table(SWEEP_HEADER, rows)


def _opt_float(s: str) -> float | None:
    return None if s == "" else float(s)


def rows_from_csv(text: str) -> list[ReportRow]:
    reader = csv.reader(io.StringIO(text))
    header = next(reader)
    if header != CSV_HEADER:
        raise ValueError(f"unexpected CSV header {header}")
    out = []
    for rec in reader:
        d = dict(zip(header, rec))
        out.append(
            ReportRow(
                epoch=int(d["epoch"]),
                split=d["split"],
                kind=d["kind"],
                layer=d["layer"],
                estimator=d["estimator"],
                i_tx_bits=_opt_float(d["i_tx_bits"]),
                i_ty_bits=_opt_float(d["i_ty_bits"]),
                accuracy=_opt_float(d["accuracy"]),
                loss=_opt_float(d["loss"]),
            )
        )
    return out


def sweep_from_csv(text: str) -> list[DistortionRow]:
    reader = csv.DictReader(io.StringIO(text))
    return [
        DistortionRow(
            d["distortion"], float(d["level"]), d["kind"], d["layer"], d["estimator"],
            float(d["i_tx_bits"]), float(d["i_ty_bits"]), float(d["accuracy"]), float(d["loss"]),
        )
        for d in reader
    ]


def report_to_json(report: RunReport) -> str:
    return json.dumps(
        {
            "config": report.config,
            "rows": [asdict(r) for r in report.rows],
            "distortion_rows": [asdict(r) for r in report.distortion_rows],
            "metadata": report.metadata,
        },
        indent=1,
        sort_keys=True,
    )


def report_from_json(text: str) -> RunReport:
    d = json.loads(text)
    names = [f.name for f in fields(ReportRow)]
    return RunReport(
        config=d.get("config", {}),
        rows=[ReportRow(**{k: r[k] for k in names}) for r in d.get("rows", [])],
        distortion_rows=[DistortionRow(**r) for r in d.get("distortion_rows", [])],
        metadata=d.get("metadata", {}),
    )


def emit_report(report: RunReport, out_dir, formats=("csv", "json", "svg"), stem: str = "report") -> list[Path]:
    """Write the report into ``out_dir``; returns the written paths."""
    out_dir = Path(out_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise OSError(f"cannot create report directory {out_dir}: {e}") from e
    written = []
    if "csv" in formats:
        # a sweep-only report gets the plain name for its distortion table
        if report.rows or not report.distortion_rows:
            p = out_dir / f"{stem}.csv"
            p.write_text(rows_to_csv(report.rows))
            written.append(p)
        if report.distortion_rows:
            p = out_dir / (f"{stem}_sweep.csv" if report.rows else f"{stem}.csv")
            p.write_text(sweep_to_csv(report.distortion_rows))
            written.append(p)
    if "json" in formats:
        p = out_dir / f"{stem}.json"
        p.write_text(report_to_json(report))
        written.append(p)
    if "svg" in formats and report.mi_rows:
        p = out_dir / f"{stem}_infoplane.svg"
        plot_information_plane(report.rows, p)
        written.append(p)
    return written


def plot_information_plane(rows: list[ReportRow], path, estimators=None, kinds=("clean", "adversarial")) -> None:
    """Grid of information planes (x = I(T;X), y = I(T;Y)), one trace per layer over epochs."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    mi = [r for r in rows if r.is_mi]
    estimators = estimators or sorted({r.estimator for r in mi})
    layers = list(dict.fromkeys(r.layer for r in mi))
    plt.rcParams["svg.hashsalt"] = "advinfo"
    fig, axes = plt.subplots(
        len(estimators), len(kinds), figsize=(5 * len(kinds), 4 * len(estimators)), squeeze=False
    )
    for i, est in enumerate(estimators):
        for j, kind in enumerate(kinds):
            ax = axes[i][j]
            for layer in layers:
                pts = sorted((r.epoch, r.i_tx_bits, r.i_ty_bits) for r in mi if r.estimator == est and r.kind == kind and r.layer == layer)
                if not pts:
                    continue
                _, xs, ys = zip(*pts)
                ax.plot(xs, ys, marker="o", markersize=2, label=layer)
            ax.set_title(f"{est} / {kind}")
            ax.set_xlabel("I(T;X) [bits]")
            ax.set_ylabel("I(T;Y) [bits]")
            ax.legend(fontsize=7)
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
