"""CSV reports for BER sweeps and timing runs."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import astuple, dataclass, field, fields
from pathlib import Path

BER_HEADER = ("snr_db", "receiver", "stage", "M", "trials", "bit_errors", "ber", "mean_detect_time_s")
TIMING_HEADER = ("receiver", "stage", "M", "batch_size", "repetitions", "median_time_per_vector_s")


@dataclass(frozen=True)
class BerRow:
    snr_db: float
    receiver: str
    stage: int
    M: int
    trials: int
    bit_errors: int
    ber: float
    mean_detect_time_s: float = math.nan


@dataclass
class BerReport:
    seed: int
    bits_per_vector: int = 0
    rows: list = field(default_factory=list)

    def lookup(self, receiver: str, snr_db: float | None = None, stage: int = 1, M: int = 1) -> BerRow:
        for row in self.rows:
            if (row.receiver == receiver and row.stage == stage and row.M == M
                    and (snr_db is None or row.snr_db == snr_db)):
                return row
        raise KeyError((receiver, snr_db, stage, M))

    def ber(self, receiver: str, snr_db: float | None = None, stage: int = 1, M: int = 1) -> float:
        return self.lookup(receiver, snr_db, stage, M).ber


@dataclass(frozen=True)
class TimingRow:
    receiver: str
    stage: int
    M: int
    batch_size: int
    repetitions: int
    median_time_per_vector_s: float


@dataclass
class TimingReport:
    seed: int
    rows: list = field(default_factory=list)

    def time(self, receiver: str, batch_size: int, stage: int = 1, M: int = 1) -> float:
        for row in self.rows:
            if (row.receiver, row.batch_size, row.stage, row.M) == (receiver, batch_size, stage, M):
                return row.median_time_per_vector_s
        raise KeyError((receiver, batch_size, stage, M))


def _fmt(value) -> str:
    if isinstance(value, float):
        if math.isnan(value):
            return "nan"
        return repr(value)
    return str(value)


def format_report(report) -> str:
    header = TIMING_HEADER if isinstance(report, TimingReport) else BER_HEADER
    buf = io.StringIO()
    buf.write(f"# seed={int(report.seed)}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in report.rows:
        writer.writerow([_fmt(v) for v in astuple(row)])
    return buf.getvalue()


def write_report(report, path) -> None:
    """Write ``report`` as CSV (LF line endings, seed as a leading comment)."""
    with open(Path(path), "w", encoding="utf-8", newline="") as fh:
        fh.write(format_report(report))


def read_report(path):
    """Parse a CSV written by :func:`write_report`."""
    text = Path(path).read_text(encoding="utf-8")
    lines = text.splitlines()
    seed = 0
    body = []
    for line in lines:
        if line.startswith("#"):
            key, _, value = line[1:].strip().partition("=")
            if key.strip() == "seed":
                seed = int(value)
        else:
            body.append(line)
    reader = csv.reader(body)
    header = tuple(next(reader))
    if header == BER_HEADER:
        report, row_cls = BerReport(seed), BerRow
    elif header == TIMING_HEADER:
        report, row_cls = TimingReport(seed), TimingRow
    else:
        raise ValueError(f"{path}: unrecognized header {header}")
    for rec in reader:
        values = [_cast(f.type, v) for f, v in zip(fields(row_cls), rec)]
        report.rows.append(row_cls(*values))
    return report


def _cast(type_name, value: str):
    if type_name in (int, "int"):
        return int(value)
    if type_name in (float, "float"):
        return float(value)
    return value
