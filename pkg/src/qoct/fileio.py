"""Sample-specification and trace file formats.

Sample specs are human-editable JSON: interface intensity reflectivities
with explicit signs, one-way optical path lengths in um, and loss
exponents.  Traces are two-column CSV (c*tau in um, normalized counts)
with a single JSON metadata header line.  Both formats round-trip
losslessly: floats are written with repr precision, so write -> read ->
write reproduces the bytes.
"""

from __future__ import annotations

import json
import math
from importlib import resources
from pathlib import Path

import numpy as np

from .engine import Interferogram
from .errors import SampleSpecError, TraceFileError
from .stack import Interface, Sample, Segment, seconds_to_um, um_to_seconds

SCHEMA_VERSION = 1

_SAMPLE_KEYS = {"schema_version", "name", "notes", "interfaces", "segments", "alternates"}
_INTERFACE_KEYS = {"R", "sign", "film_kappa"}
_SEGMENT_KEYS = {"optical_path_um", "bulk_kappa"}

#: Bundled reference samples, resolvable by name in place of a path.
BUNDLED_SAMPLES = (
    "slide_two_interface",
    "stack_four_interface",
    "stack_five_interface",
    "mirror_single_interface",
)


def _reject_unknown(mapping: dict, allowed: set, where: str):
    unknown = set(mapping) - allowed
    if unknown:
        raise SampleSpecError(f"unknown key(s) {sorted(unknown)} at {where}")


def _number(mapping: dict, key: str, where: str, default=None):
    if key not in mapping:
        if default is not None:
            return default
        raise SampleSpecError(f"missing required key {key!r} at {where}")
    v = mapping[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
        raise SampleSpecError(f"{where}.{key} must be a finite number, got {v!r}")
    return float(v)


def parse_sample_dict(doc: dict) -> Sample:
    """Validate a parsed sample-spec document and build the Sample."""
    if not isinstance(doc, dict):
        raise SampleSpecError("sample spec must be a JSON object")
    _reject_unknown(doc, _SAMPLE_KEYS, "top level")
    version = doc.get("schema_version")
    if version != SCHEMA_VERSION:
        raise SampleSpecError(
            f"unsupported schema_version {version!r}; this reader handles {SCHEMA_VERSION}"
        )
    ifaces_doc = doc.get("interfaces")
    if not isinstance(ifaces_doc, list) or not ifaces_doc:
        raise SampleSpecError("interfaces must be a nonempty list")
    segs_doc = doc.get("segments", [])
    if not isinstance(segs_doc, list):
        raise SampleSpecError("segments must be a list")
    if len(segs_doc) != len(ifaces_doc) - 1:
        raise SampleSpecError(
            f"{len(ifaces_doc)} interfaces need {len(ifaces_doc) - 1} segments, "
            f"got {len(segs_doc)}"
        )
    interfaces = []
    for i, entry in enumerate(ifaces_doc):
        where = f"interfaces[{i}]"
        if not isinstance(entry, dict):
            raise SampleSpecError(f"{where} must be an object")
        _reject_unknown(entry, _INTERFACE_KEYS, where)
        big_r = _number(entry, "R", where)
        if not 0.0 <= big_r < 1.0:
            raise SampleSpecError(f"{where}.R must lie in [0, 1), got {big_r}")
        sign = entry.get("sign", 1)
        if sign not in (1, -1):
            raise SampleSpecError(f"{where}.sign must be 1 or -1, got {sign!r}")
        kappa = _number(entry, "film_kappa", where, default=0.0)
        try:
            interfaces.append(Interface(sign * math.sqrt(big_r), kappa))
        except Exception as exc:
            raise SampleSpecError(f"{where}: {exc}") from exc
    segments = []
    for j, entry in enumerate(segs_doc):
        where = f"segments[{j}]"
        if not isinstance(entry, dict):
            raise SampleSpecError(f"{where} must be an object")
        _reject_unknown(entry, _SEGMENT_KEYS, where)
        path = _number(entry, "optical_path_um", where)
        kappa = _number(entry, "bulk_kappa", where, default=0.0)
        try:
            segments.append(Segment(um_to_seconds(path), kappa))
        except Exception as exc:
            raise SampleSpecError(f"{where}: {exc}") from exc
    return Sample(interfaces, segments)


def sample_to_dict(sample: Sample, name: str | None = None, notes: str | None = None) -> dict:
    doc: dict = {"schema_version": SCHEMA_VERSION}
    if name is not None:
        doc["name"] = name
    if notes is not None:
        doc["notes"] = notes
    doc["interfaces"] = [
        {
            "R": iface.r_fwd**2,
            "sign": 1 if iface.r_fwd >= 0 else -1,
            "film_kappa": iface.film_kappa,
        }
        for iface in sample.interfaces
    ]
    doc["segments"] = [
        {"optical_path_um": seconds_to_um(seg.optical_delay), "bulk_kappa": seg.bulk_kappa}
        for seg in sample.segments
    ]
    return doc


def load_sample(path) -> Sample:
    """Read a sample spec from a JSON file."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise SampleSpecError(f"cannot read sample spec {path!r}: {exc}") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SampleSpecError(f"sample spec {path!r} is not valid JSON: {exc}") from exc
    return parse_sample_dict(doc)


def save_sample(sample: Sample, path, name: str | None = None, notes: str | None = None):
    Path(path).write_text(json.dumps(sample_to_dict(sample, name, notes), indent=2) + "\n")


def resolve_sample(name_or_path) -> Sample:
    """Load a sample from a path, or from the bundled set by bare name."""
    text = str(name_or_path)
    if text in BUNDLED_SAMPLES:
        with resources.files("qoct.data").joinpath(f"{text}.json").open() as fh:
            return parse_sample_dict(json.load(fh))
    return load_sample(name_or_path)


def save_trace(trace: Interferogram, path):
    """Write a trace as CSV with a JSON metadata header line.

    Delays are stored as c*tau in um at repr precision, so reading the file
    back reproduces the arrays bit for bit.
    """
    lines = ["# meta: " + json.dumps(trace.meta, sort_keys=True)]
    lines.append("# gamma0: " + repr(float(trace.gamma0)))
    lines.append("ctau_um,counts")
    for d, c in zip(trace.delays_um, trace.counts):
        lines.append(f"{float(d)!r},{float(c)!r}")
    Path(path).write_text("\n".join(lines) + "\n")


def load_trace(path) -> Interferogram:
    """Read a trace written by save_trace."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise TraceFileError(f"cannot read trace {path!r}: {exc}") from exc
    lines = text.splitlines()
    meta: dict = {}
    gamma0 = float("nan")
    body_start = 0
    for i, line in enumerate(lines):
        if line.startswith("# meta: "):
            try:
                meta = json.loads(line[len("# meta: "):])
            except json.JSONDecodeError as exc:
                raise TraceFileError(f"bad metadata header in {path!r}: {exc}") from exc
        elif line.startswith("# gamma0: "):
            try:
                gamma0 = float(line[len("# gamma0: "):])
            except ValueError as exc:
                raise TraceFileError(f"bad gamma0 header in {path!r}") from exc
        elif line.startswith("#"):
            continue
        else:
            body_start = i
            break
    else:
        raise TraceFileError(f"trace {path!r} has no data rows")
    if lines[body_start].strip() != "ctau_um,counts":
        raise TraceFileError(
            f"trace {path!r} missing 'ctau_um,counts' column header on "
            f"line {body_start + 1}"
        )
    delays_um = []
    counts = []
    for ln, line in enumerate(lines[body_start + 1:], start=body_start + 2):
        if not line.strip():
            continue
        parts = line.split(",")
        if len(parts) != 2:
            raise TraceFileError(f"trace {path!r} line {ln}: expected two columns")
        try:
            delays_um.append(float(parts[0]))
            counts.append(float(parts[1]))
        except ValueError as exc:
            raise TraceFileError(f"trace {path!r} line {ln}: {exc}") from exc
    if len(delays_um) < 2:
        raise TraceFileError(f"trace {path!r} needs at least two data rows")
    try:
        return Interferogram(
            delays=um_to_seconds(np.array(delays_um)),
            counts=np.array(counts),
            gamma0=gamma0,
            meta=meta,
            delays_um_cache=np.array(delays_um),
        )
    except Exception as exc:
        raise TraceFileError(f"trace {path!r}: {exc}") from exc
