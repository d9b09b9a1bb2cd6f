"""Checkpoint persistence: a directory with a JSON manifest and a raw payload.

The manifest records the format version, everything needed to rebuild the
model object (class, constructor arguments, condition spec), the data
normalization record, the ordered parameter names and shapes, and a digest
of the training history.  The payload is the concatenation of every
parameter raveled to little-endian float64, in manifest order.  Float64
rather than a narrower type so a load reproduces every parameter bit for
bit, which the rest of the library relies on for deterministic resumption.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import os

import numpy as np

from .errors import VersionMismatch
from .paths import NormalizationRecord
from .vae import ConditionSpec, ConditionalTCVAE, LossReport, TCVAE

CHECKPOINT_VERSION = "causalgen-checkpoint-1"
PAYLOAD_DTYPE = "<f8"

MANIFEST_NAME = "manifest.json"
PAYLOAD_NAME = "params.bin"
HISTORY_NAME = "history.csv"

HISTORY_HEADER = ["epoch", "rec", "latent", "total", "cw1_upper_bound"]


def history_csv_bytes(history) -> bytes:
    """Loss history rendered as CSV, one row per epoch."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(HISTORY_HEADER)
    for epoch, rep in enumerate(history):
        bound = "" if rep.cw1_upper_bound is None else repr(rep.cw1_upper_bound)
        writer.writerow([epoch, repr(rep.rec), repr(rep.latent),
                         repr(rep.total), bound])
    return buf.getvalue().encode("utf-8")


def load_history_csv(path) -> list:
    with open(path, encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0] != HISTORY_HEADER:
        raise ValueError(f"unexpected history header in {path}: {rows[:1]}")
    out = []
    for row in rows[1:]:
        rec, latent, total = map(float, row[1:4])
        bound = None if row[4] == "" else float(row[4])
        # beta is not a CSV column; recover it from the total identity
        beta = (total - rec) / latent if latent != 0 and total != rec else 0.0
        out.append(LossReport(rec=rec, latent=latent, beta=beta, total=total,
                              cw1_upper_bound=bound))
    return out


def _model_manifest(m: TCVAE) -> dict:
    d = {
        "class": type(m).__name__,
        "d": m.d,
        "d_z": m.d_z,
        "n_steps": m.n_steps,
        "hidden": m.hidden,
        "flow_layers": m.flow_layers,
        "flow_hidden": m.flow_hidden,
        "scale_cap": m.scale_cap,
        "beta": m.beta,
        "seed": m.seed,
    }
    if isinstance(m, ConditionalTCVAE):
        d["d_c"] = m.d_c
        d["embed_dim"] = m.embed_dim
        d["cond_spec"] = None if m.cond_spec is None else m.cond_spec.to_dict()
    return d


def _rebuild_model(spec: dict) -> TCVAE:
    kwargs = {k: spec[k] for k in ("d", "d_z", "n_steps", "hidden", "flow_layers",
                                   "flow_hidden", "scale_cap", "beta", "seed")}
    name = spec.get("class")
    if name == "TCVAE":
        return TCVAE(**kwargs)
    if name == "ConditionalTCVAE":
        cond = spec.get("cond_spec")
        return ConditionalTCVAE(
            d_c=spec["d_c"], embed_dim=spec["embed_dim"],
            cond_spec=None if cond is None else ConditionSpec.from_dict(cond),
            **kwargs)
    raise VersionMismatch(f"unknown model class in manifest: {name!r}")


def save_checkpoint(m: TCVAE, dirpath, history=(), config_echo=None) -> str:
    """Write manifest, payload, and optional history under ``dirpath``."""
    os.makedirs(dirpath, exist_ok=True)
    named = m.named_params()
    payload = b"".join(
        np.ascontiguousarray(p.value, dtype=PAYLOAD_DTYPE).tobytes()
        for _, p in named)
    digest = None
    if history:
        blob = history_csv_bytes(history)
        with open(os.path.join(dirpath, HISTORY_NAME), "wb") as fh:
            fh.write(blob)
        digest = hashlib.sha256(blob).hexdigest()
    manifest = {
        "version": CHECKPOINT_VERSION,
        "dtype": PAYLOAD_DTYPE,
        "model": _model_manifest(m),
        "dt": m.dt,
        "normalization": None if m.norm is None else m.norm.to_dict(),
        "params": [{"name": n, "shape": list(p.value.shape)} for n, p in named],
        "history_digest": digest,
        "config": dict(config_echo or {}),
    }
    with open(os.path.join(dirpath, PAYLOAD_NAME), "wb") as fh:
        fh.write(payload)
    # manifest written last so a partial save lacks a readable manifest
    with open(os.path.join(dirpath, MANIFEST_NAME), "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return str(dirpath)


def read_manifest(dirpath) -> dict:
    with open(os.path.join(dirpath, MANIFEST_NAME), encoding="utf-8") as fh:
        return json.load(fh)


def load_checkpoint(dirpath) -> TCVAE:
    """Rebuild the model saved under ``dirpath``, bit-exactly."""
    manifest = read_manifest(dirpath)
    version = manifest.get("version")
    if version != CHECKPOINT_VERSION:
        raise VersionMismatch(
            f"checkpoint version {version!r} does not match "
            f"{CHECKPOINT_VERSION!r}")
    if manifest.get("dtype") != PAYLOAD_DTYPE:
        raise VersionMismatch(
            f"payload dtype {manifest.get('dtype')!r} does not match "
            f"{PAYLOAD_DTYPE!r}")
    m = _rebuild_model(manifest["model"])
    named = m.named_params()
    recorded = manifest["params"]
    if [n for n, _ in named] != [e["name"] for e in recorded]:
        raise VersionMismatch("parameter names in manifest do not match the model")
    shapes = [tuple(e["shape"]) for e in recorded]
    if [p.value.shape for _, p in named] != shapes:
        raise VersionMismatch("parameter shapes in manifest do not match the model")
    flat = np.fromfile(os.path.join(dirpath, PAYLOAD_NAME), dtype=PAYLOAD_DTYPE)
    total = sum(int(np.prod(s)) for s in shapes)
    if flat.size != total:
        raise VersionMismatch(
            f"payload holds {flat.size} values but manifest shapes need {total}")
    offset = 0
    for (_, p), shape in zip(named, shapes):
        k = int(np.prod(shape))
        p.value[...] = flat[offset:offset + k].reshape(shape)
        offset += k
    m.dt = float(manifest.get("dt", 1.0))
    norm = manifest.get("normalization")
    if norm is not None:
        m.norm = NormalizationRecord.from_dict(norm)
    return m


__all__ = [
    "CHECKPOINT_VERSION", "PAYLOAD_DTYPE", "MANIFEST_NAME", "PAYLOAD_NAME",
    "HISTORY_NAME", "save_checkpoint", "load_checkpoint", "read_manifest",
    "history_csv_bytes", "load_history_csv",
]
