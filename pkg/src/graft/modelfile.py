"""JSON model container.

Floats are written with ``repr`` (shortest round-trip form), so
save -> load -> predict reproduces scores bit for bit.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from graft.calibration import BreslowBaseline, CoxCalibrator, IsotonicCalibrator
from graft.data import ScalerParams
from graft.errors import SchemaError
from graft.gates import GateParams
from graft.km import KMCurve
from graft.network import GraftParams
from graft.trainer import TrainConfig, TrainedModel

FORMAT = "graft-model"
VERSION = 1


@dataclass
class ModelBundle:
    model: TrainedModel
    feature_names: tuple[str, ...]
    cox: CoxCalibrator | None = None
    isotonic: IsotonicCalibrator | None = None
    censoring: KMCurve | None = None


def _arr(a) -> list:
    return np.asarray(a, dtype=np.float64).tolist()


def _np(x, shape=None) -> np.ndarray:
    a = np.array(x, dtype=np.float64)
    return a.reshape(shape) if shape is not None else a


def bundle_to_dict(b: ModelBundle) -> dict:
    m = b.model
    P = m.params
    out = {
        "format": FORMAT,
        "version": VERSION,
        "feature_names": list(b.feature_names),
        "config": m.config.to_dict(),
        "scaler": {"means": _arr(m.scaler.means), "stds": _arr(m.scaler.stds)},
        "params": {
            "W1": _arr(P.W1), "b1": _arr(P.b1), "W2": _arr(P.W2), "b2": _arr(P.b2),
            "beta": _arr(P.beta), "mu": _arr(P.mu), "d_h": P.d_h,
            "dropout_rate": P.dropout_rate, "arch_variant": P.arch_variant,
        },
        "gates": {
            "eta": _arr(m.gates.eta), "sigma": m.gates.sigma,
            "variant": m.gates.variant, "lambda_l0": m.gates.lambda_l0,
        },
        "training": {
            "epochs_run": m.epochs_run, "best_epoch": m.best_epoch,
            "best_val_loss": m.best_val_loss, "initial_val_loss": m.initial_val_loss,
            "history": [float(v) for v in m.history],
        },
    }
    if b.cox is not None:
        out["cox"] = {
            "beta_cox": b.cox.beta_cox, "center": b.cox.center, "diverged": b.cox.diverged,
            "times": _arr(b.cox.breslow.times), "cumhaz": _arr(b.cox.breslow.cumhaz),
        }
    if b.isotonic is not None:
        iso = b.isotonic
        out["isotonic"] = {
            "grid": _arr(iso.grid),
            "breakpoints": [_arr(x) for x in iso.breakpoints],
            "values": [_arr(v) for v in iso.values],
            "inherited": [int(k) for k in iso.inherited],
        }
    if b.censoring is not None:
        out["censoring_km"] = {
            "event_times": _arr(b.censoring.event_times),
            "surv_probs": _arr(b.censoring.surv_probs),
            "n_at_start": b.censoring.n_at_start,
        }
    return out


def bundle_from_dict(d: dict) -> ModelBundle:
    if d.get("format") != FORMAT:
        raise SchemaError("not a graft model file")
    if d.get("version") != VERSION:
        raise SchemaError(f"unsupported model file version {d.get('version')}")
    p = len(d["feature_names"])
    pr = d["params"]
    d_h = pr["d_h"]
    params = GraftParams(
        W1=_np(pr["W1"], (d_h, p)), b1=_np(pr["b1"], (d_h,)),
        W2=_np(pr["W2"], (p, d_h)), b2=_np(pr["b2"], (p,)),
        beta=_np(pr["beta"]), mu=_np(pr["mu"]),
        dropout_rate=pr["dropout_rate"], arch_variant=pr["arch_variant"],
    )
    g = d["gates"]
    gates = GateParams(_np(g["eta"]), g["sigma"], g["variant"], g["lambda_l0"])
    scaler = ScalerParams(_np(d["scaler"]["means"]), _np(d["scaler"]["stds"]))
    tr = d["training"]
    model = TrainedModel(
        params, gates, scaler, TrainConfig.from_dict(d["config"]),
        tr["epochs_run"], tr["best_epoch"], tr["best_val_loss"], tr["initial_val_loss"], list(tr["history"]),
    )
    cox = iso = cens = None
    if "cox" in d:
        c = d["cox"]
        cox = CoxCalibrator(c["beta_cox"], BreslowBaseline(_np(c["times"]), _np(c["cumhaz"])), c["center"], c["diverged"])
    if "isotonic" in d:
        c = d["isotonic"]
        iso = IsotonicCalibrator(
            _np(c["grid"]), tuple(_np(x) for x in c["breakpoints"]),
            tuple(_np(v) for v in c["values"]), np.array(c["inherited"], dtype=np.int64),
        )
    if "censoring_km" in d:
        c = d["censoring_km"]
        cens = KMCurve(_np(c["event_times"]), _np(c["surv_probs"]), c["n_at_start"])
    return ModelBundle(model, tuple(d["feature_names"]), cox, iso, cens)


def save(path, bundle: ModelBundle) -> None:
    Path(path).write_text(json.dumps(bundle_to_dict(bundle), indent=1) + "\n", encoding="utf-8")


def load(path) -> ModelBundle:
    try:
        d = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: not valid JSON ({exc})") from None
    return bundle_from_dict(d)
