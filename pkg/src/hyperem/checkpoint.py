"""HEM1 model checkpoint container.

Layout: magic 'HEM1' | u32le header length | UTF-8 JSON header | concatenated
float64 little-endian array blobs in header-declared order. The header carries
the model kind, the architecture needed to rebuild it, array names/shapes, and
training metadata.
"""

from __future__ import annotations

import json
import struct

import numpy as np

from . import classical, vae
from .hsdata import FormatError

MAGIC = b"HEM1"


def _named_arrays(model):
    if isinstance(model, vae.VaeEmulator):
        arrays = []
        parts = [("interpolator", model.interpolator.params()),
                 ("decoder", model.decoder.params())]
        if model.encoder is not None:
            parts.insert(0, ("encoder", model.encoder.params()))
        for part, params in parts:
            for i, p in enumerate(params):
                arrays.append((f"{part}.{i}", p))
        return arrays
    if isinstance(model, classical.MlpModel):
        return [(f"net.{i}", p) for i, p in enumerate(model.net.params())]
    if isinstance(model, classical.PcaRegressionEmulator):
        k = model.kernel
        return [("pca.mean", model.pca.mean_spectrum),
                ("pca.components", model.pca.components),
                ("pca.eigenvalues", model.pca.eigenvalues),
                ("pca.explained", model.pca.explained_ratio),
                ("kernel.inputs", k.training_inputs),
                ("kernel.alpha", k.dual_coefficients),
                ("kernel.input_mean", k.input_mean),
                ("kernel.input_std", k.input_std)]
    raise TypeError(f"cannot checkpoint {type(model).__name__}")


def _model_header(model) -> dict:
    if isinstance(model, vae.VaeEmulator):
        return {"kind": model.family, "formulation": model.formulation,
                "arch": model.arch, "has_encoder": model.encoder is not None,
                "decoder_frozen": model.decoder_frozen, "meta": model.meta}
    if isinstance(model, classical.MlpModel):
        return {"kind": "mlp",
                "arch": {"inputs": model.n_inputs,
                         "outputs": model.n_outputs,
                         "hidden": list(model.hidden),
                         "input_ranges": [list(r) for r in model.input_ranges]
                         if model.input_ranges else None}}
    if isinstance(model, classical.PcaRegressionEmulator):
        k = model.kernel
        return {"kind": f"pca_{k.kind}",
                "arch": {"lengthscale": k.lengthscale,
                         "regularizer": k.regularizer}}
    raise TypeError(f"cannot checkpoint {type(model).__name__}")


def save_model(model, path, metadata: dict | None = None) -> None:
    arrays = _named_arrays(model)
    header = _model_header(model)
    header["metadata"] = metadata or {}
    header["arrays"] = [{"name": n, "shape": list(a.shape)} for n, a in arrays]
    hdr = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<I", len(hdr)))
        f.write(hdr)
        for _, a in arrays:
            f.write(np.ascontiguousarray(a, dtype="<f8").tobytes())


def _read_raw(path):
    with open(path, "rb") as f:
        raw = f.read()
    if raw[:4] != MAGIC:
        raise FormatError(f"bad magic {raw[:4]!r}, expected {MAGIC!r}")
    (hlen,) = struct.unpack("<I", raw[4:8])
    header = json.loads(raw[8:8 + hlen].decode("utf-8"))
    body = raw[8 + hlen:]
    blobs = []
    off = 0
    for spec in header["arrays"]:
        count = int(np.prod(spec["shape"])) if spec["shape"] else 1
        nbytes = count * 8
        if off + nbytes > len(body):
            raise FormatError("truncated array payload")
        blobs.append(np.frombuffer(body[off:off + nbytes], dtype="<f8")
                     .reshape(spec["shape"]).copy())
        off += nbytes
    if off != len(body):
        raise FormatError("trailing bytes after declared arrays")
    return header, blobs


def load_model(path):
    header, blobs = _read_raw(path)
    kind = header["kind"]
    if kind in ("p2p", "fcvae"):
        arch = header["arch"]
        if kind == "p2p":
            model = vae.build_p2p(arch["bands"], arch["params"], arch["latent"],
                                  tuple(arch["hidden"]), header["formulation"])
        else:
            model = vae.build_fcvae(arch["bands"], arch["params"], arch["latent"],
                                    tuple(arch["widths"]), arch["n_down"],
                                    header["formulation"])
        if not header["has_encoder"]:
            model.encoder = None
        model.decoder_frozen = header["decoder_frozen"]
        model.meta = dict(header.get("meta", {}))
        targets = _named_arrays(model)
        _restore(targets, header, blobs)
        return model, header["metadata"]
    if kind == "mlp":
        arch = header["arch"]
        model = classical.build_mlp(arch["inputs"], arch["outputs"],
                                    tuple(arch["hidden"]))
        if arch.get("input_ranges"):
            model.input_ranges = tuple(tuple(r) for r in arch["input_ranges"])
        _restore(_named_arrays(model), header, blobs)
        return model, header["metadata"]
    if kind in ("pca_krr", "pca_gpr"):
        named = dict(zip((s["name"] for s in header["arrays"]), blobs))
        pca = classical.PcaModel(named["pca.mean"], named["pca.components"],
                                 named["pca.eigenvalues"], named["pca.explained"])
        kernel = classical.KernelModel(
            kind.split("_")[1], named["kernel.inputs"], named["kernel.alpha"],
            header["arch"]["lengthscale"], header["arch"]["regularizer"],
            named["kernel.input_mean"], named["kernel.input_std"])
        if kernel.kind == "gpr":
            # refactor the kernel matrix so predictive variance is available
            k = classical._rbf(kernel.training_inputs, kernel.training_inputs,
                               kernel.lengthscale)
            k[np.diag_indices_from(k)] += kernel.regularizer + 1e-12
            from scipy.linalg import cho_factor
            kernel.chol = cho_factor(k, lower=True)
        return classical.PcaRegressionEmulator(pca, kernel), header["metadata"]
    raise FormatError(f"unknown model kind {kind!r}")


def _restore(targets, header, blobs) -> None:
    names = [s["name"] for s in header["arrays"]]
    by_name = dict(zip(names, blobs))
    for name, arr in targets:
        if name not in by_name:
            raise FormatError(f"missing array {name!r} in checkpoint")
        src = by_name[name]
        if src.shape != arr.shape:
            raise FormatError(f"shape mismatch for {name!r}")
        arr[...] = src
