"""VAE-based emulators: pixel-wise (P2P) and fully convolutional (FC-VAE)
families, each in a one-step formulation (interpolator + decoder trained
jointly) and a two-step formulation (VAE pretraining on hyperspectral data,
then a parameter-to-latent interpolator trained against the frozen decoder).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import nnkernels as nk
from . import schedules
from .hsdata import HyperspectralCube, ParameterMap
from .layers import ChannelNorm, Conv2d, Dense, ReLU, Sequential, Upsample2x
from .schedules import TrainSchedule, kl_weight, lr_at, patch_size_at  # noqa: F401

DEFAULT_LATENT = 20
DEFAULT_P2P_HIDDEN = (512, 256)
DEFAULT_FCVAE_WIDTHS = (16, 32, 64)
PAPER_FCVAE_WIDTHS_S3 = (40, 80, 160, 320, 640)
PAPER_FCVAE_WIDTHS_SIM = (400, 600, 800)
LOGVAR_CLAMP = 10.0


@dataclass(frozen=True)
class LatentCode:
    mu: np.ndarray
    log_var: np.ndarray   # clamped to +-LOGVAR_CLAMP

    def __post_init__(self):
        if self.mu.shape != self.log_var.shape:
            raise ValueError("mu and log_var shapes differ")
        if not (np.all(np.isfinite(self.mu)) and np.all(np.isfinite(self.log_var))):
            raise ValueError("latent code must be finite")


def kl_gaussian(code: LatentCode) -> float:
    """KL(q || N(0, I)): summed over latent entries, averaged over the batch axis."""
    var = np.exp(code.log_var)
    per_entry = 0.5 * (code.mu ** 2 + var - 1.0 - code.log_var)
    return float(per_entry.sum() / code.mu.shape[0])


def reparameterize(code: LatentCode, eps: np.ndarray) -> np.ndarray:
    if eps.shape != code.mu.shape:
        raise nk.ShapeError("noise shape must match latent shape")
    return code.mu + np.exp(0.5 * code.log_var) * eps


def vae_loss(target: np.ndarray, output: np.ndarray, code: LatentCode,
             beta: float):
    err = output - target
    recon = float((err * err).mean())
    kl = kl_gaussian(code)
    return recon + beta * kl, recon, kl


class GaussianHead:
    """Shared trunk with two linear heads emitting mu and (clamped) log-variance."""

    def __init__(self, trunk: Sequential, mu_head, logvar_head):
        self.trunk = trunk
        self.mu_head = mu_head
        self.logvar_head = logvar_head
        self._clamp_mask = None

    def params(self):
        return self.trunk.params() + self.mu_head.params() + self.logvar_head.params()

    def grads(self):
        return self.trunk.grads() + self.mu_head.grads() + self.logvar_head.grads()

    def zero_grads(self):
        for g in self.grads():
            g[...] = 0.0

    def forward(self, x) -> LatentCode:
        h = self.trunk.forward(x)
        mu = self.mu_head.forward(h)
        lv_raw = self.logvar_head.forward(h)
        self._clamp_mask = np.abs(lv_raw) < LOGVAR_CLAMP
        return LatentCode(mu, np.clip(lv_raw, -LOGVAR_CLAMP, LOGVAR_CLAMP))

    def backward(self, dmu, dlogvar):
        dh = self.mu_head.backward(dmu)
        dh = dh + self.logvar_head.backward(np.where(self._clamp_mask, dlogvar, 0.0))
        return self.trunk.backward(dh)


@dataclass
class VaeEmulator:
    family: str                    # "p2p" or "fcvae"
    formulation: str               # "one-step" or "two-step"
    encoder: GaussianHead | None
    interpolator: GaussianHead
    decoder: Sequential
    arch: dict
    decoder_frozen: bool = False
    meta: dict = field(default_factory=dict)

    @property
    def latent_dim(self) -> int:
        return self.arch["latent"]


# ---------------------------------------------------------------- builders

def _mlp_gaussian_head(n_in: int, hidden, z: int, seed: int, base: int) -> GaussianHead:
    layers = []
    sizes = [n_in, *hidden]
    for i in range(len(hidden)):
        layers.append(Dense(sizes[i], sizes[i + 1], seed=seed, index=base + i))
        layers.append(ReLU())
    trunk = Sequential(layers)
    mu = Dense(hidden[-1], z, seed=seed, index=base + 100)
    lv = Dense(hidden[-1], z, seed=seed, index=base + 101)
    return GaussianHead(trunk, mu, lv)


def build_p2p(n_bands: int, n_params: int, latent: int = DEFAULT_LATENT,
              hidden=DEFAULT_P2P_HIDDEN, formulation: str = "two-step",
              seed: int = 0) -> VaeEmulator:
    """Encoder B->512->256->(mu, logvar); interpolator identical except for the
    input width; decoder mirrors the trunk in reverse with a linear output."""
    encoder = _mlp_gaussian_head(n_bands, hidden, latent, seed, base=0)
    interp = _mlp_gaussian_head(n_params, hidden, latent, seed, base=200)
    rev = [latent, *reversed(hidden)]
    dec_layers = []
    for i in range(len(hidden)):
        dec_layers.append(Dense(rev[i], rev[i + 1], seed=seed, index=400 + i))
        dec_layers.append(ReLU())
    dec_layers.append(Dense(rev[-1], n_bands, seed=seed, index=450))
    arch = {"family": "p2p", "bands": n_bands, "params": n_params,
            "latent": latent, "hidden": list(hidden)}
    return VaeEmulator("p2p", formulation, encoder, interp,
                       Sequential(dec_layers), arch)


def _conv_gaussian_head(c_in: int, widths, n_down: int, z: int,
                        seed: int, base: int) -> GaussianHead:
    w = list(widths)
    layers = [Conv2d(c_in, w[0], 1, seed=seed, index=base),
              ChannelNorm(w[0]), ReLU(),
              Conv2d(w[0], w[1], 7, pad=3, seed=seed, index=base + 1),
              ChannelNorm(w[1]), ReLU()]
    prev = w[1]
    for i in range(n_down):
        # extra downconvolutions reuse the last declared width
        cur = w[min(2 + i, len(w) - 1)]
        layers += [Conv2d(prev, cur, 3, stride=2, pad=1, seed=seed, index=base + 2 + i),
                   ChannelNorm(cur), ReLU()]
        prev = cur
    trunk = Sequential(layers)
    mu = Conv2d(prev, z, 1, seed=seed, index=base + 80)
    lv = Conv2d(prev, z, 1, seed=seed, index=base + 81)
    return GaussianHead(trunk, mu, lv)


def build_fcvae(n_bands: int, n_params: int, latent: int = DEFAULT_LATENT,
                widths=DEFAULT_FCVAE_WIDTHS, n_down: int = 2,
                formulation: str = "two-step", seed: int = 0) -> VaeEmulator:
    """Conv encoder: 1x1 -> 7x7 -> n_down stride-2 3x3 stages, channel norm after
    each; decoder mirrors with nearest-neighbor upsampling + 3x3 convolutions."""
    w = list(widths)
    encoder = _conv_gaussian_head(n_bands, w, n_down, latent, seed, base=0)
    interp = _conv_gaussian_head(n_params, w, n_down, latent, seed, base=200)
    down_widths = [w[min(2 + i, len(w) - 1)] for i in range(n_down)]
    dec_layers = [Conv2d(latent, down_widths[-1] if down_widths else w[1], 1,
                         seed=seed, index=400),
                  ChannelNorm(down_widths[-1] if down_widths else w[1]), ReLU()]
    prev = down_widths[-1] if down_widths else w[1]
    up_targets = list(reversed([w[1]] + down_widths[:-1])) if down_widths else []
    for i, cur in enumerate(up_targets):
        dec_layers += [Upsample2x(),
                       Conv2d(prev, cur, 3, pad=1, seed=seed, index=401 + i),
                       ChannelNorm(cur), ReLU()]
        prev = cur
    dec_layers += [Conv2d(prev, w[0], 7, pad=3, seed=seed, index=480),
                   ChannelNorm(w[0]), ReLU(),
                   Conv2d(w[0], n_bands, 1, seed=seed, index=481)]
    arch = {"family": "fcvae", "bands": n_bands, "params": n_params,
            "latent": latent, "widths": w, "n_down": n_down}
    return VaeEmulator("fcvae", formulation, encoder, interp,
                       Sequential(dec_layers), arch)


# ---------------------------------------------------------------- training core

def vae_step_backward(front: GaussianHead, decoder: Sequential,
                      x_in: np.ndarray, target: np.ndarray, beta: float,
                      eps: np.ndarray, update_decoder: bool = True):
    """Forward + backward of the emulation/ELBO loss through front and decoder.

    Returns (total, recon, kl). Gradients accumulate into the layers'
    grad buffers; decoder gradients are skipped when update_decoder=False.
    """
    code = front.forward(x_in)
    z = reparameterize(code, eps)
    out = decoder.forward(z)
    total, recon, kl = vae_loss(target, out, code, beta)
    if not np.isfinite(total):
        raise nk.DivergenceError("VAE loss diverged")
    err = out - target
    dout = 2.0 * err / err.size
    dz = decoder.backward(dout)
    if not update_decoder:
        decoder_grads = decoder.grads()
        for g in decoder_grads:
            g[...] = 0.0
    n = x_in.shape[0]
    sigma2 = np.exp(code.log_var)
    dmu = dz + beta * code.mu / n
    dlogvar = dz * eps * 0.5 * np.exp(0.5 * code.log_var) \
        + beta * 0.5 * (sigma2 - 1.0) / n
    front.backward(dmu, dlogvar)
    return total, recon, kl


def _epoch_batches(n: int, batch_size: int, rng) -> list:
    order = rng.permutation(n)
    return [order[s:s + batch_size] for s in range(0, n, batch_size)]


def _log_row(epoch, lr, beta, patch, recon, kl, total):
    return {"epoch": epoch, "lr": lr, "beta": beta, "patch_size": patch,
            "recon": recon, "kl": kl, "total": total}


def train_vae_pretrain(model: VaeEmulator, data, schedule: TrainSchedule,
                       seed: int) -> list:
    """Two-step phase one: VAE (encoder + decoder) trained on hyperspectral data.

    data: (n, B) spectra for P2P; (n, B, H, W) cubes for FC-VAE.
    Returns the per-epoch training log.
    """
    if model.formulation != "two-step":
        raise ValueError("pretraining applies to the two-step formulation only")
    log = _train_loop(model, model.encoder, data, data, schedule, seed,
                      update_decoder=True, spatial=model.family == "fcvae",
                      sample_latent=True)
    model.meta["pretrained"] = True
    return log


def train_interpolator(model: VaeEmulator, inputs, targets,
                       schedule: TrainSchedule, seed: int) -> list:
    """Two-step phase two: parameter-to-latent interpolator against the frozen decoder."""
    if not model.meta.get("pretrained"):
        raise ValueError("decoder must be pretrained before interpolator training")
    model.decoder_frozen = True
    return _train_loop(model, model.interpolator, inputs, targets, schedule, seed,
                       update_decoder=False, spatial=model.family == "fcvae",
                       sample_latent=False)


def train_one_step(model: VaeEmulator, inputs, targets,
                   schedule: TrainSchedule, seed: int) -> list:
    """Joint interpolator + decoder optimization; the encoder plays no part."""
    return _train_loop(model, model.interpolator, inputs, targets, schedule, seed,
                       update_decoder=True, spatial=model.family == "fcvae",
                       sample_latent=False)


def _train_loop(model: VaeEmulator, front: GaussianHead, inputs, targets,
                schedule: TrainSchedule, seed: int, update_decoder: bool,
                spatial: bool, sample_latent: bool) -> list:
    """Shared optimization loop.

    VAE pretraining samples z via the reparameterization trick; the emulation
    phases (one-step and interpolator) optimize at z = mu with the KL term
    still active, matching the deterministic mean-mode emulation they are
    evaluated with. Sampled z in those phases leaves a gradient-noise floor
    that caps reconstruction quality well below the classical baselines.
    """
    inputs = np.asarray(inputs, dtype=np.float64)
    targets = np.asarray(targets, dtype=np.float64)
    params = front.params() + (model.decoder.params() if update_decoder else [])
    state = nk.AdamState.for_params(params)
    rng = np.random.default_rng(seed)
    n = inputs.shape[0]
    log = []
    for epoch in range(schedule.epochs):
        lr = lr_at(epoch, schedule.base_lr, schedule.lr_reset_period)
        beta = kl_weight(epoch, schedule.kl_cycle, schedule.kl_beta_max)
        patch = 0
        if spatial:
            patch = min(patch_size_at(epoch, schedule.patch_start, schedule.patch_cap),
                        inputs.shape[2], inputs.shape[3])
        ep_tot = ep_rec = ep_kl = 0.0
        batches = _epoch_batches(n, schedule.batch_size, rng)
        for idx in batches:
            xb, tb = inputs[idx], targets[idx]
            if spatial:
                i0 = rng.integers(0, inputs.shape[2] - patch + 1)
                j0 = rng.integers(0, inputs.shape[3] - patch + 1)
                xb = xb[:, :, i0:i0 + patch, j0:j0 + patch]
                tb = tb[:, :, i0:i0 + patch, j0:j0 + patch]
            shape = _latent_shape(model, xb)
            eps = rng.standard_normal(shape) if sample_latent else np.zeros(shape)
            front.zero_grads()
            for g in model.decoder.grads():
                g[...] = 0.0
            total, recon, kl = vae_step_backward(
                front, model.decoder, xb, tb, beta, eps, update_decoder)
            grads = front.grads() + (model.decoder.grads() if update_decoder else [])
            nk.adam_step(params, grads, state, lr)
            ep_tot += total
            ep_rec += recon
            ep_kl += kl
        nb = max(len(batches), 1)
        log.append(_log_row(epoch, lr, beta, patch,
                            ep_rec / nb, ep_kl / nb, ep_tot / nb))
    return log


def _latent_shape(model: VaeEmulator, batch: np.ndarray) -> tuple:
    z = model.latent_dim
    if model.family == "p2p":
        return (batch.shape[0], z)
    down = 2 ** model.arch["n_down"]
    return (batch.shape[0], z, batch.shape[2] // down, batch.shape[3] // down)


# ---------------------------------------------------------------- emulation

def emulate(model: VaeEmulator, pmap: ParameterMap, wavelengths_nm: np.ndarray,
            mode: str = "mean", seed: int = 0) -> HyperspectralCube:
    """Emulate a cube from a parameter map; 'mean' uses z = mu, 'sample' draws
    reparameterized noise from the given seed."""
    if mode not in ("mean", "sample"):
        raise ValueError("mode must be 'mean' or 'sample'")
    vals = pmap.values.astype(np.float64)
    if model.meta.get("input_ranges"):
        # interpolator was trained on range-normalized parameters
        for p, (lo, hi) in enumerate(model.meta["input_ranges"]):
            vals[:, :, p] = (vals[:, :, p] - lo) / (hi - lo)
    if model.family == "p2p":
        x = vals.reshape(-1, pmap.n_params)
    else:
        x = vals.transpose(2, 0, 1)[None]
    code = model.interpolator.forward(x)
    if mode == "mean":
        z = code.mu
    else:
        eps = np.random.default_rng(seed).standard_normal(code.mu.shape)
        z = reparameterize(code, eps)
    out = model.decoder.forward(z)
    if model.family == "p2p":
        vals = out.reshape(pmap.height, pmap.width, -1)
    else:
        vals = out[0].transpose(1, 2, 0)
    return HyperspectralCube(wavelengths_nm, np.clip(vals, 0.0, 1.0).astype(np.float32))
