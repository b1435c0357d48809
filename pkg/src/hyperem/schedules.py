"""Training schedules: cyclic KL annealing, exponential-reset LR, spatial curriculum."""

from __future__ import annotations

from dataclasses import dataclass

BASE_LR = 1e-4
LR_RESET_PERIOD = 35
KL_BETA_MAX = 1e-3
KL_CYCLE_P2P = 50
KL_CYCLE_FCVAE = 15
PATCH_START = 8
PATCH_CAP = 128
PATCH_DOUBLE_EVERY = 100


@dataclass(frozen=True)
class TrainSchedule:
    epochs: int
    base_lr: float = BASE_LR
    lr_reset_period: int = LR_RESET_PERIOD
    kl_beta_max: float = KL_BETA_MAX
    kl_cycle: int = KL_CYCLE_P2P
    batch_size: int = 64
    patch_start: int = PATCH_START
    patch_cap: int = PATCH_CAP

    def __post_init__(self):
        if min(self.epochs, self.lr_reset_period, self.kl_cycle,
               self.batch_size, self.patch_start, self.patch_cap) < 0:
            raise ValueError("schedule fields must be nonnegative")
        for p in (self.patch_start, self.patch_cap):
            if p & (p - 1):
                raise ValueError("curriculum patch sizes must be powers of two")


def kl_weight(epoch: int, cycle: int = KL_CYCLE_P2P,
              beta_max: float = KL_BETA_MAX) -> float:
    """Linear ramp over the first half-cycle, hold at beta_max, reset each cycle."""
    phase = epoch % cycle
    return beta_max * min(1.0, 2.0 * phase / cycle)


def lr_at(epoch: int, base_lr: float = BASE_LR,
          period: int = LR_RESET_PERIOD) -> float:
    """One decade of exponential decay per cycle, reset to base_lr."""
    return base_lr * 10.0 ** (-(epoch % period) / period)


def patch_size_at(epoch: int, start: int = PATCH_START, cap: int = PATCH_CAP,
                  double_every: int = PATCH_DOUBLE_EVERY) -> int:
    doublings = epoch // double_every
    size = start << doublings if doublings < 64 else cap
    return min(size, cap)
