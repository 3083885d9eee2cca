"""GSAAL: one full-space generator against k subspace detectors.

Training has two phases. While ``epoch < stop_epoch`` every batch updates
the detectors (gradient ascent on their log-likelihood objective) and then
the generator (gradient descent on the mean of ``log(1 - D_j)`` over
detectors). From ``stop_epoch`` on the generator is frozen and only the
detectors keep learning. A detector whose epoch loss has left the band
``|loss - ln 2| < early_stop_tol`` at least once and then stays inside it
for ``early_stop_patience`` consecutive epochs is frozen for the rest of
the run.

The outlier score is ``1 - mean_i D_i(project(mask_i, x))`` on z-scored
inputs, so larger means more anomalous.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import ParseError, ShapeError, TrainingError
from .nn import (
    Activation,
    Direction,
    Mlp,
    SgdConfig,
    backward,
    bce_loss,
    forward,
    init_weights,
    sgd_step,
)
from .subspace import MaskSet, SubspaceMask, project

logger = logging.getLogger(__name__)

LN2 = math.log(2.0)
FORMAT_VERSION = 1
STD_FLOOR = 1e-9
MIN_DETECTOR_WIDTH = 4
SCORE_CHUNK = 512

JOINT = "joint"
ACTIVE_LEARNING = "active_learning"


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 500
    stop_epoch: int | None = None
    detector_lr: float = 0.01
    generator_lr: float = 0.001
    batch_size: int = 500
    early_stop_tol: float = 0.02
    early_stop_patience: int = 5
    generator_spread: float = 1.5
    seed: int = 42

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError(f"epochs must be >= 1, got {self.epochs}")
        if self.stop_epoch is None:
            object.__setattr__(self, "stop_epoch", max(1, int(0.8 * self.epochs)))
        if not 1 <= self.stop_epoch <= self.epochs:
            raise ValueError(f"stop_epoch must be in [1, epochs], got {self.stop_epoch}")
        if not (self.detector_lr > 0 and self.generator_lr > 0):
            raise ValueError("learning rates must be positive")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if not (self.early_stop_tol > 0 and self.early_stop_patience > 0):
            raise ValueError("early-stop tolerance and patience must be positive")
        if not self.generator_spread > 0:
            raise ValueError("generator_spread must be positive")


@dataclass
class TrainTrace:
    """Per-epoch record of a :func:`fit` run.

    ``generator_loss`` is the generator's objective, the detector mean of
    ``mean log(1 - D_j(u_j G(z)))``; it equals ``-ln 2`` at equilibrium.
    ``detector_loss[e, j]`` is detector ``j``'s mean BCE over real and
    generated points, ``ln 2`` at equilibrium.
    """

    generator_loss: list[float] = field(default_factory=list)
    detector_loss: list[np.ndarray] = field(default_factory=list)
    phase: list[str] = field(default_factory=list)
    detectors_frozen: list[np.ndarray] = field(default_factory=list)

    def __len__(self):
        return len(self.phase)

    def to_rows(self) -> list[dict]:
        rows = []
        for e in range(len(self)):
            row = {"epoch": e, "phase": self.phase[e], "generator_loss": self.generator_loss[e]}
            for j, (loss, frozen) in enumerate(zip(self.detector_loss[e], self.detectors_frozen[e])):
                row[f"detector_{j}_loss"] = float(loss)
                row[f"detector_{j}_frozen"] = int(frozen)
            rows.append(row)
        return rows


@dataclass(frozen=True)
class GsaalModel:
    generator: Mlp
    detectors: tuple[tuple[SubspaceMask, Mlp], ...]
    norm_mean: np.ndarray
    norm_std: np.ndarray
    d: int
    n_train: int

    def __post_init__(self):
        object.__setattr__(self, "detectors", tuple(tuple(p) for p in self.detectors))
        object.__setattr__(self, "norm_mean", np.asarray(self.norm_mean, dtype=np.float64))
        object.__setattr__(self, "norm_std", np.asarray(self.norm_std, dtype=np.float64))
        if not self.detectors:
            raise ValueError("model needs at least one detector")
        for mask, net in self.detectors:
            if mask.dimension != self.d:
                raise ShapeError(f"mask {mask} does not have length d={self.d}")
            if net.input_dim != mask.popcount:
                raise ShapeError(f"detector input_dim {net.input_dim} != popcount {mask.popcount}")
        if self.norm_mean.shape != (self.d,) or self.norm_std.shape != (self.d,):
            raise ShapeError("normalisation vectors must have length d")
        if np.any(self.norm_std <= 0):
            raise ValueError("norm_std entries must be positive")

    @property
    def k(self) -> int:
        return len(self.detectors)

    @property
    def masks(self) -> MaskSet:
        return MaskSet(tuple(m for m, _ in self.detectors), self.d)

    def normalize(self, points: np.ndarray) -> np.ndarray:
        return (points - self.norm_mean) / self.norm_std


def detector_width(n: int) -> int:
    return max(MIN_DETECTOR_WIDTH, math.isqrt(n))


def sample_noise(count: int, d: int, rng: np.random.Generator) -> np.ndarray:
    """Uniform [0, 1) latent samples, one row per requested point."""
    if count < 1:
        raise ValueError(f"count must be >= 1, got {count}")
    return rng.random((count, d))


def calibrate_generator(net: Mlp, rng: np.random.Generator, spread: float, probe: int = 4096) -> Mlp:
    """Data-dependent initialisation of the generator over its own noise.

    Layer by layer, every unit's pre-activation on a probe batch of latent
    noise is shifted and scaled to zero mean and unit variance. Hidden ReLUs
    then fire on about half the noise space instead of being always on or
    always off. The output layer is whitened so generated samples start
    centred with covariance ``spread**2 * I`` in z-scored space.
    """
    a = sample_noise(probe, net.input_dim, rng)
    layers = []
    for w in net.layer_weights[:-1]:
        w = w.copy()
        pre = a @ w[:-1] + w[-1]
        mu, sd = pre.mean(axis=0), pre.std(axis=0)
        gain = 1.0 / np.where(sd > 0, sd, 1.0)
        w[:-1] *= gain
        w[-1] = (w[-1] - mu) * gain
        layers.append(w)
        a = np.maximum((pre - mu) * gain, 0.0)
    # whiten the output so the generated cloud starts isotropic
    w = net.layer_weights[-1].copy()
    out = a @ w[:-1] + w[-1]
    mu = out.mean(axis=0)
    evals, evecs = np.linalg.eigh(np.cov(out, rowvar=False).reshape(out.shape[1], out.shape[1]))
    evals = np.maximum(evals, 1e-6 * max(evals.max(), 1e-12))
    transform = spread * (evecs / np.sqrt(evals)) @ evecs.T
    w[:-1] = w[:-1] @ transform
    w[-1] = (w[-1] - mu) @ transform
    layers.append(w)
    return replace(net, layer_weights=tuple(layers))


def _normalisation(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    mean = x.mean(axis=0)
    std = x.std(axis=0)
    std[std < STD_FLOOR] = 1.0
    return mean, std


def fit(data: np.ndarray, masks: MaskSet, cfg: TrainConfig | None = None):
    """Train a GSAAL model on inlier data.

    Args:
        data: ``(n, d)`` training matrix, n >= 2, d >= 2.
        masks: one subspace per detector, ``masks.dimension == d``.
        cfg: training settings; defaults to :class:`TrainConfig()`.

    Returns:
        ``(GsaalModel, TrainTrace)``.

    Raises:
        TrainingError: a loss became non-finite; carries epoch and detector.
    """
    cfg = cfg or TrainConfig()
    x_raw = np.asarray(data, dtype=np.float64)
    if x_raw.ndim != 2:
        raise ShapeError(f"data must be a matrix, got shape {x_raw.shape}")
    n, d = x_raw.shape
    if n < 2 or d < 2:
        raise ShapeError(f"need n >= 2 and d >= 2, got n={n}, d={d}")
    if masks.dimension != d:
        raise ShapeError(f"masks have dimension {masks.dimension}, data has {d} columns")
    if not np.all(np.isfinite(x_raw)):
        raise ValueError("training data contains non-finite values")

    mean, std = _normalisation(x_raw)
    x = (x_raw - mean) / std

    gen_seq, det_seq, loop_seq = np.random.SeedSequence(cfg.seed).spawn(3)
    width = detector_width(n)
    gen_rng = np.random.default_rng(gen_seq)
    generator = init_weights(d, d, d, Activation.LINEAR, gen_rng)
    generator = calibrate_generator(generator, gen_rng, cfg.generator_spread)
    k = len(masks)
    detectors = [
        init_weights(m.popcount, width, 1, Activation.SIGMOID, np.random.default_rng(s))
        for m, s in zip(masks, det_seq.spawn(k))
    ]
    cols = [m.indices for m in masks]
    det_cfg = SgdConfig(cfg.detector_lr, cfg.batch_size, cfg.seed)
    gen_cfg = SgdConfig(cfg.generator_lr, cfg.batch_size, cfg.seed)
    rng = np.random.default_rng(loop_seq)
    batch = min(cfg.batch_size, n)

    frozen = np.zeros(k, dtype=bool)
    streak = np.zeros(k, dtype=int)
    departed = np.zeros(k, dtype=bool)
    trace = TrainTrace()

    for epoch in range(cfg.epochs):
        joint = epoch < cfg.stop_epoch
        order = rng.permutation(n)
        det_loss_sum = np.zeros(k)
        gen_loss_sum = 0.0
        n_batches = 0
        for start in range(0, n, batch):
            real = x[order[start : start + batch]]
            m = real.shape[0]
            z = sample_noise(m, d, rng)
            if joint:
                fake, gen_cache = forward(generator, z, keep_cache=True)
            else:
                fake = forward(generator, z)
            labels = np.concatenate([np.ones(m), np.zeros(m)])

            for j in range(k):
                both = np.concatenate([real[:, cols[j]], fake[:, cols[j]]])
                if frozen[j]:
                    p = forward(detectors[j], both)
                    det_loss_sum[j] += bce_loss(p, labels)
                    continue
                p, cache = forward(detectors[j], both, keep_cache=True)
                det_loss_sum[j] += bce_loss(p, labels)
                # d/dp of (1/m) sum[log D(real) + log(1 - D(fake))]
                grad = np.empty_like(p)
                grad[:m] = 1.0 / (m * p[:m])
                grad[m:] = -1.0 / (m * (1.0 - p[m:]))
                grads, _ = backward(detectors[j], cache, grad)
                detectors[j] = sgd_step(detectors[j], grads, det_cfg, Direction.ASCEND)

            grad_fake = np.zeros_like(fake) if joint else None
            gen_obj = 0.0
            for j in range(k):
                if joint:
                    p, cache = forward(detectors[j], fake[:, cols[j]], keep_cache=True)
                else:
                    p = forward(detectors[j], fake[:, cols[j]])
                gen_obj += float(np.mean(np.log1p(-p))) / k
                if joint:
                    _, g_in = backward(detectors[j], cache, -1.0 / (k * m * (1.0 - p)))
                    grad_fake[:, cols[j]] += g_in
            gen_loss_sum += gen_obj
            if joint:
                grads, _ = backward(generator, gen_cache, grad_fake)
                generator = sgd_step(generator, grads, gen_cfg, Direction.DESCEND)
            n_batches += 1

        det_loss = det_loss_sum / n_batches
        gen_loss = gen_loss_sum / n_batches
        bad = np.flatnonzero(~np.isfinite(det_loss))
        if bad.size:
            j = int(bad[0])
            raise TrainingError(f"detector {j} loss is not finite at epoch {epoch}", epoch=epoch, detector=j)
        if not math.isfinite(gen_loss):
            raise TrainingError(f"generator loss is not finite at epoch {epoch}", epoch=epoch)

        # an untrained detector also sits near ln 2, so the band only counts
        # once the detector has left it at least once
        near = np.abs(det_loss - LN2) < cfg.early_stop_tol
        departed |= ~near
        streak = np.where(near & departed & ~frozen, streak + 1, 0)
        newly = ~frozen & (streak >= cfg.early_stop_patience)
        if newly.any():
            logger.debug("epoch %d: freezing detectors %s", epoch, np.flatnonzero(newly).tolist())
        frozen = frozen | newly

        trace.generator_loss.append(gen_loss)
        trace.detector_loss.append(det_loss)
        trace.phase.append(JOINT if joint else ACTIVE_LEARNING)
        trace.detectors_frozen.append(frozen.copy())

    model = GsaalModel(
        generator=generator,
        detectors=tuple(zip(masks, detectors)),
        norm_mean=mean,
        norm_std=std,
        d=d,
        n_train=n,
    )
    return model, trace


def detector_outputs(model: GsaalModel, points: np.ndarray) -> np.ndarray:
    """``(m, k)`` matrix of detector outputs on raw-space points."""
    x = np.asarray(points, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != model.d:
        raise ShapeError(f"points have shape {x.shape}, model expects {model.d} columns")
    out = np.empty((x.shape[0], model.k))
    # fixed-size chunks keep the hidden activations small and cache-resident
    for start in range(0, x.shape[0], SCORE_CHUNK):
        z = model.normalize(x[start : start + SCORE_CHUNK])
        for j, (mask, net) in enumerate(model.detectors):
            out[start : start + SCORE_CHUNK, j] = forward(net, project(mask, z))[:, 0]
    return out


def score(model: GsaalModel, points: np.ndarray) -> np.ndarray:
    """Outlier scores ``1 - mean_i D_i``, in [0, 1], larger = more outlying."""
    x = np.asarray(points, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != model.d:
        raise ShapeError(f"points have shape {x.shape}, model expects {model.d} columns")
    if x.shape[0] == 0:
        return np.empty(0)
    return 1.0 - detector_outputs(model, x).mean(axis=1)


def score_grid(model: GsaalModel, grid_x1, grid_x2) -> np.ndarray:
    """Scores at ``(x1, x2, 0, ..., 0)``; entry ``[i, j]`` is ``(grid_x1[i], grid_x2[j])``."""
    g1 = np.asarray(grid_x1, dtype=np.float64).ravel()
    g2 = np.asarray(grid_x2, dtype=np.float64).ravel()
    pts = np.zeros((g1.size * g2.size, model.d))
    pts[:, 0] = np.repeat(g1, g2.size)
    pts[:, 1] = np.tile(g2, g1.size)
    return score(model, pts).reshape(g1.size, g2.size)


# --- persistence -----------------------------------------------------------


def _net_to_dict(net: Mlp) -> dict:
    return {
        "input_dim": net.input_dim,
        "layer_width": net.layer_width,
        "output_activation": net.output_activation.value,
        "layers": [w.tolist() for w in net.layer_weights],
    }


def _net_from_dict(obj: dict) -> Mlp:
    return Mlp(
        tuple(np.array(w, dtype=np.float64) for w in obj["layers"]),
        Activation(obj["output_activation"]),
        int(obj["input_dim"]),
        int(obj["layer_width"]),
    )


def model_to_dict(model: GsaalModel) -> dict:
    return {
        "format_version": FORMAT_VERSION,
        "d": model.d,
        "n_train": model.n_train,
        "norm_mean": model.norm_mean.tolist(),
        "norm_std": model.norm_std.tolist(),
        "masks": [m.to_string() for m, _ in model.detectors],
        "generator": _net_to_dict(model.generator),
        "detectors": [_net_to_dict(net) for _, net in model.detectors],
    }


def model_from_dict(obj: dict) -> GsaalModel:
    version = obj.get("format_version")
    if version != FORMAT_VERSION:
        raise ParseError(f"unsupported model format_version {version!r}")
    try:
        masks = [SubspaceMask.from_string(s) for s in obj["masks"]]
        nets = [_net_from_dict(o) for o in obj["detectors"]]
        if len(masks) != len(nets):
            raise ParseError(f"{len(masks)} masks but {len(nets)} detectors")
        return GsaalModel(
            generator=_net_from_dict(obj["generator"]),
            detectors=tuple(zip(masks, nets)),
            norm_mean=np.array(obj["norm_mean"], dtype=np.float64),
            norm_std=np.array(obj["norm_std"], dtype=np.float64),
            d=int(obj["d"]),
            n_train=int(obj["n_train"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, ParseError):
            raise
        raise ParseError(f"malformed model document: {exc}") from exc


def dumps_model(model: GsaalModel) -> str:
    return json.dumps(model_to_dict(model), separators=(",", ":")) + "\n"


def save_model(model: GsaalModel, path: str | Path) -> None:
    Path(path).write_text(dumps_model(model), encoding="utf-8")


def load_model(path: str | Path) -> GsaalModel:
    try:
        obj = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: not valid JSON ({exc})") from exc
    return model_from_dict(obj)
