"""End-to-end experiment: encrypt under a key policy, train the attack, score reconstructions."""

from __future__ import annotations

import csv
import io
import logging
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from pixcrypt import attack, metrics
from pixcrypt.attack import ArchConfig, TrainConfig
from pixcrypt.cipher import EncryptionConfig, encrypt
from pixcrypt.errors import ArgumentError
from pixcrypt.image_io import Image, center_crop, load_ppm, load_stl10, save_ppm, stack
from pixcrypt.keygen import KeyPolicy, Keystream, MasterKey, derive_keystream, keys_for_dataset, parse_seed
from pixcrypt.synthetic import synthetic_images

log = logging.getLogger(__name__)

# Per-image test keys start here, far above any training index.
TEST_INDEX_OFFSET = 1 << 32

REPORT_HEADER = ("policy", "steps", "mean_ssim", "mean_mse", "mean_psnr", "n_test")



def scaled_lr_drops(epochs: int) -> Tuple[int, ...]:
    """Learning-rate drops at 4/7 and 6/7 of training (epochs 40 and 60 of 70)."""
    return tuple(sorted({d for d in (round(epochs * 4 / 7), round(epochs * 6 / 7)) if 0 < d < epochs}))


DESK_TRAIN = TrainConfig(epochs=30, base_lr=0.01, batch_size=1, lr_drop_epochs=scaled_lr_drops(30))


@dataclass(frozen=True)
class ExperimentConfig:
    train_count: int = 200
    test_count: int = 50
    crop: Optional[int] = 32
    policies: Tuple[KeyPolicy, ...] = (KeyPolicy.SAME_KEY, KeyPolicy.PER_IMAGE_KEYS)
    ciphers: Tuple[EncryptionConfig, ...] = (EncryptionConfig(False), EncryptionConfig(True))
    arch: ArchConfig = ArchConfig()
    train_cfg: TrainConfig = DESK_TRAIN
    master: MasterKey = MasterKey(0)
    init_seed: int = 0
    train_data: str = "synthetic"
    test_data: Optional[str] = None
    null_cipher: bool = False
    threads: int = 1
    dump_dir: Optional[str] = None
    dump_count: int = 4

    def __post_init__(self):
        if self.train_count < 1 or self.test_count < 1:
            raise ArgumentError("train_count and test_count must be at least 1")
        if self.crop is not None and self.crop < 11:
            raise ArgumentError("crop must be at least 11 pixels (the SSIM window)")
        if not self.policies or not self.ciphers:
            raise ArgumentError("at least one key policy and one cipher setting are required")

    def cells(self) -> List[Tuple[str, Optional[KeyPolicy], EncryptionConfig]]:
        if self.null_cipher:
            return [("null", None, EncryptionConfig(False))]
        return [(p.value, p, c) for p in self.policies for c in self.ciphers]


@dataclass
class ReportRow:
    policy: str
    steps: str
    mean_ssim: float
    mean_mse: float
    mean_psnr: float
    n_test: int


@dataclass
class ExperimentReport:
    rows: List[ReportRow]
    loss_history: Dict[Tuple[str, str], List[float]] = field(default_factory=dict)
    dumps: List[Path] = field(default_factory=list)


# --- datasets ---------------------------------------------------------------

def load_source(source: str, count: int, skip: int = 0) -> List[Image]:
    if source == "synthetic" or source.startswith("synthetic:"):
        seed = parse_seed(source.split(":", 1)[1]) if ":" in source else 0
        return synthetic_images(skip + count, seed=seed)[skip:]
    path = Path(source)
    if path.is_dir():
        files = sorted(path.glob("*.ppm"))[skip:skip + count]
        return [load_ppm(f) for f in files]
    if path.suffix == ".bin":
        return load_stl10(path, skip + count)[skip:]
    raise ArgumentError(f"unrecognized dataset source {source!r}")


def load_datasets(cfg: ExperimentConfig) -> Tuple[List[Image], List[Image]]:
    """Train and test images; without ``test_data`` the test set follows the training images."""
    if cfg.test_data is None:
        train = load_source(cfg.train_data, cfg.train_count)
        test = load_source(cfg.train_data, cfg.test_count, skip=cfg.train_count)
    else:
        train = load_source(cfg.train_data, cfg.train_count)
        test = load_source(cfg.test_data, cfg.test_count)
    if len(train) < cfg.train_count or len(test) < cfg.test_count:
        raise ArgumentError(
            f"dataset too small: got {len(train)} train / {len(test)} test images, "
            f"need {cfg.train_count} / {cfg.test_count}"
        )
    if cfg.crop is not None:
        train = [center_crop(img, cfg.crop) for img in train]
        test = [center_crop(img, cfg.crop) for img in test]
    return train, test


def encrypt_dataset(
    images: Sequence[Image],
    master: MasterKey,
    policy: Optional[KeyPolicy],
    cipher_cfg: EncryptionConfig,
    offset: int = 0,
) -> Tuple[List[Image], List[int]]:
    """Encrypt ``images`` and return them with the effective key index of each.

    ``policy=None`` is the null cipher: an all-zero keystream, index -1.
    """
    if policy is None:
        ks = Keystream.zeros(images[0].pixel_count)
        return [encrypt(img, ks, cipher_cfg) for img in images], [-1] * len(images)
    indices = keys_for_dataset(master, policy, len(images), offset)
    cache: Dict[int, Keystream] = {}
    out = []
    for img, idx in zip(images, indices):
        ks = cache.get(idx)
        if ks is None:
            ks = derive_keystream(master, idx, img.width, img.height)
            if policy is KeyPolicy.SAME_KEY:
                cache[idx] = ks
        out.append(encrypt(img, ks, cipher_cfg))
    return out, indices


# --- experiment ---------------------------------------------------------------

def run_experiment(cfg: ExperimentConfig) -> ExperimentReport:
    train_imgs, test_imgs = load_datasets(cfg)
    everything = stack(train_imgs + test_imgs)  # rejects mixed image sizes
    plain_train = everything[: len(train_imgs)]
    height, width = everything.shape[1:3]
    rows: List[ReportRow] = []
    report = ExperimentReport(rows)

    for label, policy, cipher_cfg in cfg.cells():
        log.info("cell policy=%s steps=%s", label, cipher_cfg.steps)
        enc_train, _ = encrypt_dataset(train_imgs, cfg.master, policy, cipher_cfg)
        enc_test, _ = encrypt_dataset(test_imgs, cfg.master, policy, cipher_cfg, offset=TEST_INDEX_OFFSET)

        net = attack.init_network(width, height, cfg.arch, cfg.init_seed)
        _, history = attack.train(
            net,
            (stack(enc_train), plain_train),
            cfg.train_cfg,
            threads=cfg.threads,
            on_epoch=lambda e, loss: log.debug("epoch %d loss %.6f", e, loss),
        )
        report.loss_history[(label, cipher_cfg.steps)] = history

        recon = attack.reconstruct(net, stack(enc_test), threads=cfg.threads)
        ssims = [metrics.ssim(r, t) for r, t in zip(recon, test_imgs)]
        mses = [metrics.mse_image(r, t) for r, t in zip(recon, test_imgs)]
        psnrs = [metrics.psnr(r, t) for r, t in zip(recon, test_imgs)]
        rows.append(
            ReportRow(
                policy=label,
                steps=cipher_cfg.steps,
                mean_ssim=float(np.mean(ssims)),
                mean_mse=float(np.mean(mses)),
                mean_psnr=float(np.mean(psnrs)),
                n_test=len(test_imgs),
            )
        )
        if cfg.dump_dir is not None:
            report.dumps += dump_reconstructions(
                Path(cfg.dump_dir), f"{label}_{cipher_cfg.steps}", test_imgs, enc_test, recon, cfg.dump_count
            )
    return report


def dump_reconstructions(
    out_dir: Path, prefix: str, originals, encrypted, reconstructed, count: int
) -> List[Path]:
    """Write original / encrypted / reconstructed PPM triplets for the first ``count`` test images."""
    out_dir.mkdir(parents=True, exist_ok=True)
    prefix = prefix.replace("+", "-")
    paths = []
    for i in range(min(count, len(originals))):
        for kind, img in (("orig", originals[i]), ("enc", encrypted[i]), ("recon", reconstructed[i])):
            path = out_dir / f"{prefix}_{i:05d}_{kind}.ppm"
            save_ppm(img, path)
            paths.append(path)
    return paths


# --- reporting ----------------------------------------------------------------

def _fmt(x: float) -> str:
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return f"{x:.6g}"


def format_report(rep: ExperimentReport) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(REPORT_HEADER)
    for r in rep.rows:
        writer.writerow([r.policy, r.steps, _fmt(r.mean_ssim), _fmt(r.mean_mse), _fmt(r.mean_psnr), r.n_test])
    return buf.getvalue()


def format_loss_history(rep: ExperimentReport) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(("policy", "steps", "epoch", "loss"))
    for (policy, steps), history in rep.loss_history.items():
        for epoch, loss in enumerate(history):
            writer.writerow([policy, steps, epoch, _fmt(loss)])
    return buf.getvalue()


def write_report(rep: ExperimentReport, path) -> None:
    """Write the summary CSV, plus ``<stem>_loss.csv`` holding per-epoch training loss."""
    path = Path(path)
    path.write_text(format_report(rep))
    path.with_name(path.stem + "_loss.csv").write_text(format_loss_history(rep))


# --- configuration files ---------------------------------------------------------

def read_config_file(path) -> Dict[str, str]:
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    values = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ArgumentError(f"{path}:{lineno}: expected 'key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        values[key.replace("-", "_")] = value
    return values


def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ArgumentError(f"not a boolean: {text!r}")


def _int_list(text: str) -> Tuple[int, ...]:
    text = text.strip()
    return tuple(int(x) for x in text.split(",") if x.strip()) if text else ()


def _policies(text: str) -> Tuple[KeyPolicy, ...]:
    if text.strip() in ("all", "both"):
        return (KeyPolicy.SAME_KEY, KeyPolicy.PER_IMAGE_KEYS)
    return tuple(KeyPolicy.parse(p.strip()) for p in text.split(",") if p.strip())


def _ciphers(text: str) -> Tuple[EncryptionConfig, ...]:
    t = text.strip().lower()
    if t in ("both", "all"):
        return (EncryptionConfig(False), EncryptionConfig(True))
    return (EncryptionConfig(_bool(t)),)


CONFIG_KEYS = (
    "train_count", "test_count", "crop", "policy", "shuffle", "m1", "m2", "m3",
    "epochs", "base_lr", "lr_drop_epochs", "lr_drop_factor", "momentum", "weight_decay",
    "batch_size", "train_seed", "per_pixel_loss", "seed", "init_seed", "train_data",
    "test_data", "null_cipher", "threads", "dump_dir", "dump_count",
)


def config_from_mapping(values: Mapping[str, str], base: ExperimentConfig = ExperimentConfig()) -> ExperimentConfig:
    unknown = set(values) - set(CONFIG_KEYS)
    if unknown:
        raise ArgumentError(f"unknown configuration keys: {', '.join(sorted(unknown))}")
    try:
        top = {}
        arch = {}
        tc = {}
        for key, value in values.items():
            if key in ("train_count", "test_count", "threads", "dump_count", "init_seed"):
                top[key] = parse_seed(value) if key == "init_seed" else int(value)
            elif key == "crop":
                top["crop"] = None if value.lower() in ("none", "0", "") else int(value)
            elif key == "policy":
                top["policies"] = _policies(value)
            elif key == "shuffle":
                top["ciphers"] = _ciphers(value)
            elif key in ("m1", "m2", "m3"):
                arch[key] = int(value)
            elif key in ("epochs", "batch_size"):
                tc[key] = int(value)
            elif key in ("base_lr", "lr_drop_factor", "momentum", "weight_decay"):
                tc[key] = float(value)
            elif key == "lr_drop_epochs":
                tc[key] = _int_list(value)
            elif key == "train_seed":
                tc["seed"] = parse_seed(value)
            elif key == "per_pixel_loss":
                tc[key] = _bool(value)
            elif key == "seed":
                top["master"] = MasterKey(parse_seed(value))
            elif key in ("train_data", "test_data", "dump_dir"):
                top[key] = value or None
            elif key == "null_cipher":
                top[key] = _bool(value)
    except ValueError as exc:
        raise ArgumentError(f"bad configuration value: {exc}") from None
    if arch:
        top["arch"] = replace(base.arch, **arch)
    if "epochs" in tc and "lr_drop_epochs" not in tc:
        tc["lr_drop_epochs"] = scaled_lr_drops(tc["epochs"])
    if tc:
        top["train_cfg"] = replace(base.train_cfg, **tc)
    return replace(base, **top)


def load_config(path, overrides: Optional[Mapping[str, str]] = None) -> ExperimentConfig:
    values = read_config_file(path)
    values.update(overrides or {})
    return config_from_mapping(values)
