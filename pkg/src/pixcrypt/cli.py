"""Command-line entry point: ``pixcrypt <subcommand> [flags]``.

Exit status is 0 on success, 1 on a domain or I/O error and 2 on a usage
error. Diagnostics go to stderr; data (CSV) goes to stdout or ``--report``.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path
from typing import List, Optional, Sequence

from pixcrypt import attack, harness, keyspace, metrics
from pixcrypt.cipher import EncryptionConfig, decrypt, encrypt
from pixcrypt.errors import PixcryptError
from pixcrypt.image_io import center_crop, load_ppm, save_ppm, stack
from pixcrypt.keygen import KeyPolicy, MasterKey, derive_keystream, parse_seed

log = logging.getLogger("pixcrypt")


def _seed(text: str) -> int:
    try:
        return parse_seed(text)
    except PixcryptError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _positive(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be positive: {text!r}")
    return value


def _add_threads(p: argparse.ArgumentParser) -> None:
    p.add_argument("--threads", type=_positive, default=1, help="worker threads (results do not depend on it)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pixcrypt", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="count", default=0, help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", required=True)

    for name in ("encrypt", "decrypt"):
        p = sub.add_parser(name, help=f"{name} a binary PPM image")
        p.add_argument("--in", dest="input", required=True, type=Path)
        p.add_argument("--out", required=True, type=Path)
        p.add_argument("--seed", required=True, type=_seed, help="64-bit master key, decimal or 0x-hex")
        p.add_argument("--image-index", type=int, default=0)
        p.add_argument("--shuffle", action="store_true", help="enable color-component shuffling")

    p = sub.add_parser("keyspace", help="print the brute-force key space as CSV")
    p.add_argument("--width", required=True, type=_positive)
    p.add_argument("--height", required=True, type=_positive)
    p.add_argument("--shuffle", action="store_true")

    p = sub.add_parser("attack-train", help="train the reconstruction attack")
    p.add_argument("--train-dir", required=True, help="directory of .ppm files, STL-10 .bin file, or 'synthetic[:seed]'")
    p.add_argument("--seed", required=True, type=_seed)
    p.add_argument("--policy", choices=[k.value for k in KeyPolicy], default="same")
    p.add_argument("--shuffle", action="store_true")
    p.add_argument("--epochs", type=_positive, default=70)
    p.add_argument("--out", required=True, type=Path)
    p.add_argument("--count", type=_positive, default=5000, help="number of training images")
    p.add_argument("--crop", type=_positive)
    p.add_argument("--batch-size", type=_positive, default=128)
    p.add_argument("--lr", type=float, default=0.1)
    p.add_argument("--train-seed", type=_seed, default=0, help="seed for mini-batch order")
    p.add_argument("--init-seed", type=_seed, default=0, help="seed for weight initialization")
    p.add_argument("--m1", type=_positive, default=8)
    p.add_argument("--m2", type=_positive, default=32)
    _add_threads(p)

    p = sub.add_parser("attack-eval", help="reconstruct encrypted test images and score them")
    p.add_argument("--net", required=True, type=Path)
    p.add_argument("--test-dir", required=True)
    p.add_argument("--report", type=Path, help="CSV output path (default: stdout)")
    p.add_argument("--dump-dir", type=Path)
    p.add_argument("--dump-count", type=int, default=4)
    p.add_argument("--seed", required=True, type=_seed)
    p.add_argument("--policy", choices=[k.value for k in KeyPolicy], default="same")
    p.add_argument("--shuffle", action="store_true")
    p.add_argument("--count", type=_positive, default=8000)
    p.add_argument("--crop", type=_positive)
    _add_threads(p)

    p = sub.add_parser("experiment", help="run the key-policy comparison end to end")
    p.add_argument("--config", type=Path, help="key = value configuration file")
    p.add_argument("--report", type=Path, help="CSV output path (default: stdout)")
    p.add_argument("--shuffle", action="store_true", help="only the flip+shuffle cipher")
    for key in harness.CONFIG_KEYS:
        if key == "shuffle":
            continue
        flags = {f"--{key}", f"--{key.replace('_', '-')}"}
        p.add_argument(*sorted(flags), dest=key, metavar=key.upper())
    return parser


def parse_args(argv: Optional[Sequence[str]] = None) -> argparse.Namespace:
    return build_parser().parse_args(argv)


def _cmd_crypt(args) -> None:
    img = load_ppm(args.input)
    ks = derive_keystream(MasterKey(args.seed), args.image_index, img.width, img.height)
    cfg = EncryptionConfig(args.shuffle)
    fn = encrypt if args.command == "encrypt" else decrypt
    save_ppm(fn(img, ks, cfg), args.out)


def _cmd_keyspace(args) -> None:
    n = keyspace.pixel_count(args.width, args.height)
    rep = keyspace.keyspace_bits(n, EncryptionConfig(args.shuffle))
    print(keyspace.CSV_HEADER)
    print(rep.csv_row())


def _load_images(source: str, count: int, crop: Optional[int]):
    images = harness.load_source(source, count)
    if not images:
        raise PixcryptError(f"no images found in {source}")
    if crop is not None:
        images = [center_crop(img, crop) for img in images]
    return images


def _cmd_train(args) -> None:
    images = _load_images(args.train_dir, args.count, args.crop)
    policy = KeyPolicy.parse(args.policy)
    enc, _ = harness.encrypt_dataset(images, MasterKey(args.seed), policy, EncryptionConfig(args.shuffle))
    plain = stack(images)
    cfg = attack.TrainConfig(
        epochs=args.epochs,
        base_lr=args.lr,
        lr_drop_epochs=harness.scaled_lr_drops(args.epochs),
        batch_size=args.batch_size,
        seed=args.train_seed,
    )
    net = attack.init_network(plain.shape[2], plain.shape[1], attack.ArchConfig(args.m1, args.m2), args.init_seed)
    attack.train(
        net,
        (stack(enc), plain),
        cfg,
        threads=args.threads,
        on_epoch=lambda e, loss: log.info("epoch %d loss %.6f", e, loss),
    )
    net.save(args.out)


def _cmd_eval(args) -> None:
    net = attack.AttackNetwork.load(args.net)
    images = _load_images(args.test_dir, args.count, args.crop)
    policy = KeyPolicy.parse(args.policy)
    cipher_cfg = EncryptionConfig(args.shuffle)
    enc, _ = harness.encrypt_dataset(
        images, MasterKey(args.seed), policy, cipher_cfg, offset=harness.TEST_INDEX_OFFSET
    )
    recon = attack.reconstruct(net, stack(enc), threads=args.threads)
    row = harness.ReportRow(
        policy=policy.value,
        steps=cipher_cfg.steps,
        mean_ssim=sum(metrics.ssim(r, t) for r, t in zip(recon, images)) / len(images),
        mean_mse=sum(metrics.mse_image(r, t) for r, t in zip(recon, images)) / len(images),
        mean_psnr=sum(metrics.psnr(r, t) for r, t in zip(recon, images)) / len(images),
        n_test=len(images),
    )
    _emit(harness.format_report(harness.ExperimentReport([row])), args.report)
    if args.dump_dir is not None:
        harness.dump_reconstructions(args.dump_dir, f"{row.policy}_{row.steps}", images, enc, recon, args.dump_count)


def _cmd_experiment(args) -> None:
    overrides = {
        k: getattr(args, k) for k in harness.CONFIG_KEYS if k != "shuffle" and getattr(args, k) is not None
    }
    if args.shuffle:
        overrides["shuffle"] = "yes"
    values = harness.read_config_file(args.config) if args.config else {}
    values.update(overrides)
    cfg = harness.config_from_mapping(values)
    rep = harness.run_experiment(cfg)
    if args.report is not None:
        harness.write_report(rep, args.report)
    else:
        sys.stdout.write(harness.format_report(rep))


def _emit(text: str, path: Optional[Path]) -> None:
    if path is None:
        sys.stdout.write(text)
    else:
        path.write_text(text)


COMMANDS = {
    "encrypt": _cmd_crypt,
    "decrypt": _cmd_crypt,
    "keyspace": _cmd_keyspace,
    "attack-train": _cmd_train,
    "attack-eval": _cmd_eval,
    "experiment": _cmd_experiment,
}


def main(argv: Optional[List[str]] = None) -> int:
    try:
        args = parse_args(argv)
    except SystemExit as exc:  # argparse: 0 for --help, 2 for usage errors
        return int(exc.code or 0)
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2),
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        COMMANDS[args.command](args)
    except (PixcryptError, OSError) as exc:
        print(f"pixcrypt {args.command}: error: {exc}", file=sys.stderr)
        return 1
    return 0


def run() -> None:
    sys.exit(main())
