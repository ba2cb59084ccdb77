"""Pretraining the two codec surrogates and measuring how well they imitate JPEG.

The ACN learns the JPEG decode-of-encode at one quality factor; BENet learns
the stream size in bits per pixel. Both train on random crops of the training
photographs and are scored on held-out tiles the networks never saw. Step
counts are small so the script finishes in a few minutes on one CPU core; the
acceptance suite uses longer runs.

Run: python demos/02_surrogates.py
"""

import tempfile
import time

import numpy as np

from acnf import codec
from acnf.data import RandomCropSource, load_image, write_tile_corpus
from acnf.training import TrainConfig, acn_imitation_psnr, benet_relative_error, pretrain_acn, pretrain_benet

QF = 10

with tempfile.TemporaryDirectory() as tmp:
    train_dir, held_dir = write_tile_corpus(tmp, tile=256, max_per_source=10)
    train = [load_image(p) for p in sorted(train_dir.iterdir())]
    held = [load_image(p) for p in sorted(held_dir.iterdir())]
print(f"{len(train)} training and {len(held)} held-out 256x256 tiles")

patches = np.stack([im[y : y + 128, x : x + 128] for im in held for y in (0, 128) for x in (0, 128)])
arts = [codec.encode(p, QF) for p in patches]
decoded = np.stack([codec.decode(a) for a in arts])
bpp = np.array([a.bit_count / p.size for a, p in zip(arts, patches)])
print(f"{len(patches)} held-out 128x128 patches, JPEG QF {QF}: mean {bpp.mean():.3f} bpp")

cfg = TrainConfig(qf=QF, patch_size=64, batch_size=16, networks={"BENet": {"width": 128}})

t = time.time()
acn = pretrain_acn(RandomCropSource(train, 64, QF), cfg, steps=800, lr=1e-3, cosine=True)
h_psnr, id_psnr = acn_imitation_psnr(acn, patches, decoded)
print(f"\nACN after 800 steps ({time.time() - t:.0f} s)")
print(f"  PSNR(x, JPEG(x))    = {id_psnr:.2f} dB  (identity surrogate)")
print(f"  PSNR(h(x), JPEG(x)) = {h_psnr:.2f} dB  (gain {h_psnr - id_psnr:+.2f} dB)")

t = time.time()
benet = pretrain_benet(RandomCropSource(train, 128, QF), cfg, steps=800, lr=5e-4, cosine=True)
err = benet_relative_error(benet, patches, bpp)
constant = np.abs(bpp.mean() - bpp) / bpp
print(f"\nBENet after 800 steps ({time.time() - t:.0f} s)")
print(f"  mean relative bpp error {err.mean():.2%} (best constant guess {constant.mean():.2%})")
