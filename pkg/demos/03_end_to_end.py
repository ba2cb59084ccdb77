"""The whole pipeline at desk scale: pretraining, joint training and an RD comparison.

1. Pretrain the surrogates (ACN, BENet) and initialise CRNet/PPNet.
2. Train CRNet and PPNet jointly through the frozen surrogates, refreshing the
   surrogates on the real codec after every minibatch.
3. Compress the held-out tiles at QF 10, scale 0.5 and compare against plain
   JPEG and bicubic-down + JPEG + bicubic-up at the nearest rate.

Takes about 7 minutes on one CPU core.

Run: python demos/03_end_to_end.py
"""

import tempfile
import time

import numpy as np

from acnf.data import RandomCropSource, load_image, write_tile_corpus
from acnf.eval import bicubic_point, compress_eval, jpeg_point
from acnf.training import TrainConfig, pretrain_acn, pretrain_benet, pretrain_crnet, pretrain_ppnet, train_end_to_end

QF, SCALE = 10, 0.5
NETS = {"CRNet": {"depth": 2, "width": 16}, "PPNet": {"depth": 4, "width": 32}, "BENet": {"width": 128}}

with tempfile.TemporaryDirectory() as tmp:
    train_dir, held_dir = write_tile_corpus(tmp, tile=256, max_per_source=10)
    train = [load_image(p) for p in sorted(train_dir.iterdir())]
    held = [load_image(p) for p in sorted(held_dir.iterdir())]
print(f"{len(train)} training and {len(held)} held-out 256x256 tiles")

cfg = TrainConfig(qf=QF, scale=SCALE, patch_size=64, batch_size=16, networks=NETS, lr_finetune=1e-4, lr_aux=5e-5)
crops = RandomCropSource(train, 64, QF)


def evaluate(weights):
    f, g = weights["CRNet"].to_module(), weights["PPNet"].to_module()
    pts = [compress_eval(im, f, g, QF, SCALE)[0] for im in held]
    return float(np.mean([p.bpp for p in pts])), float(np.mean([p.psnr_db for p in pts]))


t = time.time()
init = {
    "ACN": pretrain_acn(RandomCropSource(train, 32, QF), cfg, steps=3000, lr=1e-3, cosine=True),
    "BENet": pretrain_benet(RandomCropSource(train, 32, QF), cfg, steps=1000, lr=1e-3, cosine=True),
    "CRNet": pretrain_crnet(crops, cfg, steps=300, lr=1e-3),
    "PPNet": pretrain_ppnet(
        RandomCropSource(train, 64, QF, scale=SCALE, transform="bicubic_down"), cfg, steps=1500, lr=1e-3, cosine=True
    ),
}
print(f"pretraining done in {time.time() - t:.0f} s")
bpp0, db0 = evaluate(init)
print(f"  pretrained only: {bpp0:.4f} bpp, {db0:.2f} dB")

t = time.time()


def progress(row, modules):
    if row["step"] % 50 == 0:
        print(f"  step {row['step']:4d}: loss {row['total']:.5f}, real bpp of compacts {row['real_bpp']:.3f}, ACN imitation {row['acn_psnr']:.2f} dB")


result = train_end_to_end(crops, cfg, init, steps=300, callback=progress)
bpp1, db1 = evaluate(result.weights)
print(f"joint training done in {time.time() - t:.0f} s")
print(f"  trained system: {bpp1:.4f} bpp, {db1:.2f} dB")


def nearest_above(fn):
    for q in range(1, 101):
        pts = [fn(im, q) for im in held]
        bpp = float(np.mean([p.bpp for p in pts]))
        if bpp >= bpp1:
            return q, bpp, float(np.mean([p.psnr_db for p in pts]))
    return None


print("\nbaselines at the first quality factor whose rate reaches ours:")
for name, fn in (("JPEG", jpeg_point), ("bicubic", lambda im, q: bicubic_point(im, q, SCALE))):
    hit = nearest_above(fn)
    if hit is None:
        print(f"  {name:8s}: cannot reach {bpp1:.4f} bpp")
    else:
        q, bpp, db = hit
        print(f"  {name:8s}: QF {q:3d}, {bpp:.4f} bpp, {db:.2f} dB ({db1 - db:+.2f} dB for the learned system)")
