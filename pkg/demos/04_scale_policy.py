"""Calibrating the QF-to-scale policy from rate-distortion crossovers.

Every plain-JPEG quality factor defines a target rate. At that rate we ask
which scale (0.5, 0.75 or full resolution) reaches the highest PSNR, and the
policy boundaries are the quality factors where the winner changes. Bicubic
resampling stands in for trained networks here, so the boundaries are a lower
bound: learned networks at reduced scale push the crossovers to higher QFs.

Run: python demos/04_scale_policy.py
"""

import tempfile

from acnf.data import load_image, write_tile_corpus
from acnf.eval import DEFAULT_POLICY, bicubic_method, calibrate_policy, interpolate_psnr, jpeg_method, rd_sweep

with tempfile.TemporaryDirectory() as tmp:
    _, held = write_tile_corpus(tmp, tile=256, max_per_source=10)
    images = [load_image(p) for p in sorted(held.iterdir())]
print(f"{len(images)} held-out 256x256 tiles")

qfs = list(range(1, 101, 3))
jpeg = rd_sweep(jpeg_method(), images, qfs)
curves = {0.5: rd_sweep(bicubic_method(0.5), images, qfs), 0.75: rd_sweep(bicubic_method(0.75), images, qfs)}

print("\n QF  target bpp   jpeg dB   s=0.75 dB   s=0.5 dB")
for p in sorted(jpeg.points, key=lambda p: p.qf)[::3]:
    row = []
    for s in (0.75, 0.5):
        c = curves[s]
        row.append(f"{interpolate_psnr(c, p.bpp):9.2f}" if c.bpp[0] <= p.bpp <= c.bpp[-1] else "        -")
    print(f"{p.qf:3d}  {p.bpp:10.3f}  {p.psnr_db:8.2f}  {row[0]}  {row[1]}")

policy = calibrate_policy(jpeg, curves)
print(f"\ncalibrated from bicubic stand-ins: {policy.ranges}")
print(f"shipped default policy:            {DEFAULT_POLICY.ranges}")
