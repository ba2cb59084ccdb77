"""Pinned JPEG codec, bpp accounting and the standard-compatible container.

Run: python demos/01_codec_and_container.py
"""

import io

import numpy as np
from PIL import Image

from acnf import codec, container
from acnf.data import bundled_photographs, load_image
from acnf.eval import compress_eval, jpeg_point

photos = bundled_photographs()
image = load_image(photos["camera"])[:256, :256]
print(f"codec backend: {codec.DEFAULT_BACKEND.identity()}")
print(f"test image: camera, {image.shape[1]}x{image.shape[0]} luma")

print("\nplain JPEG on the full-resolution image")
for qf in (10, 20, 40, 80):
    p = jpeg_point(image, qf)
    print(f"  QF {qf:3d}: {p.bpp:.3f} bpp, {p.psnr_db:.2f} dB")

print("\nbicubic half-scale through the container (no learned networks)")
point, blob = compress_eval(image, None, None, qf=10, scale=0.5)
print(f"  container: {len(blob)} bytes -> {point.bpp:.4f} bpp (= 8 * bytes / pixels)")
print(f"  reconstruction: {point.psnr_db:.2f} dB")

artifact, meta = container.unpack(blob)
print(f"\nmetadata segment: {meta}")
print(f"  overhead: {len(blob) - len(artifact.payload)} bytes")

stock = np.asarray(Image.open(io.BytesIO(blob)))
ours = codec.quantize_8bit(codec.decode(artifact))[..., 0]
print(f"  a stock decoder opens the file as a {stock.shape[1]}x{stock.shape[0]} JPEG")
print(f"  stock pixels identical to the unpacked stream: {np.array_equal(stock, ours)}")
