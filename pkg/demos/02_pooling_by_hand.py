"""
Position-sensitive pooling on a toy map
=======================================

With k=2 every RoI is cut into four bins and bin (i, j) reads only its own
channel. Light up the top-left channel and watch which RoIs notice.
"""
import numpy as np

from farpn.psroi import PoolConfig, psroi_pool, psroi_pool_grad
from farpn.tensor import FeatureMap

cfg = PoolConfig(k=2, classes=2, samples_per_bin=2)
data = np.zeros((8, 8, cfg.channels("score")))
face_top_left = 1 * 4 + 0  # class 1, bin (0, 0)
data[1:3, 1:3, face_top_left] = 1.0
fmap = FeatureMap(data, stride=16.0)

for roi in ([16, 16, 80, 80], [48, 48, 112, 112], [0, 0, 48, 48]):
    print(roi, "->", np.round(psroi_pool(fmap, roi, cfg), 4))

# Pooling is linear, so the gradient is just the sampling weights.
grad = psroi_pool_grad(fmap, [16, 16, 80, 80], cfg, "score", upstream=[0.0, 1.0])
print("gradient mass", grad.data.sum())
print("cells touched in channel", face_top_left)
print(np.round(grad.data[:, :, face_top_left], 3)[:6, :6])

# Central differences agree with the analytic gradient.
r, c = 1, 1
h = 1e-4
plus = data.copy()
plus[r, c, face_top_left] += h
minus = data.copy()
minus[r, c, face_top_left] -= h
fd = (psroi_pool(FeatureMap(plus, 16.0), [16, 16, 80, 80], cfg)[1] - psroi_pool(FeatureMap(minus, 16.0), [16, 16, 80, 80], cfg)[1]) / (2 * h)
print(f"cell ({r},{c}): analytic {grad.data[r, c, face_top_left]:.6f}  finite-diff {fd:.6f}")
