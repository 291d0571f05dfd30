"""
Subspace face recognition on a synthetic corpus
===============================================

Each "subject" is a random 9-dimensional subspace of 1024-pixel images.
Pass a directory of PGM images (one subdirectory per subject) to use real data.
"""

import sys

from grasscap.empirical import load_image_dir, run_face_experiment, synthetic_corpus

if len(sys.argv) > 1:
    images = load_image_dir(sys.argv[1])
else:
    images = synthetic_corpus(n_classes=10, n=1024, k=9, sigma2=1e-3, per_class=60, seed=0)
print(images.vectors.shape[0], "images,", images.class_count, "classes")

m_grid = (4, 6, 8, 9, 10, 12, 16, 24, 40)
l_grid = tuple(range(1, images.class_count + 1))
res = run_face_experiment(images, m_grid, l_grid, k_model=9, seed=0)

p = res.p_hat()
print("error by M (rows) and L (columns)")
for m, row in zip(m_grid, p):
    print(f"M={m:3d} " + " ".join(f"{v:4.2f}" for v in row))

print("\n  M  sigma2_hat  max L (err<0.2)  predicted")
for m, s2, best, pred in zip(m_grid, res.sigma2_hat, res.max_l_empirical, res.predicted):
    print(f"{m:3d}  {s2:10.2e}  {best:14d}  {pred:9d}")
