"""The random-codebook attack on regression/transfer pipelines.

Builds regression targets that carry no meaning whatsoever (random class
codewords plus clipped noise, averaged across simulated subjects), regresses
classifier-output-like features onto them, and shows a linear SVM on the
regressed encodings of a disjoint-class dataset performing on par with one
on the raw features.  The only property doing any work is that same-class
vectors are closer than different-class vectors.

Run: python demos/03_random_codebook.py   (~30 s)
"""
import numpy as np

import blockaudit as ba

SEED = 0

codebook = ba.generate_codebook(
    classes=40, instances_per_class=50, subjects=6, dim=128, seed=SEED
)
n_inst = codebook.subjects * codebook.classes * codebook.instances_per_class
print(f"codebook: {codebook.classes} base codewords in [0,2]^{codebook.dim}, "
      f"{n_inst} noisy clipped instances (sigma^2 = "
      f"{codebook.noise_variance:g})")

targets = ba.average_over_subjects(codebook)
print(f"averaged across subjects -> {targets.shape[0]} regression targets\n")

source = ba.make_clustered_features(40, 50, dim=1000, seed=SEED + 1)
train = source.rows("train")
test = source.rows("test")
regressor = ba.train_ridge_regressor(
    source.vectors[train], targets[train], l2=1e-2
)
mse = float(np.mean((regressor.predict(source.vectors[test]) - targets[test]) ** 2))
print(f"ridge regression features->codewords, held-out MSE: {mse:.3f}")

intra, inter = ba.intra_inter_distances(
    regressor.predict(source.vectors[test]), source.labels[test]
)
print(f"regressed encodings keep class structure: intra {intra:.2f} < "
      f"inter {inter:.2f}\n")

target = ba.make_clustered_features(30, 40, dim=1000, seed=SEED + 2)
raw, regressed = ba.transfer_svm_compare(
    regressor, target,
    train_config=ba.TrainConfig(seed=SEED, epochs=50, learning_rate=1e-4),
)
print("transfer to 30 disjoint classes:")
print(f"  linear SVM on raw 1000-dim features : {raw:.3f}")
print(f"  linear SVM on regressed 128-dim codes: {regressed:.3f}")
print("\nThe codewords were random. Any target space that keeps same-class "
      "points together works; nothing here needed a learned encoding.")
