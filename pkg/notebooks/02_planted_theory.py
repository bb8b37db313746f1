"""When preferred items are pairwise similar, no preferred/noise pair crosses
the threshold, and every noise cluster is smaller than the preferred set, the
largest component is exactly the preferred set. Here we draw many such
instances and count how often the filter gets it right, then break one
condition on purpose to watch it fail."""

from dataclasses import replace

import numpy as np

from consgraph import EmbeddingMatrix, denoise, gen_planted, verify_assumptions

hits = 0
for seed in range(500):
    inst = gen_planted(m=5, n_noise=10, tau=0.7, dim=16, seed=seed)
    hits += denoise(inst.history, inst.embeddings, inst.tau).retained_items == inst.preferred
print(f"exact recovery: {hits}/500")

rep = verify_assumptions(gen_planted(5, 10, seed=0))
print(f"largest noise component in seed 0: {rep.max_noise_component} (preferred set has 5)")

# collapse all noise onto one point: a noise clique bigger than the preferred set
inst = gen_planted(3, 6, seed=1)
vec = inst.embeddings.vectors.copy()
noise_rows = [inst.embeddings.index[i] for i in inst.noise]
vec[noise_rows] = vec[noise_rows[0]]
broken = replace(inst, embeddings=EmbeddingMatrix(inst.embeddings.ids, vec))
print("violations:", [c for c, _ in verify_assumptions(broken).violations])
kept = denoise(broken.history, broken.embeddings, broken.tau).retained_items
print("filter keeps the noise clique:", kept == broken.noise)
