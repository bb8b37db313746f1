"""Two worked filtering cases: four items, six pairwise similarities, one
threshold each. Embeddings are rebuilt from the similarity matrix with a
Cholesky factor, so the graph sees exactly those numbers."""

import numpy as np

from consgraph import EmbeddingMatrix, InteractionHistory, denoise

CASES = {
    "beauty": (0.3, [0.4441, 0.2527, 0.4608, 0.2125, 0.4477, 0.2049]),
    "yelp": (0.5, [0.5926, 0.4699, 0.5121, 0.4865, 0.5150, 0.3932]),
}
PAIRS = [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)]

history = InteractionHistory("demo", tuple((f"n{k}", k) for k in range(1, 5)))

for name, (tau, sims) in CASES.items():
    s = np.eye(4)
    for (i, j), v in zip(PAIRS, sims):
        s[i, j] = s[j, i] = v
    emb = EmbeddingMatrix(["n1", "n2", "n3", "n4"], np.linalg.cholesky(s))
    out, g, cs = denoise(history, emb, tau, details=True)
    print(f"{name}: tau={tau}")
    for a, b in PAIRS:
        mark = "edge" if g.edges[a, b] else "    "
        print(f"  {mark} n{a + 1}-n{b + 1}  {s[a, b]:.4f}")
    print(f"  components {cs.sizes} -> kept {out.item_ids}\n")
