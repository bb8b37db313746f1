"""How the threshold trades noise removal against lost signal. Low tau links
everything (no filtering); high tau shatters histories into singletons.

The default corpus has a wide gap between intra- and inter-cluster cosines,
so every tau in the grid filters identically. A larger spread blurs the
clusters and lets the threshold matter."""

from consgraph import NoisyCorpusConfig, RunConfig, gen_noisy_corpus, leave_one_out, partition
from consgraph.pipeline import SWEEP_TAUS, raw_pipeline_metrics, sweep
from consgraph.evaluation import retained_similarity
from consgraph.recommender import prepare_context

corpus = gen_noisy_corpus(NoisyCorpusConfig(seed=0, history_len=10, spread=0.8))
splits = partition(leave_one_out(corpus.dataset))
cfg = RunConfig(lr=0.01, epochs=3, seed=0)

print("raw   ", {k: round(v, 4) for k, v in raw_pipeline_metrics(cfg, splits).items()})
for tau, metrics in sweep(cfg, splits, taus=SWEEP_TAUS, filter_matrix=corpus.embeddings):
    kept = [len(prepare_context(ex.context, "filtered", tau, corpus.embeddings)) / len(ex.context)
            for ex in splits["test"]]
    intra = [retained_similarity(prepare_context(ex.context, "filtered", tau, corpus.embeddings), ex.target,
                                 corpus.embeddings)[0] for ex in splits["test"]]
    print(f"tau {tau:.1f}", {k: round(v, 4) for k, v in metrics.items()},
          f"kept {sum(kept) / len(kept):.2f} intra {sum(intra) / len(intra):.3f}")
