"""Pruning benchmark: brute-force vs noun-indexed similarity counts.

Runs both retrieval paths over a seeded clustered corpus, verifies they
agree on the candidate set, and reports the measured computation-reduction
factor next to the ~60x reference target.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import IO

from .embeddings import SimCounter, brute_force_topk
from .nounindex import candidate_images, ground_phrase_indexed
from .synth import SyntheticCorpus, make_clustered_corpus

#: Reference reduction target for the hierarchical prefilter.
REFERENCE_REDUCTION = 60.0


@dataclass
class BenchResult:
    n_images: int
    noun_vocab: int
    n_phrases: int
    brute_sims_per_phrase: int
    indexed_sims_total: int
    indexed_sims_avg: float
    indexed_sims_max: int
    candidates_avg: float
    candidates_max: int
    reduction_factor: float
    agreement: bool


def run_bench(
    corpus: SyntheticCorpus | None = None,
    seed: int = 0,
    n_images: int = 10_000,
    n_phrases: int = 100,
    dim: int = 64,
    prefilter_m: int = 20,
    sim_threshold: float = 0.15,
    retain_k: int = 15,
) -> BenchResult:
    corpus = corpus if corpus is not None else make_clustered_corpus(
        seed, n_images=n_images, dim=dim, n_phrases=n_phrases
    )
    vocab = len(corpus.index.noun_embeddings)
    brute_per_phrase = len(corpus.image_store)

    indexed_total = 0
    indexed_max = 0
    cand_total = 0
    cand_max = 0
    agreement = True
    for pid in corpus.phrase_ids:
        emb = corpus.phrase_store.get(pid)
        brute_counter = SimCounter()
        brute = brute_force_topk(corpus.image_store, emb, retain_k, brute_counter)
        assert brute_counter.count == brute_per_phrase
        counter = SimCounter()
        result = ground_phrase_indexed(
            emb, corpus.index, corpus.image_store,
            m=prefilter_m, sim_threshold=sim_threshold, k=retain_k,
            counter=counter, phrase_id=pid,
        )
        indexed_total += result.sims_used
        indexed_max = max(indexed_max, result.sims_used)
        n_cands = result.sims_used - vocab
        cand_total += n_cands
        cand_max = max(cand_max, n_cands)
        # Conditional oracle check: the pruned ranking must equal the
        # brute-force ranking restricted to the candidate set.
        cands = sorted(candidate_images(corpus.index, emb, prefilter_m))
        if cands:
            sub = corpus.image_store.subset(cands)
            oracle = brute_force_topk(sub, emb, len(sub))
            expected = [(i, s) for i, s in oracle if s >= sim_threshold][:retain_k]
            if expected != result.ranked:
                agreement = False

    n = len(corpus.phrase_ids)
    indexed_avg = indexed_total / n if n else 0.0
    reduction = (brute_per_phrase * n / indexed_total) if indexed_total else float("inf")
    return BenchResult(
        n_images=brute_per_phrase,
        noun_vocab=vocab,
        n_phrases=n,
        brute_sims_per_phrase=brute_per_phrase,
        indexed_sims_total=indexed_total,
        indexed_sims_avg=indexed_avg,
        indexed_sims_max=indexed_max,
        candidates_avg=cand_total / n if n else 0.0,
        candidates_max=cand_max,
        reduction_factor=reduction,
        agreement=agreement,
    )


def print_bench(result: BenchResult, sink: IO[str]) -> None:
    sink.write(f"images\t{result.n_images}\n")
    sink.write(f"noun_vocabulary\t{result.noun_vocab}\n")
    sink.write(f"phrases\t{result.n_phrases}\n")
    sink.write(f"brute_force_sims_per_phrase\t{result.brute_sims_per_phrase}\n")
    sink.write(f"indexed_sims_avg\t{result.indexed_sims_avg:.1f}\n")
    sink.write(f"indexed_sims_max\t{result.indexed_sims_max}\n")
    sink.write(f"candidates_avg\t{result.candidates_avg:.1f}\n")
    sink.write(f"candidates_max\t{result.candidates_max}\n")
    sink.write(f"reduction_factor\t{result.reduction_factor:.1f}\n")
    sink.write(f"reference_reduction\t~{REFERENCE_REDUCTION:.0f}x\n")
