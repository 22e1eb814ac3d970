"""
From a target description to scored molecules
==============================================

A walk through the library API on a synthetic corpus, fully offline.
The mock provider stands in for both the embedding model and the chat model,
so every number printed here is reproducible from the seed.
"""

# %%
# A corpus of bioassays.  ``make_corpus`` produces PubChem-shaped documents
# spread over a few target families; ``ingest_assay`` validates each one.
import statistics

from assaygen import Hyperparameters
from assaygen.chem import parse_smiles
from assaygen.context import build_prompt, make_block, summarize_assay
from assaygen.evaluation import ScoreKind, ScoreRecord, ScoreSource, evaluate_target
from assaygen.generation import run_generation
from assaygen.index import EmbeddingIndex
from assaygen.llm import Gateway, MockProvider
from assaygen.retrieval import QuerySpec, extract_keywords, retrieve
from assaygen.store import AssayStore, ingest_assay
from assaygen.synthetic import TARGETS, make_corpus, mock_dock_score

SEED = 7
store = AssayStore(ingest_assay(d) for d in make_corpus(80, seed=SEED)).freeze()
print(f"{len(store)} assays, {sum(len(r.rows) for r in store)} activity rows")

# %%
# Embed every record once and keep the vectors in an exact cosine index.
gateway = Gateway(MockProvider(seed=SEED))
index = EmbeddingIndex.build(store, gateway.embed)
print(f"index: {len(index)} vectors of dimension {index.dim}")

# %%
# Query with keywords distilled from the target description, then vote on
# relevance with two independently seeded assessors.
target_id, name, description, reference = TARGETS[0]
keywords = extract_keywords(description, gateway)
query = QuerySpec(description, keywords)
hp = Hyperparameters()
assessors = [Gateway(MockProvider(seed=SEED + i, model_id=f"judge-{i}")) for i in range(2)]
result = retrieve(query, store, index, gateway, hp, assessors=assessors)
print(f"keywords: {keywords!r}")
print(f"kept {len(result.records)} of {len(result.hits)} hits; relevance {result.group.value} (x={result.x:.2f})")

# %%
# Summaries and sampled exemplars become context blocks; blocks become one prompt.
blocks = []
for record in result.records:
    summary = summarize_assay(record, description, gateway)
    block = make_block(record, summary, hp, seed=SEED, similarity=result.similarity[record.aid])
    if block is not None:
        blocks.append(block)
prompt = build_prompt(description, blocks)
print(f"prompt: {len(prompt.rendered_text)} characters from assays {list(prompt.source_blocks)}")

# %%
# Ten batches of ten, parsed, deduplicated and canonicalized.
run = run_generation(prompt, hp, gateway, seed=SEED)
print(f"{len(run.unique_generated)} unique strings, validity {run.validity:.3f}, "
      f"{len(run.unique_canonical)} distinct molecules")

# %%
# Score with the toy docking function and summarise against a reference ligand.
mols = [parse_smiles(s) for s in run.unique_canonical]
scores = [ScoreRecord(m.canonical_smiles, ScoreKind.VINA_DOCK, mock_dock_score(m.canonical_smiles),
                      ScoreSource.IMPORTED_FILE) for m in mols]
baseline = [mock_dock_score(r.smiles) for r in result.records[0].rows[:20]]
report = evaluate_target(target_id, mols, scores, reference_score=reference, baseline_scores=baseline,
                         validity=run.validity, relevance_group=result.group.value)
print(f"mean score {report.vina_avg:.2f}, median {report.vina_med:.2f}, "
      f"better than reference: {report.high_affinity:.0%}, diversity {report.diversity:.2f}")
print(f"baseline mean {statistics.fmean(baseline):.2f}, mean improvement {report.improvement_avg:+.2f}")
