"""Assay-conditioned molecule generation.

Retrieve bioassay records related to a target description, turn their
summaries and activity tables into an in-context prompt, generate molecules
with a language model, and score the results.

Subpackages and modules:

``assaygen.chem``        SMILES parsing, canonical form, fingerprints, similarity
``assaygen.store``       bioassay records and the file-backed store
``assaygen.index``       exact cosine top-k index
``assaygen.llm``         chat/embedding gateway, mock provider, JSON extraction
``assaygen.retrieval``   query, filter and relevance voting
``assaygen.context``     summaries, exemplar sampling, prompt assembly
``assaygen.generation``  batched generation, validity, counter-target optimization
``assaygen.evaluation``  docking adapter, metrics, aggregation
"""

from .config import Hyperparameters

__version__ = "0.1.0"
__all__ = ["Hyperparameters", "__version__"]
